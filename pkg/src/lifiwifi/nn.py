"""Small tanh MLPs with hand-written backprop, plus Adam."""
from __future__ import annotations

import numpy as np


class Mlp:
    """Dense network: tanh on hidden layers, linear output."""

    def __init__(self, layer_dims, rng: np.random.Generator | None = None, out_scale: float = 1.0):
        self.layer_dims = [int(d) for d in layer_dims]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        if rng is None:
            rng = np.random.default_rng(0)
        n_layers = len(self.layer_dims) - 1
        for j, (fan_in, fan_out) in enumerate(zip(self.layer_dims[:-1], self.layer_dims[1:])):
            w = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))
            if j == n_layers - 1:
                w *= out_scale
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Mlp":
        new = Mlp.__new__(Mlp)
        new.layer_dims = list(self.layer_dims)
        new.weights = [w.copy() for w in self.weights]
        new.biases = [b.copy() for b in self.biases]
        return new

    def forward(self, x: np.ndarray):
        """Return (output, cache); ``x`` is (batch, in)."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for j, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if j == last else np.tanh(z)
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts, dout: np.ndarray) -> list[np.ndarray]:
        """Gradients in ``params`` order given dLoss/dOutput."""
        grads: list[np.ndarray] = []
        delta = dout
        for j in range(len(self.weights) - 1, -1, -1):
            grads.append(delta.sum(axis=0))
            grads.append(acts[j].T @ delta)
            if j:
                delta = (delta @ self.weights[j].T) * (1.0 - acts[j] ** 2)
        grads.reverse()  # now [W0, b0, W1, b1, ...]
        return grads

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params)

    def to_dict(self) -> dict:
        return {
            "layer_dims": self.layer_dims,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        new = cls.__new__(cls)
        new.layer_dims = [int(v) for v in d["layer_dims"]]
        new.weights = [np.array(w, dtype=float).reshape(i, o)
                       for w, i, o in zip(d["weights"], new.layer_dims[:-1], new.layer_dims[1:])]
        new.biases = [np.array(b, dtype=float) for b in d["biases"]]
        return new


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """In-place update of ``params``."""
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
