"""Actor-critic PPO with per-user sequential actions (S-PPO).

One shared actor maps a user's SINR vector over all APs to a distribution
over APs; the per-user choices of a slot are combined into one association,
and every user's transition in that slot shares the slot reward.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import env as envmod
from .channel import ChannelSnapshot
from .config import SimConfig, TrainerConfig
from .geometry import UserState
from .nn import Adam, Mlp

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class PolicyParams:
    actor: Mlp
    critic: Mlp
    actor_opt: Adam
    critic_opt: Adam
    state_scale: float = 5.0
    value_scale: float = 1.0  # critic output is multiplied by this to give a return estimate

    @classmethod
    def init(cls, n_aps: int, tcfg: TrainerConfig, rng: np.random.Generator) -> "PolicyParams":
        nh = tcfg.hidden_units
        actor = Mlp([n_aps, nh, nh, n_aps], rng, out_scale=0.01)
        critic = Mlp([n_aps, nh, nh, 1], rng)
        return cls(actor, critic, Adam(actor.params, tcfg.learning_rate),
                   Adam(critic.params, tcfg.learning_rate), tcfg.state_scale, value_scale(tcfg))

    def values(self, states: np.ndarray) -> np.ndarray:
        return self.critic(states)[:, 0] * self.value_scale


def value_scale(tcfg: TrainerConfig) -> float:
    """Fixed critic output scale.

    With bootstrapped truncation the returns approach r / (1 - discount), far
    outside what a small-learning-rate critic can reach from a zero-centred
    init, so the critic regresses (1 - discount) * R instead.
    """
    return 1.0 / (1.0 - tcfg.discount) if tcfg.bootstrap_truncation else 1.0


# -- forward pieces -------------------------------------------------------------

def normalize_states(sinr: np.ndarray, scale: float) -> np.ndarray:
    """(K, n_aps) state rows from an AP-major SINR matrix."""
    s = np.asarray(sinr, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite SINR in state")
    return np.log10(1.0 + s.T) / scale


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def policy_forward(actor: Mlp, state: np.ndarray) -> np.ndarray:
    """Action probabilities for one state vector or a (batch, n_aps) array."""
    state = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(state)):
        raise ValueError("non-finite state")
    single = state.ndim == 1
    p = softmax(actor(np.atleast_2d(state)))
    return p[0] if single else p


def select_actions_sequential(
    actor: Mlp,
    critic: Mlp,
    snapshot: ChannelSnapshot,
    rng: np.random.Generator | None,
    state_scale: float = 5.0,
):
    """Pick an AP for users 1..K in turn and compose the combined association.

    ``rng=None`` selects the argmax action (evaluation mode). Returns
    (assign, states, log_probs, values).
    """
    return sample_actions(evaluate_policy(actor, critic, snapshot, state_scale), rng)


def evaluate_policy(actor: Mlp, critic: Mlp, snapshot: ChannelSnapshot, state_scale: float = 5.0):
    """(states, per-user action log-probabilities, critic values) for one snapshot."""
    states = normalize_states(snapshot.sinr, state_scale)
    if states.shape[0] == 0:
        return states, np.zeros((0, snapshot.n_aps)), np.zeros(0)
    return states, log_softmax(actor(states)), critic(states)[:, 0]


def sample_actions(evaluated, rng: np.random.Generator | None):
    states, logp_all, values = evaluated
    k = states.shape[0]
    if k == 0:
        return (), states, np.zeros(0), np.zeros(0)
    if rng is None:
        actions = np.argmax(logp_all, axis=1)
    else:
        u = rng.random(k)
        cdf = np.cumsum(np.exp(logp_all), axis=1)
        actions = np.minimum((cdf < u[:, None]).sum(axis=1), logp_all.shape[1] - 1)
    logp = logp_all[np.arange(k), actions]
    return tuple(int(a) for a in actions), states, logp, values


def greedy_association(policy: PolicyParams, snapshot: ChannelSnapshot) -> tuple[int, ...]:
    return select_actions_sequential(policy.actor, policy.critic, snapshot, None, policy.state_scale)[0]


# -- returns, advantages, losses ----------------------------------------------------

def discounted_returns(rewards, discount: float, dones=None) -> np.ndarray:
    """Backward discounted sums; a ``done`` flag ends the trajectory after that entry."""
    if not 0 < discount < 1:
        raise ValueError("discount must lie in (0, 1)")
    rewards = np.asarray(rewards, dtype=float)
    out = np.zeros_like(rewards)
    running = 0.0
    for t in range(rewards.size - 1, -1, -1):
        if dones is not None and dones[t]:
            running = 0.0
        running = rewards[t] + discount * running
        out[t] = running
    return out


def advantage(returns, values, normalize: bool = True) -> np.ndarray:
    adv = np.asarray(returns, dtype=float) - np.asarray(values, dtype=float)
    if normalize and adv.size > 1:
        std = adv.std()
        adv = (adv - adv.mean()) / (std if std > 1e-12 else 1.0)
    return adv


def clip_ratio(tau, eps: float):
    return np.minimum(np.maximum(tau, 1 - eps), 1 + eps)


@dataclass
class Transition:
    user_state: np.ndarray
    action: int
    log_prob_old: float
    value_old: float
    slot_reward: float
    slot_index: int
    user_index: int


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    log_prob_old: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    _groups: tuple | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.actions)

    def unique_states(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct state rows and the row -> distinct index map, computed once per batch."""
        if self._groups is None or self._groups[0] is not self.states:
            uniq, inverse = np.unique(self.states, axis=0, return_inverse=True)
            self._groups = (self.states, uniq, inverse.reshape(-1))
        return self._groups[1], self._groups[2]


def ppo_losses(batch: Batch, actor: Mlp, critic: Mlp, clip_epsilon: float,
               entropy_bonus_weight: float = 0.0, with_grads: bool = True):
    """Clipped-surrogate actor loss and MSE critic loss.

    Returns (actor_loss, critic_loss, stats, actor_grads, critic_grads); the
    gradient lists are None when ``with_grads`` is false.
    """
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    idx = np.arange(n)
    # static scenarios repeat the same K states every slot: run the nets on unique rows only
    uniq, inverse = batch.unique_states()
    u_logits, a_cache = actor.forward(uniq)
    logits = u_logits[inverse]
    logp_all = log_softmax(logits)
    p = np.exp(logp_all)
    logp = logp_all[idx, batch.actions]
    ratio = np.exp(logp - batch.log_prob_old)
    adv = batch.advantages
    surr1 = ratio * adv
    surr2 = clip_ratio(ratio, clip_epsilon) * adv
    unclipped = surr1 <= surr2
    surrogate = np.where(unclipped, surr1, surr2)
    entropy = -(p * logp_all).sum(axis=1)
    actor_loss = -surrogate.mean() - entropy_bonus_weight * entropy.mean()

    u_values, c_cache = critic.forward(uniq)
    err = u_values[inverse, 0] - batch.returns
    critic_loss = float(np.mean(err ** 2))

    stats = {
        "surrogate": float(surrogate.mean()),
        "entropy": float(entropy.mean()),
        "clip_frac": float(np.mean(np.abs(ratio - 1) > clip_epsilon)),
        "approx_kl": float(np.mean(batch.log_prob_old - logp)),
    }
    if not with_grads:
        return float(actor_loss), critic_loss, stats, None, None

    onehot = np.zeros_like(p)
    onehot[idx, batch.actions] = 1.0
    coef = np.where(unclipped, adv * ratio, 0.0)
    d_logits = -(coef[:, None] * (onehot - p)) / n
    d_entropy = -p * (logp_all + entropy[:, None])
    d_logits -= entropy_bonus_weight * d_entropy / n
    actor_grads = actor.backward(a_cache, _gather_back(d_logits, inverse, len(uniq)))
    critic_grads = critic.backward(c_cache, _gather_back((2.0 * err / n)[:, None], inverse, len(uniq)))
    return float(actor_loss), critic_loss, stats, actor_grads, critic_grads


def _gather_back(d_rows: np.ndarray, inverse: np.ndarray, n_unique: int) -> np.ndarray:
    out = np.zeros((n_unique, d_rows.shape[1]))
    np.add.at(out, inverse, d_rows)
    return out


# -- memory & update -----------------------------------------------------------------

@dataclass
class Memory:
    """Per-slot storage; each slot holds the K per-user transitions."""

    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    slots: list = field(default_factory=list)
    bootstrap: list = field(default_factory=list)

    def add(self, states, actions, log_probs, values, reward, done, slot, bootstrap=None) -> None:
        self.states.append(states)
        self.actions.append(np.asarray(actions, dtype=int))
        self.log_probs.append(np.asarray(log_probs, dtype=float))
        self.values.append(np.asarray(values, dtype=float))
        self.rewards.append(float(reward))
        self.dones.append(bool(done))
        self.slots.append(int(slot))
        self.bootstrap.append(None if bootstrap is None else np.asarray(bootstrap, dtype=float))

    @property
    def n_slots(self) -> int:
        return len(self.rewards)

    def __len__(self) -> int:
        return sum(len(a) for a in self.actions)

    def transitions(self) -> list[Transition]:
        out = []
        for s, a, lp, v, r, slot in zip(self.states, self.actions, self.log_probs,
                                         self.values, self.rewards, self.slots):
            for k in range(len(a)):
                out.append(Transition(s[k], int(a[k]), float(lp[k]), float(v[k]), r, slot, k))
        return out

    def clear(self) -> None:
        for lst in (self.states, self.actions, self.log_probs, self.values,
                    self.rewards, self.dones, self.slots, self.bootstrap):
            lst.clear()

    def user_returns(self, discount: float) -> np.ndarray:
        """Per-user discounted returns, (n_slots, K).

        A slot carrying bootstrap values closes a truncated stretch: the tail
        after it is replaced by the critic's estimate for each user.
        """
        n = self.n_slots
        k = len(self.actions[0]) if n else 0
        out = np.zeros((n, k))
        running = np.zeros(k)
        for t in range(n - 1, -1, -1):
            if self.bootstrap[t] is not None:
                running = self.bootstrap[t]
            elif self.dones[t]:
                running = np.zeros(k)
            running = self.rewards[t] + discount * running
            out[t] = running
        return out

    def user_advantages(self, discount: float, lam: float) -> np.ndarray:
        """Per-user GAE(lambda) advantages, (n_slots, K).

        Successor values follow the same rules as ``user_returns``: bootstrap
        values where given, zero after a terminal slot or the end of memory.
        At ``lam = 1`` this telescopes to return minus value.
        """
        n = self.n_slots
        k = len(self.actions[0]) if n else 0
        out = np.zeros((n, k))
        running = np.zeros(k)
        for t in range(n - 1, -1, -1):
            if self.bootstrap[t] is not None:
                nxt, running = self.bootstrap[t], np.zeros(k)
            elif self.dones[t] or t == n - 1:
                nxt, running = np.zeros(k), np.zeros(k)
            else:
                nxt = self.values[t + 1]
            delta = self.rewards[t] + discount * nxt - self.values[t]
            running = delta + discount * lam * running
            out[t] = running
        return out

    def to_batch(self, discount: float, value_scale: float = 1.0, lam: float = 1.0) -> Batch:
        """Flatten to per-user rows; stored values must already be on the return scale.

        ``Batch.returns`` holds the critic's regression target, i.e. the
        return divided by ``value_scale``. With ``lam < 1`` advantages come
        from GAE and the target is advantage plus value.
        """
        values = np.concatenate(self.values)
        if lam == 1.0:
            returns = self.user_returns(discount).reshape(-1)
            adv = advantage(returns, values)
        else:
            raw = self.user_advantages(discount, lam).reshape(-1)
            returns = raw + values
            adv = advantage(raw, np.zeros_like(raw))
        returns = returns / value_scale
        return Batch(
            states=np.concatenate(self.states),
            actions=np.concatenate(self.actions),
            log_prob_old=np.concatenate(self.log_probs),
            advantages=adv,
            returns=returns,
        )


def update(policy: PolicyParams, memory: Memory, tcfg: TrainerConfig) -> dict:
    """Full-batch PPO epochs on both networks, then clear memory."""
    batch = memory.to_batch(tcfg.discount, policy.value_scale, tcfg.gae_lambda)
    stats = {}
    for _ in range(tcfg.epochs_per_update):
        a_loss, c_loss, stats, a_grads, c_grads = ppo_losses(
            batch, policy.actor, policy.critic, tcfg.clip_epsilon, tcfg.entropy_bonus_weight)
        if not (np.isfinite(a_loss) and np.isfinite(c_loss)):
            raise TrainingDiverged(_diagnostic("non-finite loss", batch, a_loss, c_loss))
        policy.actor_opt.step(policy.actor.params, a_grads)
        policy.critic_opt.step(policy.critic.params, [tcfg.value_loss_weight * g for g in c_grads])
        stats.update(actor_loss=a_loss, critic_loss=c_loss)
    if not (policy.actor.all_finite() and policy.critic.all_finite()):
        raise TrainingDiverged(_diagnostic("non-finite parameters", batch, stats.get("actor_loss"),
                                           stats.get("critic_loss")))
    memory.clear()
    return stats


def _diagnostic(what: str, batch: Batch, a_loss, c_loss) -> str:
    return (f"{what}: actor_loss={a_loss} critic_loss={c_loss} n={len(batch)} "
            f"returns[min={np.min(batch.returns):.4g} max={np.max(batch.returns):.4g}] "
            f"adv[min={np.min(batch.advantages):.4g} max={np.max(batch.advantages):.4g}] "
            f"states_finite={bool(np.all(np.isfinite(batch.states)))}")


# -- training loop -------------------------------------------------------------------

@dataclass
class TrainResult:
    policy: PolicyParams
    episode_rewards: list[float]
    updates: int
    users: tuple[UserState, ...]


def train(cfg: SimConfig, rng: np.random.Generator, users=None, scenario=None,
          progress=None) -> TrainResult:
    """Collect sequential per-user transitions; update every ``update_interval`` slots.

    For static users the instance ``users`` (sampled if omitted) is kept for
    the whole run; mobile runs redraw start positions per episode when
    ``trainer.redraw_positions`` is set.
    """
    tcfg = cfg.trainer
    state = envmod.reset(cfg, rng, users, scenario)
    policy = PolicyParams.init(state.scenario.n_aps, tcfg, rng)
    memory = Memory()
    start_users = state.users
    curve, updates, timestep = [], 0, 0
    mobile = cfg.mobility == "rwp"
    # a frozen episode replays one snapshot, so forward passes and rewards only change at updates
    frozen = envmod.is_frozen(cfg)
    evaluated, rewards = None, {}
    for episode in range(tcfg.max_episodes):
        if episode and mobile and tcfg.redraw_positions:
            state = envmod.reset(cfg, rng, scenario=state.scenario)
        total = 0.0
        for t in range(tcfg.episode_length):
            if evaluated is None or not frozen:
                evaluated = evaluate_policy(policy.actor, policy.critic, state.snapshot, policy.state_scale)
            assign, states, logp, values = sample_actions(evaluated, rng)
            if frozen:
                if assign not in rewards:
                    rewards[assign] = envmod.slot_metrics(state, assign, cfg)["reward"]
                r = rewards[assign]
                next_state = envmod.advance(state, cfg, rng)
            else:
                next_state, r, _ = envmod.step(state, assign, cfg, rng)
            done = t == tcfg.episode_length - 1
            timestep += 1
            boot = None
            if tcfg.bootstrap_truncation and (done or timestep >= tcfg.update_interval):
                # episodes are time limits, not terminal states: close the tail with the critic
                boot = policy.values(normalize_states(next_state.snapshot.sinr, policy.state_scale))
            memory.add(states, assign, logp, values * policy.value_scale, r, done, state.slot, boot)
            total += r
            state = next_state
            if timestep >= tcfg.update_interval:
                update(policy, memory, tcfg)
                evaluated = None
                updates += 1
                timestep = 0
        curve.append(total / tcfg.episode_length)
        if progress is not None:
            progress(episode, curve[-1])
    return TrainResult(policy, curve, updates, start_users)


# -- checkpoints -------------------------------------------------------------------------

def save_checkpoint(path, policy: PolicyParams, cfg: SimConfig) -> None:
    data = {
        "version": CHECKPOINT_VERSION,
        "config_hash": cfg.config_hash(),
        "state_scale": policy.state_scale,
        "value_scale": policy.value_scale,
        "actor": policy.actor.to_dict(),
        "critic": policy.critic.to_dict(),
    }
    Path(path).write_text(json.dumps(data))


def load_checkpoint(path, tcfg: TrainerConfig | None = None) -> tuple[PolicyParams, str]:
    """Return the restored policy and the config hash it was trained under."""
    data = json.loads(Path(path).read_text())
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('version')!r}")
    actor, critic = Mlp.from_dict(data["actor"]), Mlp.from_dict(data["critic"])
    lr = (tcfg or TrainerConfig()).learning_rate
    policy = PolicyParams(actor, critic, Adam(actor.params, lr), Adam(critic.params, lr),
                          float(data["state_scale"]), float(data.get("value_scale", 1.0)))
    return policy, data["config_hash"]
