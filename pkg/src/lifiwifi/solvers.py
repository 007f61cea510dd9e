"""Reference association solvers: exhaustive search, signal strength and greedy."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSnapshot
from .config import CapacityLimits
from .env import ap_caps, ap_loads, sum_rate

DEFAULT_BUDGET = 1e8


class InstanceTooLarge(RuntimeError):
    pass


class NoFeasibleAssociation(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverResult:
    association: tuple[int, ...]
    objective: float
    feasible: bool
    evaluations: int
    elapsed: float
    name: str = ""


def _check_budget(n_aps: int, k: int, budget: float) -> None:
    size = float(n_aps) ** k
    if size > budget:
        raise InstanceTooLarge(f"instance too large: (L+W)^K = {n_aps}^{k} = {size:.3g} exceeds budget {budget:.3g}")


def exhaustive_search(
    snapshot: ChannelSnapshot,
    caps: CapacityLimits,
    n_lifi: int,
    *,
    budget: float = DEFAULT_BUDGET,
    prune: bool = True,
) -> SolverResult:
    """Globally optimal capacity-feasible association for the sum rate.

    Ties go to the lexicographically smallest assignment vector. With
    ``prune=True`` a depth-first search skips overloaded branches and branches
    whose optimistic bound cannot reach the incumbent; ``prune=False``
    enumerates every one of the (L+W)^K assignments.
    """
    n_aps, k = snapshot.n_aps, snapshot.n_users
    _check_budget(n_aps, k, budget)
    if not np.all(np.isfinite(snapshot.rate)):
        raise ValueError("rate matrix contains non-finite entries")
    limit = ap_caps(n_lifi, n_aps, caps)
    t0 = time.perf_counter()
    if k == 0:
        return SolverResult((), 0.0, True, 1, time.perf_counter() - t0, "es")
    if prune:
        assign, best, evals = _dfs(snapshot.rate, limit)
    else:
        assign, best, evals = _enumerate(snapshot.rate, limit)
    if assign is None:
        raise NoFeasibleAssociation(f"no association of {k} users satisfies the AP limits")
    return SolverResult(assign, best, True, evals, time.perf_counter() - t0, "es")


def _dfs(rate: np.ndarray, limit: np.ndarray):
    n_aps, k = rate.shape
    r = rate.T.tolist()  # r[user][ap]
    best_rate = rate.max(axis=0)
    suffix = [0.0] * (k + 1)
    for u in range(k - 1, -1, -1):
        suffix[u] = suffix[u + 1] + float(best_rate[u])
    left = limit.astype(int).tolist()
    cur = [0] * k
    state = {"best": -np.inf, "assign": None, "evals": 0}

    def visit(u: int, partial: float) -> None:
        if u == k:
            state["evals"] += 1
            if partial > state["best"]:
                state["best"] = partial
                state["assign"] = tuple(cur)
            return
        if sum(left) < k - u:
            return
        ru = r[u]
        for i in range(n_aps):
            if left[i] == 0:
                continue
            value = partial + ru[i]
            best = state["best"]
            # tolerance keeps near-ties on the table so the tie-break matches full enumeration
            if value + suffix[u + 1] < best - 1e-9 * abs(best):
                continue
            left[i] -= 1
            cur[u] = i
            visit(u + 1, value)
            left[i] += 1

    visit(0, 0.0)
    return state["assign"], float(state["best"]), state["evals"]


def _enumerate(rate: np.ndarray, limit: np.ndarray, chunk: int = 1 << 18):
    n_aps, k = rate.shape
    total = n_aps ** k
    powers = n_aps ** np.arange(k - 1, -1, -1)
    best, best_assign = -np.inf, None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        assign = (idx[:, None] // powers[None, :]) % n_aps
        value = np.zeros(idx.size)
        for u in range(k):
            value = value + rate[assign[:, u], u]
        loads = np.stack([(assign == i).sum(axis=1) for i in range(n_aps)], axis=1)
        value[(loads > limit[None, :]).any(axis=1)] = -np.inf
        j = int(np.argmax(value))
        if value[j] > best:
            best, best_assign = float(value[j]), tuple(int(a) for a in assign[j])
    return best_assign, best, total


def sss(snapshot: ChannelSnapshot, caps: CapacityLimits, n_lifi: int) -> SolverResult:
    """Every user picks the AP with the highest interference-free SNR; limits are ignored."""
    t0 = time.perf_counter()
    assign = tuple(int(i) for i in np.argmax(snapshot.snr, axis=0)) if snapshot.n_users else ()
    feasible = bool(np.all(ap_loads(assign, snapshot.n_aps) <= ap_caps(n_lifi, snapshot.n_aps, caps)))
    return SolverResult(assign, sum_rate(assign, snapshot), feasible, snapshot.n_users,
                        time.perf_counter() - t0, "sss")


def greedy_capacity_aware(snapshot: ChannelSnapshot, caps: CapacityLimits, n_lifi: int) -> SolverResult:
    """Repeatedly commit the highest-rate (user, AP) pair that still fits."""
    t0 = time.perf_counter()
    n_aps, k = snapshot.n_aps, snapshot.n_users
    left = ap_caps(n_lifi, n_aps, caps).copy()
    assign = [-1] * k
    evals = 0
    rate = snapshot.rate
    while True:
        best, pick = -np.inf, None
        for u in range(k):
            if assign[u] >= 0:
                continue
            for i in range(n_aps):
                evals += 1
                if left[i] > 0 and rate[i, u] > best:
                    best, pick = rate[i, u], (u, i)
        if pick is None:
            break
        u, i = pick
        assign[u] = i
        left[i] -= 1

    feasible = True
    wifi = list(range(n_lifi, n_aps))
    for u in range(k):
        if assign[u] < 0:
            feasible = False
            pool = wifi or list(range(n_aps))
            loads = ap_loads([a for a in assign if a >= 0], n_aps)
            assign[u] = min(pool, key=lambda i: (loads[i], i))
    assign = tuple(assign)
    return SolverResult(assign, sum_rate(assign, snapshot), feasible, evals, time.perf_counter() - t0, "greedy")
