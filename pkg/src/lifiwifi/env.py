"""Association decision space, feasibility, reward and the slot-stepping environment."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import ChannelSnapshot, _in_fov, build_snapshot
from .config import CapacityLimits, LifiParams, SimConfig
from .geometry import (Scenario, UserState, build_scenario, link_geometry_matrix, rwp_step,
                       sample_initial_users)


@dataclass(frozen=True)
class Violation:
    ap: int
    load: int
    cap: int

    @property
    def overload(self) -> int:
        return self.load - self.cap


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[Violation, ...] = ()

    @property
    def overload_count(self) -> int:
        return sum(v.overload for v in self.violations)

    def __bool__(self) -> bool:
        return self.feasible


def ap_caps(n_lifi: int, n_aps: int, caps: CapacityLimits) -> np.ndarray:
    return np.array([caps.per_lifi] * n_lifi + [caps.per_wifi] * (n_aps - n_lifi), dtype=int)


def ap_loads(assign: Sequence[int], n_aps: int) -> np.ndarray:
    return np.bincount(np.asarray(assign, dtype=int), minlength=n_aps)[:n_aps] if len(assign) else np.zeros(n_aps, int)


def is_feasible(assign: Sequence[int], caps: CapacityLimits, scenario: Scenario) -> FeasibilityReport:
    """Check the per-AP user limits. One-AP-per-user holds by construction."""
    assign = np.asarray(assign, dtype=int)
    if assign.size and (assign.min() < 0 or assign.max() >= scenario.n_aps):
        raise IndexError("association refers to an unknown AP")
    loads = ap_loads(assign, scenario.n_aps)
    limit = ap_caps(scenario.n_lifi, scenario.n_aps, caps)
    violations = tuple(Violation(i, int(loads[i]), int(limit[i]))
                       for i in np.flatnonzero(loads > limit))
    return FeasibilityReport(not violations, violations)


def overload_count(assign: Sequence[int], caps: CapacityLimits, n_lifi: int, n_aps: int) -> int:
    loads = ap_loads(assign, n_aps)
    return int(np.maximum(loads - ap_caps(n_lifi, n_aps, caps), 0).sum())


def user_rates(assign: Sequence[int], snapshot: ChannelSnapshot) -> np.ndarray:
    assign = np.asarray(assign, dtype=int)
    return snapshot.rate[assign, np.arange(assign.size)]


def sum_rate(assign: Sequence[int], snapshot: ChannelSnapshot) -> float:
    """Sum of the full per-link rates of the chosen APs (bits/second)."""
    total = 0.0
    for r in user_rates(assign, snapshot):
        total += r
    return float(total)


def jain_index(ratios) -> float:
    q = np.asarray(ratios, dtype=float)
    if q.size == 0:
        raise ValueError("fairness of an empty user set is undefined")
    top = q.max()
    if top <= 0:
        return 0.0
    q = q / top  # scale-free; avoids underflow in q**2
    return float(q.sum() ** 2 / (q.size * np.dot(q, q)))


def jain_fairness(assign: Sequence[int], snapshot: ChannelSnapshot, users: Sequence[UserState]) -> float:
    """Jain's index over per-user satisfaction ratios achieved / required."""
    if len(users) == 0:
        raise ValueError("fairness of an empty user set is undefined")
    required = np.array([u.required_rate for u in users], dtype=float)
    return jain_index(user_rates(assign, snapshot) / required)


def reward(
    assign: Sequence[int],
    snapshot: ChannelSnapshot,
    caps: CapacityLimits,
    penalty_coeff: float,
    *,
    n_lifi: int,
    rate_scale: float = 1e8,
    mode: str = "sum_rate",
    users: Sequence[UserState] = (),
) -> float:
    """Normalised objective minus ``penalty_coeff`` per user above an AP's limit."""
    if mode == "sum_rate":
        value = sum_rate(assign, snapshot) / rate_scale
    elif mode == "fairness":
        value = jain_fairness(assign, snapshot, users) if len(assign) else 0.0
    else:
        raise ValueError(f"unknown reward mode {mode!r}")
    over = overload_count(assign, caps, n_lifi, snapshot.n_aps)
    return value - penalty_coeff * over if over else value


def fov_matrix(scenario: Scenario, users: Sequence[UserState], lifi: LifiParams) -> np.ndarray:
    _, cosine = link_geometry_matrix(scenario, list(users))
    return _in_fov(lifi, cosine[: scenario.n_lifi])


def draw_blockage_mask(
    scenario: Scenario,
    users: Sequence[UserState],
    lifi: LifiParams,
    blockage_rate: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One uniform draw per user; a user below the rate loses all its in-FoV LiFi links.

    The draws happen even at rate 0 so that the random stream (and hence the
    blocked set) is nested across blockage rates for a fixed seed.
    """
    if not 0 <= blockage_rate <= 1:
        raise ValueError("blockage_rate must lie in [0, 1]")
    u = rng.random(len(users))
    return fov_matrix(scenario, users, lifi) & (u < blockage_rate)[None, :]


@dataclass(frozen=True)
class EnvState:
    snapshot: ChannelSnapshot
    users: tuple[UserState, ...]
    slot: int
    scenario: Scenario
    blockage: np.ndarray | None = field(default=None, compare=False)


def _snapshot(cfg: SimConfig, scenario, users, slot, rng) -> tuple[ChannelSnapshot, np.ndarray | None]:
    mask = None
    if cfg.blockage_rate > 0:
        mask = draw_blockage_mask(scenario, users, cfg.lifi, cfg.blockage_rate, rng)
    snap = build_snapshot(scenario, list(users), cfg.lifi, cfg.wifi, slot,
                          None if cfg.deterministic else rng, mask, cfg.blockage_attenuation)
    return snap, mask


def reset(cfg: SimConfig, rng: np.random.Generator, users: Sequence[UserState] | None = None,
          scenario: Scenario | None = None) -> EnvState:
    scenario = scenario or build_scenario(cfg)
    users = tuple(users) if users is not None else tuple(sample_initial_users(cfg, rng))
    snap, mask = _snapshot(cfg, scenario, users, 0, rng)
    return EnvState(snap, users, 0, scenario, mask)


def is_frozen(cfg: SimConfig) -> bool:
    """True when every slot of an episode sees the same snapshot."""
    return cfg.mobility == "static" and cfg.deterministic and cfg.blockage_rate == 0


def slot_metrics(state: EnvState, assign: Sequence[int], cfg: SimConfig) -> dict:
    snap, scenario = state.snapshot, state.scenario
    idx = np.asarray(assign, dtype=int)
    rates = snap.rate[idx, np.arange(idx.size)]
    total = 0.0
    for r in rates:
        total += r
    loads = np.bincount(idx, minlength=scenario.n_aps)
    limit = ap_caps(scenario.n_lifi, scenario.n_aps, cfg.caps)
    over = int(np.maximum(loads - limit, 0).sum())
    if state.users:
        required = np.array([u.required_rate for u in state.users])
        fairness = jain_index(rates / required)
    else:
        fairness = 0.0
    value = total / cfg.rate_scale if cfg.reward_mode == "sum_rate" else fairness
    return {
        "slot": state.slot,
        "sum_rate": float(total),
        "fairness": fairness,
        "overload_count": over,
        "loads": loads.tolist(),
        "reward": value - cfg.penalty_coeff * over if over else value,
    }


def advance(state: EnvState, cfg: SimConfig, rng: np.random.Generator) -> EnvState:
    """Move users one slot and redraw blockage / stochastic channel terms."""
    slot = state.slot + 1
    if is_frozen(cfg):
        return replace(state, snapshot=replace(state.snapshot, slot_index=slot), slot=slot)
    static = cfg.mobility == "static"
    users = tuple(rwp_step(u, cfg.dt, cfg.room, rng, speed_range=cfg.speed_range,
                           dwell_time=cfg.dwell_time, static=static) for u in state.users)
    snap, mask = _snapshot(cfg, state.scenario, users, slot, rng)
    return EnvState(snap, users, slot, state.scenario, mask)


def step(state: EnvState, assign: Sequence[int], cfg: SimConfig,
         rng: np.random.Generator) -> tuple[EnvState, float, dict]:
    """Score ``assign`` on the current snapshot, then advance one slot."""
    if len(assign) != len(state.users):
        raise ValueError(f"association has {len(assign)} entries for {len(state.users)} users")
    metrics = slot_metrics(state, assign, cfg)
    return advance(state, cfg, rng), metrics["reward"], metrics
