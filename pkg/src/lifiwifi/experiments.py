"""Solver comparison runs, parameter sweeps and CSV/JSON export."""
from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import env as envmod
from . import rl
from .config import ConfigError, SimConfig, config_from_dict
from .geometry import build_scenario, sample_initial_users
from .solvers import (InstanceTooLarge, NoFeasibleAssociation, exhaustive_search,
                      greedy_capacity_aware, sss)

log = logging.getLogger(__name__)

AXES = ("user_count", "blockage_rate", "scenario", "setting")
COMPARISON_FIELDS = ("scenario", "setting", "users", "solver", "sum_rate_mbps", "fairness",
                     "feasible_frac", "wall_time_s", "status")
CONVERGENCE_FIELDS = ("episode", "mean_reward", "solver")
SLOT_FIELDS = ("slot", "solver", "sum_rate_mbps", "fairness", "overload_count", "feasible")
SWEEP_FIELDS = ("axis", "value", "seed") + COMPARISON_FIELDS
SKIPPED_BUDGET = "skipped (budget)"
SKIPPED_INFEASIBLE = "skipped (infeasible)"


@dataclass
class ComparisonRow:
    scenario: str
    setting: str
    users: int
    solver: str
    sum_rate_mbps: float
    fairness: float
    feasible_frac: float
    wall_time_s: float
    status: str = "ok"


@dataclass
class RunRecord:
    run_id: str
    config_hash: str
    config: dict
    comparison: list[ComparisonRow] = field(default_factory=list)
    episode_rewards: list[float] = field(default_factory=list)
    slot_metrics: list[dict] = field(default_factory=list)
    episodes_to_95pct: int | None = None
    train_time_s: float = 0.0
    policy: rl.PolicyParams | None = field(default=None, repr=False, compare=False)

    def row(self, solver: str) -> ComparisonRow | None:
        return next((r for r in self.comparison if r.solver == solver), None)


def episodes_to_fraction(curve, fraction: float = 0.95, tail: float = 0.1) -> int | None:
    """First episode whose reward reaches ``fraction`` of the final reward.

    The final reward is the mean over the last ``tail`` share of episodes.
    """
    curve = np.asarray(curve, dtype=float)
    if curve.size == 0:
        return None
    n_tail = max(1, int(round(tail * curve.size)))
    final = curve[-n_tail:].mean()
    target = fraction * final if final >= 0 else final / fraction
    hits = np.flatnonzero(curve >= target)
    return int(hits[0]) if hits.size else None


def _seeds(seed: int) -> tuple[np.random.Generator, ...]:
    """Independent streams for instance sampling, training and evaluation."""
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))


def run_id_for(cfg: SimConfig) -> str:
    return f"{cfg.scenario}-s{cfg.setting_label}-k{cfg.user_count}-seed{cfg.seed}-{cfg.config_hash()[:8]}"


class _Tally:
    """Running per-solver totals over evaluation slots."""

    def __init__(self):
        self.rate = 0.0
        self.fair = 0.0
        self.feasible = 0
        self.slots = 0
        self.time = 0.0
        self.status = "ok"

    def add(self, rate, fair, feasible, elapsed):
        self.rate += rate
        self.fair += fair
        self.feasible += int(feasible)
        self.slots += 1
        self.time += elapsed


def _solve(name, state, cfg, policy):
    snap, n_lifi = state.snapshot, state.scenario.n_lifi
    t0 = time.perf_counter()
    if name == "es":
        assign = exhaustive_search(snap, cfg.caps, n_lifi, budget=cfg.es_budget).association
    elif name == "sss":
        assign = sss(snap, cfg.caps, n_lifi).association
    elif name == "greedy":
        assign = greedy_capacity_aware(snap, cfg.caps, n_lifi).association
    elif name == "sppo":
        assign = rl.greedy_association(policy, snap)
    else:
        raise ValueError(f"unknown solver {name!r}")
    return assign, time.perf_counter() - t0


def _instance(cfg: SimConfig):
    inst_rng, train_rng, eval_rng = _seeds(cfg.seed)
    scenario = build_scenario(cfg)
    return scenario, tuple(sample_initial_users(cfg, inst_rng)), train_rng, eval_rng


def evaluation_state(cfg: SimConfig) -> envmod.EnvState:
    """The first evaluation slot that ``run_comparison`` scores for ``cfg``."""
    scenario, users, _, eval_rng = _instance(cfg)
    return envmod.reset(cfg, eval_rng, users, scenario)


def run_comparison(cfg: SimConfig, policy: rl.PolicyParams | None = None, progress=None) -> RunRecord:
    """Evaluate every enabled solver on a common instance.

    A frozen instance (static users, deterministic channel, no blockage) is
    scored on one snapshot. Anything else replays one shared trajectory of
    ``eval_slots`` slots and averages over it. When ``policy`` is given the
    S-PPO row uses it instead of training a fresh one.
    """
    scenario, users, train_rng, eval_rng = _instance(cfg)
    record = RunRecord(run_id_for(cfg), cfg.config_hash(), cfg.to_dict())

    if "sppo" in cfg.solvers and policy is None:
        t0 = time.perf_counter()
        result = rl.train(cfg, train_rng, users, scenario, progress=progress)
        record.train_time_s = time.perf_counter() - t0
        policy = result.policy
        record.episode_rewards = [float(r) for r in result.episode_rewards]
        record.episodes_to_95pct = episodes_to_fraction(record.episode_rewards)
    record.policy = policy
    if policy is not None and policy.actor.layer_dims[0] != scenario.n_aps:
        raise ConfigError(f"policy expects {policy.actor.layer_dims[0]} APs, scenario has {scenario.n_aps}")

    tallies = {name: _Tally() for name in cfg.solvers}
    horizon = 1 if envmod.is_frozen(cfg) else cfg.eval_slots
    state = envmod.reset(cfg, eval_rng, users, scenario)
    for t in range(horizon):
        for name, tally in tallies.items():
            if tally.status != "ok":
                continue
            try:
                assign, elapsed = _solve(name, state, cfg, policy)
            except InstanceTooLarge:
                tally.status = SKIPPED_BUDGET
                continue
            except NoFeasibleAssociation:
                tally.status = SKIPPED_INFEASIBLE
                continue
            m = envmod.slot_metrics(state, assign, cfg)
            feasible = m["overload_count"] == 0
            tally.add(m["sum_rate"], m["fairness"], feasible, elapsed)
            record.slot_metrics.append({
                "slot": t, "solver": name, "sum_rate_mbps": m["sum_rate"] / 1e6,
                "fairness": m["fairness"], "overload_count": m["overload_count"],
                "feasible": int(feasible),
            })
        if t + 1 < horizon:
            state = envmod.advance(state, cfg, eval_rng)

    for name, tally in tallies.items():
        n = max(tally.slots, 1)
        ok = tally.status == "ok"
        record.comparison.append(ComparisonRow(
            scenario=cfg.scenario, setting=cfg.setting_label, users=cfg.user_count, solver=name,
            sum_rate_mbps=tally.rate / n / 1e6 if ok else float("nan"),
            fairness=tally.fair / n if ok else float("nan"),
            feasible_frac=tally.feasible / n if ok else float("nan"),
            wall_time_s=tally.time, status=tally.status,
        ))
    return record


# -- sweeps -----------------------------------------------------------------------------

@dataclass
class SweepPoint:
    value: object
    seed: int
    record: RunRecord | None = None
    error: str | None = None


def derived_seed(base: int, index: int) -> int:
    return base ^ index


def _sweep_point(args):
    base_cfg, axis, value, seed, out_dir = args
    try:
        cfg = base_cfg.replace(**{axis: value, "seed": seed})
        record = run_comparison(cfg)
        if out_dir is not None:
            write_record(record, out_dir)
        record.policy = None  # keep the pickled result small
        return SweepPoint(value, seed, record)
    except Exception as exc:  # recorded, the sweep carries on
        log.warning("sweep point %r failed: %s", value, exc)
        return SweepPoint(value, seed, error=f"{type(exc).__name__}: {exc}")


def run_sweep(base_cfg: SimConfig, axis: str, values, out_dir=None, workers: int | None = None) -> list[SweepPoint]:
    """One independent run per value; results come back in ``values`` order."""
    if axis not in AXES:
        raise ConfigError(f"axis: must be one of {AXES}, got {axis!r}")
    values = list(values)
    if not values:
        raise ConfigError("values: must be non-empty")
    jobs = []
    for i, value in enumerate(values):
        sub = None if out_dir is None else Path(out_dir) / f"{axis}={value}"
        jobs.append((base_cfg, axis, value, derived_seed(base_cfg.seed, i), sub))
    workers = workers or base_cfg.workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            points = list(pool.map(_sweep_point, jobs))
    else:
        points = [_sweep_point(j) for j in jobs]
    if out_dir is not None:
        write_sweep(points, axis, out_dir)
    return points


def sweep_rows(points: list[SweepPoint], axis: str) -> list[dict]:
    rows = []
    for p in points:
        if p.record is None:
            rows.append({"axis": axis, "value": p.value, "seed": p.seed, "status": f"failed: {p.error}"})
            continue
        for r in p.record.comparison:
            rows.append({"axis": axis, "value": p.value, "seed": p.seed, **asdict(r)})
    return rows


# -- export -------------------------------------------------------------------------------

def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_record(record: RunRecord, out_dir) -> Path:
    """Write comparison.csv, convergence.csv, slots.csv and record.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "comparison.csv", COMPARISON_FIELDS, [asdict(r) for r in record.comparison])
    _write_csv(out / "convergence.csv", CONVERGENCE_FIELDS,
               [{"episode": i, "mean_reward": r, "solver": "sppo"}
                for i, r in enumerate(record.episode_rewards)])
    _write_csv(out / "convergence_summary.csv", ("solver", "episodes", "episodes_to_95pct"),
               [{"solver": "sppo", "episodes": len(record.episode_rewards),
                 "episodes_to_95pct": "" if record.episodes_to_95pct is None else record.episodes_to_95pct}]
               if record.episode_rewards else [])
    _write_csv(out / "slots.csv", SLOT_FIELDS, record.slot_metrics)
    meta = {
        "run_id": record.run_id,
        "config_hash": record.config_hash,
        "config": record.config,
        "comparison": [asdict(r) for r in record.comparison],
        "episodes_to_95pct": record.episodes_to_95pct,
        "train_time_s": record.train_time_s,
    }
    (out / "record.json").write_text(json.dumps(meta, indent=2, default=list))
    if record.policy is not None:
        rl.save_checkpoint(out / "policy.json", record.policy, config_from_dict(_user_dict(record.config)))
    return out


def write_sweep(points: list[SweepPoint], axis: str, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    _write_csv(path, SWEEP_FIELDS, sweep_rows(points, axis))
    return path


def _user_dict(config: dict) -> dict:
    """Config dict as stored -> loadable form (tuples serialised as lists are fine)."""
    return json.loads(json.dumps(config, default=list))


def read_record(out_dir) -> RunRecord:
    """Load record.json and check that its config still hashes to the stored value."""
    meta = json.loads((Path(out_dir) / "record.json").read_text())
    cfg = config_from_dict(_user_dict(meta["config"]))
    if cfg.config_hash() != meta["config_hash"]:
        raise ValueError(f"config hash mismatch in {out_dir}: stored {meta['config_hash']}, "
                         f"recomputed {cfg.config_hash()}")
    record = RunRecord(meta["run_id"], meta["config_hash"], meta["config"],
                       [ComparisonRow(**r) for r in meta["comparison"]],
                       episodes_to_95pct=meta.get("episodes_to_95pct"),
                       train_time_s=meta.get("train_time_s", 0.0))
    conv = Path(out_dir) / "convergence.csv"
    if conv.exists():
        with open(conv) as fh:
            record.episode_rewards = [float(r["mean_reward"]) for r in csv.DictReader(fh)]
    return record
