"""End-to-end acceptance checks.

Each test records exactly one PASS/FAIL line (see conftest.py); the lines are
repeated in the terminal summary. The training-based checks dominate the
runtime, about an hour on one core.
"""
import csv
import itertools
import math
import time

import numpy as np
import pytest

from lifiwifi import env as E
from lifiwifi import experiments as X
from lifiwifi.channel import ChannelSnapshot, lambertian_index, lifi_channel_gain, wifi_path_loss
from lifiwifi.config import CapacityLimits, LifiParams, SimConfig, TrainerConfig, WifiParams
from lifiwifi.solvers import exhaustive_search

from test_nn import check as gradient_check

SEEDS = range(10)


def static_cfg(k, seed, setting=1, **kw):
    base = dict(scenario="interference_prone", setting=setting, user_count=k, channel_mode="deterministic",
                seed=seed, solvers=("es", "sss", "sppo"), trainer=TrainerConfig(max_episodes=2000))
    base.update(kw)
    return SimConfig(**base)


def penalised(metrics_row, cfg):
    """Training objective of one scored slot: normalised sum rate minus the overload penalty."""
    return metrics_row["sum_rate_mbps"] * 1e6 / cfg.rate_scale - cfg.penalty_coeff * metrics_row["overload_count"]


def feasible_rate(rec, solver):
    """Mean per-slot sum rate with overloaded slots scored as zero."""
    rows = [m for m in rec.slot_metrics if m["solver"] == solver]
    return sum(m["sum_rate_mbps"] * (m["overload_count"] == 0) for m in rows) / len(rows)


# -- 1 ---------------------------------------------------------------------------------

def test_channel_math(criterion):
    t0 = time.perf_counter()
    m60 = lambertian_index(math.radians(60))
    h = lifi_channel_gain(LifiParams(), 2.0, 1.0, 1.0)
    fs = wifi_path_loss(WifiParams(), 1.0)
    elapsed = time.perf_counter() - t0
    ok = m60 == 1.0 and abs(h / 1.790e-5 - 1) <= 0.005 and abs(fs - 40.10) <= 0.01 and elapsed < 1.0
    assert criterion(1, "channel math", ok, f"m(60)={m60!r} H={h:.5e} FS(1m)={fs:.4f} dB in {elapsed:.3f}s")


# -- 2 ---------------------------------------------------------------------------------

def random_instance(rng):
    while True:
        n_aps = int(rng.integers(2, 6))
        n_lifi = int(rng.integers(0, n_aps + 1))
        k = int(rng.integers(1, 7))
        caps = CapacityLimits(int(rng.integers(1, 4)), int(rng.integers(1, 7)))
        if k <= n_lifi * caps.per_lifi + (n_aps - n_lifi) * caps.per_wifi:
            break
    rate = rng.lognormal(18, 1.0, size=(n_aps, k))
    rate[rng.random(rate.shape) < 0.2] = 0.0  # links outside the field of view
    if rng.random() < 0.2:
        rate = np.round(rate / max(rate.max(), 1.0) * 4)  # coarse values exercise ties
    return ChannelSnapshot(rate.copy(), rate, rate.copy(), 0), caps, n_lifi


def test_es_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst_gap, mismatches = 0.0, 0
    for _ in range(1000):
        snap, caps, n_lifi = random_instance(rng)
        n_aps, k = snap.rate.shape
        pruned = exhaustive_search(snap, caps, n_lifi)
        plain = exhaustive_search(snap, caps, n_lifi, prune=False)
        mismatches += pruned.association != plain.association or pruned.objective != plain.objective
        space = np.array(list(itertools.product(range(n_aps), repeat=k)))
        loads = (space[:, :, None] == np.arange(n_aps)).sum(axis=1)
        ok_rows = space[np.all(loads <= E.ap_caps(n_lifi, n_aps, caps), axis=1)]
        sample = ok_rows[rng.integers(0, len(ok_rows), size=10_000)]
        values = snap.rate[sample, np.arange(k)].sum(axis=1)
        worst_gap = max(worst_gap, float(values.max() - pruned.objective) / max(pruned.objective, 1.0))
    ok = mismatches == 0 and worst_gap <= 1e-12
    assert criterion(2, "ES oracle", ok, f"1000 instances, pruned/unpruned mismatches={mismatches}, "
                                         f"worst sample excess={worst_gap:.2e}")


# -- 3 ---------------------------------------------------------------------------------

def test_gradient_check(criterion):
    errors = [gradient_check(nh, seed) for nh in (4, 8) for seed in range(50)]
    worst = max(errors)
    assert criterion(3, "gradient check", worst < 1e-4, f"100 trials, worst relative error {worst:.2e}")


# -- 4 ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def static_runs():
    return {(k, s): X.run_comparison(static_cfg(k, s)) for k in (2, 4, 6) for s in SEEDS}


@pytest.mark.slow
def test_static_optimality(static_runs, criterion):
    lines, ok = [], True
    binding, beaten = 0, 0
    for k in (2, 4, 6):
        hits = 0
        for s in SEEDS:
            rec, cfg = static_runs[(k, s)], static_cfg(k, s)
            es, sppo = rec.row("es"), rec.row("sppo")
            ratio = sppo.sum_rate_mbps / es.sum_rate_mbps if sppo.feasible_frac == 1.0 else 0.0
            hits += ratio >= 0.95 and len(rec.episode_rewards) <= 2000
            state = X.evaluation_state(cfg)
            if es.sum_rate_mbps * 1e6 < state.snapshot.rate.max(axis=0).sum() * (1 - 1e-12):
                binding += 1
                rows = {m["solver"]: m for m in rec.slot_metrics}
                beaten += penalised(rows["sppo"], cfg) > penalised(rows["sss"], cfg)
        lines.append(f"K={k}: {hits}/10")
        ok &= hits >= 9
    ok &= beaten == binding
    detail = ", ".join(lines) + f"; S-PPO > SSS on {beaten}/{binding} capacity-binding instances"
    assert criterion(4, "static optimality", ok, detail)


# -- 5 ---------------------------------------------------------------------------------

@pytest.mark.slow
def test_capacity_compliance(criterion):
    parts, ok = [], True
    for setting in (1, 2):
        clean = total = 0
        for s in range(5):
            cfg = static_cfg(6, s, setting=setting, channel_mode="stochastic", eval_slots=100, solvers=("sppo",))
            rec = X.run_comparison(cfg)
            clean += sum(m["overload_count"] == 0 for m in rec.slot_metrics)
            total += len(rec.slot_metrics)
        parts.append(f"setting {setting}: {clean}/{total}")
        ok &= clean >= 0.99 * total
    assert criterion(5, "capacity compliance", ok, ", ".join(parts))


# -- 6 ---------------------------------------------------------------------------------

def test_fairness(criterion):
    closed = E.jain_index([2.0, 2.0, 2.0]) == 1.0 and E.jain_index([1.0, 0.0]) == 0.5
    means = []
    for k in range(2, 11):
        vals = [X.run_comparison(static_cfg(k, s, solvers=("es",))).row("es").fairness for s in range(20)]
        means.append(float(np.mean(vals)))
    monotone = all(b < a for a, b in zip(means, means[1:]))
    detail = "closed forms " + ("exact" if closed else "wrong") + "; ES fairness K=2..10: " + \
        " ".join(f"{m:.4f}" for m in means)
    assert criterion(6, "fairness", closed and monotone, detail)


# -- 7 ---------------------------------------------------------------------------------

@pytest.mark.slow
def test_blockage_robustness(criterion):
    monotone, near, parts = True, 0, []
    cases = [(k, s) for k in (2, 4, 6) for s in range(3)]
    for k, s in cases:
        es_rates = []
        for rate in (0.0, 0.2, 0.4):
            solvers = ("es", "sppo") if rate == 0.2 else ("es",)
            rec = X.run_comparison(static_cfg(k, s, blockage_rate=rate, eval_slots=100, solvers=solvers))
            es_rates.append(rec.row("es").sum_rate_mbps)
            if rate == 0.2:
                ratio = feasible_rate(rec, "sppo") / feasible_rate(rec, "es")
                near += ratio >= 0.9
                parts.append(f"K={k}/s{s}:{ratio:.3f}")
        monotone &= all(b <= a for a, b in zip(es_rates, es_rates[1:]))
    ok = monotone and near == len(cases)
    detail = f"ES nonincreasing={monotone}; S-PPO/ES at 0.2: " + " ".join(parts)
    assert criterion(7, "blockage robustness", ok, detail)


# -- 8 ---------------------------------------------------------------------------------

def _metric_rows(out_dir):
    rows = {}
    for name in ("comparison.csv", "convergence.csv", "convergence_summary.csv", "slots.csv"):
        with open(out_dir / name) as fh:
            rows[name] = [{k: v for k, v in r.items() if k != "wall_time_s"} for r in csv.DictReader(fh)]
    return rows


def test_determinism(tmp_path, criterion):
    small = TrainerConfig(max_episodes=20, episode_length=30, hidden_units=16)
    configs = [
        static_cfg(4, 3, trainer=small),
        SimConfig(scenario="dense", user_count=5, mobility="rwp", channel_mode="stochastic", blockage_rate=0.2,
                  eval_slots=40, seed=11, solvers=("es", "sss", "greedy", "sppo"), trainer=small),
    ]
    same = True
    for i, cfg in enumerate(configs):
        dirs = []
        for rep in range(2):
            d = tmp_path / f"c{i}r{rep}"
            X.write_record(X.run_comparison(cfg), d)
            dirs.append(d)
        same &= _metric_rows(dirs[0]) == _metric_rows(dirs[1])
    sweeps = []
    for rep in range(2):
        d = tmp_path / f"sweep{rep}"
        X.write_sweep(X.run_sweep(configs[0], "blockage_rate", [0.0, 0.3], workers=2), "blockage_rate", d)
        with open(d / "sweep.csv") as fh:
            sweeps.append([{k: v for k, v in r.items() if k != "wall_time_s"} for r in csv.DictReader(fh)])
    same &= sweeps[0] == sweeps[1]
    assert criterion(8, "determinism", same, "static, mobile and parallel sweep runs repeated twice")
