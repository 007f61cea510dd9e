import csv
import json
import math

import pytest

from lifiwifi import experiments as X
from lifiwifi.config import CapacityLimits, ConfigError, SimConfig, TrainerConfig

FAST = TrainerConfig(max_episodes=3, episode_length=20, hidden_units=8)


def small_cfg(**kw):
    base = dict(scenario="interference_prone", user_count=3, channel_mode="deterministic", trainer=FAST)
    base.update(kw)
    return SimConfig(**base)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_static_comparison_rows():
    rec = X.run_comparison(small_cfg())
    assert [r.solver for r in rec.comparison] == ["es", "sss", "greedy", "sppo"]
    es, greedy = rec.row("es"), rec.row("greedy")
    assert greedy.sum_rate_mbps <= es.sum_rate_mbps * (1 + 1e-12)
    assert len(rec.episode_rewards) == 3
    assert all(r.feasible_frac in (0.0, 1.0) for r in rec.comparison)


def test_es_budget_skip():
    rec = X.run_comparison(small_cfg(user_count=6, es_budget=100, solvers=("es", "sss")))
    assert rec.row("es").status == X.SKIPPED_BUDGET
    assert math.isnan(rec.row("es").sum_rate_mbps)
    assert rec.row("sss").status == "ok"


def test_es_infeasible_skip():
    rec = X.run_comparison(small_cfg(user_count=6, setting=None, caps=CapacityLimits(1, 1),
                                     solvers=("es", "greedy")))
    assert rec.row("es").status == X.SKIPPED_INFEASIBLE
    assert rec.row("greedy").feasible_frac == 0.0


def test_mobile_horizon():
    cfg = small_cfg(mobility="rwp", channel_mode="stochastic", eval_slots=15, solvers=("es", "sss", "greedy"))
    rec = X.run_comparison(cfg)
    assert len(rec.slot_metrics) == 15 * 3
    assert 0.0 <= rec.row("sss").feasible_frac <= 1.0
    assert rec.row("es").feasible_frac == 1.0


def test_static_with_blockage_uses_eval_slots():
    cfg = small_cfg(blockage_rate=0.3, eval_slots=7, solvers=("es", "sss"))
    rec = X.run_comparison(cfg)
    assert len(rec.slot_metrics) == 7 * 2


def test_write_and_read_record(tmp_path):
    rec = X.run_comparison(small_cfg())
    X.write_record(rec, tmp_path)
    rows = read_csv(tmp_path / "comparison.csv")
    assert list(rows[0]) == list(X.COMPARISON_FIELDS)
    conv = read_csv(tmp_path / "convergence.csv")
    assert list(conv[0]) == ["episode", "mean_reward", "solver"] and len(conv) == 3
    assert (tmp_path / "policy.json").exists()
    again = X.read_record(tmp_path)
    assert again.config_hash == rec.config_hash
    assert again.episode_rewards == rec.episode_rewards


def test_read_record_detects_tampering(tmp_path):
    X.write_record(X.run_comparison(small_cfg(solvers=("sss",))), tmp_path)
    meta = json.loads((tmp_path / "record.json").read_text())
    meta["config"]["user_count"] = 5
    (tmp_path / "record.json").write_text(json.dumps(meta))
    with pytest.raises(ValueError, match="hash mismatch"):
        X.read_record(tmp_path)


def test_rates_finite_nonnegative(tmp_path):
    X.write_record(X.run_comparison(small_cfg(mobility="rwp", eval_slots=5)), tmp_path)
    for row in read_csv(tmp_path / "slots.csv"):
        v = float(row["sum_rate_mbps"])
        assert math.isfinite(v) and v >= 0


def test_identical_runs_identical_csv(tmp_path):
    cfg = small_cfg(mobility="rwp", channel_mode="stochastic", eval_slots=5)
    for name in ("a", "b"):
        X.write_record(X.run_comparison(cfg), tmp_path / name)
    for f in ("convergence.csv", "slots.csv"):
        assert (tmp_path / "a" / f).read_text() == (tmp_path / "b" / f).read_text()
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]
    assert strip(read_csv(tmp_path / "a" / "comparison.csv")) == strip(read_csv(tmp_path / "b" / "comparison.csv"))


class TestSweep:
    def test_empty_values(self):
        with pytest.raises(ConfigError, match="non-empty"):
            X.run_sweep(small_cfg(), "user_count", [])

    def test_unknown_axis(self):
        with pytest.raises(ConfigError, match="axis"):
            X.run_sweep(small_cfg(), "speed", [1])

    def test_derived_seeds_distinct(self):
        seeds = {X.derived_seed(7, i) for i in range(50)}
        assert len(seeds) == 50

    def test_user_count_sweep(self, tmp_path):
        pts = X.run_sweep(small_cfg(solvers=("es", "sss")), "user_count", [1, 2, 3], tmp_path)
        assert [p.value for p in pts] == [1, 2, 3]
        assert all(p.record is not None for p in pts)
        rows = read_csv(tmp_path / "sweep.csv")
        assert len(rows) == 6 and rows[0]["axis"] == "user_count"
        assert (tmp_path / "user_count=2" / "comparison.csv").exists()

    def test_failure_recorded_and_sweep_continues(self):
        pts = X.run_sweep(small_cfg(solvers=("sss",)), "scenario", ["dense", "custom", "interference_free"])
        assert pts[0].record is not None and pts[2].record is not None
        assert pts[1].record is None and "ConfigError" in pts[1].error

    def test_parallel_matches_serial(self):
        cfg = small_cfg(solvers=("es", "greedy"))
        serial = X.run_sweep(cfg, "blockage_rate", [0.0, 0.4])
        parallel = X.run_sweep(cfg, "blockage_rate", [0.0, 0.4], workers=2)
        for a, b in zip(serial, parallel):
            assert [r.sum_rate_mbps for r in a.record.comparison] == [r.sum_rate_mbps for r in b.record.comparison]


def test_episodes_to_fraction():
    assert X.episodes_to_fraction([0, 0.5, 0.96, 1, 1, 1, 1, 1, 1, 1]) == 2
    assert X.episodes_to_fraction([]) is None
