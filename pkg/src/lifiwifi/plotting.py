"""Optional PNG figures next to the CSVs. matplotlib is imported lazily."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ImportError("plots need matplotlib: pip install 'artifact[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_run(record, out_dir) -> list[Path]:
    plt = _pyplot()
    out = Path(out_dir)
    written = []
    if record.episode_rewards:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(np.arange(len(record.episode_rewards)), record.episode_rewards, lw=0.8, label="S-PPO")
        es = record.row("es")
        if es is not None and es.status == "ok" and record.config.get("reward_mode") == "sum_rate":
            ax.axhline(es.sum_rate_mbps * 1e6 / record.config["rate_scale"], color="k", ls="--", label="ES")
        ax.set_xlabel("episode")
        ax.set_ylabel("mean reward per slot")
        ax.legend()
        fig.tight_layout()
        written.append(out / "convergence.png")
        fig.savefig(written[-1], dpi=120)
        plt.close(fig)

    rows = [r for r in record.comparison if r.status == "ok"]
    if rows:
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.bar([r.solver for r in rows], [r.sum_rate_mbps for r in rows], color="tab:blue")
        ax.set_ylabel("sum rate (Mbps)")
        fig.tight_layout()
        written.append(out / "comparison.png")
        fig.savefig(written[-1], dpi=120)
        plt.close(fig)
    return written


def render_sweep(points, axis: str, out_dir) -> Path:
    plt = _pyplot()
    series: dict[str, tuple[list, list]] = {}
    for p in points:
        if p.record is None:
            continue
        for r in p.record.comparison:
            if r.status == "ok":
                xs, ys = series.setdefault(r.solver, ([], []))
                xs.append(p.value)
                ys.append(r.sum_rate_mbps)
    fig, ax = plt.subplots(figsize=(6, 4))
    categorical = any(isinstance(p.value, str) for p in points)
    for solver, (xs, ys) in series.items():
        ax.plot([str(x) for x in xs] if categorical else xs, ys, marker="o", label=solver)
    ax.set_xlabel(axis)
    ax.set_ylabel("sum rate (Mbps)")
    ax.legend()
    fig.tight_layout()
    path = Path(out_dir) / "sweep.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
