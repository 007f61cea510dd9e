"""Command line entry point: run, sweep and eval."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import experiments, rl
from .config import ConfigError, load_config

OUTPUT_ENV = "LIFIWIFI_OUTPUT_DIR"

_AXIS_TYPES = {"user_count": int, "blockage_rate": float, "setting": int, "scenario": str}

log = logging.getLogger("lifiwifi")


def parse_values(axis: str, text: str) -> list:
    if axis not in _AXIS_TYPES:
        raise ConfigError(f"axis: must be one of {tuple(_AXIS_TYPES)}, got {axis!r}")
    items = [v.strip() for v in text.split(",") if v.strip()]
    if not items:
        raise ConfigError("values: must be non-empty")
    try:
        return [_AXIS_TYPES[axis](v) for v in items]
    except ValueError as exc:
        raise ConfigError(f"values: {exc}") from None


def _output_dir(args, cfg) -> Path:
    return Path(args.output_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir)


def _print_table(record) -> None:
    for r in record.comparison:
        print(f"{r.solver:>7}  {r.sum_rate_mbps:10.2f} Mbps  fairness {r.fairness:.3f}  "
              f"feasible {r.feasible_frac:.3f}  {r.status}")


def _progress(every: int):
    def report(episode, reward):
        if (episode + 1) % every == 0:
            log.info("episode %d mean reward %.4f", episode + 1, reward)
    return report


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    out = _output_dir(args, cfg)
    record = experiments.run_comparison(cfg, progress=_progress(args.log_every))
    experiments.write_record(record, out)
    if args.plots:
        from . import plotting
        plotting.render_run(record, out)
    _print_table(record)
    print(f"wrote {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    values = parse_values(args.axis, args.values)
    out = _output_dir(args, cfg)
    points = experiments.run_sweep(cfg, args.axis, values, out, workers=args.workers)
    if args.plots:
        from . import plotting
        plotting.render_sweep(points, args.axis, out)
    failed = [p for p in points if p.record is None]
    for p in failed:
        print(f"{args.axis}={p.value}: {p.error}", file=sys.stderr)
    print(f"wrote {out / 'sweep.csv'} ({len(points) - len(failed)}/{len(points)} points ok)")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    policy, trained_hash = rl.load_checkpoint(args.checkpoint, cfg.trainer)
    if trained_hash != cfg.config_hash():
        log.warning("checkpoint was trained under config %s, evaluating under %s",
                    trained_hash, cfg.config_hash())
    out = _output_dir(args, cfg)
    record = experiments.run_comparison(cfg, policy=policy)
    experiments.write_record(record, out)
    _print_table(record)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lifiwifi", description="Hybrid LiFi/WiFi user association experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="compare solvers on one configuration")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--output-dir")
    run.add_argument("--plots", action="store_true", help="also render PNG figures (needs matplotlib)")
    run.add_argument("--log-every", type=int, default=100)
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="repeat the comparison along one axis")
    sw.add_argument("--config", required=True)
    sw.add_argument("--axis", required=True, choices=sorted(_AXIS_TYPES))
    sw.add_argument("--values", required=True, help="comma separated, e.g. 2,4,6")
    sw.add_argument("--workers", type=int)
    sw.add_argument("--output-dir")
    sw.add_argument("--plots", action="store_true")
    sw.set_defaults(func=cmd_sweep)

    ev = sub.add_parser("eval", help="evaluate a saved policy without training")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--config", required=True)
    ev.add_argument("--output-dir")
    ev.set_defaults(func=cmd_eval)
    return p


def _fail(kind: str, exc: BaseException, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", exc, 2)
    except FileNotFoundError as exc:
        return _fail("file_not_found", exc, 2)
    except rl.TrainingDiverged as exc:
        return _fail("training_diverged", exc, 3)
    except ImportError as exc:
        return _fail("missing_dependency", exc, 4)
    except Exception as exc:  # last resort, still machine-readable
        return _fail(type(exc).__name__, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
