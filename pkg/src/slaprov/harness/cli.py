"""Command line entry point: ``slaprov run|validate|sweep-status``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .._accel import backend_name
from .config import BUNDLED, ConfigError, load
from .runner import run_experiment, sweep_status


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slaprov", description="SLA-driven cluster provisioning experiments")
    sub = p.add_subparsers(dest="command", required=True)
    cfg_help = f"YAML config path or bundled name ({', '.join(BUNDLED)})"

    r = sub.add_parser("run", help="run every cell of an experiment")
    r.add_argument("config", help=cfg_help)
    r.add_argument("-o", "--out", help="output directory (default: the config's output.dir)")
    r.add_argument("-j", "--jobs", type=int, default=1, help="worker processes (default 1)")
    r.add_argument("-v", "--verbose", action="count", default=0, help="-v per run, -vv debug")
    r.add_argument("--trace", action="store_true", help="write a JSON-lines event trace per run")
    r.add_argument("--replications", type=int, help="override replications per cell")
    r.add_argument("--horizon", type=float, help="override simulated seconds per run")
    r.add_argument("--base-seed", type=int, help="override base seed")

    v = sub.add_parser("validate", help="check a config and print its cells")
    v.add_argument("config", help=cfg_help)

    s = sub.add_parser("sweep-status", help="report completed, failed and pending runs")
    s.add_argument("config", help=cfg_help)
    s.add_argument("-o", "--out", help="output directory (default: the config's output.dir)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING
    if getattr(args, "verbose", 0) == 1:
        level = logging.INFO
    elif getattr(args, "verbose", 0) >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load(args.config)
        if args.command == "run":
            cfg = cfg.with_overrides(replications=args.replications, horizon=args.horizon,
                                     base_seed=args.base_seed)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"{cfg.name}: ok")
        print(f"  N={cfg.N} m={cfg.m} horizon={cfg.horizon:g}s buckets={cfg.bucket_width:g}s "
              f"replications={cfg.replications}")
        print(f"  policies: {', '.join(p.name for p in cfg.policies)}")
        for cell, value in cfg.cells():
            print(f"  cell {cell}: {cfg.sweep.var}={value:g} offered load={cfg.offered_load(value):.3f}")
        print(f"  runs: {len(cfg.cells()) * len(cfg.policies) * cfg.replications}")
        return 0

    if args.command == "sweep-status":
        st = sweep_status(cfg, args.out)
        print(json.dumps(st))
        return 1 if st["failed"] else 0

    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return 2
    out = args.out or cfg.output_dir
    logging.getLogger(__name__).info("backend: %s", backend_name())
    result = run_experiment(cfg, out, jobs=args.jobs, trace=args.trace)
    n = len(result.records)
    print(f"{cfg.name}: {n} runs written to {out}; {len(result.failures)} failed")
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
