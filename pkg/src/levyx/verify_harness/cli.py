"""Command line interface: list experiments, run one, or dump raw samples.

Exit codes: 0 pass (or dump success), 2 inconclusive, 1 error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import EXPERIMENTS, ConfigError, load_config, run_experiment


def _cmd_list(_args) -> int:
    for name in sorted(EXPERIMENTS):
        print(name)
    return 0


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config, set(EXPERIMENTS),
                             seed_override=args.seed,
                             out_override=args.out)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.experiment is not None \
            and args.experiment != config.experiment_name:
        print(f"error: config is for {config.experiment_name!r}, "
              f"not {args.experiment!r}", file=sys.stderr)
        return 1
    try:
        report = run_experiment(config)
    except (ValueError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = config.output_dir or "."
    path = report.save(out_dir)
    print(f"{report.experiment_name}: {report.verdict}  ({path})")
    for check in report.checks:
        status = "ok " if check.get("passed") else "FAIL"
        print(f"  [{status}] {check.get('name')}")
    if report.verdict == "pass":
        return 0
    if report.verdict == "inconclusive":
        print(f"inconclusive: {report.inconclusive_reason}",
              file=sys.stderr)
        return 2
    return 1


def _cmd_simulate(args) -> int:
    import numpy as np

    from .. import fluctuation_theory as ft
    from ..simulate import RngStream, sample_path
    try:
        config = load_config(args.config, set(EXPERIMENTS) | {"simulate"},
                             seed_override=args.seed, out_override=args.out)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = config.output_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    horizon = float(config.get("horizon", 4.0))
    n_dump = min(config.n_paths, int(config.get("max_dumped_paths", 50)))
    stream = RngStream(config.seed, 7)
    rows = []
    records = []
    for i in range(n_dump):
        p = sample_path(config.triplet, horizon, config.grid_step,
                        stream.substream(i))
        step = max(1, p.n_cells // int(config.get("dump_points", 400)))
        for k in range(0, p.n_cells + 1, step):
            rows.append((i, k * p.grid_step, float(p.values[k])))
        records.extend(ft.excursions_above_infimum(p))
    paths_csv = os.path.join(out_dir, "paths.csv")
    with open(paths_csv, "w") as fh:
        fh.write("path,time,value\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]:.10g},{r[2]:.10g}\n")
    exc_csv = os.path.join(out_dir, "excursions.csv")
    ft.excursions_to_csv(records, exc_csv)
    print(f"wrote {paths_csv} and {exc_csv} "
          f"({n_dump} paths, {len(records)} excursions)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="levyx",
        description="Distributional verification experiments for real "
                    "Levy processes")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="print registered experiment names")
    p_run = sub.add_parser("run", help="run one experiment from a config")
    p_run.add_argument("experiment", nargs="?", default=None,
                       help="experiment name (must match the config)")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_sim = sub.add_parser("simulate", help="dump raw path/excursion CSVs")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    if args.command == "list":
        return _cmd_list(args)
    if args.command == "run":
        code = _cmd_run(args)
        return code
    return _cmd_simulate(args)


def cli_main(argv=None) -> int:
    """Library entry point mirroring the console script."""
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
