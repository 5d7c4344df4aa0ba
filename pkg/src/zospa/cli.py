"""Command line: ``zospa run|check|validate|plot``."""

from __future__ import annotations

import argparse
import os
import sys

from .exceptions import ConfigurationError


def _seeds(text: str) -> list:
    """``"3"``, ``"0,1,2"`` or ``"0-9"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1) if not part.startswith("-") else part[1:].split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return out


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zospa", description="Zeroth-order saddle-point experiments.")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed-override", type=_seeds, help="replace the config's seeds, e.g. 7 or 0-9 or 1,4")
    r.add_argument("--out-dir", help="write artifacts here instead of output.dir")
    r.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    r.add_argument("--record-every", type=_positive, help="gap evaluation cadence in iterations")

    c = sub.add_parser("check", help="run theory checks (all by default)")
    c.add_argument("names", nargs="*")
    c.add_argument("--out-dir", default=".", help="directory for checks.csv")
    c.add_argument("--seed-override", type=int, default=0)

    v = sub.add_parser("validate", help="dry-run a config")
    v.add_argument("config")

    pl = sub.add_parser("plot", help="plot a traces CSV as SVG")
    pl.add_argument("traces")
    pl.add_argument("--out", help="output SVG path")
    pl.add_argument("--x-axis", choices=["iteration", "oracle_calls"], default="iteration")
    return p


def _load(path, args=None) -> dict:
    from .cli_runner import load_config

    cfg = load_config(path)
    if args is not None:
        if args.seed_override:
            cfg["solver"]["seeds"] = sorted(set(args.seed_override))
        if args.out_dir:
            cfg["output"]["dir"] = args.out_dir
        if args.record_every:
            cfg["solver"]["record_every"] = args.record_every
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            from .cli_runner import run_experiment

            res = run_experiment(_load(args.config, args), jobs=args.jobs)
            print(f"traces: {res.traces_path}")
            print(f"aggregate: {res.aggregate_path}")
            if res.plot_path:
                print(f"plot: {res.plot_path}")
            for e in res.errors:
                print(f"error: {e}", file=sys.stderr)
            return 1 if res.errors else 0
        if args.verb == "check":
            from .theory_checks import run_checks, summary, write_reports_csv

            reports = run_checks(args.names, seed=args.seed_override)
            os.makedirs(args.out_dir, exist_ok=True)
            write_reports_csv(os.path.join(args.out_dir, "checks.csv"), reports)
            print(summary(reports))
            return 0 if all(r.passed for r in reports) else 1
        if args.verb == "validate":
            from .cli_runner import validate

            for line in validate(_load(args.config)):
                print(line)
            print("config OK")
            return 0
        if args.verb == "plot":
            from .plotting import plot_traces

            print(plot_traces(args.traces, args.out, args.x_axis))
            return 0
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
