"""Command-line entry point: ``qnetsim run|validate|presets|sweep``.

Exit codes: 0 success, 2 invalid scenario, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .errors import ParseError, QNetError, ValidationError
from .scenario import PRESETS, emit_report, parse_scenario, run_scenario, shipped_scenarios, sweep

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _config_path(value: str) -> str:
    shipped = shipped_scenarios()
    return str(shipped[value]) if value in shipped else value


def _load(args):
    sc = parse_scenario(_config_path(args.config))
    return sc.with_overrides(
        seed=args.seed, replications=getattr(args, "replications", None),
        oracle_controller=True if getattr(args, "oracle_controller", False) else None,
        jitter_mode=getattr(args, "jitter_mode", None),
    )


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qnetsim", description="Entanglement network simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, runs=True):
        p.add_argument("--config", required=True, help="scenario JSON file or shipped scenario name")
        p.add_argument("--seed", type=_u64, default=None, help="root seed (overrides the file)")
        if runs:
            p.add_argument("--replications", type=_positive, default=None)
            p.add_argument("--out", default="qnetsim-out", help="output directory")
            p.add_argument("--oracle-controller", action="store_true", help="remove all control-plane delays")
            p.add_argument("--jitter-mode", choices=("smooth", "hard"), default=None)
            p.add_argument("--workers", type=_positive, default=1, help="parallel replication processes")

    p = sub.add_parser("run", help="run a scenario and write reports")
    common(p)
    p.add_argument("--format", choices=("csv", "structured", "both"), default="both")

    p = sub.add_parser("validate", help="check a scenario file")
    common(p, runs=False)

    sub.add_parser("presets", help="list hardware presets and shipped scenarios")

    p = sub.add_parser("sweep", help="grid sweep, one CSV row per point")
    common(p)
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="PATH=V1,V2,...",
                   help="dotted scenario path and values, e.g. links.*.length_km=10,20,40")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            print(json.dumps({"presets": PRESETS, "scenarios": sorted(shipped_scenarios())}, indent=2,
                             sort_keys=True))
            return EXIT_OK
        sc = _load(args)
        if args.command == "validate":
            print(f"ok {sc.name or args.config} config_hash={sc.config_hash()}")
            return EXIT_OK
        if args.command == "run":
            rs = run_scenario(sc, args.workers)
            for f in emit_report(rs, args.out, args.format):
                print(f)
            return EXIT_OK
        grid = {}
        for item in args.sets:
            if "=" not in item:
                raise ValidationError([(item, "expected PATH=V1,V2,...")])
            key, vals = item.split("=", 1)
            grid[key] = [_parse_value(v) for v in vals.split(",")]
        if not grid:
            raise ValidationError([("--set", "at least one sweep parameter is required")])
        raw = json.loads(json.dumps(sc.doc))
        header, rows = sweep(raw, grid, args.workers)
        import os
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "sweep.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        print(path)
        return EXIT_OK
    except (ParseError, ValidationError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QNetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
