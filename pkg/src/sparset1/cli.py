"""``t1`` command line: verify, grid-mc, consequences, lemmas, report."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import (ConfigError, ExperimentConfig, aggregate_reports, run_consequences, run_grid_mc,
                          run_lemma_suite, run_t1_verify)
from .grid import GridError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_plain) + "\n"


def _table(report: dict) -> list[dict]:
    for key in ("trials", "rows", "checks", "lines"):
        if key in report:
            rows = []
            for row in report[key]:
                rows.append({k: (json.dumps(v, sort_keys=True, default=_plain) if isinstance(v, (dict, list)) else v)
                             for k, v in row.items()})
            return rows
    return []


def to_csv(report: dict) -> str:
    rows = _table(report)
    if not rows:
        return ""
    fields = list(dict.fromkeys(k for row in rows for k in row))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (_plain(v) if isinstance(v, np.generic) else v) for k, v in row.items()})
    return buf.getvalue()


def _floats(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "/" in part:
            a, b = part.split("/")
            out.append(float(a) / float(b))
        elif part:
            out.append(float(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="t1", description="Sparse-bound experiments for discretized CZ forms.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--kernel", default="hilbert", help="hilbert | smoothed:DELTA | riesz2d | zero")
        p.add_argument("--d", type=int, default=1)
        p.add_argument("--level", type=int, default=10, help="mesh depth L of the unit window")
        p.add_argument("--gamma", type=float, default=0.25)
        p.add_argument("--r", type=int, default=4)
        p.add_argument("--trials", type=int, default=20)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--p", default="5/4,2,4", help="comma separated exponents")
        p.add_argument("--weight", default="one", help="one | power:A")
        p.add_argument("--out", default=None, help="output file (stdout if omitted)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    for name, helptext in [("verify", "end-to-end sparse bound check on random pairs"),
                           ("grid-mc", "Monte Carlo statistics of bad cubes"),
                           ("consequences", "L^p and weighted consequences of the sparse bound"),
                           ("lemmas", "lemma-level property suite")]:
        p = sub.add_parser(name, help=helptext)
        common(p)
        if name == "grid-mc":
            p.add_argument("--samples", type=int, default=500)
            p.add_argument("--r-sweep", default="4,6,8,10")
            p.add_argument("--zero-shift", action="store_true", help="force omega = 0")
    p = sub.add_parser("report", help="aggregate JSON reports from a directory")
    p.add_argument("directory")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig(kernel=args.kernel, d=args.d, level=args.level, gamma=args.gamma, r=args.r,
                           trials=args.trials, seed=args.seed, p=_floats(args.p), weight=args.weight)
    if getattr(args, "samples", None) is not None:
        cfg.samples = args.samples
    if getattr(args, "r_sweep", None):
        cfg.r_sweep = [int(x) for x in _floats(args.r_sweep)]
    cfg.validate()
    return cfg


def write_plot_files(report: dict, out: Path) -> None:
    """CSV data next to the report plus a gnuplot script for the main curve."""
    data = out.with_suffix(".csv")
    data.write_text(to_csv(report))
    kind = report.get("kind")
    if kind == "verify":
        script = f'set datafile separator ","\nset xlabel "trial"\nset ylabel "ratio"\n' \
                 f'plot "{data.name}" using "trial":"ratio" with points title "|B_T| / Lambda_0"\n'
    elif kind == "grid-mc":
        script = f'set datafile separator ","\nset logscale y 2\nset xlabel "r"\n' \
                 f'plot "{data.name}" using "r":"bad_frequency" with linespoints title "bad frequency", \\\n' \
                 f'     "{data.name}" using "r":"bad_energy" with linespoints title "bad energy"\n'
    else:
        return
    out.with_suffix(".gp").write_text(script)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "report":
            report = aggregate_reports(args.directory)
        else:
            cfg = config_from_args(args)
            if args.command == "verify":
                report = run_t1_verify(cfg)
            elif args.command == "grid-mc":
                report = run_grid_mc(cfg, force_zero=args.zero_shift)
            elif args.command == "consequences":
                report = run_consequences(cfg)
            else:
                report = run_lemma_suite(cfg)
    except (ConfigError, GridError, ValueError) as exc:
        print(f"t1: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = dumps(report) if args.format == "json" else to_csv(report)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        if args.format == "json":
            write_plot_files(report, out)
    else:
        sys.stdout.write(text)
    if not report.get("passed", False):
        failing = report.get("summary", {}).get("failing_trial")
        if failing is not None:
            print(f"t1: certificate failure in trial {failing} (seed {report['config']['seed']})", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
