"""Command line entry point ``cwsc``.

Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure,
3 a check failed.
"""
import argparse
import csv
import sys
from collections import defaultdict

import numpy as np

from ..errors import ConfigError, IoError, NumericalFailure
from . import checks
from .config import load_config
from .runner import run
from .svg import emit_svg

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3


def _cmd_run(args):
    cfg = load_config(args.config)
    manifest = run(cfg, workers=args.workers, resume=args.resume, outdir=args.output)
    for entry in manifest["files"]:
        print(f"{entry['sha256'][:16]}  {entry['path']}")
    return EXIT_OK


def _cmd_check(args):
    results = checks.run_suite(args.suite)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def read_curves(path):
    """Curves from a CSV: either ``x, y1, y2, ...`` or the experiment row schema.

    Experiment CSVs are reduced to the median value per ``N`` for each
    statistic, plotted against ``log10 N``.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise ConfigError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if header[:2] == ["experiment", "beta"]:
        col = {name: k for k, name in enumerate(header)}
        groups = defaultdict(lambda: defaultdict(list))
        for r in body:
            label = f"{r[col['statistic']]} beta={r[col['beta']]}"
            groups[label][int(r[col["N"]])].append(float(r[col["value"]]))
        curves = []
        for label in sorted(groups):
            Ns = sorted(groups[label])
            curves.append((label, np.log10(Ns), [float(np.median(groups[label][N])) for N in Ns]))
        return curves, "log10 N", "median"
    data = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))
    return [(header[k], data[:, 0], data[:, k]) for k in range(1, len(header))], header[0], "value"


def _cmd_plot(args):
    curves, xlabel, ylabel = read_curves(args.csv)
    emit_svg(curves, args.output, xlabel=xlabel, ylabel=ylabel)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="cwsc", description="Local law experiments for Curie-Weiss type matrices")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--output", default=None, help="output directory (overrides config and CWSC_OUTPUT_DIR)")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("check", help="run a deterministic invariant suite")
    p.add_argument("suite", choices=sorted(checks.SUITES) + ["all"])
    p.set_defaults(func=_cmd_check)
    p = sub.add_parser("plot", help="render a CSV as SVG")
    p.add_argument("csv")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
