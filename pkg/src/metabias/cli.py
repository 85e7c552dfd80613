"""Command-line front end.

Subcommands
-----------
analyze    per-method estimates for a study CSV (Table-style workflow)
calibrate  publishing-rate calibration table over a scenario grid
simulate   AMSE/bias/coverage/power metrics over a scenario grid
bench      timing comparison of the compiled and pure-Python kernel lanes

Output CSVs are schema-stable (fixed column order, '.' decimal separator,
6 significant digits).  Exit code 0 means no fatal error; per-method soft
failures surface in the output, never as a nonzero exit.
"""

from __future__ import annotations

import argparse
import sys

from ._core import backend_name
from .errors import MetabiasError
from .harness import (analyze_dataset, load_run_config_file, run_calibrate,
                      run_simulate)
from .pooling import METHODS


def _write_rows(rows: list[str], out_path: str | None) -> None:
    text = "\n".join(rows) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_methods(spec: str) -> tuple[str, ...]:
    methods = tuple(s.strip() for s in spec.split(",") if s.strip())
    for m in methods:
        if m not in METHODS:
            raise MetabiasError(
                f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    return methods


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metabias",
        description="Publication-bias adjustment estimators and a Monte "
                    "Carlo evaluation harness for continuous outcomes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="analyze a study CSV")
    p_an.add_argument("dataset", help="CSV of per-arm summaries or "
                                      "precomputed effects")
    p_an.add_argument("--methods", default=None,
                      help="comma-separated subset of: " + ", ".join(METHODS))
    p_an.add_argument("--alpha", type=float, default=0.05)
    p_an.add_argument("--out", default=None, help="output CSV path (default stdout)")

    for name, help_text in (("calibrate", "calibrate publishing rates"),
                            ("simulate", "run the scenario grid")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (0 = auto; never changes results)")
        if name == "simulate":
            p.add_argument("--methods", default=None,
                           help="override the config method list")

    p_b = sub.add_parser("bench", help="compare kernel lanes")
    p_b.add_argument("--repeats", type=int, default=3)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            if args.methods is None:
                rows = analyze_dataset(args.dataset, alpha=args.alpha)
            else:
                rows = analyze_dataset(args.dataset,
                                       methods=_parse_methods(args.methods),
                                       alpha=args.alpha)
            _write_rows(rows, args.out)
            return 0
        if args.command in ("calibrate", "simulate"):
            cfg = load_run_config_file(args.config, args.command)
            if args.seed is not None:
                cfg = _replace(cfg, seed=args.seed)
            if args.command == "simulate" and args.methods is not None:
                cfg = _replace(cfg, methods=_parse_methods(args.methods))
            threads = args.threads
            runner = run_simulate if args.command == "simulate" else run_calibrate
            rows = runner(cfg, threads=threads)
            _write_rows(rows, args.out or cfg.out)
            return 0
        if args.command == "bench":
            from .bench import run_bench
            print(f"active backend: {backend_name()}")
            run_bench(repeats=args.repeats)
            return 0
    except MetabiasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _replace(cfg, **kw):
    import dataclasses
    return dataclasses.replace(cfg, **kw)


if __name__ == "__main__":
    sys.exit(main())
