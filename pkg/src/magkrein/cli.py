"""Command line entry point: ``magkrein study|figure|diag``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .green import SpectralWindow, WindowError
from .specfun import NonConvergenceError, PoleError
from .study import (
    ConfigError,
    StudyConfig,
    diagnostics,
    diagnostics_csv,
    emit_figure_data,
    load_report,
    run_convergence_study,
    _atomic_write,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

log = logging.getLogger("magkrein")


def _parse_n_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --n-list {text!r}") from None


def _parse_window(text: str) -> SpectralWindow:
    try:
        lo, hi = (float(v) for v in text.split(","))
        return SpectralWindow(lo, hi)
    except (ValueError, WindowError):
        raise argparse.ArgumentTypeError(f"bad --window {text!r}, expected lo,hi") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with StudyConfig fields")
    common.add_argument("--output", type=Path, help="output directory")
    common.add_argument("--n-list", type=_parse_n_list, help="comma separated point counts")
    common.add_argument("--window", type=_parse_window, action="append", help="lo,hi (repeatable)")
    common.add_argument("--threads", type=int, help="worker threads for the (N, window) grid")
    common.add_argument("--seedless", action="store_true", help="reserved; the computation uses no randomness")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="magkrein", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("study", parents=[common], help="run the convergence study and write all outputs")
    fig = sub.add_parser("figure", parents=[common], help="re-emit figure CSVs from an existing report.json")
    fig.add_argument("--index", type=int, help="window index (default: all)")
    diag = sub.add_parser("diag", parents=[common], help="Schur-Holmgren diagnostics per N")
    diag.add_argument("--z-probe", type=float, help="probe energy (default -2|B| or first window midpoint)")
    return parser


def load_config(args) -> StudyConfig:
    cfg = StudyConfig.from_json(args.config) if args.config else StudyConfig()
    overrides = {}
    if args.output is not None:
        overrides["output_dir"] = args.output
    if args.n_list is not None:
        overrides["n_list"] = args.n_list
    if args.window:
        overrides["windows"] = tuple(args.window)
    if args.threads is not None:
        overrides["threads"] = args.threads
    if getattr(args, "z_probe", None) is not None:
        overrides["z_probe"] = args.z_probe
    if not overrides:
        return cfg
    fields = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    if "windows" not in overrides and args.config is None:
        fields["windows"] = None
    fields.update(overrides)
    return StudyConfig(**fields)


def _run(args) -> int:
    if args.command == "figure":
        out = args.output or StudyConfig().output_dir
        if args.config:
            out = args.output or StudyConfig.from_json(args.config).output_dir
        report = load_report(out / "report.json")
        indices = [args.index] if args.index is not None else range(len(report.windows))
        for k in indices:
            if not 0 <= k < len(report.windows):
                raise ConfigError(f"--index {k} out of range (report has {len(report.windows)} windows)")
            path = out / f"figure_w{k}.csv"
            _atomic_write(path, emit_figure_data(report, k))
            print(path)
        return EXIT_OK

    cfg = load_config(args)
    if args.command == "study":
        report = run_convergence_study(cfg)
        for k, w in enumerate(report.windows):
            for fit in w.fits:
                if fit.a is not None:
                    print(f"window {k} l={fit.l:+d} z*={fit.z_exact:.8f} a={fit.a:.3f} c={fit.c:.3f}")
        print(f"wrote {cfg.output_dir / 'report.json'}")
        return EXIT_OK

    rows = diagnostics(cfg)
    text = diagnostics_csv(rows)
    _atomic_write(cfg.output_dir / "diagnostics.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (NonConvergenceError, PoleError, WindowError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("I/O error on %s: %s", exc.filename or "?", exc.strerror or exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
