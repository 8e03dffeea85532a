"""Command-line entry point: ``cglab <subcommand> --config PATH ...``."""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys

from .config import load_config
from .errors import (ArcRoutingError, AssemblyError, ConfigError, CoverConsistencyError, NoAdmissibleU,
                     PositivityFailure, SeparatingLoopError, SpectralConvergenceError)
from .pipeline import SUBCOMMANDS, RunOptions, export_artifacts, run_pipeline, summarize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_U = 3
EXIT_NUMERICAL = 4
EXIT_OUTPUT = 5

NUMERICAL_ERRORS = (SpectralConvergenceError, AssemblyError, ArcRoutingError, CoverConsistencyError,
                    PositivityFailure, FloatingPointError)


def _positive(name):
    def check(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be at least 1")
        return v
    return check


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cglab", description="Genus-3 Calabi-Gray construction toolkit")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--level", type=int, default=None, help="mesh level override (0-6)")
    p.add_argument("--eigs", type=_positive("--eigs"), default=16, help="eigenpairs to compute")
    p.add_argument("--samples", type=_positive("--samples"), default=100, help="sample points for identity checks")
    p.add_argument("--cover", type=_positive("--cover"), default=1, help="cyclic unramified cover degree")
    p.add_argument("--out", default=".", help="parent directory for the cglab-<hash> output folder")
    p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    return p


def _diagnostic(kind: str, message: str, extra=()) -> str:
    lines = [f"error: {kind}", f"  {message}"]
    lines += [f"  {k}: {v}" for k, v in extra]
    return "\n".join(lines)


def _thread_limit():
    raw = os.environ.get("CGLAB_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"CGLAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"CGLAB_THREADS must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.level is not None and not 0 <= args.level <= 6:
            raise ConfigError(f"--level must be in [0, 6], got {args.level}")
        opts = RunOptions(level=args.level, eigs=args.eigs, samples=args.samples, cover=args.cover)
        with _thread_limit():
            report = run_pipeline(cfg, args.subcommand, opts)
    except ConfigError as exc:
        print(_diagnostic("invalid configuration", str(exc)), file=sys.stderr)
        return EXIT_CONFIG
    except SeparatingLoopError as exc:
        print(_diagnostic("invalid cover request", str(exc)), file=sys.stderr)
        return EXIT_CONFIG
    except NoAdmissibleU as exc:
        print(_diagnostic("no admissible u", str(exc),
                          [("certificate", [i + 1 for i in exc.certificate]), ("margin", f"{exc.margin:.6g}")]),
              file=sys.stderr)
        return EXIT_NO_U
    except NUMERICAL_ERRORS as exc:
        print(_diagnostic("numerical failure", f"{type(exc).__name__}: {exc}"), file=sys.stderr)
        return EXIT_NUMERICAL

    if args.out is not None:
        try:
            export_artifacts(report, args.out)
        except OSError as exc:
            print(_diagnostic("cannot write output", f"{args.out}: {exc.strerror or exc}"), file=sys.stderr)
            return EXIT_OUTPUT
    if not args.quiet:
        print(summarize(report))
    if report.status == "no_admissible_u":
        print(_diagnostic("no admissible u", report.diagnostic or "hemisphere condition fails",
                          [("certificate", report.get("solve.certificate")), ("margin", report.get("solve.margin"))]),
              file=sys.stderr)
        return EXIT_NO_U
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
