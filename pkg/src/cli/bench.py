"""
Benchmark Command Line

Parses the ``star-rz`` command line into an ExperimentConfig, runs the
experiment and writes the result file. Exit codes: 0 success, 2 invalid
arguments or configuration, 3 numerical failure, 1 anything else.
"""

import argparse
from typing import List, Optional, Sequence

import structlog
from pydantic import ValidationError

from src import __version__
from src.config.settings import get_settings
from src.integrations.result_writer import ResultWriter
from src.models.discretization import RHSMode
from src.models.experiment import (
    ExperimentConfig,
    ExperimentName,
    OutputFormat,
    SolverName,
    SweepPoint,
)
from src.models.parameters import CaseLabel
from src.services.experiments import ExperimentRunner
from src.utils.error_handling import ErrorCategory, StarRZError
from src.utils.logger import setup_logging

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _split(values: Optional[Sequence[str]]) -> List[str]:
    """Accept both ``--N 20 40`` and ``--N 20,40``."""
    if not values:
        return []
    return [item for value in values for item in value.split(",") if item.strip()]


def _int_list(values: Optional[Sequence[str]]) -> Optional[List[int]]:
    return [int(v) for v in _split(values)] if values is not None else None


def _float_list(values: Optional[Sequence[str]]) -> Optional[List[float]]:
    return [float(v) for v in _split(values)] if values is not None else None


def _sweep(values: Optional[Sequence[str]]) -> Optional[List[SweepPoint]]:
    """M:tol:trunc entries; an empty string gives an empty sweep."""
    if values is None:
        return None
    points = []
    for entry in _split(values):
        try:
            M, tol, trunc = entry.split(":")
        except ValueError:
            raise argparse.ArgumentTypeError(f"sweep entry {entry!r} is not M:tol:trunc") from None
        points.append(SweepPoint(M=int(M), tol=float(tol), trunc=float(trunc)))
    return points


def build_parser() -> argparse.ArgumentParser:
    """Argument parser of the benchmark harness."""
    parser = argparse.ArgumentParser(
        prog="star-rz",
        description="Star-product low-rank solver benchmarks for generalized Rosen-Zener models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("experiment", choices=[e.value for e in ExperimentName])
    parser.add_argument("--case", choices=[c.value for c in CaseLabel], default=CaseLabel.A.value)
    parser.add_argument("--N", nargs="+", help="System sizes (even), space or comma separated")
    parser.add_argument("--M", type=int, help="Truncation order, per case if omitted")
    parser.add_argument("--t0", type=float, help="Initial time")
    parser.add_argument("--tf", type=float, help="Final time")
    parser.add_argument("--tol", type=float, help="Stopping tolerance")
    parser.add_argument("--trunc", type=float, help="Truncation threshold")
    parser.add_argument("--max-iter", dest="max_iter", type=int, help="Iteration cap")
    parser.add_argument(
        "--solver", choices=[s.value for s in SolverName], default=SolverName.STAR.value
    )
    parser.add_argument("--rhs", choices=[m.value for m in RHSMode], help="Right-hand side")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="Output file, <output_dir>/<experiment>.<format> if omitted")
    parser.add_argument(
        "--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value
    )
    parser.add_argument("--repeats", type=int, help="Timing repetitions")
    parser.add_argument("--ell", nargs="+", help="Powers for the Frobenius bounds")
    parser.add_argument("--lengths", nargs="+", help="Interval lengths for exp4")
    parser.add_argument("--steps", nargs="+", help="RK4 step counts")
    parser.add_argument("--rtols", nargs="+", help="DP54 tolerances")
    parser.add_argument("--sweep", nargs="*", help="Star settings M:tol:trunc for exp3")
    parser.add_argument("--samples", type=int, default=201, help="Sample times for exp1")
    parser.add_argument(
        "--frobenius-method", dest="frobenius_method", choices=["kronecker", "columns"],
        default="kronecker",
    )
    parser.add_argument("--parallel", action="store_true", help="Run untimed cells concurrently")
    parser.add_argument(
        "--no-baseline", dest="baseline", action="store_false", help="Skip baseline integrators"
    )
    parser.add_argument("--log-level", dest="log_level", help="Override the configured level")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Validated configuration; unset options fall back to settings."""
    settings = get_settings()
    data = {
        "experiment": args.experiment,
        "case": args.case,
        "N": _int_list(args.N),
        "M": args.M,
        "t0": args.t0,
        "tf": args.tf,
        "tol": args.tol,
        "trunc": args.trunc,
        "max_iter": args.max_iter,
        "solver": args.solver,
        "rhs_mode": args.rhs,
        "seed": args.seed,
        "out": args.out,
        "format": args.format,
        "repeats": settings.repeats if args.repeats is None else args.repeats,
        "sweep": _sweep(args.sweep),
        "samples": args.samples,
        "frobenius_method": args.frobenius_method,
        "parallel": args.parallel or settings.parallel_cells,
        "baseline": args.baseline,
    }
    lists = {
        "ell": _int_list(args.ell),
        "lengths": _float_list(args.lengths),
        "steps": _int_list(args.steps),
        "rtols": _float_list(args.rtols),
    }
    data.update({key: value for key, value in lists.items() if value is not None})
    return ExperimentConfig(**data)


def _exit_code(error: StarRZError) -> int:
    if error.category in (
        ErrorCategory.VALIDATION, ErrorCategory.CONFIGURATION, ErrorCategory.BUDGET
    ):
        return EXIT_USAGE
    if error.category == ErrorCategory.NUMERICAL:
        return EXIT_NUMERICAL
    return EXIT_FAILURE


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, run and write; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    logger = structlog.get_logger(__name__)

    try:
        config = config_from_args(args)
    except (ValidationError, ValueError, argparse.ArgumentTypeError) as e:
        logger.error("Invalid configuration", error=str(e))
        return EXIT_USAGE

    try:
        result = ExperimentRunner().run(config)
        path = ResultWriter().write(result, config.out, config.format)
    except StarRZError as e:
        logger.error("Experiment failed", **e.to_dict())
        return _exit_code(e)
    except Exception as e:
        logger.exception("Unexpected failure", error=str(e))
        return EXIT_FAILURE

    logger.info("Experiment complete", experiment=config.experiment.value, path=str(path))
    return EXIT_OK
