"""
poissonet.cli - Command-line front end.

Subcommands:

    simulate   draw an ER network and its Poisson counts
    infer      preprocess a count file and infer its network
    benchmark  TPR/FPR over a grid of simulated networks
    entropy    evaluate the entropy estimators for one rate triple

Settings resolve as defaults, then --config (or the user settings file),
then flags. Exit codes: 0 success, 1 input error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from . import __version__, pipeline
from .config import (
    OPTIONAL_KEYS,
    get_default_settings,
    load_settings,
    merge_overrides,
    validate_settings,
)
from .entropy import (
    TruncationPolicy,
    bivariate_joint_entropy_exact,
    joint_entropy_approx,
    mutual_information_poisson,
    mutual_information_unhatted,
)
from .logging_config import set_run_context, setup_logging
from .rates import RateMatrix

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_RUNTIME_ERROR = 2


def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="settings file (flat TOML)")
    parent.add_argument("--seed", type=int, help="master random seed")
    parent.add_argument("--workers", type=int, help="worker processes (default $POISSONET_WORKERS or 1)")
    parent.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING, ERROR or CRITICAL")
    parent.add_argument("--log-file", dest="log_file", help="log file (default in the config directory)")
    parent.add_argument("--tail-mass", dest="tail_mass", type=float, help="series truncation tail mass")
    return parent


def _inference_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--alpha", type=float, help="significance level")
    parent.add_argument("--shuffles", type=int, help="shuffle-test permutations")
    parent.add_argument("--estimator", choices=("poisson", "gaussian"))
    parent.add_argument("--lag", type=int, choices=(0, 1), help="1 conditions on the target's past")
    parent.add_argument("--max-parents", dest="max_parents", type=int, help="0 means no cap")
    parent.add_argument(
        "--forward-null", dest="forward_null", choices=("single", "max"),
        help="forward-step null: permute the candidate only, or every remaining candidate",
    )
    parent.add_argument(
        "--box-cox-gamma", dest="box_cox_gamma", type=float,
        help="box-cox exponent applied to counts + 1 before the gaussian estimator",
    )
    return parent


def _simulation_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--er-p", dest="er_p", type=float, help="edge probability")
    parser.add_argument("--edge-rate", dest="edge_rate", type=float)
    parser.add_argument("--base-rate", dest="base_rate", type=float)
    parser.add_argument("--noise-rate", dest="noise_rate", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = _common_parent()
    inference = _inference_parent()
    parser = argparse.ArgumentParser(
        prog="poissonet",
        description="Network inference from Poisson count data by conditional mutual information",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="simulate an ER network and counts")
    simulate.add_argument("-o", "--output", required=True, help="output directory")
    simulate.add_argument("--nodes", type=int)
    simulate.add_argument("--samples", type=int)
    _simulation_args(simulate)

    infer = sub.add_parser("infer", parents=[common, inference], help="infer a network from a count CSV")
    infer.add_argument("input", help="count CSV: rows are variables, first column the label")
    infer.add_argument("-o", "--output", required=True, help="output directory")
    infer.add_argument("--min-count", dest="min_count", type=int, help="keep rows with total > this")
    infer.add_argument("--scale", action=argparse.BooleanOptionalAction, default=None,
                       help="replace rows by floor(x / mean(x))")
    infer.add_argument("--screen", choices=("none", "poisson", "negbin"))
    infer.add_argument("--n-boot", dest="n_boot", type=int, help="screening bootstrap replicates")

    bench = sub.add_parser("benchmark", parents=[common, inference], help="TPR/FPR over simulated networks")
    bench.add_argument("-o", "--output", required=True, help="output directory")
    bench.add_argument("--grid-nodes", dest="grid_nodes", type=int, nargs="+")
    bench.add_argument("--grid-p", dest="grid_p", type=float, nargs="+")
    bench.add_argument("--grid-samples", dest="grid_samples", type=int, nargs="+")
    bench.add_argument("--methods", nargs="+", choices=("poisson", "gaussian"))
    bench.add_argument("--realizations", type=int)
    _simulation_args(bench)

    entropy = sub.add_parser("entropy", parents=[common], help="evaluate entropy estimators")
    entropy.add_argument("--l11", type=float, required=True, help="base rate of X1")
    entropy.add_argument("--l22", type=float, required=True, help="base rate of X2")
    entropy.add_argument("--l12", type=float, required=True, help="coupling rate")
    return parser


def resolve_settings(args: argparse.Namespace) -> Dict[str, Any]:
    """Defaults <- config file <- flags, validated."""
    settings = load_settings(args.config)
    keys = set(get_default_settings()) | set(OPTIONAL_KEYS)
    flags = {k: v for k, v in vars(args).items() if k in keys}
    settings = merge_overrides(settings, flags, source="command line")
    return validate_settings(settings)


def entropy_summary(l11: float, l22: float, l12: float, policy: TruncationPolicy) -> Dict[str, float]:
    """Approximate and exact joint entropies plus hatted and unhatted MI."""
    rates = RateMatrix([[l11, l12], [l12, l22]])
    approx = joint_entropy_approx(rates, policy=policy)
    exact = bivariate_joint_entropy_exact(l11, l22, l12, policy)
    return {
        "l11": l11,
        "l22": l22,
        "l12": l12,
        "joint_entropy_approx": approx,
        "joint_entropy_exact": exact,
        "relative_error": abs(approx - exact) / exact if exact > 0 else 0.0,
        "mi_hatted": mutual_information_poisson(l11, l22, l12, policy),
        "mi_unhatted": mutual_information_unhatted(l11, l22, l12, policy),
    }


def _dispatch(args: argparse.Namespace, settings: Dict[str, Any]) -> None:
    if args.command == "simulate":
        outputs = pipeline.run_simulate(settings, args.output)
    elif args.command == "infer":
        config = pipeline.PipelineConfig.from_settings(settings, args.input, args.output)
        outputs = pipeline.run_infer(config)
    elif args.command == "benchmark":
        outputs = pipeline.run_grid(settings, args.output)
    else:
        summary = entropy_summary(
            args.l11, args.l22, args.l12, TruncationPolicy(tail_mass=settings["tail_mass"])
        )
        print(json.dumps(summary, indent=2, sort_keys=True))
        return
    for name, path in sorted(outputs.files.items()):
        print(f"{name}: {path}")


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the subcommand and return the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = resolve_settings(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    try:
        setup_logging(
            level=settings["log_level"],
            max_bytes=int(settings["log_max_size_mb"] * 1024 * 1024),
            log_path=args.log_file,
        )
    except OSError as e:
        print(f"error: could not set up logging: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    set_run_context(args.command, settings["seed"])
    logger.info(f"Starting {args.command}")

    try:
        _dispatch(args, settings)
    except ValueError as e:
        logger.error(f"Input error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except Exception as e:
        logger.exception(f"Runtime error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR

    logger.info(f"Finished {args.command}")
    return EXIT_OK
