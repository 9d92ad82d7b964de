"""Command-line entry point.

Subcommands:
    nmse      evaluate a baseline phase configuration (equal or random)
    optimize  run one evolutionary algorithm and report the final objective
    compare   run several algorithms on paired network draws
    validate  check closed-form statistics against Monte Carlo sampling
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import kernels
from .errors import CfrisError, ConfigurationError
from .harness import (
    ALGORITHMS,
    ExperimentConfig,
    SeedsConfig,
    load_config,
    run_comparison,
    run_experiment,
)
from .validation import DEFAULT_SAMPLES, run_validation


def _base_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON experiment config; defaults used if omitted")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfris",
        description="Cell-free massive MIMO with a reconfigurable surface: "
        "channel-estimation quality and phase design.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_nmse = sub.add_parser("nmse", help="evaluate a fixed-phase baseline")
    _base_flags(p_nmse)
    p_nmse.add_argument(
        "--algo", default="eps", choices=("eps", "rps"),
        help="equal phases or averaged random phases",
    )
    p_nmse.add_argument("--trials", type=int, help="random draws for the rps baseline")

    p_opt = sub.add_parser("optimize", help="run one optimizer")
    _base_flags(p_opt)
    p_opt.add_argument("--algo", default="ade", choices=("ade", "de", "ga"))

    p_cmp = sub.add_parser("compare", help="run algorithms on paired draws")
    _base_flags(p_cmp)
    p_cmp.add_argument(
        "--algo", default=",".join(ALGORITHMS),
        help="comma-separated algorithm list (default: all)",
    )
    p_cmp.add_argument("--trials", type=int, help="override the number of network draws")

    p_val = sub.add_parser("validate", help="closed forms vs Monte Carlo")
    p_val.add_argument("--trials", type=int, default=DEFAULT_SAMPLES,
                       help="Monte Carlo samples per check")
    p_val.add_argument("--seed", type=int, default=2024)
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = dataclasses.replace(
            config, seeds=dataclasses.replace(config.seeds, master=args.seed)
        )
    if args.out is not None:
        config = dataclasses.replace(config, output_dir=args.out)
    return config


def _cmd_nmse(args: argparse.Namespace) -> int:
    config = _load(args)
    config = dataclasses.replace(config, algorithm=args.algo)
    if args.trials is not None:
        config = dataclasses.replace(config, random_draws=args.trials)
    rows = run_experiment(config)
    for row in rows:
        print(f"{row.algorithm} seed={row.seed} nmse={row.nmse:.6f}")
    mean = sum(r.nmse for r in rows) / len(rows)
    print(f"mean_nmse={mean:.6f}")
    return 0


def _cmd_optimize(args: argparse.Namespace) -> int:
    config = _load(args)
    config = dataclasses.replace(config, algorithm=args.algo)
    rows = run_experiment(config)
    for row in rows:
        print(
            f"{row.algorithm} seed={row.seed} nmse={row.nmse:.6f} "
            f"evaluations={row.evaluations}"
        )
    mean = sum(r.nmse for r in rows) / len(rows)
    print(f"mean_nmse={mean:.6f}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.trials is not None:
        config = dataclasses.replace(
            config,
            seeds=SeedsConfig(master=config.seeds.master, n_geometries=args.trials),
        )
    algorithms = tuple(a.strip() for a in args.algo.split(",") if a.strip())
    result = run_comparison(config, algorithms)
    width = max(len(a) for a in algorithms)
    for algorithm in algorithms:
        line = (
            f"{algorithm:<{width}}  mean_nmse={result.mean_nmse[algorithm]:.6f}  "
            f"std={result.std_nmse[algorithm]:.6f}"
        )
        if result.mean_se is not None:
            line += f"  mean_se={result.mean_se[algorithm]:.4f}"
        print(line)
    if result.improvement_over_de_pct is not None:
        print(f"ade improvement over de: {result.improvement_over_de_pct:.2f}%")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    checks = run_validation(n_samples=args.trials, seed=args.seed)
    for check in checks:
        print(check.describe())
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"{len(failed)} of {len(checks)} checks failed")
        return 1
    print(f"all {len(checks)} checks passed")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(name)s %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.getLogger("cfris").info("kernel backend: %s", kernels.active_backend())
    handlers = {
        "nmse": _cmd_nmse,
        "optimize": _cmd_optimize,
        "compare": _cmd_compare,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except CfrisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
