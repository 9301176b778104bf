"""
The ``stcausal`` command line interface.
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

import yaml

from stcausal import __version__, pipeline
from stcausal.exceptions import ConfigurationError, StCausalException

logger = logging.getLogger(__name__)

EXIT_OK = 0


def _parse_overrides(assignments: List[str]) -> Dict[str, Any]:
    overrides = {}
    for assignment in assignments:
        if "=" not in assignment:
            raise ConfigurationError(
                f"the override `{assignment}` should look like key=value."
            )
        key, value = (part.strip() for part in assignment.split("=", 1))
        overrides[key] = yaml.safe_load(value) if value else None
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stcausal",
        description="Spatiotemporal causal pathway discovery for air-quality sensors.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="A .cfg, .json or .yaml configuration file.")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one configuration value, may be repeated.",
    )
    parser.add_argument(
        "--no-patterns",
        action="store_true",
        help="Skip pattern mining, every in-range sensor is a candidate.",
    )
    parser.add_argument(
        "--no-confounders", action="store_true", help="Train a single cluster."
    )
    parser.add_argument(
        "--paper-exact-pi",
        action="store_true",
        help="Divide the posteriors by the cluster mass without renormalizing them "
        "per timestamp.",
    )
    parser.add_argument("--verbose", action="store_true", help="Log progress.")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("ingest", help="Read and grid the raw tables.")
    commands.add_parser("mine", help="Mine the frequent evolving patterns.")
    commands.add_parser("candidates", help="Select the candidate causers.")
    commands.add_parser("train", help="Train the causal models.")
    evaluate = commands.add_parser(
        "evaluate", help="Score the models on held out days."
    )
    evaluate.add_argument(
        "--ablations",
        action="store_true",
        help="Also score the variants without patterns and without confounders.",
    )
    pathway = commands.add_parser("pathway", help="Expand the pathway of a series.")
    pathway.add_argument("root", help="The root series as POLLUTANT@sensor.")
    pathway.add_argument("--hops", type=int, help="The expansion depth.")
    pathway.add_argument("--season", help="The season of the models.")
    commands.add_parser("synth-bench", help="Run the synthetic recovery benchmark.")
    pca = commands.add_parser("pca", help="Project a model's training environment.")
    pca.add_argument("target", help="The modelled series as POLLUTANT@sensor.")
    pca.add_argument("--season", help="The season of the model.")
    return parser


def _load_config(args: argparse.Namespace) -> pipeline.PipelineConfig:
    overrides = _parse_overrides(args.overrides)
    if args.no_patterns:
        overrides["no_patterns"] = True
    if args.no_confounders:
        overrides["no_confounders"] = True
    if args.paper_exact_pi:
        overrides["pi_update"] = "scaled"
    return pipeline.PipelineConfig.from_file(args.config, overrides)


def run(args: argparse.Namespace) -> str:
    config = _load_config(args)
    verbose = args.verbose
    if args.command == "ingest":
        return pipeline.cmd_ingest(config, verbose=verbose)
    if args.command == "mine":
        return pipeline.cmd_mine(config, verbose=verbose)
    if args.command == "candidates":
        return pipeline.cmd_candidates(config, verbose=verbose)
    if args.command == "train":
        return pipeline.cmd_train(config, verbose=verbose)
    if args.command == "evaluate":
        return pipeline.cmd_evaluate(config, ablations=args.ablations, verbose=verbose)
    if args.command == "pathway":
        return pipeline.cmd_pathway(
            config, args.root, season=args.season, hops=args.hops
        )
    if args.command == "pca":
        return pipeline.cmd_pca(config, args.target, season=args.season)
    return pipeline.cmd_synth_bench(config, verbose=verbose)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command. Returns 0 on success, 2 on a usage or data error and 3 when a
    numerical procedure fails.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        summary = run(args)
    except StCausalException as error:
        logger.debug(error.traceback)
        print(error.error_message, file=sys.stderr)
        return error.exit_code
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
