"""
Command line entry point.

    gatesel run experiment.yaml [--workers N] [--output-dir DIR]
    gatesel rank data.csv --method {fisher,mi}
    gatesel map cube.json {selector.json|checkpoints/} out.ppm [--q N]
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import pandas as pd
from concurrent_log_handler import ConcurrentRotatingFileHandler

from . import __version__
from .baselines import fisher_score_rank, mutual_info_rank
from .config import ConfigManager, resolve_workers
from .data import SplitSpec, load_cube, load_delimited, mean_center_channels, minmax_scale
from .errors import ConfigError, GateselError
from .evaluation import KNN, LINEAR_SVM, ClassifierSpec
from .experiment import map_from_checkpoint, report_digest, run_experiment
from .persistence import CheckpointStore, load_selector

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
EXIT_OK = 0
EXIT_CELLS_FAILED = 1
EXIT_ERROR = 2


def setup_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    if log_file:
        handler = ConcurrentRotatingFileHandler(log_file, "a", maxBytes=10 * 1024 * 1024, backupCount=5)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler.setLevel(level)
        logging.getLogger().addHandler(handler)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gatesel", description="Gated-MLP feature selection experiments")
    parser.add_argument("--version", action="version", version=f"gatesel {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    verbs = parser.add_subparsers(dest="verb", required=True)

    run = verbs.add_parser("run", help="run an experiment described by a YAML file")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=None, help="parallel grid cells (overrides $GATESEL_WORKERS)")
    run.add_argument("--output-dir", default=None)

    rank = verbs.add_parser("rank", help="rank the features of a dataset with a filter method")
    rank.add_argument("dataset")
    rank.add_argument("--method", choices=("fisher", "mi"), required=True)
    rank.add_argument("--bins", type=int, default=10, help="equal-width bins for mutual information")
    rank.add_argument("--label-column", default="-1")
    rank.add_argument("--delimiter", default=",")
    rank.add_argument("--no-header", action="store_true")
    rank.add_argument("--top", type=int, default=None)

    mapping = verbs.add_parser("map", help="classify a cube on the bands picked by a selector")
    mapping.add_argument("cube", help="cube descriptor (JSON)")
    mapping.add_argument("checkpoint", help="selector checkpoint, or a checkpoint directory (newest file is used)")
    mapping.add_argument("out", help="output .ppm")
    mapping.add_argument("--q", type=int, default=None, help="bands to keep (default: the selector's target)")
    mapping.add_argument("--classifier", choices=(LINEAR_SVM, KNN), default=LINEAR_SVM)
    mapping.add_argument("--seed", type=int, default=0)
    mapping.add_argument("--no-center", action="store_true", help="skip per-band mean centering")
    return parser


def _label_column(value: str):
    try:
        return int(value)
    except ValueError:
        return value


def cmd_run(args) -> int:
    manager = ConfigManager(args.config)
    output_dir = os.path.abspath(args.output_dir) if args.output_dir else manager.config.output_dir
    config = manager.with_overrides(output_dir=output_dir)
    workers = resolve_workers(args.workers, config.workers)
    os.makedirs(config.output_dir, exist_ok=True)
    setup_logging(args.verbose, os.path.join(config.output_dir, "experiment.log"))
    manager.save_config(os.path.join(config.output_dir, "config.resolved.yaml"))
    logger.info("gatesel %s, config %s (hash %s)", __version__, args.config, manager.hash())

    report = run_experiment(config, workers)
    print(f"report: {os.path.join(config.output_dir, 'report.json')} digest {report_digest(report)}")
    for cell in report.failed:
        print(f"failed: {cell.method} beta={cell.beta} Q={cell.q}: {cell.reason}", file=sys.stderr)
    return EXIT_CELLS_FAILED if report.failed else EXIT_OK


def cmd_rank(args) -> int:
    data = minmax_scale(load_delimited(args.dataset, _label_column(args.label_column),
                                       args.delimiter, not args.no_header))
    ranking = fisher_score_rank(data) if args.method == "fisher" else mutual_info_rank(data, args.bins)
    order = ranking.order if args.top is None else ranking.top(args.top)
    table = pd.DataFrame({
        "rank": range(1, len(order) + 1),
        "index": order,
        "name": [data.feature_names[j] for j in order],
        "score": ranking.scores[order],
    })
    table.to_csv(sys.stdout, index=False)
    return EXIT_OK


def cmd_map(args) -> int:
    cube = minmax_scale(load_cube(args.cube))
    if not args.no_center:
        cube = mean_center_channels(cube)
    if os.path.isdir(args.checkpoint):
        selector = CheckpointStore(args.checkpoint).latest()
        if selector is None:
            raise ConfigError(f"no checkpoints in {args.checkpoint}")
    else:
        selector = load_selector(args.checkpoint)
    map_from_checkpoint(cube, selector, args.out, args.q,
                        ClassifierSpec(kind=args.classifier, seed=args.seed),
                        SplitSpec(test_fraction=0.25, seed=args.seed))
    print(f"map: {args.out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "rank": cmd_rank, "map": cmd_map}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return COMMANDS[args.verb](args)
    except GateselError as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
