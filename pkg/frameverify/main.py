#!/usr/bin/env python3
"""
frameverify - frame-based evidence retrieval and neural claim verification
"""

import argparse
import logging
import signal
import sys
from typing import Any, Dict, List, Optional

from frameverify.app.commands import (
    cmd_ablate,
    cmd_annotate,
    cmd_evaluate,
    cmd_kfold,
    cmd_predict,
    cmd_retrieve,
    cmd_synth,
    cmd_train,
)
from frameverify.app.config import LOG_LEVELS, RunConfig, load_config
from frameverify.app.errors import ConfigError, FrameVerifyError
from frameverify.app.models import Variant

logger = logging.getLogger("frameverify")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Command-line flag -> (config section, key)
FLAG_SECTIONS = {
    "output_dir": ("paths", "output_dir"),
    "K": ("retrieval", "K"),
    "M": ("retrieval", "M"),
    "map_mode": ("retrieval", "map_mode"),
    "sampling": ("retrieval", "sampling"),
    "oov": ("embedding", "oov"),
    "variant": ("model", "variant"),
    "epochs": ("training", "epochs"),
    "learning_rate": ("training", "learning_rate"),
    "decay": ("training", "decay"),
    "momentum": ("training", "momentum"),
    "l2": ("training", "l2"),
    "dropout": ("training", "dropout"),
    "tau": ("training", "tau"),
    "lambda_utility": ("training", "lambda_utility"),
    "seed": ("training", "seed"),
    "hidden_size": ("training", "hidden_size"),
    "encoder_layers": ("training", "encoder_layers"),
    "utility_filter": ("prediction", "utility_filter"),
    "threshold": ("prediction", "threshold"),
    "jobs": ("prediction", "jobs"),
    "recall_mode": ("scoring", "recall_mode"),
    "max_evidence": ("scoring", "max_evidence"),
}

# Global flag to prevent reentrant signal handling
_shutting_down = False


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def _int_list(value: str) -> List[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def handle_signal(sig, frame):
    """Handle shutdown signals gracefully"""
    global _shutting_down

    # Prevent reentrant calls
    if _shutting_down:
        return
    _shutting_down = True

    logger.warning("Interrupted, shutting down")
    sys.exit(130)


def setup_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger("frameverify")
    root.handlers[:] = [handler]
    root.setLevel(level)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frameverify", description="frameverify - frame-based claim verification")
    parser.add_argument("--config", help="Path to config file")
    parser.add_argument("--log-level", choices=LOG_LEVELS, help="Override [logging] level")
    subparsers = parser.add_subparsers(dest="command", help="Command to run", parser_class=_Parser)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", help="Directory for pipeline artifacts")
    common.add_argument("--force", action="store_true", help="Overwrite existing outputs")
    common.add_argument("--jobs", type=int, help="Worker threads for retrieval and prediction")

    retrieval = argparse.ArgumentParser(add_help=False)
    retrieval.add_argument("--K", type=int, dest="K", help="Frame sentences per pool")
    retrieval.add_argument("--M", type=int, dest="M", help="Scope sentences per pool")
    retrieval.add_argument("--map-mode", choices=["map-augment", "map-replace", "none"])
    retrieval.add_argument("--sampling", choices=["top", "random"])

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--variant", choices=[v.value for v in Variant])
    training.add_argument("--epochs", type=int)
    training.add_argument("--lr", type=float, dest="learning_rate")
    training.add_argument("--decay", type=float)
    training.add_argument("--momentum", type=float)
    training.add_argument("--l2", type=float)
    training.add_argument("--dropout", type=float)
    training.add_argument("--tau", type=float, help="Gumbel-Softmax temperature")
    training.add_argument("--lambda-utility", type=float, help="Weight of the utility loss")
    training.add_argument("--seed", type=int)
    training.add_argument("--hidden-size", type=int)
    training.add_argument("--encoder-layers", type=int, choices=[1, 2])

    embedding = argparse.ArgumentParser(add_help=False)
    embedding.add_argument("--oov", choices=["zero", "skip"], help="Out-of-vocabulary policy")

    prediction = argparse.ArgumentParser(add_help=False)
    prediction.add_argument(
        "--utility-filter",
        action="store_true",
        default=None,
        help="Drop evidence whose predicted utility is at or below the threshold",
    )
    prediction.add_argument("--threshold", type=float)

    scoring = argparse.ArgumentParser(add_help=False)
    recall = scoring.add_mutually_exclusive_group()
    recall.add_argument("--strict-recall", dest="recall_mode", action="store_const", const="strict")
    recall.add_argument("--sentence-recall", dest="recall_mode", action="store_const", const="sentence")
    scoring.add_argument("--max-evidence", type=int, help="Score only the first N predicted sentences")

    annotate = subparsers.add_parser("annotate", parents=[common], help="Fill frames and entities from a lexicon")
    annotate.add_argument("--overwrite", action="store_true", help="Replace existing annotations")
    annotate.add_argument("--max-ngram", type=int, dest="max_ngram")

    subparsers.add_parser("retrieve", parents=[common, retrieval], help="Build evidence pools")
    subparsers.add_parser("train", parents=[common, training, embedding], help="Train a verifier")
    subparsers.add_parser("predict", parents=[common, prediction, embedding], help="Predict labels and evidence")
    subparsers.add_parser("evaluate", parents=[common, scoring], help="Score predictions")

    ablate = subparsers.add_parser(
        "ablate", parents=[common, retrieval, training, embedding, prediction, scoring], help="K x M ablation grid"
    )
    ablate.add_argument("--K-values", type=_int_list, required=True, help="Comma-separated K values")
    ablate.add_argument("--M-values", type=_int_list, required=True, help="Comma-separated M values")
    ablate.add_argument("--evaluate-only", action="store_true", help="Reuse the trained checkpoint in every cell")

    kfold = subparsers.add_parser(
        "kfold", parents=[common, training, embedding, prediction, scoring], help="k-fold cross-validation"
    )
    kfold.add_argument("--folds", type=int, default=5)
    kfold.add_argument("--stratified", action="store_true", help="Keep label proportions per fold")

    synth = subparsers.add_parser("synth", help="Write a synthetic corpus for trying the pipeline")
    synth.add_argument("directory")
    synth.add_argument("--kind", choices=["verify", "ablation"], default="verify")
    synth.add_argument("--seed", type=int, default=13)
    synth.add_argument("--force", action="store_true", help="Overwrite existing outputs")
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    sections: Dict[str, Dict[str, Any]] = {}
    for flag, (section, key) in FLAG_SECTIONS.items():
        value = getattr(args, flag, None)
        if value is not None:
            sections.setdefault(section, {})[key] = value
    max_ngram = getattr(args, "max_ngram", None)
    if max_ngram is not None:
        sections.setdefault("retrieval", {})["max_ngram"] = max_ngram
    return sections


def run(args: argparse.Namespace) -> None:
    if args.command == "synth":
        files = cmd_synth(args.directory, seed=args.seed, kind=args.kind, force=args.force)
        logger.info("Synthetic data written; run with --config %s", files["config"])
        return

    config: RunConfig = load_config(args.config).with_overrides(**collect_overrides(args))
    if args.log_level is None:
        logging.getLogger("frameverify").setLevel(config.logging.level)

    if args.command == "annotate":
        cmd_annotate(config, force=args.force, overwrite=args.overwrite)
    elif args.command == "retrieve":
        cmd_retrieve(config, force=args.force)
    elif args.command == "train":
        cmd_train(config, force=args.force)
    elif args.command == "predict":
        cmd_predict(config, force=args.force)
    elif args.command == "evaluate":
        report = cmd_evaluate(config, force=args.force)
        sys.stderr.write(report.to_table())
    elif args.command == "ablate":
        cmd_ablate(config, args.K_values, args.M_values, force=args.force, evaluate_only=args.evaluate_only)
    elif args.command == "kfold":
        cmd_kfold(config, k=args.folds, stratified=args.stratified, force=args.force)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    signal.signal(signal.SIGINT, handle_signal)
    signal.signal(signal.SIGTERM, handle_signal)

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return ConfigError.exit_code

    setup_logging(args.log_level or "INFO")
    try:
        run(args)
    except FrameVerifyError as e:
        logger.error("%s", e)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
