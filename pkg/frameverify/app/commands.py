"""
Pipeline stages behind the command line: annotate, retrieve, train, predict,
evaluate, ablate, kfold and synth. Every stage reads and writes files under
the configured output directory.
"""

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Sequence, Tuple, TypeVar

import numpy as np

from .annotate import TitleGazetteer, annotate_claim, annotate_document, load_lexicon
from .config import RunConfig
from .corpus import AnnotatedClaim, AnnotatedDocument, kfold_split, load_claims, load_corpus, save_claims, save_corpus
from .embed import EmbeddingTable, load_embeddings
from .errors import AlignmentError, ConfigError, MissingInputError
from .models import (
    Prediction,
    VerifierParams,
    claim_rng,
    load_checkpoint,
    load_predictions,
    predict,
    save_checkpoint,
    save_predictions,
    train,
)
from .retrieval import EvidencePool, IRStats, ir_stats, load_pools, retrieve_pool, save_pools
from .scoring import ScoreReport, aggregate
from .synthetic import (
    CLAIMS_FILE,
    CONFIG_FILE,
    CORPUS_FILE,
    EMBEDDINGS_FILE,
    LEXICON_FILE,
    build_ablation_corpus,
    build_synthetic,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

ANNOTATED_CORPUS_FILE = "corpus.annotated.jsonl"
ANNOTATED_CLAIMS_FILE = "claims.annotated.jsonl"
POOLS_FILE = "pools.jsonl"
IR_STATS_FILE = "ir_stats.json"
CHECKPOINT_FILE = "checkpoint.json"
LOSS_FILE = "loss.csv"
PREDICTIONS_FILE = "predictions.jsonl"
SCORE_FILE = "score.json"
SCORE_TABLE_FILE = "score.txt"
ABLATION_FILE = "ablation.csv"
KFOLD_FILE = "kfold.csv"

ABLATION_FIELDS = ["K", "M", "label_accuracy", "fever_score", "precision", "recall", "f1"]
KFOLD_FIELDS = ["fold", "n_train", "n_test", "label_accuracy", "fever_score", "precision", "recall", "f1"]


# Helpers


def output_path(config: RunConfig, name: str) -> str:
    return os.path.join(config.paths.output_dir, name)


def require_inputs(config: RunConfig, *names: str) -> Dict[str, str]:
    """Resolve [paths] entries, failing before any work starts if one is unset or missing."""
    resolved = {}
    for name in names:
        path = getattr(config.paths, name)
        if not path:
            raise ConfigError(f"paths.{name} is not configured")
        if not os.path.exists(path):
            raise MissingInputError(f"{name} file not found: {path}")
        resolved[name] = path
    return resolved


def require_artifact(config: RunConfig, name: str, producer: str) -> str:
    path = output_path(config, name)
    if not os.path.exists(path):
        raise MissingInputError(f"{path} not found; run `frameverify {producer}` first")
    return path


def check_outputs(paths: Iterable[str], force: bool) -> None:
    """Refuse to replace existing outputs unless force is set."""
    existing = [path for path in paths if os.path.exists(path)]
    if existing and not force:
        raise ConfigError(f"refusing to overwrite {', '.join(existing)} (use --force)")
    for path in paths:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """Map in a thread pool of size jobs; results keep input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        futures = [executor.submit(fn, item) for item in items]
        return [future.result() for future in futures]


def write_csv(path: str, rows: Sequence[Dict[str, Any]], fieldnames: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def eval_claims_path(config: RunConfig) -> str:
    """Claims scored by predict/evaluate: dev_claims when configured, else the training claims."""
    if config.paths.dev_claims:
        return require_inputs(config, "dev_claims")["dev_claims"]
    return require_inputs(config, "claims")["claims"]


def load_table(config: RunConfig) -> EmbeddingTable:
    path = require_inputs(config, "embeddings")["embeddings"]
    return load_embeddings(path, config.embedding.dim)


def retrieve_all(
    claims: Sequence[AnnotatedClaim],
    corpus: Dict[str, AnnotatedDocument],
    config: RunConfig,
) -> List[EvidencePool]:
    retrieval = config.retrieval
    gazetteer = TitleGazetteer.from_corpus(corpus)

    def one(claim: AnnotatedClaim) -> EvidencePool:
        rng = claim_rng(retrieval.seed, claim.claim_id) if retrieval.sampling == "random" else None
        return retrieve_pool(
            claim,
            corpus,
            retrieval.K,
            retrieval.M,
            gazetteer,
            map_mode=retrieval.map_mode,
            sampling=retrieval.sampling,
            rng=rng,
        )

    return parallel_map(one, claims, config.prediction.jobs)


def _pools_for(claims: Sequence[AnnotatedClaim], pools: Dict[str, EvidencePool]) -> Dict[str, EvidencePool]:
    missing = [claim.claim_id for claim in claims if claim.claim_id not in pools]
    if missing:
        raise AlignmentError("claims without an evidence pool", missing)
    return pools


def predict_all(
    params: VerifierParams,
    claims: Sequence[AnnotatedClaim],
    pools: Dict[str, EvidencePool],
    table: EmbeddingTable,
    config: RunConfig,
) -> List[Prediction]:
    _pools_for(claims, pools)
    mode = config.prediction.mode
    oov = config.embedding.oov
    threshold = config.prediction.threshold

    def one(claim: AnnotatedClaim) -> Prediction:
        return predict(params, claim, pools[claim.claim_id], table, mode, oov, threshold)

    return parallel_map(one, claims, config.prediction.jobs)


def _score(config: RunConfig, predictions: Sequence[Prediction], golds: Sequence[AnnotatedClaim]) -> ScoreReport:
    return aggregate(predictions, golds, config.scoring.recall_mode, config.scoring.max_evidence)


def _metric_row(report: ScoreReport) -> Dict[str, float]:
    return {
        "label_accuracy": round(report.label_accuracy, 6),
        "fever_score": round(report.fever_score, 6),
        "precision": round(report.evidence_precision, 6),
        "recall": round(report.evidence_recall, 6),
        "f1": round(report.evidence_f1, 6),
    }


# Stages


def cmd_annotate(config: RunConfig, force: bool = False, overwrite: bool = False) -> Tuple[int, int]:
    """Fill missing frames and entities with the lexicon annotator."""
    inputs = require_inputs(config, "corpus", "claims", "lexicon")
    outputs = [output_path(config, ANNOTATED_CORPUS_FILE), output_path(config, ANNOTATED_CLAIMS_FILE)]
    check_outputs(outputs, force)

    lexicon = load_lexicon(inputs["lexicon"])
    corpus = load_corpus(inputs["corpus"])
    claims = load_claims(inputs["claims"])
    gazetteer = TitleGazetteer.from_corpus(corpus)

    documents = [annotate_document(document, lexicon, overwrite) for document in corpus.values()]
    annotated = [annotate_claim(claim, lexicon, gazetteer, config.retrieval.max_ngram, overwrite) for claim in claims]
    save_corpus(documents, outputs[0])
    save_claims(annotated, outputs[1])
    logger.info("Annotated %d documents and %d claims", len(documents), len(annotated))
    return len(documents), len(annotated)


def cmd_retrieve(config: RunConfig, force: bool = False) -> IRStats:
    """Build one evidence pool per claim (training and dev claims) and summarize retrieval."""
    inputs = require_inputs(config, "corpus", "claims")
    if config.paths.dev_claims:
        inputs.update(require_inputs(config, "dev_claims"))
    outputs = [output_path(config, POOLS_FILE), output_path(config, IR_STATS_FILE)]
    check_outputs(outputs, force)

    corpus = load_corpus(inputs["corpus"])
    claims = load_claims(inputs["claims"])
    if "dev_claims" in inputs:
        known = {claim.claim_id for claim in claims}
        claims += [claim for claim in load_claims(inputs["dev_claims"]) if claim.claim_id not in known]
    if not claims:
        raise AlignmentError("no claims to retrieve evidence for")

    pools = retrieve_all(claims, corpus, config)
    save_pools(pools, outputs[0])
    stats = ir_stats(pools)
    _write_text(outputs[1], stats.model_dump_json(indent=2) + "\n")
    logger.info(
        "Wrote %d pools; %.3f documents and %.3f sentences retrieved per claim",
        stats.claims,
        stats.avg_documents,
        stats.avg_sentences,
    )
    return stats


def cmd_train(config: RunConfig, force: bool = False) -> VerifierParams:
    inputs = require_inputs(config, "claims", "embeddings")
    pools_path = require_artifact(config, POOLS_FILE, "retrieve")
    outputs = [output_path(config, CHECKPOINT_FILE), output_path(config, LOSS_FILE)]
    check_outputs(outputs, force)

    claims = load_claims(inputs["claims"])
    if not claims:
        raise AlignmentError("no claims to train on")
    pools = load_pools(pools_path)
    table = load_table(config)
    logger.info(
        "Training %s on %d claims for %d epochs", config.model.variant.value, len(claims), config.training.epochs
    )
    params, history = train(claims, pools, table, config.training, config.model.variant, config.embedding.oov)

    save_checkpoint(params, outputs[0])
    write_csv(
        outputs[1],
        [
            {"epoch": h.epoch, "claim_loss": f"{h.claim_loss:.6f}", "utility_loss": f"{h.utility_loss:.6f}"}
            for h in history
        ],
        ["epoch", "claim_loss", "utility_loss"],
    )
    return params


def cmd_predict(config: RunConfig, force: bool = False) -> List[Prediction]:
    claims_path = eval_claims_path(config)
    pools_path = require_artifact(config, POOLS_FILE, "retrieve")
    checkpoint_path = require_artifact(config, CHECKPOINT_FILE, "train")
    outputs = [output_path(config, PREDICTIONS_FILE)]
    check_outputs(outputs, force)

    table = load_table(config)
    params = load_checkpoint(checkpoint_path, dim=table.dim)
    claims = load_claims(claims_path)
    predictions = predict_all(params, claims, load_pools(pools_path), table, config)
    save_predictions(predictions, outputs[0])
    logger.info("Wrote %d predictions (%s mode)", len(predictions), config.prediction.mode)
    return predictions


def cmd_evaluate(config: RunConfig, force: bool = False) -> ScoreReport:
    golds = load_claims(eval_claims_path(config))
    predictions = load_predictions(require_artifact(config, PREDICTIONS_FILE, "predict"))
    outputs = [output_path(config, SCORE_FILE), output_path(config, SCORE_TABLE_FILE)]
    check_outputs(outputs, force)

    report = _score(config, predictions, golds)
    _write_text(outputs[0], report.model_dump_json(indent=2) + "\n")
    _write_text(outputs[1], report.to_table())
    logger.info(
        "FEVER score %.4f, label accuracy %.4f, evidence F1 %.4f",
        report.fever_score,
        report.label_accuracy,
        report.evidence_f1,
    )
    return report


def cmd_ablate(
    config: RunConfig,
    K_values: Sequence[int],
    M_values: Sequence[int],
    force: bool = False,
    evaluate_only: bool = False,
) -> List[Dict[str, Any]]:
    """
    K x M grid. Each cell retrieves pools, trains (or reuses the cached
    checkpoint with evaluate_only) and scores the evaluation claims.
    """
    if not K_values or not M_values:
        raise ConfigError("ablation grid needs at least one K and one M value")
    if any(k < 0 for k in K_values) or any(m < 0 for m in M_values):
        raise ConfigError("K and M values must be non-negative")
    inputs = require_inputs(config, "corpus", "claims", "embeddings")
    eval_path = eval_claims_path(config)
    cached = require_artifact(config, CHECKPOINT_FILE, "train") if evaluate_only else None
    outputs = [output_path(config, ABLATION_FILE)]
    check_outputs(outputs, force)

    corpus = load_corpus(inputs["corpus"])
    train_claims = load_claims(inputs["claims"])
    if not train_claims and cached is None:
        raise AlignmentError("no claims to train on")
    eval_claims = load_claims(eval_path)
    table = load_table(config)
    params = load_checkpoint(cached, dim=table.dim) if cached else None

    rows = []
    for K in K_values:
        for M in M_values:
            if K + M == 0:
                logger.warning("Skipping empty cell K=0, M=0")
                continue
            cell = config.with_overrides(retrieval={"K": K, "M": M})
            eval_pools = {pool.claim_id: pool for pool in retrieve_all(eval_claims, corpus, cell)}
            model = params
            if model is None:
                train_pools = {pool.claim_id: pool for pool in retrieve_all(train_claims, corpus, cell)}
                model, _ = train(
                    train_claims, train_pools, table, cell.training, cell.model.variant, cell.embedding.oov
                )
            report = _score(cell, predict_all(model, eval_claims, eval_pools, table, cell), eval_claims)
            rows.append({"K": K, "M": M, **_metric_row(report)})
            logger.info("K=%d M=%d: accuracy %.4f, F1 %.4f", K, M, report.label_accuracy, report.evidence_f1)

    write_csv(outputs[0], rows, ABLATION_FIELDS)
    return rows


def cmd_kfold(config: RunConfig, k: int = 5, stratified: bool = False, force: bool = False) -> List[Dict[str, Any]]:
    """Train and score on k folds of the training claims; a final row holds the means."""
    inputs = require_inputs(config, "claims", "embeddings")
    pools_path = require_artifact(config, POOLS_FILE, "retrieve")
    outputs = [output_path(config, KFOLD_FILE)]
    check_outputs(outputs, force)

    claims = load_claims(inputs["claims"])
    if not claims:
        raise AlignmentError("no claims to train on")
    pools = _pools_for(claims, load_pools(pools_path))
    table = load_table(config)
    try:
        folds = kfold_split(claims, k, config.training.seed, stratified)
    except ValueError as e:
        raise ConfigError(str(e)) from e

    rows = []
    for fold, (train_part, test_part) in enumerate(folds):
        params, _ = train(train_part, pools, table, config.training, config.model.variant, config.embedding.oov)
        report = _score(config, predict_all(params, test_part, pools, table, config), test_part)
        rows.append({"fold": fold, "n_train": len(train_part), "n_test": len(test_part), **_metric_row(report)})
        logger.info("Fold %d/%d: accuracy %.4f, FEVER %.4f", fold + 1, k, report.label_accuracy, report.fever_score)

    means = {key: round(float(np.mean([row[key] for row in rows])), 6) for key in KFOLD_FIELDS[3:]}
    rows.append({"fold": "mean", "n_train": "", "n_test": "", **means})
    write_csv(outputs[0], rows, KFOLD_FIELDS)
    return rows


def cmd_synth(
    directory: str, seed: int = 13, kind: str = "verify", force: bool = False, K: int = 3, M: int = 0
) -> Dict[str, str]:
    """Write a synthetic corpus, claims, lexicon, embeddings and config.toml."""
    builders = {"verify": build_synthetic, "ablation": build_ablation_corpus}
    if kind not in builders:
        raise ConfigError(f"unknown synthetic corpus {kind!r}; expected one of {', '.join(builders)}")
    data = builders[kind](seed=seed)
    names = [CORPUS_FILE, CLAIMS_FILE, LEXICON_FILE, EMBEDDINGS_FILE, CONFIG_FILE]
    check_outputs([os.path.join(directory, name) for name in names], force)
    return data.write(directory, K=K, M=M)

