"""
FEVER-style scoring: label accuracy, evidence precision/recall/F1 and the combined FEVER score
"""

import logging
from collections import Counter
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, Field

from .corpus import LABELS, AnnotatedClaim, EvidenceGroup, EvidenceKey, Label
from .errors import AlignmentError
from .models import Prediction

logger = logging.getLogger(__name__)

RECALL_MODES = ("strict", "sentence")
MISSING = "NONE"


class ScoreReport(BaseModel):
    fever_score: float = Field(ge=0.0, le=1.0)
    label_accuracy: float = Field(ge=0.0, le=1.0)
    evidence_precision: float = Field(ge=0.0, le=1.0)
    evidence_recall: float = Field(ge=0.0, le=1.0)
    evidence_f1: float = Field(ge=0.0, le=1.0)
    per_label_counts: Dict[str, Dict[str, int]] = {}
    n_claims: int = 0
    averaging: str = "micro"
    recall_mode: str = "strict"

    def to_table(self) -> str:
        lines = [
            f"claims            {self.n_claims}",
            f"fever score       {self.fever_score:.4f}",
            f"label accuracy    {self.label_accuracy:.4f}",
            f"evidence P        {self.evidence_precision:.4f}",
            f"evidence R        {self.evidence_recall:.4f}  ({self.recall_mode})",
            f"evidence F1       {self.evidence_f1:.4f}",
            f"averaging         {self.averaging}",
            "",
        ]
        columns = [label.value for label in LABELS] + [MISSING]
        width = max(len(c) for c in columns) + 2
        lines.append("gold \\ predicted".ljust(width) + "".join(c.rjust(width) for c in columns))
        for gold in LABELS:
            row = self.per_label_counts.get(gold.value, {})
            lines.append(gold.value.ljust(width) + "".join(str(row.get(c, 0)).rjust(width) for c in columns))
        return "\n".join(lines) + "\n"


def _truncate(evidence: Sequence[EvidenceKey], max_evidence: Optional[int]) -> Tuple[EvidenceKey, ...]:
    evidence = tuple(evidence)
    return evidence if max_evidence is None else evidence[:max_evidence]


def score_claim(
    pred: Prediction,
    gold_label: Label,
    gold_groups: Sequence[EvidenceGroup],
    max_evidence: Optional[int] = None,
) -> Tuple[bool, bool]:
    """
    (label_correct, fever_correct). UNSURE claims only need the label; the others
    also need one complete gold group among the predicted evidence.
    """
    gold_label = Label.parse(gold_label)
    label_correct = pred.label is gold_label
    if gold_label is Label.UNSURE or not label_correct:
        return label_correct, label_correct
    predicted = set(_truncate(pred.selected_evidence, max_evidence))
    return True, any(set(group) <= predicted for group in gold_groups)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evidence_prf(
    preds: Iterable[Optional[Prediction]],
    golds: Iterable[AnnotatedClaim],
    recall_mode: str = "strict",
    max_evidence: Optional[int] = None,
) -> Tuple[float, float, float]:
    """
    Micro-averaged evidence precision, recall and F1 over non-UNSURE claims.

    preds and golds are aligned; a None prediction selects no evidence.
    strict recall counts claims covering a complete gold group, sentence recall
    counts gold sentences found.
    """
    if recall_mode not in RECALL_MODES:
        raise ValueError(f"recall_mode must be one of {RECALL_MODES}, got {recall_mode!r}")
    hits = predicted = 0
    covered = claims = 0
    gold_found = gold_total = 0
    for pred, gold in zip(preds, golds):
        if gold.gold_label is None or gold.gold_label is Label.UNSURE:
            continue
        evidence = set(_truncate(pred.selected_evidence, max_evidence)) if pred is not None else set()
        union = gold.gold_sentences
        hits += len(evidence & union)
        predicted += len(evidence)
        claims += 1
        covered += int(any(set(group) <= evidence for group in gold.gold_evidence))
        gold_found += len(evidence & union)
        gold_total += len(union)

    precision = hits / predicted if predicted else 0.0
    if recall_mode == "strict":
        recall = covered / claims if claims else 0.0
    else:
        recall = gold_found / gold_total if gold_total else 0.0
    return precision, recall, _f1(precision, recall)


def align_predictions(preds: Sequence[Prediction], golds: Sequence[AnnotatedClaim]) -> List[Optional[Prediction]]:
    """Order predictions like the gold claims; None where a claim has no prediction."""
    counts = Counter(pred.claim_id for pred in preds)
    duplicates = sorted(claim_id for claim_id, n in counts.items() if n > 1)
    if duplicates:
        raise AlignmentError("duplicate predictions", duplicates)
    by_id: Mapping[str, Prediction] = {pred.claim_id: pred for pred in preds}
    gold_ids = {gold.claim_id for gold in golds}
    unknown = sorted(set(by_id) - gold_ids)
    if unknown:
        logger.warning("Ignoring %d predictions for claims without gold data", len(unknown))
    missing = [gold.claim_id for gold in golds if gold.claim_id not in by_id]
    if missing:
        logger.warning("%d gold claims have no prediction and count as incorrect", len(missing))
    return [by_id.get(gold.claim_id) for gold in golds]


def aggregate(
    preds: Sequence[Prediction],
    golds: Sequence[AnnotatedClaim],
    recall_mode: str = "strict",
    max_evidence: Optional[int] = None,
) -> ScoreReport:
    unlabeled = [gold.claim_id for gold in golds if gold.gold_label is None]
    if unlabeled:
        raise AlignmentError("gold claims without a label", unlabeled)
    aligned = align_predictions(preds, golds)

    counts: Dict[str, Dict[str, int]] = {label.value: {} for label in LABELS}
    label_hits = fever_hits = 0
    for pred, gold in zip(aligned, golds):
        row = counts[gold.gold_label.value]
        predicted = MISSING if pred is None else pred.label.value
        row[predicted] = row.get(predicted, 0) + 1
        if pred is None:
            continue
        label_correct, fever_correct = score_claim(pred, gold.gold_label, gold.gold_evidence, max_evidence)
        label_hits += int(label_correct)
        fever_hits += int(fever_correct)

    precision, recall, f1 = evidence_prf(aligned, golds, recall_mode, max_evidence)
    n = len(golds)
    return ScoreReport(
        fever_score=fever_hits / n if n else 0.0,
        label_accuracy=label_hits / n if n else 0.0,
        evidence_precision=precision,
        evidence_recall=recall,
        evidence_f1=f1,
        per_label_counts={gold: dict(sorted(row.items())) for gold, row in counts.items()},
        n_claims=n,
        recall_mode=recall_mode,
    )
