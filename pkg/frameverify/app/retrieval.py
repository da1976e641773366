"""
Two-stage evidence retrieval, out-of-scope evidence mapping and K/M evidence pooling
"""

import logging
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.optimize import linear_sum_assignment

from .annotate import TitleGazetteer
from .corpus import AnnotatedClaim, AnnotatedDocument, AnnotatedSentence, EvidenceKey, PathLike, iter_jsonl, write_jsonl
from .errors import CorpusParseError, DuplicateIdError

logger = logging.getLogger(__name__)

PAD_DOC_ID = ""
PAD_INDEX = -1

MAP_MODES = ("map-augment", "map-replace", "none")
SAMPLING_MODES = ("top", "random")


class EvidenceCandidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str
    sentence_index: int = Field(ge=PAD_INDEX)
    tokens: Tuple[str, ...] = ()
    frames: Tuple[str, ...] = ()
    in_scope: bool = False
    similarity: float = Field(default=0.0, ge=0.0, le=1.0)
    utility_target: Optional[int] = Field(default=None, ge=0, le=1)

    @field_validator("frames", mode="before")
    @classmethod
    def _sort_frames(cls, value: Any) -> Any:
        return tuple(sorted(value)) if value is not None else ()

    @classmethod
    def pad(cls) -> "EvidenceCandidate":
        return cls(doc_id=PAD_DOC_ID, sentence_index=PAD_INDEX, utility_target=0)

    @classmethod
    def from_sentence(cls, sentence: AnnotatedSentence, similarity: float) -> "EvidenceCandidate":
        return cls(
            doc_id=sentence.doc_id,
            sentence_index=sentence.index,
            tokens=sentence.tokens,
            frames=sentence.frames,
            in_scope=sentence.in_scope,
            similarity=similarity,
        )

    @property
    def is_pad(self) -> bool:
        return self.doc_id == PAD_DOC_ID

    @property
    def key(self) -> EvidenceKey:
        return (self.doc_id, self.sentence_index)

    def to_record(self) -> Dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "sentence_index": self.sentence_index,
            "similarity": self.similarity,
            "in_scope": self.in_scope,
            "tokens": list(self.tokens),
            "frames": list(self.frames),
            "utility_target": self.utility_target,
        }


class EvidencePool(BaseModel):
    model_config = ConfigDict(frozen=True)

    claim_id: str
    candidates: Tuple[EvidenceCandidate, ...]
    K: int = Field(ge=0)
    M: int = Field(ge=0)
    documents: Tuple[str, ...] = ()
    retrieved_sentences: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_size(self) -> "EvidencePool":
        if len(self.candidates) > self.K + self.M:
            raise ValueError(f"pool for claim {self.claim_id!r} holds {len(self.candidates)} > K+M candidates")
        return self

    @property
    def size(self) -> int:
        return self.K + self.M

    @property
    def evidence(self) -> List[EvidenceCandidate]:
        """Non-pad candidates in pool order."""
        return [candidate for candidate in self.candidates if not candidate.is_pad]

    def padded(self) -> "EvidencePool":
        missing = self.size - len(self.candidates)
        if missing <= 0:
            return self
        candidates = self.candidates + tuple(EvidenceCandidate.pad() for _ in range(missing))
        return self.model_copy(update={"candidates": candidates})

    def to_record(self) -> Dict[str, Any]:
        return {
            "claim_id": self.claim_id,
            "K": self.K,
            "M": self.M,
            "documents": list(self.documents),
            "retrieved_sentences": self.retrieved_sentences,
            "evidence": [candidate.to_record() for candidate in self.evidence],
        }


class IRStats(BaseModel):
    claims: int
    avg_documents: float
    avg_sentences: float


def jaccard(tokens_a: Iterable[str], tokens_b: Iterable[str]) -> float:
    a, b = set(tokens_a), set(tokens_b)
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def retrieve_documents(
    claim: AnnotatedClaim,
    corpus: Mapping[str, AnnotatedDocument],
    gazetteer: Optional[TitleGazetteer] = None,
) -> List[str]:
    """Documents whose normalized title exactly matches a claim entity, sorted by id."""
    gazetteer = gazetteer or TitleGazetteer.from_corpus(corpus)
    doc_ids = set()
    for entity in claim.entities:
        doc_ids.update(doc_id for doc_id in gazetteer.lookup(entity) if doc_id in corpus)
    return sorted(doc_ids)


def _rank(candidates: Iterable[EvidenceCandidate]) -> List[EvidenceCandidate]:
    return sorted(candidates, key=lambda c: (-c.similarity, c.doc_id, c.sentence_index))


def retrieve_sentences(claim: AnnotatedClaim, docs: Sequence[AnnotatedDocument]) -> List[EvidenceCandidate]:
    """Sentences sharing at least one frame with the claim, ranked by frame-set Jaccard."""
    if not claim.frames:
        return []
    candidates = []
    for document in docs:
        for sentence in document.sentences:
            if sentence.frames & claim.frames:
                candidates.append(EvidenceCandidate.from_sentence(sentence, jaccard(sentence.frames, claim.frames)))
    return _rank(candidates)


def scope_candidates(claim: AnnotatedClaim, docs: Sequence[AnnotatedDocument]) -> List[EvidenceCandidate]:
    """In-scope sentences of the retrieved documents, ranked by token Jaccard with the claim."""
    candidates = [
        EvidenceCandidate.from_sentence(sentence, jaccard(sentence.tokens, claim.tokens))
        for document in docs
        for sentence in document.scope_sentences
    ]
    return _rank(candidates)


def hungarian_assign(cost) -> List[Tuple[int, int]]:
    """
    Minimum-cost assignment of min(n, m) (row, column) pairs, sorted by row.
    Rectangular matrices are padded to square with a constant larger than any real assignment.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] < 1 or cost.shape[1] < 1:
        raise ValueError(f"cost must be a non-empty 2-d matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")

    n, m = cost.shape
    size = max(n, m)
    if n != m:
        filler = (np.abs(cost).max() + 1.0) * size
        square = np.full((size, size), filler)
        square[:n, :m] = cost
    else:
        square = cost
    rows, cols = linear_sum_assignment(square)
    return sorted((int(r), int(c)) for r, c in zip(rows, cols) if r < n and c < m)


def assignment_cost(cost, pairs: Iterable[Tuple[int, int]]) -> float:
    cost = np.asarray(cost, dtype=np.float64)
    return float(sum(cost[r, c] for r, c in pairs))


def map_out_of_scope(
    frame_sents: Sequence[EvidenceCandidate],
    scope_sents: Sequence[Union[AnnotatedSentence, EvidenceCandidate]],
) -> List[Tuple[EvidenceCandidate, Union[AnnotatedSentence, EvidenceCandidate], float]]:
    """Optimal one-to-one mapping of frame sentences onto scope sentences under 1 - Jaccard cost."""
    if not frame_sents or not scope_sents:
        return []
    similarity = np.array(
        [[jaccard(frame.tokens, scope.tokens) for scope in scope_sents] for frame in frame_sents]
    )
    pairs = hungarian_assign(1.0 - similarity)
    return [(frame_sents[i], scope_sents[j], float(similarity[i, j])) for i, j in pairs]


def _apply_mapping(
    frame_sents: List[EvidenceCandidate], scope_sents: List[EvidenceCandidate], map_mode: str
) -> List[EvidenceCandidate]:
    if map_mode == "none":
        return frame_sents
    out_of_scope = [candidate for candidate in frame_sents if not candidate.in_scope]
    mapping = map_out_of_scope(out_of_scope, scope_sents)
    partner = {frame.key: scope for frame, scope, _ in mapping}

    result: List[EvidenceCandidate] = []
    seen = set()
    for candidate in frame_sents:
        mapped = partner.get(candidate.key)
        # Mapped in-scope partners inherit the frame sentence's rank
        replacement = mapped.model_copy(update={"similarity": candidate.similarity}) if mapped else None
        if map_mode == "map-replace" and replacement is not None:
            emitted = [replacement]
        elif replacement is not None:
            emitted = [candidate, replacement]
        else:
            emitted = [candidate]
        for item in emitted:
            if item.key not in seen:
                seen.add(item.key)
                result.append(item)
    return result


def _select(
    candidates: Sequence[EvidenceCandidate], count: int, sampling: str, rng: Optional[np.random.Generator]
) -> List[EvidenceCandidate]:
    if count >= len(candidates):
        return list(candidates)
    if sampling == "random":
        if rng is None:
            raise ValueError("random sampling needs a generator")
        chosen = sorted(rng.choice(len(candidates), size=count, replace=False))
        return [candidates[i] for i in chosen]
    return list(candidates[:count])


def build_pool(
    claim: AnnotatedClaim,
    frame_sents: Sequence[EvidenceCandidate],
    scope_sents: Sequence[EvidenceCandidate],
    K: int,
    M: int,
    sampling: str = "top",
    rng: Optional[np.random.Generator] = None,
    documents: Sequence[str] = (),
    retrieved_sentences: Optional[int] = None,
) -> EvidencePool:
    """
    Top-K frame candidates plus top-M scope candidates, padded to exactly K+M.
    Utility targets are set when the claim carries a gold label.
    """
    if K < 0 or M < 0:
        raise ValueError(f"K and M must be non-negative, got K={K}, M={M}")
    if K + M == 0:
        raise ValueError("K + M must be at least 1")
    if sampling not in SAMPLING_MODES:
        raise ValueError(f"sampling must be one of {SAMPLING_MODES}, got {sampling!r}")

    selected = _select(_rank(frame_sents), K, sampling, rng)
    taken = {candidate.key for candidate in selected}
    remaining_scope = [candidate for candidate in _rank(scope_sents) if candidate.key not in taken]
    selected += _select(remaining_scope, M, sampling, rng)

    if claim.gold_label is not None:
        gold = claim.gold_sentences
        selected = [c.model_copy(update={"utility_target": int(c.key in gold)}) for c in selected]

    pool = EvidencePool(
        claim_id=claim.claim_id,
        candidates=tuple(selected),
        K=K,
        M=M,
        documents=tuple(documents),
        retrieved_sentences=len(frame_sents) if retrieved_sentences is None else retrieved_sentences,
    )
    return pool.padded()


def retrieve_pool(
    claim: AnnotatedClaim,
    corpus: Mapping[str, AnnotatedDocument],
    K: int,
    M: int,
    gazetteer: Optional[TitleGazetteer] = None,
    map_mode: str = "map-augment",
    sampling: str = "top",
    rng: Optional[np.random.Generator] = None,
) -> EvidencePool:
    """Full retrieval for one claim: documents, frame sentences, scope mapping, pooling."""
    if map_mode not in MAP_MODES:
        raise ValueError(f"map_mode must be one of {MAP_MODES}, got {map_mode!r}")
    doc_ids = retrieve_documents(claim, corpus, gazetteer)
    docs = [corpus[doc_id] for doc_id in doc_ids]
    frame_sents = retrieve_sentences(claim, docs)
    scope_sents = scope_candidates(claim, docs)
    ranked = _apply_mapping(frame_sents, scope_sents, map_mode)
    logger.debug(
        "Claim %s: %d documents, %d frame sentences, %d scope sentences",
        claim.claim_id,
        len(doc_ids),
        len(frame_sents),
        len(scope_sents),
    )
    return build_pool(
        claim,
        ranked,
        scope_sents,
        K,
        M,
        sampling=sampling,
        rng=rng,
        documents=doc_ids,
        retrieved_sentences=len(frame_sents),
    )


def ir_stats(pools: Sequence[EvidencePool]) -> IRStats:
    """Average number of retrieved documents and frame sentences per claim."""
    if not pools:
        raise ValueError("ir_stats needs at least one pool")
    return IRStats(
        claims=len(pools),
        avg_documents=float(np.mean([len(pool.documents) for pool in pools])),
        avg_sentences=float(np.mean([pool.retrieved_sentences for pool in pools])),
    )


def save_pools(pools: Iterable[EvidencePool], path: PathLike) -> int:
    return write_jsonl((pool.to_record() for pool in pools), path)


def load_pools(path: PathLike) -> Dict[str, EvidencePool]:
    """Load pools written by save_pools, re-padded to K+M, indexed by claim id."""
    pools: Dict[str, EvidencePool] = {}
    for line_number, record in iter_jsonl(path):
        try:
            candidates = tuple(EvidenceCandidate.model_validate(item) for item in record.get("evidence", []))
            pool = EvidencePool(
                claim_id=str(record["claim_id"]),
                candidates=candidates,
                K=record["K"],
                M=record["M"],
                documents=tuple(record.get("documents", ())),
                retrieved_sentences=record.get("retrieved_sentences", 0),
            ).padded()
        except (KeyError, ValueError) as e:
            raise CorpusParseError(path, line_number, str(e)) from e
        if pool.claim_id in pools:
            raise DuplicateIdError("pool", pool.claim_id)
        pools[pool.claim_id] = pool
    logger.info("Loaded %d pools from %s", len(pools), path)
    return pools
