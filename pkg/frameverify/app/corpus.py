"""
Corpus and claim data model, JSONL loading/saving and fold splitting
"""

import json
import logging
import string
import unicodedata
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_serializer, field_validator, model_validator
from sklearn.model_selection import KFold, StratifiedKFold

from .errors import ClaimValidationError, CorpusParseError, DuplicateIdError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
EvidenceKey = Tuple[str, int]
EvidenceGroup = FrozenSet[EvidenceKey]

_PUNCTUATION = set(string.punctuation)


class Label(str, Enum):
    SUPPORTED = "SUPPORTED"
    REFUTED = "REFUTED"
    UNSURE = "UNSURE"

    @classmethod
    def parse(cls, value: Any) -> "Label":
        """Parse a label, accepting the FEVER spellings as aliases."""
        if isinstance(value, Label):
            return value
        if not isinstance(value, str):
            raise ValueError(f"label must be a string, got {type(value).__name__}")
        key = value.strip().upper()
        if key in LABEL_ALIASES:
            return LABEL_ALIASES[key]
        raise ValueError(f"unknown label {value!r}")

    @property
    def position(self) -> int:
        return LABELS.index(self)


LABELS: Tuple[Label, ...] = (Label.SUPPORTED, Label.REFUTED, Label.UNSURE)

LABEL_ALIASES: Dict[str, Label] = {
    "SUPPORTED": Label.SUPPORTED,
    "REFUTED": Label.REFUTED,
    "UNSURE": Label.UNSURE,
    "SUPPORTS": Label.SUPPORTED,
    "REFUTES": Label.REFUTED,
    "NOT ENOUGH INFO": Label.UNSURE,
    "NOT_ENOUGH_INFO": Label.UNSURE,
}


def _is_punctuation(char: str) -> bool:
    return char in _PUNCTUATION or unicodedata.category(char).startswith("P")


def tokenize(text: str) -> List[str]:
    """
    Fallback tokenizer: lowercase, split on whitespace, strip surrounding punctuation.
    A piece made only of punctuation is kept as-is so non-blank text never
    yields an empty token list.
    """
    tokens = []
    for piece in text.lower().split():
        start, end = 0, len(piece)
        while start < end and _is_punctuation(piece[start]):
            start += 1
        while end > start and _is_punctuation(piece[end - 1]):
            end -= 1
        tokens.append(piece[start:end] or piece)
    return tokens


def _sorted_set(values: Iterable[str]) -> List[str]:
    return sorted(values)


class AnnotatedSentence(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str = Field(min_length=1)
    index: int = Field(ge=0)
    text: str = ""
    tokens: Tuple[str, ...] = ()
    frames: FrozenSet[str] = frozenset()
    in_scope: bool = False

    @model_validator(mode="before")
    @classmethod
    def _fill_tokens(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("tokens") and data.get("text", "").strip():
            data = dict(data)
            data["tokens"] = tokenize(data["text"])
        return data

    @field_serializer("frames")
    def _serialize_frames(self, frames: FrozenSet[str]) -> List[str]:
        return _sorted_set(frames)

    @property
    def key(self) -> EvidenceKey:
        return (self.doc_id, self.index)

    def to_record(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "text": self.text,
            "tokens": list(self.tokens),
            "frames": _sorted_set(self.frames),
            "in_scope": self.in_scope,
        }


class AnnotatedDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str = Field(min_length=1)
    sentences: Tuple[AnnotatedSentence, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def _attach_doc_id(cls, data: Any) -> Any:
        # On disk, sentences do not repeat their document id
        if isinstance(data, dict) and isinstance(data.get("sentences"), list):
            data = dict(data)
            data["sentences"] = [
                {**sentence, "doc_id": data.get("doc_id")} if isinstance(sentence, dict) else sentence
                for sentence in data["sentences"]
            ]
        return data

    @model_validator(mode="after")
    def _check_indices(self) -> "AnnotatedDocument":
        for position, sentence in enumerate(self.sentences):
            if sentence.index != position:
                raise ValueError(
                    f"document {self.doc_id!r}: sentence indices must be 0..n-1, "
                    f"found {sentence.index} at position {position}"
                )
            if sentence.doc_id != self.doc_id:
                raise ValueError(f"sentence {sentence.key} does not belong to document {self.doc_id!r}")
        return self

    @property
    def scope_sentences(self) -> List[AnnotatedSentence]:
        return [sentence for sentence in self.sentences if sentence.in_scope]

    def to_record(self) -> Dict[str, Any]:
        return {"doc_id": self.doc_id, "sentences": [s.to_record() for s in self.sentences]}


class AnnotatedClaim(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    claim_id: str = Field(min_length=1)
    text: str = ""
    tokens: Tuple[str, ...] = ()
    frames: FrozenSet[str] = frozenset()
    entities: FrozenSet[str] = frozenset()
    gold_label: Optional[Label] = Field(default=None, alias="label")
    gold_evidence: Tuple[EvidenceGroup, ...] = Field(default=(), alias="evidence")

    @model_validator(mode="before")
    @classmethod
    def _fill_tokens(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("tokens") and data.get("text", "").strip():
            data = dict(data)
            data["tokens"] = tokenize(data["text"])
        return data

    @field_validator("claim_id", mode="before")
    @classmethod
    def _claim_id_to_str(cls, value: Any) -> Any:
        # FEVER claim ids are integers
        return str(value) if isinstance(value, int) else value

    @field_validator("gold_label", mode="before")
    @classmethod
    def _parse_label(cls, value: Any) -> Any:
        return None if value is None else Label.parse(value)

    @field_validator("gold_evidence", mode="before")
    @classmethod
    def _parse_groups(cls, value: Any) -> Any:
        if value is None:
            return ()
        return tuple(frozenset((str(doc_id), int(index)) for doc_id, index in group) for group in value)

    @model_validator(mode="after")
    def _check_evidence(self) -> "AnnotatedClaim":
        if self.gold_label is Label.UNSURE and self.gold_evidence:
            raise ClaimValidationError(f"claim {self.claim_id!r}: UNSURE claims cannot carry evidence")
        if any(not group for group in self.gold_evidence):
            raise ClaimValidationError(f"claim {self.claim_id!r}: evidence groups must be non-empty")
        return self

    @property
    def gold_sentences(self) -> FrozenSet[EvidenceKey]:
        """Union of all gold evidence groups."""
        keys = set()
        for group in self.gold_evidence:
            keys.update(group)
        return frozenset(keys)

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "claim_id": self.claim_id,
            "text": self.text,
            "tokens": list(self.tokens),
            "frames": _sorted_set(self.frames),
            "entities": _sorted_set(self.entities),
        }
        if self.gold_label is not None:
            record["label"] = self.gold_label.value
            record["evidence"] = [[list(key) for key in sorted(group)] for group in self.gold_evidence]
        return record


def iter_jsonl(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusParseError(path, line_number, f"malformed JSON: {e.msg}") from e
            if not isinstance(record, dict):
                raise CorpusParseError(path, line_number, "expected a JSON object")
            yield line_number, record


def _first_error(error: ValidationError) -> str:
    details = error.errors()
    if not details:
        return str(error)
    first = details[0]
    location = ".".join(str(part) for part in first.get("loc", ()))
    return f"{location}: {first.get('msg')}" if location else first.get("msg", str(error))


def write_jsonl(records: Iterable[Dict[str, Any]], path: PathLike) -> int:
    """Write records one JSON object per line; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=False))
            f.write("\n")
            count += 1
    return count


def load_corpus(path: PathLike) -> Dict[str, AnnotatedDocument]:
    """Load documents from a JSONL file, indexed by doc_id."""
    documents: Dict[str, AnnotatedDocument] = {}
    for line_number, record in iter_jsonl(path):
        try:
            document = AnnotatedDocument.model_validate(record)
        except ValidationError as e:
            raise CorpusParseError(path, line_number, _first_error(e)) from e
        if document.doc_id in documents:
            raise DuplicateIdError("document", document.doc_id)
        documents[document.doc_id] = document
    logger.info("Loaded %d documents from %s", len(documents), path)
    return documents


def save_corpus(corpus: Union[Dict[str, AnnotatedDocument], Iterable[AnnotatedDocument]], path: PathLike) -> int:
    documents = corpus.values() if isinstance(corpus, dict) else corpus
    return write_jsonl((document.to_record() for document in documents), path)


def load_claims(path: PathLike) -> List[AnnotatedClaim]:
    """Load claims from a JSONL file, preserving file order."""
    claims: List[AnnotatedClaim] = []
    seen = set()
    for line_number, record in iter_jsonl(path):
        try:
            claim = AnnotatedClaim.model_validate(record)
        except ValidationError as e:
            raise CorpusParseError(path, line_number, _first_error(e)) from e
        except ClaimValidationError as e:
            raise ClaimValidationError(f"{path}:{line_number}: {e}") from e
        if claim.claim_id in seen:
            raise DuplicateIdError("claim", claim.claim_id)
        seen.add(claim.claim_id)
        claims.append(claim)
    logger.info("Loaded %d claims from %s", len(claims), path)
    return claims


def save_claims(claims: Iterable[AnnotatedClaim], path: PathLike) -> int:
    return write_jsonl((claim.to_record() for claim in claims), path)


def kfold_split(
    claims: Sequence[AnnotatedClaim], k: int, seed: int, stratified: bool = False
) -> List[Tuple[List[AnnotatedClaim], List[AnnotatedClaim]]]:
    """
    Shuffled k-fold partition of claims into (train, test) pairs.
    Every claim lands in exactly one test fold; the shuffle is fixed by seed.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > len(claims):
        raise ValueError(f"cannot split {len(claims)} claims into {k} folds")

    indices = np.arange(len(claims))
    if stratified:
        labels = [claim.gold_label.value if claim.gold_label else "" for claim in claims]
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
        splits = splitter.split(indices, labels)
    else:
        splitter = KFold(n_splits=k, shuffle=True, random_state=seed)
        splits = splitter.split(indices)

    folds = []
    for train_idx, test_idx in splits:
        train = [claims[i] for i in sorted(train_idx)]
        test = [claims[i] for i in sorted(test_idx)]
        folds.append((train, test))
    return folds
