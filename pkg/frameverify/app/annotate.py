"""
Fallback annotator: lexicon-driven frame triggering and title-gazetteer entity matching
"""

import json
import logging
import re
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Set, Union

from pydantic import BaseModel, ConfigDict, field_validator

from .corpus import AnnotatedClaim, AnnotatedDocument, PathLike
from .errors import DataError

logger = logging.getLogger(__name__)

DEFAULT_MAX_NGRAM = 5

_PARENTHETICAL = re.compile(r"_*-lrb-.*?-rrb-_*$|_*\(.*?\)_*$")


class FrameLexicon(BaseModel):
    model_config = ConfigDict(frozen=True)

    entries: Dict[str, FrozenSet[str]] = {}

    @field_validator("entries", mode="before")
    @classmethod
    def _normalize_entries(cls, value: Mapping[str, Iterable[str]]) -> Dict[str, FrozenSet[str]]:
        entries = {}
        for trigger, frames in value.items():
            token = trigger.strip().lower()
            if not token or len(token.split()) != 1:
                raise ValueError(f"trigger {trigger!r} must be a single token")
            frame_set = frozenset(frames)
            if not frame_set:
                raise ValueError(f"trigger {trigger!r} has no frames")
            entries[token] = entries.get(token, frozenset()) | frame_set
        return entries

    def __len__(self) -> int:
        return len(self.entries)


def load_lexicon(path: PathLike) -> FrameLexicon:
    """Load a lexicon from a JSON map {trigger: [frame, ...]}."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: malformed lexicon JSON: {e.msg}") from e
    if not isinstance(raw, dict):
        raise DataError(f"{path}: lexicon must be a JSON object")
    try:
        lexicon = FrameLexicon(entries=raw)
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e
    logger.info("Loaded lexicon with %d triggers from %s", len(lexicon), path)
    return lexicon


def normalize_title(title: str) -> str:
    """Lowercase, spaces to underscores, parenthetical suffix removed."""
    normalized = "_".join(title.strip().lower().split())
    stripped = _PARENTHETICAL.sub("", normalized)
    return stripped or normalized


class TitleGazetteer:
    """Maps normalized titles back to the canonical document ids that produce them."""

    def __init__(self, titles: Iterable[str]):
        self._index: Dict[str, Set[str]] = {}
        for title in titles:
            self._index.setdefault(normalize_title(title), set()).add(title)

    @classmethod
    def coerce(cls, titles: Union["TitleGazetteer", Iterable[str]]) -> "TitleGazetteer":
        return titles if isinstance(titles, TitleGazetteer) else cls(titles)

    @classmethod
    def from_corpus(cls, corpus: Mapping[str, AnnotatedDocument]) -> "TitleGazetteer":
        return cls(corpus.keys())

    def lookup(self, mention: str) -> FrozenSet[str]:
        return frozenset(self._index.get(normalize_title(mention), ()))

    def __len__(self) -> int:
        return len(self._index)


def annotate_frames(tokens: Sequence[str], lexicon: FrameLexicon) -> FrozenSet[str]:
    frames: Set[str] = set()
    for token in tokens:
        frames.update(lexicon.entries.get(token.lower(), ()))
    return frozenset(frames)


def annotate_entities(
    tokens: Sequence[str],
    titles: Union[TitleGazetteer, Iterable[str]],
    max_ngram: int = DEFAULT_MAX_NGRAM,
) -> FrozenSet[str]:
    """Every contiguous n-gram (n <= max_ngram) whose normalized form is a known title."""
    if max_ngram < 1:
        raise ValueError(f"max_ngram must be positive, got {max_ngram}")
    gazetteer = TitleGazetteer.coerce(titles)
    found: Set[str] = set()
    for start in range(len(tokens)):
        for length in range(1, min(max_ngram, len(tokens) - start) + 1):
            found.update(gazetteer.lookup("_".join(tokens[start : start + length])))
    return frozenset(found)


def annotate_claim(
    claim: AnnotatedClaim,
    lexicon: FrameLexicon,
    gazetteer: TitleGazetteer,
    max_ngram: int = DEFAULT_MAX_NGRAM,
    overwrite: bool = False,
) -> AnnotatedClaim:
    """Fill missing frames and entities of a claim."""
    update = {}
    if overwrite or not claim.frames:
        update["frames"] = annotate_frames(claim.tokens, lexicon)
    if overwrite or not claim.entities:
        update["entities"] = annotate_entities(claim.tokens, gazetteer, max_ngram)
    return claim.model_copy(update=update) if update else claim


def annotate_document(document: AnnotatedDocument, lexicon: FrameLexicon, overwrite: bool = False) -> AnnotatedDocument:
    """Fill missing frame sets of every sentence in a document."""
    sentences: List = []
    changed = False
    for sentence in document.sentences:
        if overwrite or not sentence.frames:
            frames = annotate_frames(sentence.tokens, lexicon)
            if frames != sentence.frames:
                sentence = sentence.model_copy(update={"frames": frames})
                changed = True
        sentences.append(sentence)
    return document.model_copy(update={"sentences": tuple(sentences)}) if changed else document
