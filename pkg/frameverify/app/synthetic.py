"""
Deterministic synthetic corpora with planted frames and label-informative embeddings.
Used for demos and for the end-to-end checks of the pipeline.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import toml

from .annotate import FrameLexicon
from .corpus import LABELS, AnnotatedClaim, AnnotatedDocument, Label, PathLike, save_claims, save_corpus
from .embed import EmbeddingTable

logger = logging.getLogger(__name__)

SYNTH_DIM = 16
NOISE_FRAME = "Noise"
NOISE_TRIGGER = "aside"

AFFIRM_WORDS = ("confirmed", "indeed", "verified", "true")
DENY_WORDS = ("denied", "never", "refuted", "false")
NEUTRAL_WORDS = ("meanwhile", "reportedly", "also", "said")

# Output file names written by SyntheticData.write
CORPUS_FILE = "corpus.jsonl"
CLAIMS_FILE = "claims.jsonl"
LEXICON_FILE = "lexicon.json"
EMBEDDINGS_FILE = "embeddings.txt"
CONFIG_FILE = "config.toml"


@dataclass
class SyntheticData:
    corpus: Dict[str, AnnotatedDocument]
    claims: List[AnnotatedClaim]
    lexicon: FrameLexicon
    vectors: Dict[str, np.ndarray] = field(default_factory=dict)
    dim: int = SYNTH_DIM

    def table(self) -> EmbeddingTable:
        return EmbeddingTable.from_vectors(self.vectors, self.dim)

    def write(self, directory: PathLike, K: int = 3, M: int = 0) -> Dict[str, str]:
        """Write corpus, claims, lexicon, embeddings and a matching config.toml into directory."""
        os.makedirs(directory, exist_ok=True)
        files = {
            "corpus": os.path.join(directory, CORPUS_FILE),
            "claims": os.path.join(directory, CLAIMS_FILE),
            "lexicon": os.path.join(directory, LEXICON_FILE),
            "embeddings": os.path.join(directory, EMBEDDINGS_FILE),
            "config": os.path.join(directory, CONFIG_FILE),
        }
        save_corpus(self.corpus, files["corpus"])
        save_claims(self.claims, files["claims"])
        with open(files["lexicon"], "w", encoding="utf-8") as f:
            json.dump({token: sorted(frames) for token, frames in sorted(self.lexicon.entries.items())}, f, indent=2)
            f.write("\n")
        with open(files["embeddings"], "w", encoding="utf-8") as f:
            for token in sorted(self.vectors):
                f.write(token + " " + " ".join(f"{v:.6f}" for v in self.vectors[token]) + "\n")

        config = {
            "paths": {
                "corpus": os.path.abspath(files["corpus"]),
                "claims": os.path.abspath(files["claims"]),
                "embeddings": os.path.abspath(files["embeddings"]),
                "lexicon": os.path.abspath(files["lexicon"]),
                "output_dir": os.path.abspath(os.path.join(directory, "run")),
            },
            "retrieval": {"K": K, "M": M},
            "embedding": {"dim": self.dim},
        }
        with open(files["config"], "w", encoding="utf-8") as f:
            toml.dump(config, f)
        logger.info("Wrote %d documents and %d claims to %s", len(self.corpus), len(self.claims), directory)
        return files


def _direction(axis: int, dim: int, rng: np.random.Generator, scale: float = 3.0) -> np.ndarray:
    vector = rng.normal(0.0, 0.1, size=dim)
    vector[axis] += scale
    return vector


def _base_vectors(dim: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    vectors = {}
    for axis, words in enumerate((AFFIRM_WORDS, DENY_WORDS, NEUTRAL_WORDS)):
        for word in words:
            vectors[word] = _direction(axis, dim, rng)
    vectors[NOISE_TRIGGER] = rng.normal(0.0, 0.5, size=dim)
    return vectors


def _pick(rng: np.random.Generator, words) -> List[str]:
    return [str(words[i]) for i in rng.choice(len(words), size=2, replace=False)]


def _sentence(index: int, tokens: List[str], frames, in_scope: bool = True) -> dict:
    return {"index": index, "text": " ".join(tokens), "tokens": tokens, "frames": sorted(frames), "in_scope": in_scope}


def build_synthetic(
    n_docs: int = 60, claims_per_doc: int = 5, seed: int = 13, dim: int = SYNTH_DIM
) -> SyntheticData:
    """
    Each document holds one frame per claim slot. SUPPORTED claims get a sentence
    of affirming words carrying the claim's frame, REFUTED claims one of denying
    words, UNSURE claims none. Every labeled claim also gets a neutral distractor
    sharing the frame plus a noise frame, so it ranks second and is never gold.
    """
    if dim < 3:
        raise ValueError(f"dim must be at least 3, got {dim}")
    rng = np.random.default_rng(seed)
    vectors = _base_vectors(dim, rng)
    triggers = {f"trigger{slot}": f"Frame_{slot}" for slot in range(claims_per_doc)}
    for trigger in triggers:
        vectors[trigger] = rng.normal(0.0, 0.5, size=dim)
    lexicon = FrameLexicon(entries={**{t: [f] for t, f in triggers.items()}, NOISE_TRIGGER: [NOISE_FRAME]})

    n_claims = n_docs * claims_per_doc
    labels = [LABELS[i % len(LABELS)] for i in range(n_claims)]
    labels = [labels[i] for i in rng.permutation(n_claims)]

    corpus: Dict[str, AnnotatedDocument] = {}
    claims: List[AnnotatedClaim] = []
    for d in range(n_docs):
        doc_id = f"Entity_{d:03d}"
        entity = doc_id.lower()
        vectors[entity] = rng.normal(0.0, 0.5, size=dim)
        sentences = [_sentence(0, [entity, "is", "a", "subject"], ())]
        for word in ("is", "a", "subject", "claims"):
            vectors.setdefault(word, rng.normal(0.0, 0.5, size=dim))

        for slot in range(claims_per_doc):
            trigger = f"trigger{slot}"
            frame = triggers[trigger]
            label = labels[d * claims_per_doc + slot]
            evidence: List[List[Tuple[str, int]]] = []
            if label is not Label.UNSURE:
                words = AFFIRM_WORDS if label is Label.SUPPORTED else DENY_WORDS
                picked = _pick(rng, words)
                evidence = [[(doc_id, len(sentences))]]
                sentences.append(_sentence(len(sentences), [entity, trigger, *picked], {frame}))
                neutral = _pick(rng, NEUTRAL_WORDS)
                sentences.append(
                    _sentence(len(sentences), [entity, trigger, NOISE_TRIGGER, *neutral], {frame, NOISE_FRAME})
                )
            claims.append(
                AnnotatedClaim(
                    claim_id=f"{d * claims_per_doc + slot}",
                    text=f"{entity} {trigger} claims",
                    frames={frame},
                    entities={doc_id},
                    label=label,
                    evidence=evidence,
                )
            )
        corpus[doc_id] = AnnotatedDocument.model_validate({"doc_id": doc_id, "sentences": sentences})

    return SyntheticData(corpus=corpus, claims=claims, lexicon=lexicon, vectors=vectors, dim=dim)


def build_ablation_corpus(
    n_docs: int = 20, gold_size: int = 3, extra: int = 3, seed: int = 13, dim: int = SYNTH_DIM
) -> SyntheticData:
    """
    One claim per document whose single gold group is the gold_size sentences
    matching the claim frames exactly; extra sentences share only one frame and
    rank below them, so pool evidence saturates at K = gold_size.
    """
    rng = np.random.default_rng(seed)
    vectors = _base_vectors(dim, rng)
    lexicon = FrameLexicon(entries={"alpha": ["Frame_A"], "beta": ["Frame_B"], NOISE_TRIGGER: [NOISE_FRAME]})
    for word in ("alpha", "beta", "claims"):
        vectors[word] = rng.normal(0.0, 0.5, size=dim)

    corpus: Dict[str, AnnotatedDocument] = {}
    claims: List[AnnotatedClaim] = []
    for d in range(n_docs):
        doc_id = f"Topic_{d:03d}"
        entity = doc_id.lower()
        vectors[entity] = rng.normal(0.0, 0.5, size=dim)
        label = Label.SUPPORTED if d % 2 == 0 else Label.REFUTED
        words = AFFIRM_WORDS if label is Label.SUPPORTED else DENY_WORDS
        sentences = []
        for _ in range(gold_size):
            picked = _pick(rng, words)
            sentences.append(_sentence(len(sentences), [entity, "alpha", "beta", *picked], {"Frame_A", "Frame_B"}))
        for _ in range(extra):
            neutral = _pick(rng, NEUTRAL_WORDS)
            sentences.append(
                _sentence(len(sentences), [entity, "alpha", NOISE_TRIGGER, *neutral], {"Frame_A", NOISE_FRAME})
            )
        corpus[doc_id] = AnnotatedDocument.model_validate({"doc_id": doc_id, "sentences": sentences})
        claims.append(
            AnnotatedClaim(
                claim_id=f"a{d}",
                text=f"{entity} alpha beta claims",
                frames={"Frame_A", "Frame_B"},
                entities={doc_id},
                label=label,
                evidence=[[(doc_id, i) for i in range(gold_size)]],
            )
        )
    return SyntheticData(corpus=corpus, claims=claims, lexicon=lexicon, vectors=vectors, dim=dim)
