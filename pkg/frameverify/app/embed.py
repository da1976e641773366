"""
Pretrained word vectors, bag-of-words sentence representations and cosine similarity
"""

import logging
from typing import Dict, Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import PathLike
from .errors import EmbeddingFormatError

logger = logging.getLogger(__name__)

OOV_POLICIES = ("zero", "skip")


class EmbeddingTable:
    """
    Immutable token -> vector lookup backed by a single matrix.
    Unknown tokens map to the zero vector.
    """

    def __init__(self, dim: int, vocab: Mapping[str, int], matrix: np.ndarray, skipped: int = 0):
        if dim <= 0:
            raise ValueError(f"dim must be positive, got {dim}")
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != dim or matrix.shape[0] != len(vocab):
            raise ValueError(f"matrix shape {matrix.shape} does not fit {len(vocab)} tokens of dim {dim}")
        self.dim = dim
        self._vocab = dict(vocab)
        self._matrix = matrix
        self._matrix.setflags(write=False)
        self.skipped = skipped

    @classmethod
    def from_vectors(cls, vectors: Mapping[str, Sequence[float]], dim: Optional[int] = None) -> "EmbeddingTable":
        tokens = list(vectors)
        if dim is None:
            if not tokens:
                raise ValueError("dim is required for an empty table")
            dim = len(vectors[tokens[0]])
        matrix = np.zeros((len(tokens), dim))
        for row, token in enumerate(tokens):
            vector = np.asarray(vectors[token], dtype=np.float64)
            if vector.shape != (dim,):
                raise ValueError(f"vector for {token!r} has shape {vector.shape}, expected ({dim},)")
            matrix[row] = vector
        return cls(dim, {token: row for row, token in enumerate(tokens)}, matrix)

    def __len__(self) -> int:
        return len(self._vocab)

    def __contains__(self, token: str) -> bool:
        return token in self._vocab

    def lookup(self, token: str) -> np.ndarray:
        row = self._vocab.get(token)
        if row is None:
            return np.zeros(self.dim)
        return self._matrix[row].copy()

    def rows(self, tokens: Iterable[str]):
        return [self._vocab.get(token) for token in tokens]

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def scaled(self, factor: float) -> "EmbeddingTable":
        return EmbeddingTable(self.dim, self._vocab, self._matrix * factor, self.skipped)


def load_embeddings(path: PathLike, dim: int) -> EmbeddingTable:
    """
    Read GloVe-style text vectors ("token v1 ... vdim" per line).
    Lines with the wrong arity or unparsable values are skipped and counted.
    """
    vocab: Dict[str, int] = {}
    rows = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip().split(" ")
            if len(parts) != dim + 1 or not parts[0]:
                if line.strip():
                    skipped += 1
                continue
            try:
                vector = np.asarray(parts[1:], dtype=np.float64)
            except ValueError:
                skipped += 1
                continue
            if not np.all(np.isfinite(vector)):
                skipped += 1
                continue
            token = parts[0]
            if token in vocab:
                rows[vocab[token]] = vector
            else:
                vocab[token] = len(rows)
                rows.append(vector)

    if skipped:
        logger.warning("Skipped %d malformed embedding lines in %s", skipped, path)
    if not rows:
        raise EmbeddingFormatError(f"{path}: no valid {dim}-dimensional vectors found")
    logger.info("Loaded %d vectors of dim %d from %s", len(rows), dim, path)
    return EmbeddingTable(dim, vocab, np.vstack(rows), skipped=skipped)


def embed_text(tokens: Sequence[str], table: EmbeddingTable, oov: str = "zero") -> np.ndarray:
    """
    Average bag-of-words vector.
    With oov="zero" unknown tokens count in the denominator; with "skip" they are ignored.
    """
    if oov not in OOV_POLICIES:
        raise ValueError(f"oov must be one of {OOV_POLICIES}, got {oov!r}")
    if not tokens:
        return np.zeros(table.dim)
    rows = table.rows(tokens)
    known = [row for row in rows if row is not None]
    denominator = len(rows) if oov == "zero" else len(known)
    if not known or denominator == 0:
        return np.zeros(table.dim)
    return table.matrix[known].sum(axis=0) / denominator


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"cosine of vectors with shapes {a.shape} and {b.shape}")
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / norm, -1.0, 1.0))
