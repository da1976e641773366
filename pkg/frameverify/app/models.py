"""
Verifier architectures: plain MLP (one or two hidden layers), multi-task, and
multi-task with Gumbel-Softmax utility. Forward/backward passes, training loop,
prediction and checkpoints.
"""

import json
import logging
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .corpus import LABELS, AnnotatedClaim, EvidenceKey, Label, PathLike, iter_jsonl, write_jsonl
from .embed import EmbeddingTable, cosine, embed_text
from .errors import AlignmentError, CheckpointError, CorpusParseError
from .neural import (
    DenseLayer,
    TrainConfig,
    add_l2,
    cross_entropy,
    cross_entropy_grad,
    dense_backward,
    dense_forward,
    dropout_mask,
    gumbel_softmax,
    gumbel_softmax_backward,
    relu,
    relu_backward,
    sgd_step,
    softmax,
)
from .retrieval import EvidencePool

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "frameverify-checkpoint"
CHECKPOINT_VERSION = 1
FLATTEN_CONVENTION = "row-major-dx2"
UTILITY_THRESHOLD = 0.5
PREDICTION_MODES = ("raw", "u_filtered")


class Variant(str, Enum):
    V1 = "v1"
    V2 = "v2"
    MT = "mt"
    MT_GUMBEL = "mt-gumbel"

    @classmethod
    def parse(cls, value: Any) -> "Variant":
        if isinstance(value, Variant):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for variant in cls:
            if variant.value == key or variant.name.lower().replace("_", "-") == key:
                return variant
        raise ValueError(f"unknown variant {value!r}")

    @property
    def multitask(self) -> bool:
        return self in (Variant.MT, Variant.MT_GUMBEL)


def layer_shapes(variant: Variant, dim: int, hidden: int, encoder_layers: int = 2) -> Dict[str, Tuple[int, int]]:
    """Ordered layer name -> (n_in, n_out) for a variant."""
    shapes: Dict[str, Tuple[int, int]] = {}
    if not variant.multitask:
        depth = 1 if variant is Variant.V1 else 2
        n_in = 2 * dim + 1
        for i in range(depth):
            shapes[f"plain.{i}"] = (n_in, hidden)
            n_in = hidden
        shapes[f"plain.{depth}"] = (hidden, len(LABELS))
        return shapes

    for i in range(encoder_layers):
        shapes[f"claim_encoder.{i}"] = (dim if i == 0 else hidden, hidden)
    for i in range(encoder_layers):
        shapes[f"evidence_encoder.{i}"] = (dim + 1 if i == 0 else hidden, hidden)
    if variant is Variant.MT:
        shapes["claim_head"] = (2 * hidden, len(LABELS))
        shapes["utility_head"] = (hidden, 2)
    else:
        shapes["gumbel"] = (hidden, 2)
        shapes["claim_head"] = (hidden + 2 * hidden, len(LABELS))
        shapes["utility_head"] = (2 * hidden, 2)
    return shapes


@dataclass
class VerifierParams:
    variant: Variant
    dim: int
    config: TrainConfig
    layers: Dict[str, DenseLayer] = field(default_factory=dict)

    @classmethod
    def init(
        cls, variant: Variant, dim: int, config: TrainConfig, rng: Optional[np.random.Generator] = None
    ) -> "VerifierParams":
        """Glorot-initialized parameters; rng defaults to one seeded from config.seed."""
        variant = Variant.parse(variant)
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        shapes = layer_shapes(variant, dim, config.hidden_size, config.encoder_layers)
        layers = {name: DenseLayer.glorot(n_in, n_out, rng) for name, (n_in, n_out) in shapes.items()}
        return cls(variant=variant, dim=dim, config=config, layers=layers)

    def _stack(self, prefix: str) -> List[DenseLayer]:
        return [layer for name, layer in self.layers.items() if name.startswith(prefix + ".")]

    @property
    def plain_stack(self) -> List[DenseLayer]:
        return self._stack("plain")

    @property
    def claim_encoder(self) -> List[DenseLayer]:
        return self._stack("claim_encoder")

    @property
    def evidence_encoder(self) -> List[DenseLayer]:
        return self._stack("evidence_encoder")

    @property
    def claim_head(self) -> Optional[DenseLayer]:
        return self.layers.get("claim_head")

    @property
    def utility_head(self) -> Optional[DenseLayer]:
        return self.layers.get("utility_head")

    @property
    def gumbel_layer(self) -> Optional[DenseLayer]:
        return self.layers.get("gumbel")

    @property
    def slots(self) -> int:
        return self.config.K + self.config.M

    def all_layers(self) -> List[DenseLayer]:
        return list(self.layers.values())

    def n_params(self, prefix: str = "") -> int:
        return sum(layer.n_params for name, layer in self.layers.items() if name.startswith(prefix))


class Prediction(BaseModel):
    model_config = ConfigDict(frozen=True)

    claim_id: str = ""
    label: Label
    label_probs: Optional[Tuple[float, float, float]] = None
    utilities: Optional[Tuple[float, ...]] = None
    selected_evidence: Tuple[EvidenceKey, ...] = ()

    @model_validator(mode="after")
    def _label_is_argmax(self) -> "Prediction":
        if self.label_probs is not None and LABELS[int(np.argmax(self.label_probs))] is not self.label:
            raise ValueError(f"label {self.label.value} is not the argmax of {self.label_probs}")
        return self

    @classmethod
    def from_probs(
        cls,
        probs: np.ndarray,
        utilities: Optional[np.ndarray] = None,
        selected_evidence: Sequence[EvidenceKey] = (),
        claim_id: str = "",
    ) -> "Prediction":
        return cls(
            claim_id=claim_id,
            label=LABELS[int(np.argmax(probs))],
            label_probs=tuple(float(p) for p in probs),
            utilities=None if utilities is None else tuple(float(u) for u in utilities),
            selected_evidence=tuple(selected_evidence),
        )

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "claim_id": self.claim_id,
            "predicted_label": self.label.value,
            "predicted_evidence": [[doc_id, index] for doc_id, index in self.selected_evidence],
        }
        if self.label_probs is not None:
            record["label_probs"] = list(self.label_probs)
        if self.utilities is not None:
            record["utilities"] = list(self.utilities)
        return record


class EpochLoss(BaseModel):
    epoch: int
    claim_loss: float
    utility_loss: float


@dataclass
class _Pass:
    """Forward results plus what the backward pass needs."""

    probs: np.ndarray
    utilities: Optional[np.ndarray] = None
    cache: Dict[str, Any] = field(default_factory=dict)


# Plain verifier (one or two hidden layers)


def _forward_plain(
    params: VerifierParams,
    claim_vec: np.ndarray,
    evidence_vecs: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    training: bool = False,
) -> _Pass:
    claim_vec = np.asarray(claim_vec, dtype=np.float64)
    evidence_vecs = np.asarray(evidence_vecs, dtype=np.float64).reshape(-1, params.dim)
    if claim_vec.shape != (params.dim,):
        raise ValueError(f"claim vector of shape {claim_vec.shape}, expected ({params.dim},)")
    e = evidence_vecs.mean(axis=0) if len(evidence_vecs) else np.zeros(params.dim)
    h = np.concatenate([claim_vec, e, [cosine(claim_vec, e)]])

    stack = params.plain_stack
    hidden = []
    for layer in stack[:-1]:
        z = dense_forward(layer, h)
        mask = dropout_mask(z.shape, params.config.dropout, rng, training)
        hidden.append((h, z, mask))
        h = relu(z) * mask
    probs = softmax(dense_forward(stack[-1], h))
    return _Pass(probs=probs, cache={"hidden": hidden, "last": h})


def _backward_plain(params: VerifierParams, state: _Pass, grad_logits: np.ndarray) -> None:
    stack = params.plain_stack
    grad = dense_backward(stack[-1], state.cache["last"], grad_logits)
    for layer, (h, z, mask) in zip(reversed(stack[:-1]), reversed(state.cache["hidden"])):
        grad = relu_backward(z, grad * mask)
        grad = dense_backward(layer, h, grad)


# Multi-task encoders


def _encode(layers: Sequence[DenseLayer], x: np.ndarray):
    cache = []
    for layer in layers:
        z = dense_forward(layer, x)
        cache.append((x, z))
        x = relu(z)
    return x, cache


def _backprop_stack(layers: Sequence[DenseLayer], cache, grad: np.ndarray) -> None:
    for layer, (x, z) in zip(reversed(layers), reversed(cache)):
        grad = relu_backward(z, grad)
        grad = dense_backward(layer, x, grad)


def _evidence_inputs(claim_vec: np.ndarray, evidence_vecs: np.ndarray) -> np.ndarray:
    cosines = np.array([cosine(claim_vec, e) for e in evidence_vecs]).reshape(-1, 1)
    return np.hstack([evidence_vecs, cosines])


def _check_slots(params: VerifierParams, evidence_vecs: np.ndarray, expected_slots: Optional[int]) -> np.ndarray:
    evidence_vecs = np.asarray(evidence_vecs, dtype=np.float64).reshape(-1, params.dim)
    expected = params.slots if expected_slots is None else expected_slots
    if len(evidence_vecs) != expected or expected == 0:
        raise ValueError(f"expected {expected} evidence slots, got {len(evidence_vecs)}")
    return evidence_vecs


def _forward_mt(
    params: VerifierParams, claim_vec: np.ndarray, evidence_vecs: np.ndarray, expected_slots: Optional[int] = None
) -> _Pass:
    claim_vec = np.asarray(claim_vec, dtype=np.float64)
    evidence_vecs = _check_slots(params, evidence_vecs, expected_slots)
    c2, claim_cache = _encode(params.claim_encoder, claim_vec)
    e2, evidence_cache = _encode(params.evidence_encoder, _evidence_inputs(claim_vec, evidence_vecs))
    joint = np.concatenate([c2, e2.mean(axis=0)])
    probs = softmax(dense_forward(params.claim_head, joint))
    utilities = softmax(dense_forward(params.utility_head, e2))
    cache = {"claim": claim_cache, "evidence": evidence_cache, "joint": joint, "e2": e2}
    return _Pass(probs=probs, utilities=utilities, cache=cache)


def _backward_mt(params: VerifierParams, state: _Pass, grad_claim: np.ndarray, grad_utility: np.ndarray) -> None:
    hidden = params.config.hidden_size
    e2 = state.cache["e2"]
    grad_joint = dense_backward(params.claim_head, state.cache["joint"], grad_claim)
    grad_e2 = dense_backward(params.utility_head, e2, grad_utility)
    grad_e2 += grad_joint[hidden:] / len(e2)
    _backprop_stack(params.evidence_encoder, state.cache["evidence"], grad_e2)
    _backprop_stack(params.claim_encoder, state.cache["claim"], grad_joint[:hidden])


def outer_features(encoded: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Per-slot outer product e_i z_i^T (hidden x 2), flattened row-major to length 2*hidden."""
    encoded = np.atleast_2d(encoded)
    z = np.atleast_2d(z)
    return (encoded[:, :, None] * z[:, None, :]).reshape(len(encoded), -1)


def _forward_mt_gumbel(
    params: VerifierParams,
    claim_vec: np.ndarray,
    evidence_vecs: np.ndarray,
    tau: float,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None,
    expected_slots: Optional[int] = None,
) -> _Pass:
    claim_vec = np.asarray(claim_vec, dtype=np.float64)
    evidence_vecs = _check_slots(params, evidence_vecs, expected_slots)
    c2, claim_cache = _encode(params.claim_encoder, claim_vec)
    e2, evidence_cache = _encode(params.evidence_encoder, _evidence_inputs(claim_vec, evidence_vecs))
    z, noise = gumbel_softmax(dense_forward(params.gumbel_layer, e2), tau, rng, noise)
    outer = outer_features(e2, z)
    joint = np.concatenate([c2, outer.mean(axis=0)])
    probs = softmax(dense_forward(params.claim_head, joint))
    utilities = softmax(dense_forward(params.utility_head, outer))
    cache = {
        "claim": claim_cache,
        "evidence": evidence_cache,
        "joint": joint,
        "e2": e2,
        "z": z,
        "noise": noise,
        "outer": outer,
        "tau": tau,
    }
    return _Pass(probs=probs, utilities=utilities, cache=cache)


def _backward_mt_gumbel(
    params: VerifierParams, state: _Pass, grad_claim: np.ndarray, grad_utility: np.ndarray
) -> None:
    hidden = params.config.hidden_size
    e2, z, outer = state.cache["e2"], state.cache["z"], state.cache["outer"]
    grad_joint = dense_backward(params.claim_head, state.cache["joint"], grad_claim)
    grad_outer = dense_backward(params.utility_head, outer, grad_utility)
    grad_outer += grad_joint[hidden:] / len(e2)
    grad_outer = grad_outer.reshape(len(e2), hidden, 2)
    grad_e2 = (grad_outer * z[:, None, :]).sum(axis=2)
    grad_z = (grad_outer * e2[:, :, None]).sum(axis=1)
    grad_gumbel = gumbel_softmax_backward(z, grad_z, state.cache["tau"])
    grad_e2 += dense_backward(params.gumbel_layer, e2, grad_gumbel)
    _backprop_stack(params.evidence_encoder, state.cache["evidence"], grad_e2)
    _backprop_stack(params.claim_encoder, state.cache["claim"], grad_joint[:hidden])


# Public forward passes


def _selected(keys: Optional[Sequence[EvidenceKey]], utilities: Optional[np.ndarray]) -> Tuple[EvidenceKey, ...]:
    if keys is None:
        return ()
    if utilities is None:
        return tuple(key for key in keys if key is not None)
    return tuple(
        key for key, u in zip(keys, utilities[:, 1]) if key is not None and u > UTILITY_THRESHOLD
    )


def forward_verifier(
    params: VerifierParams,
    claim_vec: np.ndarray,
    evidence_vecs: Sequence[np.ndarray],
    keys: Optional[Sequence[EvidenceKey]] = None,
) -> Prediction:
    """Eval-mode plain verifier; every evidence key passed in is selected."""
    if params.variant.multitask:
        raise ValueError(f"forward_verifier does not apply to variant {params.variant.value}")
    state = _forward_plain(params, claim_vec, evidence_vecs)
    return Prediction.from_probs(state.probs, selected_evidence=_selected(keys, None))


def forward_mt(
    params: VerifierParams,
    claim_vec: np.ndarray,
    evidence_vecs: Sequence[np.ndarray],
    keys: Optional[Sequence[Optional[EvidenceKey]]] = None,
    expected_slots: Optional[int] = None,
) -> Prediction:
    """Multi-task verifier; evidence keys with useful-probability above 0.5 are selected."""
    if params.variant is not Variant.MT:
        raise ValueError(f"forward_mt does not apply to variant {params.variant.value}")
    state = _forward_mt(params, claim_vec, evidence_vecs, expected_slots)
    return Prediction.from_probs(state.probs, state.utilities[:, 1], _selected(keys, state.utilities))


def forward_mt_gumbel(
    params: VerifierParams,
    claim_vec: np.ndarray,
    evidence_vecs: Sequence[np.ndarray],
    tau: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None,
    keys: Optional[Sequence[Optional[EvidenceKey]]] = None,
    expected_slots: Optional[int] = None,
) -> Prediction:
    if params.variant is not Variant.MT_GUMBEL:
        raise ValueError(f"forward_mt_gumbel does not apply to variant {params.variant.value}")
    tau = params.config.tau if tau is None else tau
    if rng is None and noise is None:
        rng = np.random.default_rng(params.config.seed)
    state = _forward_mt_gumbel(params, claim_vec, evidence_vecs, tau, rng, noise, expected_slots)
    return Prediction.from_probs(state.probs, state.utilities[:, 1], _selected(keys, state.utilities))


def multitask_loss(
    pred: Prediction, gold_label: Label, utility_targets: Optional[Sequence[int]], lam: float
) -> float:
    """CE(claim) + lam * mean CE(utility) over evidence slots."""
    if pred.label_probs is None or pred.utilities is None:
        raise ValueError("multitask_loss needs label probabilities and utilities")
    if utility_targets is None or len(utility_targets) != len(pred.utilities):
        raise ValueError("utility targets missing or not aligned with evidence slots")
    claim_loss = cross_entropy(np.asarray(pred.label_probs), Label.parse(gold_label).position)
    slot_losses = [cross_entropy(np.array([1.0 - u, u]), int(t)) for u, t in zip(pred.utilities, utility_targets)]
    return claim_loss + lam * float(np.mean(slot_losses))


# Training


@dataclass
class Example:
    claim_id: str
    claim_vec: np.ndarray
    evidence: np.ndarray
    real: np.ndarray
    keys: List[Optional[EvidenceKey]]
    label: Optional[int] = None
    utility_targets: Optional[np.ndarray] = None


def make_example(claim: AnnotatedClaim, pool: EvidencePool, table: EmbeddingTable, oov: str = "zero") -> Example:
    candidates = pool.padded().candidates
    evidence = np.zeros((len(candidates), table.dim))
    for row, candidate in enumerate(candidates):
        if not candidate.is_pad:
            evidence[row] = embed_text(candidate.tokens, table, oov)
    targets = None
    if claim.gold_label is not None:
        targets = np.array([c.utility_target or 0 for c in candidates], dtype=int)
    return Example(
        claim_id=claim.claim_id,
        claim_vec=embed_text(claim.tokens, table, oov),
        evidence=evidence,
        real=np.array([not c.is_pad for c in candidates], dtype=bool),
        keys=[None if c.is_pad else c.key for c in candidates],
        label=None if claim.gold_label is None else claim.gold_label.position,
        utility_targets=targets,
    )


def _run(
    params: VerifierParams,
    example: Example,
    rng: Optional[np.random.Generator],
    training: bool,
    noise: Optional[np.ndarray] = None,
) -> _Pass:
    if params.variant is Variant.MT:
        return _forward_mt(params, example.claim_vec, example.evidence)
    if params.variant is Variant.MT_GUMBEL:
        return _forward_mt_gumbel(params, example.claim_vec, example.evidence, params.config.tau, rng, noise)
    return _forward_plain(params, example.claim_vec, example.evidence[example.real], rng, training)


def example_loss(
    params: VerifierParams,
    example: Example,
    rng: Optional[np.random.Generator] = None,
    training: bool = True,
    noise: Optional[np.ndarray] = None,
    backward: bool = True,
) -> Tuple[float, float, _Pass]:
    """
    Forward one example, accumulate gradients when backward is set.
    Returns (claim loss, weighted utility loss, pass state).
    """
    if example.label is None:
        raise ValueError(f"claim {example.claim_id!r} has no gold label")
    state = _run(params, example, rng, training, noise)
    claim_loss = cross_entropy(state.probs, example.label)
    grad_claim = cross_entropy_grad(state.probs, example.label)

    if not params.variant.multitask:
        if backward:
            _backward_plain(params, state, grad_claim)
        return claim_loss, 0.0, state

    lam = params.config.lambda_utility
    targets = example.utility_targets
    slots = len(targets)
    utility_loss = lam * float(np.mean([cross_entropy(u, t) for u, t in zip(state.utilities, targets)]))
    if backward:
        grad_utility = lam * cross_entropy_grad(state.utilities, targets) / slots
        if params.variant is Variant.MT:
            _backward_mt(params, state, grad_claim, grad_utility)
        else:
            _backward_mt_gumbel(params, state, grad_claim, grad_utility)
    return claim_loss, utility_loss, state


def _align(claims: Sequence[AnnotatedClaim], pools: Mapping[str, EvidencePool], variant: Variant, slots: int) -> None:
    missing = [claim.claim_id for claim in claims if claim.claim_id not in pools]
    if missing:
        raise AlignmentError("claims without an evidence pool", missing)
    unlabeled = [claim.claim_id for claim in claims if claim.gold_label is None]
    if unlabeled:
        raise AlignmentError("training claims without a gold label", unlabeled)
    if variant.multitask:
        wrong = [claim.claim_id for claim in claims if pools[claim.claim_id].size != slots]
        if wrong:
            raise AlignmentError(f"evidence pools not of size K+M={slots}", wrong)


def train(
    claims: Sequence[AnnotatedClaim],
    pools: Mapping[str, EvidencePool],
    table: EmbeddingTable,
    config: TrainConfig,
    variant: Variant,
    oov: str = "zero",
) -> Tuple[VerifierParams, List[EpochLoss]]:
    """
    Per-claim momentum SGD; all randomness comes from one generator seeded by config.seed.

    config.l2 weighs the penalty against the summed loss of an epoch, so each
    per-claim step carries l2 / len(claims) of it.
    """
    if not claims:
        raise ValueError("cannot train on an empty claim set")
    variant = Variant.parse(variant)
    _align(claims, pools, variant, config.K + config.M)
    rng = np.random.default_rng(config.seed)
    params = VerifierParams.init(variant, table.dim, config, rng)
    examples = [make_example(claim, pools[claim.claim_id], table, oov) for claim in claims]
    layers = params.all_layers()
    l2 = config.l2 / len(examples)

    history: List[EpochLoss] = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        claim_total = utility_total = 0.0
        for i in rng.permutation(len(examples)):
            claim_loss, utility_loss, _ = example_loss(params, examples[i], rng, training=True)
            add_l2(layers, l2)
            sgd_step(layers, config, step)
            step += 1
            claim_total += claim_loss
            utility_total += utility_loss
        record = EpochLoss(
            epoch=epoch, claim_loss=claim_total / len(examples), utility_loss=utility_total / len(examples)
        )
        history.append(record)
        logger.info(
            "Epoch %d/%d: claim loss %.4f, utility loss %.4f",
            epoch,
            config.epochs,
            record.claim_loss,
            record.utility_loss,
        )
    return params, history


# Prediction


def claim_rng(seed: int, claim_id: str) -> np.random.Generator:
    """Independent generator per claim so predictions do not depend on claim order."""
    return np.random.default_rng([seed, zlib.crc32(claim_id.encode("utf-8"))])


def predict(
    params: VerifierParams,
    claim: AnnotatedClaim,
    pool: EvidencePool,
    table: EmbeddingTable,
    mode: str = "raw",
    oov: str = "zero",
    threshold: float = UTILITY_THRESHOLD,
) -> Prediction:
    """
    raw: every pool sentence is selected evidence.
    u_filtered: drop sentences whose predicted utility is at or below threshold.
    """
    if mode not in PREDICTION_MODES:
        raise ValueError(f"mode must be one of {PREDICTION_MODES}, got {mode!r}")
    if table.dim != params.dim:
        raise CheckpointError(f"embedding dim {table.dim} does not match model dim {params.dim}")
    if mode == "u_filtered" and not params.variant.multitask:
        logger.warning("Variant %s has no utility head; using raw evidence", params.variant.value)
        mode = "raw"
    if params.variant.multitask and pool.size != params.slots:
        raise CheckpointError(
            f"pool for claim {claim.claim_id!r} has {pool.size} slots, model was trained on {params.slots}"
        )

    example = make_example(claim, pool, table, oov)
    rng = claim_rng(params.config.seed, claim.claim_id) if params.variant is Variant.MT_GUMBEL else None
    state = _run(params, example, rng, training=False)

    utilities = None if state.utilities is None else state.utilities[:, 1]
    selected = []
    for row, key in enumerate(example.keys):
        if key is None:
            continue
        if mode == "u_filtered" and utilities[row] <= threshold:
            continue
        selected.append(key)
    return Prediction.from_probs(state.probs, utilities, selected, claim_id=claim.claim_id)


def utility_accuracy(
    predictions: Sequence[Prediction], pools: Mapping[str, EvidencePool], threshold: float = UTILITY_THRESHOLD
) -> float:
    """Share of non-pad slots whose thresholded utility matches the target."""
    hits = total = 0
    for prediction in predictions:
        pool = pools.get(prediction.claim_id)
        if pool is None or prediction.utilities is None:
            continue
        for candidate, u in zip(pool.padded().candidates, prediction.utilities):
            if candidate.is_pad or candidate.utility_target is None:
                continue
            hits += int((u > threshold) == bool(candidate.utility_target))
            total += 1
    return hits / total if total else 0.0


def save_predictions(predictions: Sequence[Prediction], path: PathLike) -> int:
    return write_jsonl((prediction.to_record() for prediction in predictions), path)


def load_predictions(path: PathLike) -> List[Prediction]:
    """Read prediction JSONL; duplicates are kept so scoring can reject them."""
    predictions = []
    for line_number, record in iter_jsonl(path):
        try:
            predictions.append(
                Prediction(
                    claim_id=str(record["claim_id"]),
                    label=Label.parse(record["predicted_label"]),
                    label_probs=record.get("label_probs"),
                    utilities=record.get("utilities"),
                    selected_evidence=tuple(
                        (str(doc_id), int(index)) for doc_id, index in record.get("predicted_evidence", [])
                    ),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CorpusParseError(path, line_number, str(e)) from e
    return predictions


# Checkpoints


def save_checkpoint(params: VerifierParams, path: PathLike) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "variant": params.variant.value,
        "dim": params.dim,
        "flatten": FLATTEN_CONVENTION,
        "config": params.config.model_dump(),
        "layers": {name: {"W": layer.W.tolist(), "b": layer.b.tolist()} for name, layer in params.layers.items()},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
        f.write("\n")


def load_checkpoint(path: PathLike, dim: Optional[int] = None) -> VerifierParams:
    """Load a checkpoint, rejecting unknown formats and layer shapes that do not fit."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: not a JSON checkpoint: {e.msg}") from e
    if payload.get("format") != CHECKPOINT_FORMAT or payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format/version")
    try:
        variant = Variant.parse(payload["variant"])
        config = TrainConfig.model_validate(payload["config"])
        stored_dim = int(payload["dim"])
    except (KeyError, ValueError, ValidationError) as e:
        raise CheckpointError(f"{path}: {e}") from e
    if dim is not None and dim != stored_dim:
        raise CheckpointError(f"{path}: checkpoint dim {stored_dim} does not match embedding dim {dim}")

    shapes = layer_shapes(variant, stored_dim, config.hidden_size, config.encoder_layers)
    stored = payload.get("layers", {})
    if set(stored) != set(shapes):
        raise CheckpointError(f"{path}: layers {sorted(stored)} do not match variant {variant.value}")
    layers = {}
    for name, (n_in, n_out) in shapes.items():
        W = np.asarray(stored[name]["W"], dtype=np.float64)
        b = np.asarray(stored[name]["b"], dtype=np.float64)
        if W.shape != (n_out, n_in) or b.shape != (n_out,):
            raise CheckpointError(f"{path}: layer {name} has shape {W.shape}, expected {(n_out, n_in)}")
        layers[name] = DenseLayer(W, b)
    return VerifierParams(variant=variant, dim=stored_dim, config=config, layers=layers)
