"""
Minimal feed-forward toolkit: dense layers, activations, dropout, Gumbel-Softmax,
cross-entropy, momentum SGD and a finite-difference gradient checker.

Gradients are derived by hand per architecture; dense_backward accumulates into
the layer so a layer shared across evidence slots collects every slot's gradient.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(default=0.01, ge=0.0)
    decay: float = Field(default=1e-6, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    l2: float = Field(default=0.1, ge=0.0)
    dropout: float = Field(default=0.5, ge=0.0, lt=1.0)
    epochs: int = Field(default=50, ge=1)
    tau: float = Field(default=0.5, gt=0.0)
    lambda_utility: float = Field(default=1.0, ge=0.0)
    seed: int = 13
    K: int = Field(default=3, ge=0)
    M: int = Field(default=0, ge=0)
    hidden_size: int = Field(default=100, ge=1)
    encoder_layers: int = Field(default=2, ge=1, le=2)


@dataclass
class DenseLayer:
    W: np.ndarray
    b: np.ndarray
    grad_W: np.ndarray = field(init=False, repr=False)
    grad_b: np.ndarray = field(init=False, repr=False)
    vel_W: np.ndarray = field(init=False, repr=False)
    vel_b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.W = np.array(self.W, dtype=np.float64)
        self.b = np.array(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent layer shapes W{self.W.shape} b{self.b.shape}")
        self.grad_W = np.zeros_like(self.W)
        self.grad_b = np.zeros_like(self.b)
        self.vel_W = np.zeros_like(self.W)
        self.vel_b = np.zeros_like(self.b)

    @classmethod
    def glorot(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "DenseLayer":
        limit = np.sqrt(6.0 / (n_in + n_out))
        return cls(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out))

    @classmethod
    def zeros(cls, n_in: int, n_out: int) -> "DenseLayer":
        return cls(np.zeros((n_out, n_in)), np.zeros(n_out))

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_params(self) -> int:
        return self.W.size + self.b.size

    def zero_grad(self) -> None:
        self.grad_W.fill(0.0)
        self.grad_b.fill(0.0)


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """Pre-activation Wx + b; x may be a vector or a (rows, in) matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.n_in:
        raise ValueError(f"input of size {x.shape[-1]} for a layer expecting {layer.n_in}")
    return x @ layer.W.T + layer.b


def dense_backward(layer: DenseLayer, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Accumulate parameter gradients and return the gradient with respect to x."""
    x2 = np.atleast_2d(x)
    g2 = np.atleast_2d(grad_out)
    layer.grad_W += g2.T @ x2
    layer.grad_b += g2.sum(axis=0)
    return grad_out @ layer.W


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(pre_activation: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (pre_activation > 0.0)


def softmax(x: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max subtraction."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("softmax of an empty vector")
    shifted = np.exp(x - x.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    """Gradient with respect to the softmax input given the gradient of its output."""
    return probs * (grad_probs - (grad_probs * probs).sum(axis=-1, keepdims=True))


def dropout_mask(shape, rate: float, rng: Optional[np.random.Generator], training: bool = True) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability rate, else 1/(1-rate). All ones outside training."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    u = np.clip(rng.random(shape), np.finfo(np.float64).tiny, 1.0)
    return -np.log(-np.log(u))


def gumbel_softmax(
    logits: np.ndarray,
    tau: float,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Soft Gumbel sample softmax((logits + g) / tau).
    Returns (sample, noise); pass the noise back in to freeze it.
    """
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    logits = np.asarray(logits, dtype=np.float64)
    if noise is None:
        if rng is None:
            raise ValueError("gumbel_softmax needs a generator or frozen noise")
        noise = gumbel_noise(logits.shape, rng)
    return softmax((logits + noise) / tau), noise


def gumbel_softmax_backward(sample: np.ndarray, grad_sample: np.ndarray, tau: float) -> np.ndarray:
    """Gradient with respect to the logits; the noise is a constant."""
    return softmax_backward(sample, grad_sample) / tau


def cross_entropy(pred: np.ndarray, target: int) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    if not 0 <= target < pred.shape[-1]:
        raise ValueError(f"target {target} out of range for {pred.shape[-1]} classes")
    return float(-np.log(max(pred[target], PROB_FLOOR)))


def cross_entropy_grad(probs: np.ndarray, targets) -> np.ndarray:
    """Gradient of cross-entropy with respect to the logits feeding a softmax."""
    grad = np.array(probs, dtype=np.float64)
    if grad.ndim == 1:
        grad[targets] -= 1.0
    else:
        grad[np.arange(grad.shape[0]), np.asarray(targets)] -= 1.0
    return grad


def l2_penalty(layers: Sequence[DenseLayer], l2: float) -> float:
    return 0.5 * l2 * float(sum(np.sum(layer.W * layer.W) for layer in layers))


def add_l2(layers: Sequence[DenseLayer], l2: float) -> None:
    """Add the L2 gradient l2 * W to weight matrices; biases are not regularized."""
    if l2:
        for layer in layers:
            layer.grad_W += l2 * layer.W


def sgd_step(layers: Sequence[DenseLayer], config: TrainConfig, step_count: int) -> Sequence[DenseLayer]:
    """Momentum SGD with 1/(1 + decay*t) learning-rate decay; gradients are zeroed afterwards."""
    lr = config.learning_rate / (1.0 + config.decay * step_count)
    for layer in layers:
        layer.vel_W *= config.momentum
        layer.vel_W -= lr * layer.grad_W
        layer.vel_b *= config.momentum
        layer.vel_b -= lr * layer.grad_b
        layer.W += layer.vel_W
        layer.b += layer.vel_b
        layer.zero_grad()
    return layers


def grad_check(
    closure: Callable[[], float],
    layers: Sequence[DenseLayer],
    epsilon: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
    floor: float = 1e-8,
) -> float:
    """
    Compare the gradients a closure accumulates into layers with central differences.

    closure() must run a deterministic forward/backward pass and return the loss.
    Returns max |analytic - numeric| / max(|analytic|, |numeric|, floor) over the
    checked coordinates (all of them, or max_coords sampled with seed).
    """
    for layer in layers:
        layer.zero_grad()
    closure()
    analytic = [(layer.grad_W.copy(), layer.grad_b.copy()) for layer in layers]

    coords = []
    for li, layer in enumerate(layers):
        coords.extend((li, 0, i) for i in range(layer.W.size))
        coords.extend((li, 1, i) for i in range(layer.b.size))
    if max_coords is not None and len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(picked)]

    worst = 0.0
    for li, which, i in coords:
        param = layers[li].W if which == 0 else layers[li].b
        original = param.flat[i]
        param.flat[i] = original + epsilon
        loss_plus = closure()
        param.flat[i] = original - epsilon
        loss_minus = closure()
        param.flat[i] = original
        numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
        exact = analytic[li][which].flat[i]
        error = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
        worst = max(worst, error)

    for layer in layers:
        layer.zero_grad()
    return worst
