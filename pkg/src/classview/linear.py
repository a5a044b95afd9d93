"""Linear models: margins, losses, incremental SGD steps, full retraining,
and the l1 drift bound for kernel-weight models.

Models are immutable snapshots versioned by a round counter; every training
step yields a new snapshot. The decision rule is label = sign(w . f - b) with
sign(0) = +1. Weight vectors are logically zero-extended as the feature
dimension grows, so margins tolerate vectors wider than the stored w.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .vectors import DenseVector, SparseVector

LOSSES = ("hinge", "logistic", "ridge")


@dataclass(frozen=True)
class LinearModel:
    w: DenseVector
    b: float
    round: int = 0

    @property
    def dim(self) -> int:
        return int(self.w.shape[0])


def zero_model(dim: int) -> LinearModel:
    return LinearModel(w=np.zeros(dim, dtype=np.float64), b=0.0, round=0)


@dataclass(frozen=True)
class TrainingExample:
    id: object
    f: SparseVector
    y: int

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.y}")


@dataclass
class TrainConfig:
    """Loss choice plus the step-size schedule eta_t = eta0 / (1 + eta0*lam*t).

    step_count is the running step index t; sgd_step advances it.
    """

    loss: str = "hinge"
    lam: float = 1e-4
    eta0: float = 0.1
    step_count: int = 0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.eta0 <= 0:
            raise ValueError("eta0 must be positive")


def margin(m: LinearModel, f: SparseVector | DenseVector) -> float:
    """w . f - b, ignoring feature indices beyond the model's dimension."""
    w = m.w
    d = w.shape[0]
    total = 0.0
    if isinstance(f, SparseVector):
        for i, v in f.entries:
            if i < d:
                total += w[i] * v
    else:
        n = min(d, len(f))
        for i in range(n):
            total += w[i] * f[i]
    return float(total - m.b)


def classify(m: LinearModel, f: SparseVector | DenseVector) -> int:
    return 1 if margin(m, f) >= 0.0 else -1


def loss_value(kind: str, z: float, y: int) -> float:
    """Loss at score z with label y: hinge max(1-zy, 0), logistic, or squared error."""
    if y not in (-1, 1):
        raise ValueError(f"label must be -1 or +1, got {y}")
    if kind == "hinge":
        return max(1.0 - z * y, 0.0)
    if kind == "logistic":
        x = -y * z
        # log(1 + e^x), overflow-safe for large |x|
        return x + math.log1p(math.exp(-x)) if x > 0 else math.log1p(math.exp(x))
    if kind == "ridge":
        return (z - y) ** 2
    raise ValueError(f"unknown loss {kind!r}")


def loss_grad(kind: str, z: float, y: int) -> float:
    """dL/dz. The hinge subgradient is 0 at and beyond the kink (zy >= 1)."""
    if y not in (-1, 1):
        raise ValueError(f"label must be -1 or +1, got {y}")
    if kind == "hinge":
        return -float(y) if z * y < 1.0 else 0.0
    if kind == "logistic":
        x = y * z
        if x > 0:
            return -y * math.exp(-x) / (1.0 + math.exp(-x))
        return -y / (1.0 + math.exp(x))
    if kind == "ridge":
        return 2.0 * (z - y)
    raise ValueError(f"unknown loss {kind!r}")


def _grown(w: DenseVector, dim: int) -> DenseVector:
    if dim <= w.shape[0]:
        return w
    out = np.zeros(dim, dtype=np.float64)
    out[: w.shape[0]] = w
    return out


def sgd_step(m: LinearModel, ex: TrainingExample, cfg: TrainConfig) -> LinearModel:
    """One gradient step on the l2-regularized loss; the bias is not regularized.

    Uses eta_t at the current step count, then advances cfg.step_count. Returns
    a new model with round + 1. A non-violating hinge example with lam = 0
    leaves the model unchanged.
    """
    eta = cfg.eta0 / (1.0 + cfg.eta0 * cfg.lam * cfg.step_count)
    cfg.step_count += 1
    w = _grown(m.w, ex.f.dimension)
    z = margin(replace(m, w=w), ex.f)
    g = loss_grad(cfg.loss, z, ex.y)
    shrink = 1.0 - eta * cfg.lam
    if g == 0.0 and shrink == 1.0:
        if w is m.w:
            return replace(m, round=m.round + 1)
        return LinearModel(w=w, b=m.b, round=m.round + 1)
    w2 = w * shrink
    if g != 0.0:
        step = eta * g
        for i, v in ex.f.entries:
            w2[i] -= step * v
        b2 = m.b + step  # dz/db = -1
    else:
        b2 = m.b
    return LinearModel(w=w2, b=b2, round=m.round + 1)


def train_full(
    examples: Sequence[TrainingExample],
    cfg: TrainConfig,
    epochs: int = 5,
    seed: int = 0,
) -> LinearModel:
    """Train from scratch with seeded shuffled passes; deterministic given the seed."""
    if not examples:
        raise ValueError("cannot train on an empty example set")
    dim = max(ex.f.dimension for ex in examples)
    model = zero_model(dim)
    run_cfg = replace(cfg, step_count=0)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for idx in rng.permutation(len(examples)):
            model = sgd_step(model, examples[int(idx)], run_cfg)
    return model


# ---------------------------------------------------------------------------
# Kernel-weight models and their drift bound


@dataclass
class KernelModel:
    """Score(x) = sum_i c_i * K(s_i, x) for a kernel valued in [0, 1]."""

    supports: list[np.ndarray]
    weights: list[float]
    kernel: Callable[[np.ndarray, np.ndarray], float]

    def score(self, x: np.ndarray) -> float:
        return float(sum(c * self.kernel(s, x) for s, c in zip(self.supports, self.weights)))


def kernel_drift_bound(old_weights: Mapping, new_weights: Mapping) -> float:
    """l1 distance between weight maps aligned over the union of support keys.

    Because the kernel is valued in [0, 1], this bounds |score_new(x) -
    score_old(x)| for every x. Absent weights read as zero, which is how a
    model that predates a new support vector is compared to one including it.
    """
    total = 0.0
    for k in sorted(set(old_weights) | set(new_weights), key=repr):
        total += abs(new_weights.get(k, 0.0) - old_weights.get(k, 0.0))
    return total


# ---------------------------------------------------------------------------
# Serialization: versioned little-endian blob (round, dimension, b, w values)

_MODEL_MAGIC = b"CVLM"
_MODEL_HEADER = struct.Struct("<4sHQQd")  # magic, version, round, dim, b


def model_to_bytes(m: LinearModel) -> bytes:
    head = _MODEL_HEADER.pack(_MODEL_MAGIC, 1, m.round, m.dim, m.b)
    body = np.ascontiguousarray(m.w, dtype="<f8").tobytes()
    return head + body


def model_from_bytes(blob: bytes) -> LinearModel:
    magic, version, rnd, dim, b = _MODEL_HEADER.unpack_from(blob, 0)
    if magic != _MODEL_MAGIC or version != 1:
        raise ValueError("unrecognized model blob")
    w = np.frombuffer(blob, dtype="<f8", count=dim, offset=_MODEL_HEADER.size).astype(np.float64)
    return LinearModel(w=w, b=float(b), round=int(rnd))
