"""Numeric loss kernels for training hash codes against fixed centers.

These operate on plain values (relaxed codes in [-1, 1]^q and their binary
target centers); no autodiff machinery is provided.  The central loss is
the binary cross-entropy between the bit probabilities (1 + b)/2 of a
relaxed code and the target bits of its center, averaged over the batch;
the quantization loss pushes relaxed entries toward +-1.
"""

from dataclasses import dataclass

import numpy as np

from .core import BinaryCode, DimensionMismatchError, ValidationError

__all__ = ["LossConfig", "central_loss", "quantization_loss", "total_loss"]


@dataclass(frozen=True)
class LossConfig:
    """gamma weights the quantization term; epsilon floors the log arguments."""

    gamma: float = 1e-4
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.gamma < 0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 < self.epsilon < 1e-3:
            raise ValidationError(f"epsilon must lie in (0, 1e-3), got {self.epsilon}")


_DEFAULT = LossConfig()


def _relaxed(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"relaxed code must be a nonempty vector, got shape {arr.shape}")
    if not np.isfinite(arr).all() or np.abs(arr).max() > 1.0:
        raise ValidationError("relaxed code entries must lie in [-1, 1]")
    return arr


def _center_bits(center) -> np.ndarray:
    if isinstance(center, BinaryCode):
        return center.bits.astype(np.float64)
    return BinaryCode(center).bits.astype(np.float64)


def central_loss(batch, cfg: LossConfig = _DEFAULT) -> float:
    """Mean per-image cross-entropy between relaxed codes and their centers.

    ``batch`` is a sequence of (relaxed code, center) pairs.  Probabilities
    (1 + b)/2 are clamped into [epsilon, 1 - epsilon] before the log, so
    exact +-1 entries are legal input.  Zero batch size is an error.
    """
    total = 0.0
    n = 0
    q = None
    for relaxed, center in batch:
        b = _relaxed(relaxed)
        h = _center_bits(center)
        if b.size != h.size:
            raise DimensionMismatchError(f"code lengths differ: {b.size} vs {h.size}")
        if q is None:
            q = b.size
        elif b.size != q:
            raise DimensionMismatchError(f"batch mixes code lengths {q} and {b.size}")
        p = np.clip((1.0 + b) / 2.0, cfg.epsilon, 1.0 - cfg.epsilon)
        t = (1.0 + h) / 2.0
        total -= float(t @ np.log(p) + (1.0 - t) @ np.log(1.0 - p))
        n += 1
    if n == 0:
        raise ValidationError("central loss needs a nonempty batch")
    return total / n


def quantization_loss(batch) -> float:
    """Sum over the batch of sum_j (|b_j| - 1)^2; zero iff every entry is +-1."""
    total = 0.0
    for relaxed in batch:
        b = _relaxed(relaxed)
        gap = np.abs(b) - 1.0
        total += float(gap @ gap)
    return total


def total_loss(batch, cfg: LossConfig = _DEFAULT) -> float:
    """central_loss + gamma * quantization_loss over a batch of (code, center) pairs."""
    pairs = list(batch)
    return central_loss(pairs, cfg) + cfg.gamma * quantization_loss(b for b, _ in pairs)
