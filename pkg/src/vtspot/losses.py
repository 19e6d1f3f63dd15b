"""Loss values for the tracking, scoring, and joint objectives.

Pure functions over numpy vectors. Analytic gradients are provided for the
smooth branches so they can be checked against finite differences; callers
must avoid kink points (zero distances, hinge boundaries, exact ties).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class Triplet:
    """Anchor/positive share an identity, negative differs; all near unit norm."""

    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray

    def __post_init__(self):
        for name in ("anchor", "positive", "negative"):
            v = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            norm = float(np.linalg.norm(v))
            if not 0.99 <= norm <= 1.01:
                raise ContractError(f"{name} must be unit-normalized, got norm {norm}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class LossWeights:
    """Task weights and the shared margin."""

    lambda_t: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    margin: float = 0.8

    def __post_init__(self):
        for name in ("lambda_t", "lambda1", "lambda2", "lambda3"):
            if getattr(self, name) < 0.0:
                raise ContractError(f"{name} must be >= 0")
        if self.margin <= 0.0:
            raise ContractError(f"margin must be > 0, got {self.margin}")


def contrastive_loss(a, b, same: bool, margin: float) -> float:
    """d^2 for same-identity pairs, hinge(margin - d)^2 otherwise."""
    d = float(np.linalg.norm(np.subtract(a, b)))
    if same:
        return d * d
    gap = margin - d
    return gap * gap if gap > 0.0 else 0.0


def contrastive_grad(a, b, same: bool, margin: float):
    """Gradients of contrastive_loss w.r.t. (a, b) off the kinks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = a - b
    if same:
        return 2.0 * diff, -2.0 * diff
    d = float(np.linalg.norm(diff))
    gap = margin - d
    if gap <= 0.0 or d == 0.0:
        return np.zeros_like(diff), np.zeros_like(diff)
    ga = -2.0 * gap * diff / d
    return ga, -ga


def triplet_loss(t: Triplet, margin: float) -> float:
    """hinge(d(anchor, positive) - d(anchor, negative) + margin)."""
    dap = float(np.linalg.norm(t.anchor - t.positive))
    dan = float(np.linalg.norm(t.anchor - t.negative))
    return max(0.0, dap - dan + margin)


def triplet_grad(t: Triplet, margin: float):
    """Gradients of triplet_loss w.r.t. (anchor, positive, negative)."""
    ap = t.anchor - t.positive
    an = t.anchor - t.negative
    dap = float(np.linalg.norm(ap))
    dan = float(np.linalg.norm(an))
    zero = np.zeros_like(t.anchor)
    if dap - dan + margin <= 0.0 or dap == 0.0 or dan == 0.0:
        return zero, zero, zero
    ga = ap / dap - an / dan
    return ga, -ap / dap, an / dan


def tracking_loss(pairs, triplets, w: LossWeights) -> float:
    """Mean contrastive over (a, b, same) pairs plus weighted mean triplet."""
    if not pairs or not triplets:
        raise ContractError("tracking_loss needs non-empty pair and triplet batches")
    contra = float(np.mean([contrastive_loss(a, b, same, w.margin) for a, b, same in pairs]))
    trip = float(np.mean([triplet_loss(t, w.margin) for t in triplets]))
    return contra + w.lambda_t * trip


def scoring_loss(teacher, student) -> float:
    """Mean absolute deviation between teacher and student scores."""
    t = np.asarray(teacher, dtype=np.float64)
    s = np.asarray(student, dtype=np.float64)
    if t.shape != s.shape or t.ndim != 1 or t.size == 0:
        raise ContractError(f"score arrays must be equal-length vectors, got {t.shape} vs {s.shape}")
    return float(np.abs(t - s).mean())


def scoring_grad(teacher, student) -> np.ndarray:
    """Gradient of scoring_loss w.r.t. the student scores, off ties."""
    t = np.asarray(teacher, dtype=np.float64)
    s = np.asarray(student, dtype=np.float64)
    return np.sign(s - t) / t.size


def joint_loss(l_t: float, l_s: float, l_r: float, w: LossWeights) -> float:
    """Weighted sum of the three task losses."""
    for name, v in (("l_t", l_t), ("l_s", l_s), ("l_r", l_r)):
        if not np.isfinite(v):
            raise ContractError(f"{name} must be finite, got {v}")
    return w.lambda1 * l_t + w.lambda2 * l_s + w.lambda3 * l_r
