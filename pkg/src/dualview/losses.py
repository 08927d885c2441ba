"""Reference multi-task detection loss with analytic gradients.

The total loss is the unweighted sum of a smooth-L1 box regression term
(zero for background), a negative-log-likelihood classification term,
and an average binary cross-entropy mask term evaluated from logits in
a numerically stabilized form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ClassOutOfRange, DimensionMismatch, DomainError


@dataclass
class RoISample:
    """One region-of-interest training sample.

    ``p`` has K+1 entries (index 0 = background) summing to 1; ``t`` holds
    the K per-class offset vectors, row k-1 belonging to class k;
    ``mask_logits`` and ``mask_gt`` share an MxN shape.
    """

    p: np.ndarray
    k_gt: int
    t: np.ndarray
    v: np.ndarray
    mask_logits: np.ndarray
    mask_gt: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(-1, 4)
        self.v = np.asarray(self.v, dtype=np.float64).reshape(4)
        self.mask_logits = np.asarray(self.mask_logits, dtype=np.float64)
        self.mask_gt = np.asarray(self.mask_gt, dtype=np.float64)
        if self.p.ndim != 1 or self.p.size < 2:
            raise DimensionMismatch("p must be a vector of K+1 class probabilities")
        if abs(float(self.p.sum()) - 1.0) > 1e-9:
            raise DomainError("class probabilities must sum to 1 within 1e-9")
        if np.any(self.p <= 0.0) or np.any(self.p > 1.0):
            raise DomainError("class probabilities must lie in (0, 1]")
        if not 0 <= self.k_gt <= self.num_classes:
            raise ClassOutOfRange(f"k_gt={self.k_gt} outside [0, {self.num_classes}]")
        if self.t.shape[0] != self.num_classes:
            raise DimensionMismatch("t must hold one offset vector per foreground class")
        if self.mask_logits.shape != self.mask_gt.shape or self.mask_logits.ndim != 2:
            raise DimensionMismatch("mask logits and ground truth must share an MxN shape")
        if not np.all(np.isfinite(self.mask_logits)):
            raise DomainError("mask logits must be finite")

    @property
    def num_classes(self) -> int:
        return self.p.size - 1


def smooth_l1(x: float) -> float:
    """0.5*x^2 inside the unit interval, |x| - 0.5 outside."""
    ax = abs(x)
    if ax < 1.0:
        return 0.5 * x * x
    return ax - 0.5


def smooth_l1_grad(x: float) -> float:
    if abs(x) < 1.0:
        return x
    return 1.0 if x > 0 else -1.0


def box_loss(sample: RoISample, k: int) -> float:
    """Smooth-L1 offset loss for class k; background (k=0) contributes 0."""
    if not 0 <= k <= sample.num_classes:
        raise ClassOutOfRange(f"class {k} outside [0, {sample.num_classes}]")
    if k == 0:
        return 0.0
    diff = sample.t[k - 1] - sample.v
    return float(sum(smooth_l1(float(d)) for d in diff))


def cls_loss(p: np.ndarray, k: int) -> float:
    """Negative natural log-likelihood of the labeled class."""
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= k < p.size:
        raise ClassOutOfRange(f"class {k} outside [0, {p.size - 1}]")
    pk = float(p[k])
    if pk <= 0.0:
        raise DomainError(f"p_k must be positive, got {pk}")
    return -float(np.log(pk))


def mask_loss(mask_logits: np.ndarray, mask_gt: np.ndarray) -> float:
    """Average per-pixel binary cross-entropy, evaluated from logits.

    Uses softplus(x) - y*x per pixel so large |logits| never overflow.
    """
    x = np.asarray(mask_logits, dtype=np.float64)
    y = np.asarray(mask_gt, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"mask shapes differ: {x.shape} vs {y.shape}")
    per_pixel = np.logaddexp(0.0, x) - y * x
    return float(per_pixel.mean())


def total_loss(sample: RoISample, weights=(1.0, 1.0, 1.0)):
    """Returns (L, L_b, L_c, L_m) evaluated at the ground-truth class."""
    w_b, w_c, w_m = weights
    l_b = w_b * box_loss(sample, sample.k_gt)
    l_c = w_c * cls_loss(sample.p, sample.k_gt)
    l_m = w_m * mask_loss(sample.mask_logits, sample.mask_gt)
    return l_b + l_c + l_m, l_b, l_c, l_m


def loss_gradients(sample: RoISample):
    """Analytic gradients of the total loss.

    Returns a dict with ``d_p`` (nonzero only at k_gt), ``d_t`` (gradient
    w.r.t. t^{k_gt}; zeros for background), and ``d_mask_logits``.
    """
    k = sample.k_gt
    d_p = np.zeros_like(sample.p)
    pk = float(sample.p[k])
    if pk <= 0.0 or pk >= 1.0 + 1e-12:
        raise DomainError(f"p_k must lie in (0, 1), got {pk}")
    d_p[k] = -1.0 / pk

    d_t = np.zeros(4, dtype=np.float64)
    if k >= 1:
        diff = sample.t[k - 1] - sample.v
        d_t = np.array([smooth_l1_grad(float(d)) for d in diff])

    mn = sample.mask_logits.size
    d_mask = (expit(sample.mask_logits) - sample.mask_gt) / mn
    return {"d_p": d_p, "d_t": d_t, "d_mask_logits": d_mask}
