"""Central finite-difference verification of the analytic loss gradients.

Backs the ``losses-check`` CLI subcommand.  Samples are drawn away from
the smooth-L1 kink and probability extremes so the difference quotient
is well conditioned at the default step.
"""

from __future__ import annotations

import numpy as np

from .losses import RoISample, box_loss, cls_loss, loss_gradients, mask_loss

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4


def random_sample(rng: np.random.Generator, n_classes: int = 3, m: int = 6, n: int = 7) -> RoISample:
    logits = rng.uniform(-2.0, 2.0, size=n_classes + 1)
    p = np.exp(logits)
    p = p / p.sum()
    k_gt = int(rng.integers(0, n_classes + 1))
    t = rng.uniform(-2.5, 2.5, size=(n_classes, 4))
    v = rng.uniform(-2.5, 2.5, size=4)
    if k_gt >= 1:
        # Keep offsets away from the |x| = 1 kink of smooth L1.
        diff = t[k_gt - 1] - v
        near = np.abs(np.abs(diff) - 1.0) < 5e-3
        t[k_gt - 1][near] += 0.02
    mask_logits = rng.uniform(-4.0, 4.0, size=(m, n))
    mask_gt = (rng.random((m, n)) < 0.5).astype(np.float64)
    return RoISample(p=p, k_gt=k_gt, t=t, v=v, mask_logits=mask_logits, mask_gt=mask_gt)


def _rel_err(analytic: float, fd: float) -> float:
    err = abs(analytic - fd)
    scale = max(abs(analytic), abs(fd))
    if scale < 1e-12:
        return 0.0
    return err / scale


def check_sample(sample: RoISample, step: float = DEFAULT_STEP) -> dict[str, float]:
    """Max relative error between analytic and central-FD gradients,
    per loss term."""
    grads = loss_gradients(sample)
    k = sample.k_gt

    p_hi = sample.p.copy()
    p_lo = sample.p.copy()
    p_hi[k] += step
    p_lo[k] -= step
    fd_p = (cls_loss(p_hi, k) - cls_loss(p_lo, k)) / (2 * step)
    err_p = _rel_err(float(grads["d_p"][k]), float(fd_p))

    err_t = 0.0
    for i in range(4):
        t_hi = sample.t.copy()
        t_lo = sample.t.copy()
        if k >= 1:
            t_hi[k - 1, i] += step
            t_lo[k - 1, i] -= step
        hi = RoISample(sample.p, k, t_hi, sample.v, sample.mask_logits, sample.mask_gt)
        lo = RoISample(sample.p, k, t_lo, sample.v, sample.mask_logits, sample.mask_gt)
        fd_t = (box_loss(hi, k) - box_loss(lo, k)) / (2 * step)
        err_t = max(err_t, _rel_err(float(grads["d_t"][i]), float(fd_t)))

    err_m = 0.0
    d_mask = grads["d_mask_logits"]
    for (r, c), _ in np.ndenumerate(sample.mask_logits):
        x_hi = sample.mask_logits.copy()
        x_lo = sample.mask_logits.copy()
        x_hi[r, c] += step
        x_lo[r, c] -= step
        fd_m = (mask_loss(x_hi, sample.mask_gt) - mask_loss(x_lo, sample.mask_gt)) / (2 * step)
        err_m = max(err_m, _rel_err(float(d_mask[r, c]), float(fd_m)))

    return {"cls": err_p, "box": err_t, "mask": err_m}


def run_gradient_suite(
    n_samples: int = 100,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
):
    """Returns (rows, all_passed); one row of max relative errors per term."""
    rng = np.random.default_rng(seed)
    worst = {"cls": 0.0, "box": 0.0, "mask": 0.0}
    for _ in range(n_samples):
        errs = check_sample(random_sample(rng), step)
        for key, val in errs.items():
            worst[key] = max(worst[key], val)
    rows = [(term, worst[term], worst[term] <= tol) for term in ("box", "cls", "mask")]
    return rows, all(ok for _, _, ok in rows)
