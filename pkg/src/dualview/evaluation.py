"""COCO-style average precision over boxes and masks.

AP is computed per class and per IoU threshold with greedy one-to-one
matching, 101-point interpolated precision, and the mean taken over the
ten thresholds 0.50:0.05:0.95.  Classes with no ground truth are
excluded from the mean rather than scored zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidRle,
    SizeMismatch,
    UndecodableMask,
    UnknownImage,
)
from .fusion import Detection
from .masks import BBox, PlacedMask, RleMask, bbox_iou, placed_iou

DEFAULT_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
DEFAULT_RECALL_SAMPLES = tuple(round(0.01 * i, 2) for i in range(101))


@dataclass
class GtInstance:
    """One ground-truth instance; the box is derived from the mask."""

    image_id: str
    class_id: int
    mask: RleMask
    box: BBox | None = None
    ignore: bool = False
    gt_id: int = 0
    _placed: PlacedMask | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.box is None:
            self.box = self.placed().bbox()

    def placed(self) -> PlacedMask:
        if self._placed is None:
            self._placed = PlacedMask.from_rle(self.mask)
        return self._placed


@dataclass(frozen=True)
class EvalConfig:
    iou_type: str = "segm"
    iou_thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    max_dets: int = 100
    recall_samples: tuple[float, ...] = DEFAULT_RECALL_SAMPLES

    def __post_init__(self):
        if self.iou_type not in ("bbox", "segm"):
            raise DimensionMismatch(f"iou_type must be 'bbox' or 'segm'")
        ts = self.iou_thresholds
        if not ts or any(t <= 0 or t > 1 for t in ts):
            raise DimensionMismatch("thresholds must lie in (0, 1]")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DimensionMismatch("thresholds must be strictly increasing")
        if self.max_dets < 1:
            raise DimensionMismatch("max_dets must be positive")


@dataclass
class ApReport:
    """AP summary for one IoU type."""

    iou_type: str
    ap: float
    ap50: float
    ap75: float
    per_class: dict[int, float]
    per_threshold: list[float]
    thresholds: list[float]
    counts: list[dict[str, int]]

    def to_dict(self) -> dict:
        return {
            "iou_type": self.iou_type,
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
            "thresholds": list(self.thresholds),
            "per_threshold": list(self.per_threshold),
            "counts": self.counts,
        }


@dataclass
class EvalSummary:
    """The six headline metrics: AP/AP50/AP75 for boxes and for masks."""

    bbox: ApReport
    segm: ApReport

    def six_metrics(self) -> list[tuple[str, float]]:
        return [
            ("ap_bbox", self.bbox.ap),
            ("ap50_bbox", self.bbox.ap50),
            ("ap75_bbox", self.bbox.ap75),
            ("ap_segm", self.segm.ap),
            ("ap50_segm", self.segm.ap50),
            ("ap75_segm", self.segm.ap75),
        ]

    def to_dict(self) -> dict:
        return {"bbox": self.bbox.to_dict(), "segm": self.segm.to_dict()}

    def table(self) -> str:
        names = ["AP^bbox", "AP50^bbox", "AP75^bbox", "AP^segm", "AP50^segm", "AP75^segm"]
        vals = [v for _, v in self.six_metrics()]
        head = "  ".join(f"{n:>10s}" for n in names)
        row = "  ".join(f"{v:10.3f}" for v in vals)
        return head + "\n" + row


def _det_iou(det: Detection, gt: GtInstance, iou_type: str) -> float:
    if iou_type == "bbox":
        return bbox_iou(det.box, gt.box)
    try:
        return placed_iou(det.placed(), gt.placed())
    except InvalidRle as exc:
        raise UndecodableMask(str(exc)) from exc


def match_detections(
    dets: list[Detection],
    gts: list[GtInstance],
    iou_thresh: float,
    iou_type: str = "segm",
    iou_matrix: np.ndarray | None = None,
):
    """Greedy one-to-one matching for a single image and class.

    Returns ``(ordered_dets, tp_flags, gt_matched)`` with detections in
    (score desc, det_id asc) order; each detection claims the unmatched
    ground truth of highest IoU >= threshold, earliest listed first.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].det_id))
    if iou_matrix is None:
        iou_matrix = np.array(
            [[_det_iou(d, g, iou_type) for g in gts] for d in dets], dtype=np.float64
        ).reshape(len(dets), len(gts))
    gt_matched = [False] * len(gts)
    tp_flags: list[bool] = []
    ordered = [dets[i] for i in order]
    for i in order:
        best_j = -1
        best_iou = 0.0
        for j in range(len(gts)):
            if gt_matched[j]:
                continue
            iou = float(iou_matrix[i, j])
            if iou >= iou_thresh and iou > best_iou:
                best_iou = iou
                best_j = j
        if best_j >= 0:
            gt_matched[best_j] = True
            tp_flags.append(True)
        else:
            tp_flags.append(False)
    return ordered, tp_flags, gt_matched


def average_precision(
    tp_flags,
    n_gt: int,
    recall_samples=DEFAULT_RECALL_SAMPLES,
):
    """Interpolated AP over fixed recall samples.

    ``tp_flags`` must already be sorted by score descending.  Returns
    None when there is no ground truth (class excluded from means).
    """
    if n_gt == 0:
        return None
    flags = np.asarray(list(tp_flags), dtype=bool)
    if flags.size == 0:
        return 0.0
    cum_tp = np.cumsum(flags)
    ranks = np.arange(1, flags.size + 1)
    recalls = cum_tp / n_gt
    precisions = cum_tp / ranks
    # Max precision at any recall >= sample.
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    samples = np.asarray(recall_samples, dtype=np.float64)
    idx = np.searchsorted(recalls, samples, side="left")
    vals = np.where(idx < flags.size, envelope[np.minimum(idx, flags.size - 1)], 0.0)
    return float(vals.sum() / samples.size)


def evaluate(
    preds: list[Detection],
    gts: list[GtInstance],
    cfg: EvalConfig,
    image_ids=None,
) -> ApReport:
    """Full AP report for one IoU type over a set of images."""
    known = set(image_ids) if image_ids is not None else {g.image_id for g in gts}
    for det in preds:
        if det.image_id not in known:
            raise UnknownImage(f"detection {det.det_id} references {det.image_id!r}")

    gts = [g for g in gts if not g.ignore]

    # Truncate detections per image by score before any matching.
    by_image: dict[str, list[Detection]] = {}
    for det in preds:
        by_image.setdefault(det.image_id, []).append(det)
    kept: list[Detection] = []
    for image_id in sorted(by_image):
        dets = sorted(by_image[image_id], key=lambda d: (-d.score, d.det_id))
        kept.extend(dets[: cfg.max_dets])

    classes = sorted({g.class_id for g in gts})
    thresholds = list(cfg.iou_thresholds)
    n_thresh = len(thresholds)

    per_class_thresh: dict[int, list[float]] = {}
    counts = [{"tp": 0, "fp": 0, "fn": 0} for _ in range(n_thresh)]

    for class_id in classes:
        class_dets = [d for d in kept if d.class_id == class_id]
        class_gts = [g for g in gts if g.class_id == class_id]
        n_gt = len(class_gts)
        image_set = sorted(
            {d.image_id for d in class_dets} | {g.image_id for g in class_gts}
        )
        # (score, det_id, tp?) per threshold, pooled over images.
        pooled: list[list[tuple[float, int, bool]]] = [[] for _ in range(n_thresh)]
        for image_id in image_set:
            dets_i = [d for d in class_dets if d.image_id == image_id]
            gts_i = [g for g in class_gts if g.image_id == image_id]
            iou_matrix = np.array(
                [[_det_iou(d, g, cfg.iou_type) for g in gts_i] for d in dets_i],
                dtype=np.float64,
            ).reshape(len(dets_i), len(gts_i))
            for ti, thresh in enumerate(thresholds):
                ordered, tp_flags, _ = match_detections(
                    dets_i, gts_i, thresh, cfg.iou_type, iou_matrix
                )
                pooled[ti].extend(
                    (d.score, d.det_id, tp) for d, tp in zip(ordered, tp_flags)
                )
        ap_per_thresh: list[float] = []
        for ti in range(n_thresh):
            entries = sorted(pooled[ti], key=lambda e: (-e[0], e[1]))
            flags = [e[2] for e in entries]
            n_tp = sum(flags)
            counts[ti]["tp"] += n_tp
            counts[ti]["fp"] += len(flags) - n_tp
            counts[ti]["fn"] += n_gt - n_tp
            ap = average_precision(flags, n_gt, cfg.recall_samples)
            ap_per_thresh.append(ap if ap is not None else 0.0)
        if n_gt > 0:
            per_class_thresh[class_id] = ap_per_thresh

    valid_classes = sorted(per_class_thresh)
    if valid_classes:
        per_threshold = [
            float(np.mean([per_class_thresh[c][ti] for c in valid_classes]))
            for ti in range(n_thresh)
        ]
        ap = float(np.mean(per_threshold))
        per_class = {
            c: float(np.mean(per_class_thresh[c])) for c in valid_classes
        }
    else:
        per_threshold = [0.0] * n_thresh
        ap = 0.0
        per_class = {}

    def _at(threshold: float) -> float:
        for ti, t in enumerate(thresholds):
            if t == threshold:
                return per_threshold[ti]
        return 0.0

    return ApReport(
        iou_type=cfg.iou_type,
        ap=ap,
        ap50=_at(0.5),
        ap75=_at(0.75),
        per_class=per_class,
        per_threshold=per_threshold,
        thresholds=thresholds,
        counts=counts,
    )


def evaluate_both(
    preds: list[Detection],
    gts: list[GtInstance],
    bbox_cfg: EvalConfig | None = None,
    segm_cfg: EvalConfig | None = None,
    image_ids=None,
) -> EvalSummary:
    """The six-metric summary: bbox and segm AP reports side by side."""
    bbox_cfg = bbox_cfg or EvalConfig(iou_type="bbox")
    segm_cfg = segm_cfg or EvalConfig(iou_type="segm")
    return EvalSummary(
        bbox=evaluate(preds, gts, bbox_cfg, image_ids),
        segm=evaluate(preds, gts, segm_cfg, image_ids),
    )


def dataset_split(n: int, sizes: tuple[int, int, int], seed: int):
    """Uniform random partition into train/val/test index lists."""
    train_n, val_n, test_n = sizes
    if train_n + val_n + test_n != n:
        raise SizeMismatch(f"sizes {sizes} do not sum to {n}")
    if min(sizes) < 0:
        raise SizeMismatch("split sizes must be non-negative")
    perm = np.random.default_rng(seed).permutation(n)
    train = [int(i) for i in perm[:train_n]]
    val = [int(i) for i in perm[train_n : train_n + val_n]]
    test = [int(i) for i in perm[train_n + val_n :]]
    return train, val, test
