"""Dual-view candidate generation: view rotation, back-mapping, the
simply-connected mask filter, and greedy NMS with a relaxed threshold.

The fusion stage deliberately under-suppresses (default IoU threshold
0.9) so that near-duplicate candidates from the two views survive into
the supervised selection stage, which owns deduplication.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import DimensionMismatch
from .geometry import AffineTransform, Raster, rotation_transform, warp_placed, warp_raster
from .masks import BBox, PlacedMask, RleMask, bbox_iou, placed_fill_holes, placed_iou

VIEW_ORIGINAL = "original"
VIEW_ROTATED = "rotated"


@dataclass
class Detection:
    """One candidate instance in a single image."""

    image_id: str
    class_id: int
    score: float
    box: BBox
    mask: RleMask
    view: str = VIEW_ORIGINAL
    det_id: int = 0
    extras: dict = field(default_factory=dict, repr=False, compare=False)
    _placed: PlacedMask | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DimensionMismatch(f"score {self.score} outside [0, 1]")
        if self.class_id < 1:
            raise DimensionMismatch(f"class_id must be >= 1, got {self.class_id}")
        if self.view not in (VIEW_ORIGINAL, VIEW_ROTATED):
            raise DimensionMismatch(f"unknown view {self.view!r}")

    def placed(self) -> PlacedMask:
        if self._placed is None:
            self._placed = PlacedMask.from_rle(self.mask)
        return self._placed

    @classmethod
    def from_placed(
        cls,
        placed: PlacedMask,
        *,
        image_id: str,
        class_id: int,
        score: float,
        view: str,
        det_id: int,
    ) -> "Detection":
        return cls(
            image_id=image_id,
            class_id=class_id,
            score=score,
            box=placed.bbox(),
            mask=placed.to_rle(),
            view=view,
            det_id=det_id,
            _placed=placed,
        )


@dataclass(frozen=True)
class DvsConfig:
    theta: float = 45.0
    nms_iou: float = 0.9
    nms_metric: str = "box"
    connectivity: int = 8
    min_mask_area: int = 0
    class_aware_nms: bool = True
    fill_holes: bool = False

    def __post_init__(self):
        if not 0.0 < self.nms_iou <= 1.0:
            raise DimensionMismatch(f"nms_iou {self.nms_iou} outside (0, 1]")
        if self.nms_metric not in ("box", "mask"):
            raise DimensionMismatch(f"nms_metric must be 'box' or 'mask'")
        if self.connectivity not in (4, 8):
            raise DimensionMismatch("connectivity must be 4 or 8")


def generate_views(img: Raster, cfg: DvsConfig, interpolation: str = "nearest"):
    """The original view plus the rotated view on an expanded canvas.

    Returns two (view_tag, raster, transform) triples; the transform maps
    original-frame pixel centers into the view's frame.
    """
    t, out_w, out_h = rotation_transform(img.width, img.height, cfg.theta)
    if t.is_identity and (out_w, out_h) == (img.width, img.height):
        rotated = Raster(img.samples.copy())
    else:
        rotated = warp_raster(img, t, (out_w, out_h), interpolation=interpolation)
    return [
        (VIEW_ORIGINAL, img, AffineTransform.identity()),
        (VIEW_ROTATED, rotated, t),
    ]


def backmap(
    dets: list[Detection], t: AffineTransform, orig_dims: tuple[int, int]
) -> list[Detection]:
    """Map rotated-view detections back into the original frame.

    Masks are warped through the inverse transform, clipped to the
    original frame, and re-boxed; detections whose back-mapped mask is
    empty are dropped.
    """
    inv = t.inverse()
    out = []
    for det in dets:
        placed = warp_placed(det.placed(), inv, orig_dims)
        if placed.is_empty:
            continue
        out.append(
            replace(
                det,
                box=placed.bbox(),
                mask=placed.to_rle(),
                _placed=placed,
            )
        )
    return out


def simply_connected_filter(
    dets: list[Detection], connectivity: int = 8
) -> list[Detection]:
    """Keep only masks whose foreground is a single connected component."""
    return [d for d in dets if d.placed().component_count(connectivity) == 1]


def _pair_iou(a: Detection, b: Detection, metric: str) -> float:
    if metric == "box":
        return bbox_iou(a.box, b.box)
    return placed_iou(a.placed(), b.placed())


def nms(
    dets: list[Detection],
    iou_thresh: float,
    metric: str = "box",
    class_aware: bool = True,
) -> list[Detection]:
    """Greedy non-maximum suppression.

    Detections are visited by (score desc, det_id asc); one is kept iff
    its IoU with every already-kept detection (of the same class when
    class-aware) stays strictly below the threshold.
    """
    ordered = sorted(dets, key=lambda d: (-d.score, d.det_id))
    kept: list[Detection] = []
    for det in ordered:
        suppressed = False
        for keeper in kept:
            if class_aware and keeper.class_id != det.class_id:
                continue
            if _pair_iou(det, keeper, metric) >= iou_thresh:
                suppressed = True
                break
        if not suppressed:
            kept.append(det)
    return kept


def dvs_fuse(
    orig_dets: list[Detection],
    rot_dets: list[Detection],
    t: AffineTransform,
    orig_dims: tuple[int, int],
    cfg: DvsConfig,
) -> list[Detection]:
    """Merge per-view detections into the candidate pool.

    Rotated-view detections are back-mapped, the union is filtered down
    to simply-connected masks (plus the optional minimum-area cut), and
    relaxed NMS removes only near-exact duplicates.
    """
    pool = list(orig_dets) + backmap(rot_dets, t, orig_dims)
    if cfg.fill_holes:
        pool = [
            replace(d, mask=(p := placed_fill_holes(d.placed())).to_rle(),
                    box=p.bbox(), _placed=p)
            for d in pool
        ]
    pool = simply_connected_filter(pool, cfg.connectivity)
    if cfg.min_mask_area > 0:
        pool = [d for d in pool if d.placed().area() >= cfg.min_mask_area]
    kept = nms(pool, cfg.nms_iou, cfg.nms_metric, cfg.class_aware_nms)
    return sorted(kept, key=lambda d: (-d.score, d.det_id))
