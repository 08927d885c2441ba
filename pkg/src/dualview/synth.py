"""Deterministic synthetic cell scenes and a noisy oracle detector.

Scenes are shaded ellipses (elongated, obliquely oriented, bounded
pairwise overlap) on a textured background with exact ground-truth
masks.  The oracle detector stands in for a CNN: per view it drops,
jitters, duplicates, or fragments each ground-truth instance, with
independent noise across the two views.  That independence is what
makes dual-view fusion measurably useful in these tests: a cell missed
or corrupted in one view is usually clean in the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, PlacementFailure
from .evaluation import EvalConfig, EvalSummary, GtInstance, evaluate_both
from .fusion import (
    VIEW_ORIGINAL,
    VIEW_ROTATED,
    Detection,
    DvsConfig,
    dvs_fuse,
    nms,
)
from .geometry import AffineTransform, Raster, rotation_transform, warp_placed
from .masks import PlacedMask
from .selection import MsConfig, run_ms

MODES = ("baseline", "dvs_only", "ms_only", "full")

BASELINE_NMS_IOU = 0.5


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    width: int = 1152
    height: int = 863
    n_cells: int = 12
    elongation: tuple[float, float] = (1.0, 4.0)
    minor_axis: tuple[float, float] = (9.0, 16.0)
    overlap_max: float = 0.2
    unhealthy_fraction: float = 0.3

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise DimensionMismatch("scene dims too small")
        if not 0.0 <= self.unhealthy_fraction <= 1.0:
            raise DimensionMismatch("unhealthy_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class OracleSpec:
    """Noise model of the stand-in detector.

    Scores: true detections (clean or fragmented) draw from the high band
    [1 - score_spread, 1]; spurious duplicates draw from ``low_band``.
    ``boundary_jitter`` is the maximum radial displacement in pixels of
    the mask boundary (implemented as a radial rescale about the
    centroid).  ``fragment_gap`` is the fraction of the major extent
    removed when a mask is corrupted into two components.
    """

    seed: int = 0
    drop_prob: float = 0.0
    duplicate_prob: float = 0.0
    boundary_jitter: float = 0.0
    fragment_prob: float = 0.0
    score_spread: float = 0.0
    low_band: tuple[float, float] = (0.1, 0.5)
    fragment_gap: float = 0.4

    def __post_init__(self):
        for name in ("drop_prob", "duplicate_prob", "fragment_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DimensionMismatch(f"{name} must lie in [0, 1], got {v}")
        if self.boundary_jitter < 0:
            raise DimensionMismatch("boundary_jitter must be >= 0")


def _ellipse_placed(
    width: int, height: int, cx: float, cy: float, a: float, b: float, phi: float
) -> PlacedMask:
    cos_p, sin_p = math.cos(phi), math.sin(phi)
    ex = math.sqrt((a * cos_p) ** 2 + (b * sin_p) ** 2)
    ey = math.sqrt((a * sin_p) ** 2 + (b * cos_p) ** 2)
    x0 = max(0, int(math.floor(cx - ex)))
    x1 = min(width, int(math.ceil(cx + ex)) + 1)
    y0 = max(0, int(math.floor(cy - ey)))
    y1 = min(height, int(math.ceil(cy + ey)) + 1)
    u = np.arange(x0, x1, dtype=np.float64)[None, :] - cx
    v = np.arange(y0, y1, dtype=np.float64)[:, None] - cy
    p = u * cos_p + v * sin_p
    q = -u * sin_p + v * cos_p
    inside = (p / a) ** 2 + (q / b) ** 2 <= 1.0
    return PlacedMask.from_crop(width, height, x0, y0, inside)


def gen_scene(spec: SceneSpec, image_id: str | None = None):
    """Render one scene; returns (Raster, ground-truth instances)."""
    if image_id is None:
        image_id = f"scene_{spec.seed:08x}"
    rng = np.random.default_rng(spec.seed)
    w, h = spec.width, spec.height

    coarse = rng.integers(-16, 17, size=(h // 64 + 2, w // 64 + 2))
    tex = np.kron(coarse, np.ones((64, 64), dtype=np.int64))[:h, :w]
    fine = rng.integers(-4, 5, size=(h, w))
    gray = np.clip(128 + tex + fine, 0, 255).astype(np.int64)

    gts: list[GtInstance] = []
    shapes: list[tuple[PlacedMask, float, float, float, float, float]] = []
    max_attempts = 60
    for i in range(spec.n_cells):
        placed = None
        for _ in range(max_attempts):
            b = rng.uniform(*spec.minor_axis)
            ratio = rng.uniform(*spec.elongation)
            a = b * ratio
            phi = math.radians(rng.uniform(0.0, 180.0))
            margin = a + 4.0
            if 2 * margin >= min(w, h):
                continue
            cx = rng.uniform(margin, w - margin)
            cy = rng.uniform(margin, h - margin)
            cand = _ellipse_placed(w, h, cx, cy, a, b, phi)
            from .masks import placed_iou

            if all(placed_iou(cand, prev[0]) <= spec.overlap_max for prev in shapes):
                placed = cand
                shapes.append((cand, cx, cy, a, b, phi))
                break
        if placed is None:
            raise PlacementFailure(
                f"could not place cell {i} within {max_attempts} attempts"
            )
        class_id = 2 if rng.random() < spec.unhealthy_fraction else 1
        gts.append(
            GtInstance(
                image_id=image_id,
                class_id=class_id,
                mask=placed.to_rle(),
                box=placed.bbox(),
                gt_id=i,
                _placed=placed,
            )
        )

    # Pseudo-3D shading: a radial falloff plus a directional gradient.
    for placed, cx, cy, a, b, phi in shapes:
        ch, cw = placed.crop.shape
        x0, y0 = placed.x0, placed.y0
        u = np.arange(x0, x0 + cw, dtype=np.float64)[None, :] - cx
        v = np.arange(y0, y0 + ch, dtype=np.float64)[:, None] - cy
        cos_p, sin_p = math.cos(phi), math.sin(phi)
        p = u * cos_p + v * sin_p
        q = -u * sin_p + v * cos_p
        rho2 = (p / a) ** 2 + (q / b) ** 2
        shade = 172.0 - 58.0 * rho2 + 24.0 * (p / a)
        window = gray[y0 : y0 + ch, x0 : x0 + cw]
        window[placed.crop] = np.clip(shade, 40, 235).astype(np.int64)[placed.crop]

    rgb = np.repeat(gray.astype(np.uint8)[:, :, None], 3, axis=2)
    return Raster(rgb), gts


def _centroid(placed: PlacedMask) -> tuple[float, float]:
    rows, cols = np.nonzero(placed.crop)
    return placed.x0 + float(cols.mean()), placed.y0 + float(rows.mean())


def _radial_rescale(
    placed: PlacedMask, factor: float, view_dims: tuple[int, int]
) -> PlacedMask:
    if factor == 1.0 or placed.is_empty:
        return placed
    cx, cy = _centroid(placed)
    t = AffineTransform(factor, 0.0, cx * (1.0 - factor), 0.0, factor, cy * (1.0 - factor))
    return warp_placed(placed, t, view_dims)


def _fragment(placed: PlacedMask, gap_frac: float) -> PlacedMask:
    """Corrupt a mask into two lobes by removing the central band along
    the principal axis."""
    rows, cols = np.nonzero(placed.crop)
    xs = cols.astype(np.float64)
    ys = rows.astype(np.float64)
    xs -= xs.mean()
    ys -= ys.mean()
    cov_xx = float((xs * xs).mean())
    cov_yy = float((ys * ys).mean())
    cov_xy = float((xs * ys).mean())
    theta = 0.5 * math.atan2(2.0 * cov_xy, cov_xx - cov_yy)
    ax, ay = math.cos(theta), math.sin(theta)
    proj = xs * ax + ys * ay
    lo, hi = float(proj.min()), float(proj.max())
    mid = 0.5 * (lo + hi)
    half_gap = max(1.0, 0.5 * gap_frac * (hi - lo))
    keep = np.abs(proj - mid) > half_gap
    crop = np.zeros_like(placed.crop)
    crop[rows[keep], cols[keep]] = True
    return PlacedMask.from_crop(placed.width, placed.height, placed.x0, placed.y0, crop)


def oracle_detect(
    gts: list[GtInstance],
    view_transform: AffineTransform,
    view_dims: tuple[int, int],
    spec: OracleSpec,
    view: str = VIEW_ORIGINAL,
    id_start: int = 0,
    rng: np.random.Generator | None = None,
) -> list[Detection]:
    """Emit noisy per-view detections for the given ground truth.

    With a zero-noise spec the detections are exactly the warped ground
    truths with score 1.0.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    dets: list[Detection] = []
    next_id = id_start
    for gt in gts:
        if view_transform.is_identity:
            in_view = gt.placed()
        else:
            in_view = warp_placed(gt.placed(), view_transform, view_dims)
        if rng.random() < spec.drop_prob:
            continue
        jitter_draw = float(rng.standard_normal())
        score_draw = float(rng.random())
        frag_draw = float(rng.random())
        dup_draw = float(rng.random())

        primary = in_view
        if spec.boundary_jitter > 0 and not primary.is_empty:
            r_eq = math.sqrt(primary.area() / math.pi)
            delta = max(-2.0, min(2.0, jitter_draw)) * spec.boundary_jitter / 2.0
            factor = max(0.5, (r_eq + delta) / r_eq)
            primary = _radial_rescale(primary, factor, view_dims)
        if frag_draw < spec.fragment_prob and not primary.is_empty:
            primary = _fragment(primary, spec.fragment_gap)
        if primary.is_empty:
            continue
        score = 1.0 - spec.score_spread * score_draw
        dets.append(
            Detection.from_placed(
                primary,
                image_id=gt.image_id,
                class_id=gt.class_id,
                score=score,
                view=view,
                det_id=next_id,
            )
        )
        next_id += 1
        if dup_draw < spec.duplicate_prob:
            dup_jitter = float(rng.standard_normal())
            dup_score_draw = float(rng.random())
            dup = in_view
            if spec.boundary_jitter > 0:
                r_eq = math.sqrt(in_view.area() / math.pi)
                delta = max(-2.0, min(2.0, dup_jitter)) * spec.boundary_jitter / 2.0
                factor = max(0.5, (r_eq + delta) / r_eq)
                dup = _radial_rescale(in_view, factor, view_dims)
            if dup.is_empty:
                continue
            low0, low1 = spec.low_band
            dets.append(
                Detection.from_placed(
                    dup,
                    image_id=gt.image_id,
                    class_id=gt.class_id,
                    score=low0 + (low1 - low0) * dup_score_draw,
                    view=view,
                    det_id=next_id,
                )
            )
            next_id += 1
    return dets


def _view_rng(oracle_seed: int, image_index: int, view_index: int) -> np.random.Generator:
    return np.random.default_rng((0x0D5, oracle_seed, image_index, view_index))


def detect_views(
    gts: list[GtInstance],
    dims: tuple[int, int],
    oracle_spec: OracleSpec,
    theta: float,
    image_index: int,
    want_rotated: bool,
):
    """Original-view (and optionally rotated-view) oracle detections.

    The original-view noise stream does not depend on whether the
    rotated view is generated, so pipeline modes stay comparable.
    """
    w, h = dims
    base_id = image_index * 1_000_000
    orig = oracle_detect(
        gts,
        AffineTransform.identity(),
        dims,
        oracle_spec,
        VIEW_ORIGINAL,
        id_start=base_id,
        rng=_view_rng(oracle_spec.seed, image_index, 0),
    )
    if not want_rotated:
        return orig, None, None
    t, rw, rh = rotation_transform(w, h, theta)
    rot = oracle_detect(
        gts,
        t,
        (rw, rh),
        oracle_spec,
        VIEW_ROTATED,
        id_start=base_id + 500_000,
        rng=_view_rng(oracle_spec.seed, image_index, 1),
    )
    return orig, rot, t


def run_mode(
    mode: str,
    orig: list[Detection],
    rot: list[Detection] | None,
    t: AffineTransform | None,
    dims: tuple[int, int],
    gts: list[GtInstance],
    dvs_cfg: DvsConfig,
    ms_cfg: MsConfig,
) -> list[Detection]:
    """Wire the stages for one ablation mode (one image)."""
    if mode == "baseline":
        return nms(orig, BASELINE_NMS_IOU, dvs_cfg.nms_metric, dvs_cfg.class_aware_nms)
    if mode == "dvs_only":
        return dvs_fuse(orig, rot, t, dims, dvs_cfg)
    if mode == "ms_only":
        return run_ms(orig, gts, None, ms_cfg)
    if mode == "full":
        candidates = dvs_fuse(orig, rot, t, dims, dvs_cfg)
        return run_ms(candidates, gts, None, ms_cfg)
    raise DimensionMismatch(f"unknown mode {mode!r}; expected one of {MODES}")


def _image_payload(args):
    image_index, spec, oracle_spec, theta, want_rotated = args
    _, gts = gen_scene(spec, image_id=f"img_{image_index:04d}")
    dims = (spec.width, spec.height)
    orig, rot, t = detect_views(gts, dims, oracle_spec, theta, image_index, want_rotated)
    return gts, dims, orig, rot, t


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_end_to_end(
    scene_specs: list[SceneSpec],
    oracle_spec: OracleSpec,
    dvs_cfg: DvsConfig | None = None,
    ms_cfg: MsConfig | None = None,
    eval_bbox: EvalConfig | None = None,
    eval_segm: EvalConfig | None = None,
    mode: str = "full",
    jobs: int = 1,
) -> EvalSummary:
    """Run one pipeline mode over a list of scenes and evaluate it."""
    reports = run_modes(
        scene_specs, oracle_spec, dvs_cfg, ms_cfg, eval_bbox, eval_segm, (mode,), jobs
    )
    return reports[mode]


def run_modes(
    scene_specs: list[SceneSpec],
    oracle_spec: OracleSpec,
    dvs_cfg: DvsConfig | None = None,
    ms_cfg: MsConfig | None = None,
    eval_bbox: EvalConfig | None = None,
    eval_segm: EvalConfig | None = None,
    modes=MODES,
    jobs: int = 1,
) -> dict[str, EvalSummary]:
    """Run several modes over the same scenes, sharing scene generation
    and oracle detections across modes."""
    dvs_cfg = dvs_cfg or DvsConfig()
    ms_cfg = ms_cfg or MsConfig()
    want_rotated = any(m in ("dvs_only", "full") for m in modes)
    payload_args = [
        (i, spec, oracle_spec, dvs_cfg.theta, want_rotated)
        for i, spec in enumerate(scene_specs)
    ]
    payloads = _map_jobs(_image_payload, payload_args, jobs)

    all_gts: list[GtInstance] = []
    for gts, _, _, _, _ in payloads:
        all_gts.extend(gts)

    out: dict[str, EvalSummary] = {}
    for mode in modes:
        def run_one(payload):
            gts, dims, orig, rot, t = payload
            return run_mode(mode, orig, rot, t, dims, gts, dvs_cfg, ms_cfg)

        per_image = _map_jobs(run_one, payloads, jobs)
        dets = [d for image_dets in per_image for d in image_dets]
        out[mode] = evaluate_both(dets, all_gts, eval_bbox, eval_segm)
    return out


# ---------------------------------------------------------------------------
# Named suites
# ---------------------------------------------------------------------------

CALIBRATED_NOISE = OracleSpec(
    seed=0,
    drop_prob=0.3,
    duplicate_prob=0.3,
    boundary_jitter=2.0,
    fragment_prob=0.1,
    score_spread=0.3,
)


def _scene_seed(tag: int, suite_seed: int, index: int) -> int:
    return int(np.random.SeedSequence((tag, suite_seed, index)).generate_state(1)[0])


def fixed_suite(suite_seed: int, n_images: int = 20):
    """The calibrated-noise ablation suite for one suite seed."""
    specs = [
        SceneSpec(seed=_scene_seed(1, suite_seed, i), n_cells=12)
        for i in range(n_images)
    ]
    oracle = replace(CALIBRATED_NOISE, seed=suite_seed)
    return specs, oracle


def zero_noise_suite(n_images: int = 20, max_cells: int = 60):
    """Noise-free scenes scaling up to ``max_cells`` cells per image."""
    specs = []
    for i in range(n_images):
        n_cells = 24 + ((max_cells - 24) * i) // max(1, n_images - 1)
        specs.append(SceneSpec(seed=_scene_seed(2, 0, i), n_cells=n_cells))
    oracle = OracleSpec(seed=0)
    return specs, oracle
