"""Invertible affine pixel transforms and view warping.

Coordinate convention: (u, v) refers to the *center* of the pixel in
column u, row v.  Rotations are counter-clockwise in standard image
coordinates (y down), which looks clockwise on screen.  Multiples of 90
degrees are special-cased to exact coefficients so those warps are
pixel bijections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidDims, NonInvertibleTransform
from .masks import BBox, BinaryMask, PlacedMask

_EXACT_TRIG = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0), 180.0: (-1.0, 0.0), 270.0: (0.0, -1.0)}


@dataclass(frozen=True)
class AffineTransform:
    """Maps source pixel center (u, v) to (a*u + b*v + tx, c*u + d*v + ty)."""

    a: float
    b: float
    tx: float
    c: float
    d: float
    ty: float

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def is_identity(self) -> bool:
        return (self.a, self.b, self.tx, self.c, self.d, self.ty) == (
            1.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        )

    def apply(self, u, v):
        return (
            self.a * u + self.b * v + self.tx,
            self.c * u + self.d * v + self.ty,
        )

    def inverse(self) -> "AffineTransform":
        det = self.det
        if det == 0.0 or not math.isfinite(det):
            raise NonInvertibleTransform(f"determinant is {det}")
        ia = self.d / det
        ib = -self.b / det
        ic = -self.c / det
        id_ = self.a / det
        return AffineTransform(
            ia, ib, -(ia * self.tx + ib * self.ty),
            ic, id_, -(ic * self.tx + id_ * self.ty),
        )


def compose(outer: AffineTransform, inner: AffineTransform) -> AffineTransform:
    """compose(f, g)(p) = f(g(p))."""
    return AffineTransform(
        outer.a * inner.a + outer.b * inner.c,
        outer.a * inner.b + outer.b * inner.d,
        outer.a * inner.tx + outer.b * inner.ty + outer.tx,
        outer.c * inner.a + outer.d * inner.c,
        outer.c * inner.b + outer.d * inner.d,
        outer.c * inner.tx + outer.d * inner.ty + outer.ty,
    )


class Raster:
    """8-bit image; ``samples`` is a (height, width, channels) uint8 array."""

    __slots__ = ("samples",)

    def __init__(self, samples: np.ndarray):
        arr = np.asarray(samples, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimensionMismatch(f"raster must have 1 or 3 channels, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch("raster must be at least 1x1")
        self.samples = arr

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return self.samples.shape == other.samples.shape and bool(
            np.array_equal(self.samples, other.samples)
        )

    def __repr__(self) -> str:
        return f"Raster({self.width}x{self.height}x{self.channels})"


def rotation_transform(width: int, height: int, theta: float):
    """Rotation about the image center onto an expanded canvas.

    Returns ``(transform, out_width, out_height)`` where the canvas is
    just large enough to hold the rotated source rectangle.
    """
    if width < 1 or height < 1:
        raise InvalidDims(f"invalid raster dims {width}x{height}")
    if not math.isfinite(theta):
        raise InvalidDims(f"theta must be finite, got {theta}")
    norm = float(theta) % 360.0
    if norm in _EXACT_TRIG:
        cos_t, sin_t = _EXACT_TRIG[norm]
        out_w = int(width * abs(cos_t) + height * abs(sin_t))
        out_h = int(width * abs(sin_t) + height * abs(cos_t))
    else:
        rad = math.radians(norm)
        cos_t, sin_t = math.cos(rad), math.sin(rad)
        out_w = math.ceil(width * abs(cos_t) + height * abs(sin_t))
        out_h = math.ceil(width * abs(sin_t) + height * abs(cos_t))
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    ox, oy = (out_w - 1) / 2.0, (out_h - 1) / 2.0
    t = AffineTransform(
        cos_t, -sin_t, ox - cos_t * cx + sin_t * cy,
        sin_t, cos_t, oy - sin_t * cx - cos_t * cy,
    )
    return t, out_w, out_h


def _inverse_grid(inv: AffineTransform, x0: int, y0: int, w: int, h: int):
    us = np.arange(x0, x0 + w, dtype=np.float64)
    vs = np.arange(y0, y0 + h, dtype=np.float64)
    sx = inv.a * us[None, :] + inv.b * vs[:, None] + inv.tx
    sy = inv.c * us[None, :] + inv.d * vs[:, None] + inv.ty
    return sx, sy


def warp_raster(
    img: Raster,
    t: AffineTransform,
    out_dims: tuple[int, int],
    interpolation: str = "nearest",
) -> Raster:
    """Inverse-map ``img`` through ``t``; outside samples become 0."""
    out_w, out_h = out_dims
    inv = t.inverse()
    sx, sy = _inverse_grid(inv, 0, 0, out_w, out_h)
    src = img.samples
    if interpolation == "nearest":
        xi = np.floor(sx + 0.5).astype(np.int64)
        yi = np.floor(sy + 0.5).astype(np.int64)
        valid = (xi >= 0) & (xi < img.width) & (yi >= 0) & (yi < img.height)
        out = np.zeros((out_h, out_w, img.channels), dtype=np.uint8)
        out[valid] = src[yi[valid], xi[valid]]
        return Raster(out)
    if interpolation == "bilinear":
        x0 = np.floor(sx)
        y0 = np.floor(sy)
        fx = (sx - x0)[:, :, None]
        fy = (sy - y0)[:, :, None]
        x0 = x0.astype(np.int64)
        y0 = y0.astype(np.int64)
        acc = np.zeros((out_h, out_w, img.channels), dtype=np.float64)
        for dy in (0, 1):
            wy = (1.0 - fy) if dy == 0 else fy
            for dx in (0, 1):
                wx = (1.0 - fx) if dx == 0 else fx
                xn, yn = x0 + dx, y0 + dy
                valid = (xn >= 0) & (xn < img.width) & (yn >= 0) & (yn < img.height)
                sample = np.zeros((out_h, out_w, img.channels), dtype=np.float64)
                sample[valid] = src[yn[valid], xn[valid]]
                acc += wx * wy * sample
        return Raster(np.clip(np.floor(acc + 0.5), 0, 255).astype(np.uint8))
    raise DimensionMismatch(f"unknown interpolation {interpolation!r}")


def warp_placed(
    placed: PlacedMask, t: AffineTransform, out_dims: tuple[int, int]
) -> PlacedMask:
    """Nearest-neighbor warp of a sparse mask; result is trimmed tight."""
    out_w, out_h = out_dims
    inv = t.inverse()
    if placed.is_empty:
        return PlacedMask.empty(out_w, out_h)
    ch, cw = placed.crop.shape
    # Destination window: hull of the transformed source bbox, padded for
    # the half-pixel rounding of nearest-neighbor sampling.
    corners_u = []
    corners_v = []
    for su in (placed.x0 - 0.5, placed.x0 + cw - 0.5):
        for sv in (placed.y0 - 0.5, placed.y0 + ch - 0.5):
            du, dv = t.apply(su, sv)
            corners_u.append(du)
            corners_v.append(dv)
    wx0 = max(0, math.floor(min(corners_u)) - 1)
    wy0 = max(0, math.floor(min(corners_v)) - 1)
    wx1 = min(out_w, math.ceil(max(corners_u)) + 2)
    wy1 = min(out_h, math.ceil(max(corners_v)) + 2)
    if wx0 >= wx1 or wy0 >= wy1:
        return PlacedMask.empty(out_w, out_h)
    sx, sy = _inverse_grid(inv, wx0, wy0, wx1 - wx0, wy1 - wy0)
    xi = np.floor(sx + 0.5).astype(np.int64) - placed.x0
    yi = np.floor(sy + 0.5).astype(np.int64) - placed.y0
    valid = (xi >= 0) & (xi < cw) & (yi >= 0) & (yi < ch)
    window = np.zeros(valid.shape, dtype=bool)
    window[valid] = placed.crop[yi[valid], xi[valid]]
    return PlacedMask.from_crop(out_w, out_h, wx0, wy0, window)


def warp_mask(
    mask: BinaryMask, t: AffineTransform, out_dims: tuple[int, int]
) -> BinaryMask:
    """Nearest-neighbor mask warp with full-frame output."""
    return warp_placed(PlacedMask.from_mask(mask), t, out_dims).to_mask()


def map_box(box: BBox, t: AffineTransform) -> BBox:
    """Tight axis-aligned hull of the four transformed corners.

    Box coordinates are continuous (pixel (r,c) spans [c,c+1)x[r,r+1)), so
    corners shift by 0.5 into pixel-center coordinates around the
    transform.
    """
    t.inverse()  # raises NonInvertibleTransform for singular transforms
    us = []
    vs = []
    for cu, cv in box.corners():
        du, dv = t.apply(cu - 0.5, cv - 0.5)
        us.append(du + 0.5)
        vs.append(dv + 0.5)
    x0, x1 = min(us), max(us)
    y0, y1 = min(vs), max(vs)
    return BBox(x0, y0, x1 - x0, y1 - y0)
