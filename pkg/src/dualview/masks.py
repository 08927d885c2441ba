"""Binary-mask representation and bit-exact mask kernels.

Masks are stored either dense (``BinaryMask``, row-major bits) or
run-length encoded (``RleMask``, column-major counts with a leading
background run).  ``PlacedMask`` is the sparse in-memory workhorse used
by the pipeline stages: the same full-frame semantics, but only the
tight foreground window is materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, InvalidRle

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in continuous pixel coordinates (pixel (r,c) spans
    [c, c+1) x [r, r+1))."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise DimensionMismatch("box coordinates must be finite")
        if self.w < 0 or self.h < 0:
            raise DimensionMismatch("box sides must be non-negative")

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> list[tuple[float, float]]:
        return [
            (self.x, self.y),
            (self.x + self.w, self.y),
            (self.x, self.y + self.h),
            (self.x + self.w, self.y + self.h),
        ]

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


class BinaryMask:
    """Dense per-instance mask; ``pixels`` is a (height, width) bool array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 2:
            raise DimensionMismatch(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch("mask must be at least 1x1")
        self.pixels = arr.astype(bool, copy=False)

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_bits(cls, width: int, height: int, bits) -> "BinaryMask":
        flat = np.asarray(bits, dtype=bool)
        if flat.size != width * height:
            raise DimensionMismatch("bit count does not equal width*height")
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def bits(self) -> np.ndarray:
        """Row-major flat view of the mask bits."""
        return self.pixels.reshape(-1)

    def area(self) -> int:
        return int(np.count_nonzero(self.pixels))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):  # pragma: no cover - masks are not hashable
        raise TypeError("BinaryMask is not hashable")

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, area={self.area()})"


@dataclass(frozen=True)
class RleMask:
    """Column-major run-length encoding; ``counts[0]`` is a background run
    (possibly 0), runs alternate background/foreground afterwards."""

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.width < 1 or self.height < 1:
            raise InvalidRle("RLE dimensions must be positive")
        if any(c < 0 for c in self.counts):
            raise InvalidRle("run lengths must be non-negative")
        if any(c == 0 for c in self.counts[1:]):
            raise InvalidRle("only the leading background run may be zero")

    def validate_total(self) -> None:
        if sum(self.counts) != self.width * self.height:
            raise InvalidRle(
                f"run lengths sum to {sum(self.counts)}, "
                f"expected {self.width * self.height}"
            )

    def foreground_area(self) -> int:
        return sum(self.counts[1::2])


def rle_encode(mask: BinaryMask) -> RleMask:
    """Encode a mask over the column-major pixel scan."""
    flat = mask.pixels.ravel(order="F")
    # Sentinels make diff() emit a boundary at both ends of every run.
    padded = np.concatenate(([-1], flat.view(np.int8), [-1]))
    edges = np.flatnonzero(np.diff(padded))
    counts = np.diff(edges)
    if flat[0]:
        counts = np.concatenate(([0], counts))
    return RleMask(mask.width, mask.height, tuple(int(c) for c in counts))


def rle_decode(rle: RleMask) -> BinaryMask:
    """Inverse of :func:`rle_encode`."""
    rle.validate_total()
    counts = np.asarray(rle.counts, dtype=np.int64)
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return BinaryMask(flat.reshape((rle.height, rle.width), order="F"))


def mask_area(mask: BinaryMask) -> int:
    return mask.area()


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """IoU over pixels; two empty masks have IoU 0 by convention."""
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch(
            f"mask shapes differ: {a.pixels.shape} vs {b.pixels.shape}"
        )
    inter = int(np.count_nonzero(a.pixels & b.pixels))
    union = int(np.count_nonzero(a.pixels | b.pixels))
    if union == 0:
        return 0.0
    return inter / union


def bbox_iou(a: BBox, b: BBox) -> float:
    """IoU of continuous rectangles; 0 if either has zero area."""
    if a.area == 0 or b.area == 0:
        return 0.0
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def bbox_of_mask(mask: BinaryMask) -> BBox:
    """Tight box over foreground pixels; (0,0,0,0) when the mask is empty."""
    rows = np.flatnonzero(mask.pixels.any(axis=1))
    if rows.size == 0:
        return BBox(0.0, 0.0, 0.0, 0.0)
    cols = np.flatnonzero(mask.pixels.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1])
    c0, c1 = int(cols[0]), int(cols[-1])
    return BBox(float(c0), float(r0), float(c1 - c0 + 1), float(r1 - r0 + 1))


def _first_encounter_relabel(labels: np.ndarray, count: int) -> np.ndarray:
    if count == 0:
        return labels
    flat = labels.ravel()
    order = np.zeros(count + 1, dtype=labels.dtype)
    seen = 0
    for lab in flat[np.flatnonzero(flat)]:
        if order[lab] == 0:
            seen += 1
            order[lab] = seen
            if seen == count:
                break
    return order[labels]


def fill_holes(mask: BinaryMask) -> BinaryMask:
    """Fill interior background holes (off by default everywhere; the
    component filter itself only counts components)."""
    return BinaryMask(ndimage.binary_fill_holes(mask.pixels))


def placed_fill_holes(placed: "PlacedMask") -> "PlacedMask":
    if placed.is_empty:
        return placed
    return PlacedMask(
        placed.width, placed.height, placed.x0, placed.y0,
        ndimage.binary_fill_holes(placed.crop),
    )


def connected_components(mask: BinaryMask, connectivity: int = 8):
    """Label foreground components.

    Returns ``(count, labels)`` where ``labels`` assigns 0 to background and
    1..count to components in first-encounter (row-major) order.
    """
    if connectivity not in (4, 8):
        raise DimensionMismatch(f"connectivity must be 4 or 8, got {connectivity}")
    structure = _STRUCT_4 if connectivity == 4 else _STRUCT_8
    labels, count = ndimage.label(mask.pixels, structure=structure)
    labels = _first_encounter_relabel(labels, count)
    return int(count), labels


# ---------------------------------------------------------------------------
# Sparse placed masks (internal pipeline currency)
# ---------------------------------------------------------------------------


@dataclass
class PlacedMask:
    """A full-frame mask stored as its tight foreground window.

    ``crop`` is a (ch, cw) bool array anchored at column ``x0``, row ``y0``
    of a ``width`` x ``height`` frame.  An empty mask has a (0, 0) crop.
    """

    width: int
    height: int
    x0: int
    y0: int
    crop: np.ndarray = field(repr=False)

    @classmethod
    def empty(cls, width: int, height: int) -> "PlacedMask":
        return cls(width, height, 0, 0, np.zeros((0, 0), dtype=bool))

    @classmethod
    def from_crop(
        cls, width: int, height: int, x0: int, y0: int, crop: np.ndarray
    ) -> "PlacedMask":
        """Build from an untrimmed window, shrinking to the tight bbox."""
        crop = np.asarray(crop, dtype=bool)
        rows = np.flatnonzero(crop.any(axis=1))
        if rows.size == 0:
            return cls.empty(width, height)
        cols = np.flatnonzero(crop.any(axis=0))
        r0, r1 = int(rows[0]), int(rows[-1]) + 1
        c0, c1 = int(cols[0]), int(cols[-1]) + 1
        return cls(width, height, x0 + c0, y0 + r0, np.ascontiguousarray(crop[r0:r1, c0:c1]))

    @classmethod
    def from_mask(cls, mask: BinaryMask) -> "PlacedMask":
        return cls.from_crop(mask.width, mask.height, 0, 0, mask.pixels)

    @property
    def is_empty(self) -> bool:
        return self.crop.size == 0

    def area(self) -> int:
        return int(np.count_nonzero(self.crop))

    def bbox(self) -> BBox:
        if self.is_empty:
            return BBox(0.0, 0.0, 0.0, 0.0)
        ch, cw = self.crop.shape
        return BBox(float(self.x0), float(self.y0), float(cw), float(ch))

    def to_mask(self) -> BinaryMask:
        out = np.zeros((self.height, self.width), dtype=bool)
        if not self.is_empty:
            ch, cw = self.crop.shape
            out[self.y0 : self.y0 + ch, self.x0 : self.x0 + cw] = self.crop
        return BinaryMask(out)

    def to_rle(self) -> RleMask:
        if self.is_empty:
            return RleMask(self.width, self.height, (self.width * self.height,))
        counts: list[int] = []
        h = self.height
        pos = 0  # column-major scan position already consumed
        ch, cw = self.crop.shape
        for j in range(cw):
            col = self.crop[:, j]
            if not col.any():
                continue
            padded = np.concatenate(([0], col.view(np.int8), [0]))
            edges = np.flatnonzero(np.diff(padded))
            base = (self.x0 + j) * h + self.y0
            for k in range(0, len(edges), 2):
                start = base + int(edges[k])
                end = base + int(edges[k + 1])
                gap = start - pos
                if gap == 0 and counts:
                    counts[-1] += end - start
                else:
                    counts.append(gap)
                    counts.append(end - start)
                pos = end
        counts.append(self.width * h - pos)
        if counts[-1] == 0:
            counts.pop()
        return RleMask(self.width, self.height, tuple(counts))

    @classmethod
    def from_rle(cls, rle: RleMask) -> "PlacedMask":
        return cls.from_mask(rle_decode(rle))

    def component_count(self, connectivity: int = 8) -> int:
        if self.is_empty:
            return 0
        structure = _STRUCT_4 if connectivity == 4 else _STRUCT_8
        _, count = ndimage.label(self.crop, structure=structure)
        return int(count)

    def translated(self, dx: int, dy: int) -> "PlacedMask":
        """Shift within the same frame, clipping at the borders."""
        if self.is_empty:
            return self
        ch, cw = self.crop.shape
        nx0, ny0 = self.x0 + dx, self.y0 + dy
        cx0, cy0 = max(nx0, 0), max(ny0, 0)
        cx1, cy1 = min(nx0 + cw, self.width), min(ny0 + ch, self.height)
        if cx0 >= cx1 or cy0 >= cy1:
            return PlacedMask.empty(self.width, self.height)
        sub = self.crop[cy0 - ny0 : cy1 - ny0, cx0 - nx0 : cx1 - nx0]
        return PlacedMask.from_crop(self.width, self.height, cx0, cy0, sub)


def placed_intersection(a: PlacedMask, b: PlacedMask) -> int:
    if a.is_empty or b.is_empty:
        return 0
    ah, aw = a.crop.shape
    bh, bw = b.crop.shape
    x0 = max(a.x0, b.x0)
    y0 = max(a.y0, b.y0)
    x1 = min(a.x0 + aw, b.x0 + bw)
    y1 = min(a.y0 + ah, b.y0 + bh)
    if x0 >= x1 or y0 >= y1:
        return 0
    asub = a.crop[y0 - a.y0 : y1 - a.y0, x0 - a.x0 : x1 - a.x0]
    bsub = b.crop[y0 - b.y0 : y1 - b.y0, x0 - b.x0 : x1 - b.x0]
    return int(np.count_nonzero(asub & bsub))


def placed_iou(a: PlacedMask, b: PlacedMask) -> float:
    inter = placed_intersection(a, b)
    union = a.area() + b.area() - inter
    if union == 0:
        return 0.0
    return inter / union
