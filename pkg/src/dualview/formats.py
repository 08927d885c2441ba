"""Bit-exact readers and writers: detection JSON, labelme-style polygon
annotations, 8-bit PNG rasters, and flat key=value config files.

Writers are deterministic (fixed key order, shortest round-trip float
repr, fixed zlib level) so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import (
    DegeneratePolygon,
    InvalidRle,
    ParseError,
    UnknownLabel,
    UnsupportedFormat,
)
from .evaluation import GtInstance
from .fusion import Detection
from .geometry import Raster
from .masks import BBox, PlacedMask, RleMask

SCHEMA_VERSION = 1

_DET_KEYS = {"det_id", "image_id", "class_id", "score", "bbox", "segmentation", "view"}


def dump_json(obj, path: Path | str) -> None:
    """Deterministic JSON writer (insertion-ordered keys, repr floats)."""
    text = json.dumps(obj, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _load_json(path: Path | str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Detection files
# ---------------------------------------------------------------------------


def detection_to_dict(det: Detection) -> dict:
    rle = det.mask
    out = {
        "det_id": det.det_id,
        "image_id": det.image_id,
        "class_id": det.class_id,
        "score": float(det.score),
        "bbox": [float(v) for v in det.box.to_list()],
        "segmentation": {
            "size": [rle.height, rle.width],
            "counts": list(rle.counts),
        },
        "view": det.view,
    }
    for key in sorted(det.extras):
        out[key] = det.extras[key]
    return out


def detection_from_dict(obj: dict, dims_by_image: dict[str, tuple[int, int]] | None) -> Detection:
    try:
        seg = obj["segmentation"]
        h, w = int(seg["size"][0]), int(seg["size"][1])
        counts = [int(c) for c in seg["counts"]]
        image_id = str(obj["image_id"])
        bbox = [float(v) for v in obj["bbox"]]
        det = Detection(
            image_id=image_id,
            class_id=int(obj["class_id"]),
            score=float(obj["score"]),
            box=BBox(*bbox),
            mask=RleMask(w, h, tuple(counts)),
            view=str(obj.get("view", "original")),
            det_id=int(obj["det_id"]),
            extras={k: v for k, v in obj.items() if k not in _DET_KEYS},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed detection entry: {exc}") from exc
    det.mask.validate_total()
    if dims_by_image is not None:
        if image_id not in dims_by_image:
            raise ParseError(f"detection {det.det_id} references unknown image {image_id!r}")
        if dims_by_image[image_id] != (w, h):
            raise ParseError(
                f"detection {det.det_id} mask dims {(w, h)} do not match image {image_id!r}"
            )
    return det


def write_detections(
    dets: list[Detection],
    path: Path | str,
    images: list[dict] | None = None,
) -> None:
    """Write the detection file; image metadata is derived from the masks
    when not supplied."""
    if images is None:
        seen: dict[str, tuple[int, int]] = {}
        for det in dets:
            dims = (det.mask.width, det.mask.height)
            prev = seen.setdefault(det.image_id, dims)
            if prev != dims:
                raise ParseError(f"inconsistent dims for image {det.image_id!r}")
        images = [
            {"image_id": image_id, "width": w, "height": h, "file_name": ""}
            for image_id, (w, h) in sorted(seen.items())
        ]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "images": images,
        "detections": [detection_to_dict(d) for d in dets],
    }
    dump_json(doc, path)


def read_detection_file(path: Path | str):
    """Returns (detections, images) after schema validation."""
    doc = _load_json(path)
    if not isinstance(doc, dict) or "detections" not in doc:
        raise ParseError(f"{path}: not a detection file")
    images = doc.get("images", [])
    dims_by_image: dict[str, tuple[int, int]] = {}
    for img in images:
        try:
            dims_by_image[str(img["image_id"])] = (int(img["width"]), int(img["height"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: malformed image entry: {exc}") from exc
    try:
        dets = [
            detection_from_dict(obj, dims_by_image if images else None)
            for obj in doc["detections"]
        ]
    except InvalidRle as exc:
        raise InvalidRle(f"{path}: {exc}") from exc
    ids = [d.det_id for d in dets]
    if len(set(ids)) != len(ids):
        raise ParseError(f"{path}: duplicate det_id")
    return dets, images


def read_detections(path: Path | str) -> list[Detection]:
    return read_detection_file(path)[0]


# ---------------------------------------------------------------------------
# Labelme-style annotations
# ---------------------------------------------------------------------------


def rasterize_polygon(points, width: int, height: int) -> PlacedMask:
    """Even-odd fill: a pixel is foreground iff its center is inside.

    Pixel (r, c) has center (c + 0.5, r + 0.5) in the continuous
    coordinates the polygon vertices live in.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise DegeneratePolygon(f"polygon needs >= 3 points, got {len(pts)}")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    c0 = max(0, int(np.floor(min(xs) - 0.5)))
    c1 = min(width, int(np.ceil(max(xs) + 0.5)))
    r0 = max(0, int(np.floor(min(ys) - 0.5)))
    r1 = min(height, int(np.ceil(max(ys) + 0.5)))
    if c0 >= c1 or r0 >= r1:
        return PlacedMask.empty(width, height)
    cx = np.arange(c0, c1, dtype=np.float64) + 0.5
    cy = np.arange(r0, r1, dtype=np.float64) + 0.5
    inside = np.zeros((r1 - r0, c1 - c0), dtype=bool)
    n = len(pts)
    for k in range(n):
        x1, y1 = pts[k]
        x2, y2 = pts[(k + 1) % n]
        if y1 == y2:
            continue
        # Half-open straddle test avoids double counting shared vertices.
        straddle = ((y1 <= cy) & (cy < y2)) | ((y2 <= cy) & (cy < y1))
        if not straddle.any():
            continue
        t = (cy - y1) / (y2 - y1)
        x_cross = x1 + t * (x2 - x1)
        inside ^= straddle[:, None] & (cx[None, :] < x_cross[:, None])
    return PlacedMask.from_crop(width, height, c0, r0, inside)


def placed_to_polygon(placed: PlacedMask) -> list[list[float]]:
    """Exact rectilinear outline of a single-component, hole-free mask.

    Rasterizing the returned polygon reproduces the mask bit-exactly
    under the pixel-center even-odd rule.
    """
    if placed.is_empty:
        raise DegeneratePolygon("cannot outline an empty mask")
    crop = placed.crop
    ch, cw = crop.shape
    padded = np.zeros((ch + 2, cw + 2), dtype=bool)
    padded[1:-1, 1:-1] = crop
    # Directed boundary edges, interior kept to the right of travel.
    edges: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(a, b):
        edges.setdefault(a, []).append(b)

    fg = np.argwhere(crop)
    for r, c in fg:
        pr, pc = r + 1, c + 1
        if not padded[pr - 1, pc]:
            add((c, r), (c + 1, r))  # top edge, left to right
        if not padded[pr, pc + 1]:
            add((c + 1, r), (c + 1, r + 1))  # right edge, downwards
        if not padded[pr + 1, pc]:
            add((c + 1, r + 1), (c, r + 1))  # bottom edge, right to left
        if not padded[pr, pc - 1]:
            add((c, r + 1), (c, r))  # left edge, upwards
    start = min(edges)
    path = [start]
    prev_dir = None
    cur = start
    while True:
        nxts = edges[cur]
        if len(nxts) == 1:
            nxt = nxts[0]
        else:
            # Diagonal contact: prefer the sharpest right turn so the trace
            # stays on one component.
            def turn(cand):
                d = (cand[0] - cur[0], cand[1] - cur[1])
                order = {(1, 0): 0, (0, 1): 1, (-1, 0): 2, (0, -1): 3}
                if prev_dir is None:
                    return order[d]
                return (order[d] - order[prev_dir] + 1) % 4
            nxt = min(nxts, key=turn)
        nxts.remove(nxt)
        prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
        if nxt == start:
            break
        path.append(nxt)
        cur = nxt
    if any(v for v in edges.values()):
        raise DegeneratePolygon("mask outline is not a single closed curve")
    # Merge collinear runs.
    merged = []
    m = len(path)
    for i in range(m):
        a, b, c = path[i - 1], path[i], path[(i + 1) % m]
        if (b[0] - a[0], b[1] - a[1]) != (c[0] - b[0], c[1] - b[1]):
            merged.append(b)
    return [[float(x + placed.x0), float(y + placed.y0)] for x, y in merged]


def read_annotations(
    path: Path | str, label_map: dict[str, int]
) -> list[GtInstance]:
    """Load one labelme-style file; the image id is the file stem."""
    doc = _load_json(path)
    try:
        height = int(doc["imageHeight"])
        width = int(doc["imageWidth"])
        shapes = doc.get("shapes", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed annotation file: {exc}") from exc
    image_id = Path(path).stem
    out = []
    for idx, shape in enumerate(shapes):
        label = shape.get("label")
        if label not in label_map:
            raise UnknownLabel(f"{path}: unknown label {label!r}")
        if shape.get("shape_type", "polygon") != "polygon":
            raise ParseError(f"{path}: unsupported shape_type {shape.get('shape_type')!r}")
        points = shape.get("points", [])
        placed = rasterize_polygon(points, width, height)
        out.append(
            GtInstance(
                image_id=image_id,
                class_id=int(label_map[label]),
                mask=placed.to_rle(),
                box=placed.bbox(),
                gt_id=idx,
                _placed=placed,
            )
        )
    return out


def write_annotations(
    gts: list[GtInstance],
    path: Path | str,
    width: int,
    height: int,
    label_names: dict[int, str],
    image_path: str = "",
) -> None:
    """Labelme-style writer; masks become exact pixel-outline polygons."""
    shapes = []
    for gt in gts:
        shapes.append(
            {
                "label": label_names[gt.class_id],
                "points": placed_to_polygon(gt.placed()),
                "group_id": None,
                "shape_type": "polygon",
                "flags": {},
            }
        )
    doc = {
        "version": "5.1.1",
        "flags": {},
        "shapes": shapes,
        "imagePath": image_path,
        "imageData": None,
        "imageHeight": height,
        "imageWidth": width,
    }
    dump_json(doc, path)


def read_label_map(path: Path | str) -> dict[str, int]:
    doc = _load_json(path)
    if not isinstance(doc, dict) or not doc:
        raise ParseError(f"{path}: label map must be a non-empty JSON object")
    try:
        return {str(k): int(v) for k, v in doc.items()}
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed label map: {exc}") from exc


# ---------------------------------------------------------------------------
# PNG rasters (8-bit grayscale / RGB, no interlace)
# ---------------------------------------------------------------------------

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def write_raster(img: Raster, path: Path | str) -> None:
    h, w, ch = img.samples.shape
    color_type = 0 if ch == 1 else 2
    raw = bytearray()
    for r in range(h):
        raw.append(0)  # filter type 0
        raw.extend(img.samples[r].tobytes())
    payload = zlib.compress(bytes(raw), 6)
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    data = _PNG_SIG + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", payload) + _chunk(b"IEND", b"")
    Path(path).write_bytes(data)


def _unfilter(data: bytes, width: int, height: int, channels: int) -> np.ndarray:
    stride = width * channels
    bpp = channels
    out = np.zeros((height, stride), dtype=np.uint8)
    pos = 0
    for r in range(height):
        ftype = data[pos]
        pos += 1
        row = np.frombuffer(data, dtype=np.uint8, count=stride, offset=pos).copy()
        pos += stride
        prev = out[r - 1] if r > 0 else np.zeros(stride, dtype=np.uint8)
        if ftype == 0:
            out[r] = row
        elif ftype == 1:
            acc = np.cumsum(row.reshape(-1, bpp).astype(np.uint32), axis=0) & 255
            out[r] = acc.astype(np.uint8).reshape(-1)
        elif ftype == 2:
            out[r] = row + prev
        elif ftype in (3, 4):
            rec = out[r]
            for i in range(stride):
                a = int(rec[i - bpp]) if i >= bpp else 0
                b = int(prev[i])
                if ftype == 3:
                    rec[i] = (int(row[i]) + (a + b) // 2) & 255
                else:
                    c = int(out[r - 1][i - bpp]) if (r > 0 and i >= bpp) else 0
                    p = a + b - c
                    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                    if pa <= pb and pa <= pc:
                        pred = a
                    elif pb <= pc:
                        pred = b
                    else:
                        pred = c
                    rec[i] = (int(row[i]) + pred) & 255
        else:
            raise UnsupportedFormat(f"unknown PNG filter type {ftype}")
    return out.reshape(height, width, channels)


def read_raster(path: Path | str) -> Raster:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if blob[:8] != _PNG_SIG:
        raise UnsupportedFormat(f"{path}: not a PNG file")
    pos = 8
    ihdr = None
    idat = bytearray()
    while pos + 8 <= len(blob):
        length = struct.unpack(">I", blob[pos : pos + 4])[0]
        tag = blob[pos + 4 : pos + 8]
        payload = blob[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat.extend(payload)
        elif tag == b"IEND":
            break
    if ihdr is None:
        raise UnsupportedFormat(f"{path}: missing IHDR")
    w, h, depth, color_type, _, _, interlace = ihdr
    if depth != 8:
        raise UnsupportedFormat(f"{path}: only 8-bit PNG supported, got {depth}-bit")
    if color_type not in (0, 2):
        raise UnsupportedFormat(f"{path}: only grayscale/RGB supported, got type {color_type}")
    if interlace != 0:
        raise UnsupportedFormat(f"{path}: interlaced PNG not supported")
    channels = 1 if color_type == 0 else 3
    try:
        data = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise ParseError(f"{path}: corrupt PNG stream: {exc}") from exc
    if len(data) != h * (w * channels + 1):
        raise ParseError(f"{path}: unexpected PNG data length")
    return Raster(_unfilter(data, w, h, channels))


# ---------------------------------------------------------------------------
# Flat key=value config files
# ---------------------------------------------------------------------------


def read_config(path: Path | str) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"{path}:{lineno}: expected key=value")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out
