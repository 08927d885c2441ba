"""Independent reference implementations used as test oracles.

Everything here is deliberately written with plain Python loops and its
own arithmetic, sharing no code with the package under test.
"""

from __future__ import annotations

import math

import numpy as np


# --- mask kernels -----------------------------------------------------------


def iou_pixels(a: np.ndarray, b: np.ndarray) -> float:
    """Brute-force pixel-count IoU of two equal-shape boolean grids."""
    inter = 0
    union = 0
    h, w = a.shape
    for r in range(h):
        for c in range(w):
            av, bv = bool(a[r, c]), bool(b[r, c])
            if av and bv:
                inter += 1
            if av or bv:
                union += 1
    if union == 0:
        return 0.0
    return inter / union


def iou_boxes(a, b) -> float:
    """Brute-force rectangle IoU; boxes are (x, y, w, h)."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    if aw * ah == 0 or bw * bh == 0:
        return 0.0
    ix = min(ax + aw, bx + bw) - max(ax, bx)
    iy = min(ay + ah, by + bh) - max(ay, by)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (aw * ah + bw * bh - inter)


def flood_fill_components(mask: np.ndarray, connectivity: int):
    """Stack-based flood fill; returns (count, labels row-major order)."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    if connectivity == 4:
        neigh = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        neigh = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]
    count = 0
    for r0 in range(h):
        for c0 in range(w):
            if mask[r0, c0] and labels[r0, c0] == 0:
                count += 1
                stack = [(r0, c0)]
                labels[r0, c0] = count
                while stack:
                    r, c = stack.pop()
                    for dr, dc in neigh:
                        rr, cc = r + dr, c + dc
                        if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and labels[rr, cc] == 0:
                            labels[rr, cc] = count
                            stack.append((rr, cc))
    return count, labels


def rle_decode_reference(counts, width: int, height: int) -> np.ndarray:
    """Scalar column-major RLE decoder."""
    out = np.zeros((height, width), dtype=bool)
    pos = 0
    val = False
    for count in counts:
        for _ in range(count):
            col, row = divmod(pos, height)
            out[row, col] = val
            pos += 1
        val = not val
    return out


# --- geometry ----------------------------------------------------------------


def nn_warp_reference(src: np.ndarray, coeffs, out_dims) -> np.ndarray:
    """Per-pixel nearest-neighbor warp through the inverse of (a,b,tx,c,d,ty)."""
    a, b, tx, c, d, ty = coeffs
    det = a * d - b * c
    ia, ib = d / det, -b / det
    ic, id_ = -c / det, a / det
    itx = -(ia * tx + ib * ty)
    ity = -(ic * tx + id_ * ty)
    out_w, out_h = out_dims
    h, w = src.shape
    out = np.zeros((out_h, out_w), dtype=bool)
    for v in range(out_h):
        for u in range(out_w):
            sx = ia * u + ib * v + itx
            sy = ic * u + id_ * v + ity
            xi = math.floor(sx + 0.5)
            yi = math.floor(sy + 0.5)
            if 0 <= xi < w and 0 <= yi < h:
                out[v, u] = src[yi, xi]
    return out


# --- NMS ----------------------------------------------------------------------


def nms_reference(entries, thresh: float, class_aware: bool, iou_fn):
    """Exhaustive sequential simulation of greedy NMS.

    ``entries`` are (det_id, score, class_id, payload); returns kept ids.
    """
    remaining = sorted(entries, key=lambda e: (-e[1], e[0]))
    kept = []
    while remaining:
        best = remaining.pop(0)
        kept.append(best)
        survivors = []
        for other in remaining:
            if class_aware and other[2] != best[2]:
                survivors.append(other)
                continue
            if iou_fn(other[3], best[3]) < thresh:
                survivors.append(other)
        remaining = survivors
    return [e[0] for e in kept]


# --- spot dedup ----------------------------------------------------------------


def spot_dedup_reference(masks, scores, det_ids, tau: float):
    """Naive connected-component spots + max-total-IoU representatives."""
    n = len(masks)
    iou = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            iou[i][j] = iou[j][i] = iou_pixels(masks[i], masks[j])
    unvisited = set(range(n))
    kept = []
    while unvisited:
        seed = min(unvisited)
        comp = {seed}
        frontier = [seed]
        while frontier:
            i = frontier.pop()
            for j in range(n):
                if j not in comp and iou[i][j] > tau:
                    comp.add(j)
                    frontier.append(j)
        unvisited -= comp
        members = sorted(comp)
        best = None
        best_key = None
        for i in members:
            total = sum(iou[i][j] for j in members if j != i)
            key = (-total, -scores[i], det_ids[i])
            if best_key is None or key < best_key:
                best_key = key
                best = i
        kept.append(det_ids[best])
    return sorted(kept)


# --- evaluator -----------------------------------------------------------------


def ap_reference(dets, gts, iou_fn, thresholds, recall_samples, max_dets=100):
    """Exhaustive PR-curve AP evaluator.

    ``dets``: (image_id, class_id, score, det_id, payload);
    ``gts``: (image_id, class_id, payload).
    Returns (mean_ap, per_threshold list) mirroring the evaluation
    contract: per-class AP averaged over classes with ground truth.
    """
    images = sorted({d[0] for d in dets} | {g[0] for g in gts})
    trimmed = []
    for image_id in images:
        img_dets = [d for d in dets if d[0] == image_id]
        img_dets.sort(key=lambda d: (-d[2], d[3]))
        trimmed.extend(img_dets[:max_dets])

    classes = sorted({g[1] for g in gts})
    per_threshold = []
    for thresh in thresholds:
        class_aps = []
        for class_id in classes:
            c_gts = [g for g in gts if g[1] == class_id]
            if not c_gts:
                continue
            pooled = []
            for image_id in images:
                i_dets = sorted(
                    [d for d in trimmed if d[0] == image_id and d[1] == class_id],
                    key=lambda d: (-d[2], d[3]),
                )
                i_gts = [g for g in c_gts if g[0] == image_id]
                taken = [False] * len(i_gts)
                for det in i_dets:
                    best_j = -1
                    best_iou = 0.0
                    for j, gt in enumerate(i_gts):
                        if taken[j]:
                            continue
                        iou = iou_fn(det[4], gt[2])
                        if iou >= thresh and iou > best_iou:
                            best_iou = iou
                            best_j = j
                    if best_j >= 0:
                        taken[best_j] = True
                        pooled.append((det[2], det[3], True))
                    else:
                        pooled.append((det[2], det[3], False))
            pooled.sort(key=lambda e: (-e[0], e[1]))
            points = []
            tp = 0
            for rank, (_, _, is_tp) in enumerate(pooled, start=1):
                if is_tp:
                    tp += 1
                points.append((tp / len(c_gts), tp / rank))
            total = 0.0
            for r in recall_samples:
                best = 0.0
                for rec, prec in points:
                    if rec >= r and prec > best:
                        best = prec
                total += best
            class_aps.append(total / len(recall_samples))
        per_threshold.append(sum(class_aps) / len(class_aps) if class_aps else 0.0)
    mean_ap = sum(per_threshold) / len(per_threshold)
    return mean_ap, per_threshold


# --- losses ---------------------------------------------------------------------


def smooth_l1_ld(x):
    x = np.longdouble(x)
    if abs(x) < 1:
        return np.longdouble(0.5) * x * x
    return abs(x) - np.longdouble(0.5)


def cls_loss_ld(pk):
    return -np.log(np.longdouble(pk))


def mask_loss_ld(logits, gt):
    x = np.asarray(logits, dtype=np.longdouble)
    y = np.asarray(gt, dtype=np.longdouble)
    per = np.logaddexp(np.longdouble(0.0), x) - y * x
    return per.mean()


def box_loss_ld(t_row, v):
    return sum(smooth_l1_ld(ti - vi) for ti, vi in zip(t_row, v))


def central_diff(fn, x, h=1e-5):
    h = np.longdouble(h)
    return float((fn(np.longdouble(x) + h) - fn(np.longdouble(x) - h)) / (2 * h))


# --- polygon rasterization --------------------------------------------------------


def point_in_polygon(x: float, y: float, pts) -> bool:
    """Scalar even-odd crossing-number test."""
    inside = False
    n = len(pts)
    for k in range(n):
        x1, y1 = pts[k]
        x2, y2 = pts[(k + 1) % n]
        if (y1 <= y < y2) or (y2 <= y < y1):
            t = (y - y1) / (y2 - y1)
            if x < x1 + t * (x2 - x1):
                inside = not inside
    return inside


def rasterize_reference(pts, width: int, height: int) -> np.ndarray:
    out = np.zeros((height, width), dtype=bool)
    for r in range(height):
        for c in range(width):
            out[r, c] = point_in_polygon(c + 0.5, r + 0.5, pts)
    return out
