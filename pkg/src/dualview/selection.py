"""Supervised mask selection: keep/discard labels, candidate scoring,
threshold selection, and per-spot deduplication.

A "spot" is one connected component of the graph whose edges join
candidates with pairwise mask IoU above 0.7; each spot is presumed to
cover a single cell and contributes exactly one surviving mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, DimensionMismatch, MissingScore, ScorerNotTrained
from .evaluation import GtInstance
from .fusion import Detection
from .geometry import Raster
from .masks import placed_iou

FEATURE_NAMES = (
    "detector_score",
    "norm_area",
    "aspect_ratio",
    "solidity",
    "component_count",
    "max_peer_iou",
)


@dataclass
class MsLabel:
    det_id: int
    y_m: int
    matched_gt_id: int | None
    iou_with_gt: float


@dataclass(frozen=True)
class SpotCluster:
    member_det_ids: tuple[int, ...]
    representative_det_id: int


@dataclass
class Scorer:
    """Pluggable candidate scorer.

    ``external`` reads scores by det_id from a mapping, ``iou_oracle``
    scores each candidate by its best mask IoU against ground truth
    (test harness only), and ``logistic_geom`` evaluates a logistic
    model over cheap geometric features.
    """

    kind: str
    external_scores: dict[int, float] | None = None
    gts: list[GtInstance] | None = None
    weights: np.ndarray | None = None
    bias: float = 0.0
    degenerate: bool = False
    constant: float = 0.5
    loss_trace: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.kind not in ("external", "iou_oracle", "logistic_geom"):
            raise DimensionMismatch(f"unknown scorer kind {self.kind!r}")


@dataclass(frozen=True)
class MsConfig:
    scorer_kind: str = "iou_oracle"
    keep_thresh: float = 0.5
    tau_spot: float = 0.7
    representative: str = "consensus"  # or "score"


def build_ms_labels(
    candidates: list[Detection], gts: list[GtInstance]
) -> list[MsLabel]:
    """Per ground truth, the overlapping candidate of maximum mask IoU
    (ties to the lowest det_id) is labeled keep; everything else discard."""
    ious = np.zeros((len(candidates), len(gts)), dtype=np.float64)
    for i, det in enumerate(candidates):
        for j, gt in enumerate(gts):
            ious[i, j] = placed_iou(det.placed(), gt.placed())

    # Winner per GT: the overlapping candidate of max IoU, lowest det_id on ties.
    won_by: dict[int, list[int]] = {}
    for j in range(len(gts)):
        best_i = -1
        best = 0.0
        for i in sorted(range(len(candidates)), key=lambda i: candidates[i].det_id):
            if ious[i, j] > best:
                best = float(ious[i, j])
                best_i = i
        if best_i >= 0:
            won_by.setdefault(best_i, []).append(j)

    labels = []
    for i, det in enumerate(candidates):
        best_iou = float(ious[i].max()) if len(gts) else 0.0
        if i in won_by:
            # A candidate winning several GTs is matched to the one it
            # overlaps most (earliest listed on ties).
            match_j = min(won_by[i], key=lambda j: (-ious[i, j], j))
            labels.append(MsLabel(det.det_id, 1, gts[match_j].gt_id, float(ious[i, match_j])))
        else:
            labels.append(MsLabel(det.det_id, 0, None, best_iou))
    return labels


def candidate_features(
    candidates: list[Detection], image: Raster | None = None
) -> np.ndarray:
    """Geometric feature matrix for the logistic scorer, one row per
    candidate (see FEATURE_NAMES)."""
    n = len(candidates)
    feats = np.zeros((n, len(FEATURE_NAMES)), dtype=np.float64)
    placed = [d.placed() for d in candidates]
    for i, det in enumerate(candidates):
        p = placed[i]
        frame_area = p.width * p.height
        area = p.area()
        box = det.box
        feats[i, 0] = det.score
        feats[i, 1] = area / frame_area if frame_area else 0.0
        feats[i, 2] = box.w / box.h if box.h > 0 else 0.0
        feats[i, 3] = area / box.area if box.area > 0 else 0.0
        feats[i, 4] = p.component_count()
        peer = 0.0
        for j in range(n):
            if j != i:
                peer = max(peer, placed_iou(p, placed[j]))
        feats[i, 5] = peer
    return feats


def score_candidates(
    scorer: Scorer, image: Raster | None, candidates: list[Detection]
) -> list[float]:
    if scorer.kind == "external":
        if scorer.external_scores is None:
            raise MissingScore("external scorer has no score table")
        out = []
        for det in candidates:
            if det.det_id not in scorer.external_scores:
                raise MissingScore(f"no external score for det_id {det.det_id}")
            out.append(float(scorer.external_scores[det.det_id]))
        return out
    if scorer.kind == "iou_oracle":
        gts = scorer.gts or []
        return [
            max((placed_iou(det.placed(), gt.placed()) for gt in gts), default=0.0)
            for det in candidates
        ]
    # logistic_geom
    if scorer.degenerate:
        return [scorer.constant] * len(candidates)
    if scorer.weights is None:
        raise ScorerNotTrained("logistic scorer has no weights")
    feats = candidate_features(candidates, image)
    z = feats @ scorer.weights + scorer.bias
    return [float(s) for s in _sigmoid(z)]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_grad(
    weights: np.ndarray,
    bias: float,
    feats: np.ndarray,
    targets: np.ndarray,
    weight_decay: float,
):
    """Mean BCE with L2 penalty on the weights; returns (loss, d_w, d_b)."""
    z = feats @ weights + bias
    probs = _sigmoid(z)
    # Stable log-loss: softplus(z) - y*z.
    per = np.logaddexp(0.0, z) - targets * z
    loss = float(per.mean()) + 0.5 * weight_decay * float(weights @ weights)
    err = probs - targets
    d_w = feats.T @ err / len(targets) + weight_decay * weights
    d_b = float(err.mean())
    return loss, d_w, d_b


DEFAULT_HYPER = {
    "lr": 0.05,
    "momentum": 0.9,
    "weight_decay": 1e-4,
    "epochs": 200,
    "seed": 0,
}


def train_logistic_scorer(
    features, labels: list[MsLabel], hyper: dict | None = None
) -> Scorer:
    """Deterministic full-batch gradient descent with momentum on the
    keep/discard labels.  All-identical labels yield a flagged constant
    scorer instead of a model."""
    cfg = dict(DEFAULT_HYPER)
    if hyper:
        cfg.update(hyper)
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] != len(labels) or len(labels) < 1:
        raise DegenerateData("feature rows must match labels and be non-empty")
    targets = np.array([lab.y_m for lab in labels], dtype=np.float64)
    if np.all(targets == targets[0]):
        return Scorer(
            kind="logistic_geom", degenerate=True, constant=float(targets[0])
        )
    weights = np.zeros(feats.shape[1], dtype=np.float64)
    bias = 0.0
    vel_w = np.zeros_like(weights)
    vel_b = 0.0
    trace = []
    for _ in range(int(cfg["epochs"])):
        loss, d_w, d_b = logistic_loss_and_grad(
            weights, bias, feats, targets, float(cfg["weight_decay"])
        )
        trace.append(loss)
        vel_w = cfg["momentum"] * vel_w - cfg["lr"] * d_w
        vel_b = cfg["momentum"] * vel_b - cfg["lr"] * d_b
        weights = weights + vel_w
        bias = bias + vel_b
    return Scorer(kind="logistic_geom", weights=weights, bias=bias, loss_trace=trace)


def save_scorer(scorer: Scorer, path) -> None:
    """JSON sidecar for trained logistic scorers."""
    import json
    from pathlib import Path

    if scorer.kind != "logistic_geom":
        raise DimensionMismatch(f"only logistic scorers serialize, got {scorer.kind!r}")
    doc = {
        "kind": scorer.kind,
        "feature_names": list(FEATURE_NAMES),
        "weights": None if scorer.weights is None else [float(w) for w in scorer.weights],
        "bias": scorer.bias,
        "degenerate": scorer.degenerate,
        "constant": scorer.constant,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_scorer(path) -> Scorer:
    import json
    from pathlib import Path

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    weights = doc.get("weights")
    return Scorer(
        kind=doc["kind"],
        weights=None if weights is None else np.asarray(weights, dtype=np.float64),
        bias=float(doc.get("bias", 0.0)),
        degenerate=bool(doc.get("degenerate", False)),
        constant=float(doc.get("constant", 0.5)),
    )


def select(
    candidates: list[Detection], scores, keep_thresh: float = 0.5
) -> list[Detection]:
    """Keep candidates scoring at or above the threshold; order preserved."""
    if len(scores) != len(candidates):
        raise DimensionMismatch("one score per candidate required")
    return [det for det, s in zip(candidates, scores) if s >= keep_thresh]


def spots(kept: list[Detection], tau_spot: float = 0.7) -> list[SpotCluster]:
    """Connected components of the pairwise-IoU > tau graph, each with its
    representative under the consensus (max total IoU) rule."""
    return _spots_impl(kept, tau_spot, None, "consensus")


def _spots_impl(
    kept: list[Detection],
    tau_spot: float,
    scores,
    representative: str,
) -> list[SpotCluster]:
    n = len(kept)
    placed = [d.placed() for d in kept]
    iou = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            iou[i, j] = iou[j, i] = placed_iou(placed[i], placed[j])

    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if iou[i, j] > tau_spot:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    clusters = []
    for members in groups.values():
        if representative == "score":
            def key(i: int):
                s = scores[i] if scores is not None else kept[i].score
                return (-s, kept[i].det_id)
        else:
            totals = {i: float(sum(iou[i, j] for j in members if j != i)) for i in members}

            def key(i: int):
                s = scores[i] if scores is not None else kept[i].score
                return (-totals[i], -s, kept[i].det_id)
        rep = min(members, key=key)
        clusters.append(
            SpotCluster(
                member_det_ids=tuple(sorted(kept[i].det_id for i in members)),
                representative_det_id=kept[rep].det_id,
            )
        )
    return clusters


def spot_dedup(
    kept: list[Detection],
    tau_spot: float = 0.7,
    scores=None,
    representative: str = "consensus",
) -> list[Detection]:
    """One surviving detection per spot; singletons survive untouched."""
    clusters = _spots_impl(kept, tau_spot, scores, representative)
    keep_ids = {c.representative_det_id for c in clusters}
    return [d for d in kept if d.det_id in keep_ids]


def run_ms(
    candidates: list[Detection],
    gts: list[GtInstance],
    image: Raster | None,
    cfg: MsConfig,
    scorer: Scorer | None = None,
) -> list[Detection]:
    """Score, select, and deduplicate the candidate pool."""
    if scorer is None:
        if cfg.scorer_kind == "iou_oracle":
            scorer = Scorer(kind="iou_oracle", gts=gts)
        else:
            raise ScorerNotTrained(
                f"scorer kind {cfg.scorer_kind!r} requires an explicit scorer"
            )
    scores = score_candidates(scorer, image, candidates)
    kept = select(candidates, scores, cfg.keep_thresh)
    kept_scores = [s for det, s in zip(candidates, scores) if s >= cfg.keep_thresh]
    return spot_dedup(kept, cfg.tau_spot, kept_scores, cfg.representative)
