"""Batch command-line frontend.

Every subcommand is a thin wrapper over one library operation, writes
deterministic outputs (byte-identical across repeats and --jobs
settings), and drops a run manifest with content digests next to its
outputs.  Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EngineError, InputError, ValidationError
from .evaluation import EvalConfig, EvalSummary, dataset_split, evaluate_both, match_detections
from .fusion import Detection, DvsConfig, dvs_fuse, generate_views
from .formats import (
    dump_json,
    read_annotations,
    read_config,
    read_detection_file,
    read_label_map,
    read_raster,
    write_annotations,
    write_detections,
    write_raster,
)
from .gradcheck import run_gradient_suite
from .geometry import Raster, rotation_transform
from .losses import smooth_l1
from .masks import placed_iou
from .selection import MsConfig, Scorer, run_ms
from .synth import (
    CALIBRATED_NOISE,
    MODES,
    OracleSpec,
    SceneSpec,
    fixed_suite,
    gen_scene,
    run_end_to_end,
    zero_noise_suite,
)

LABEL_MAP = {"healthy": 1, "unhealthy": 2}
LABEL_NAMES = {1: "healthy", 2: "unhealthy"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(
    directory: Path,
    command: str,
    config: dict,
    inputs: list[Path],
    outputs: list[Path],
    timings: dict | None,
) -> None:
    """Paths are recorded relative to the manifest (outputs) or by name
    (inputs) so reruns in different directories stay byte-identical."""
    doc = {
        "tool": "dualview",
        "version": __version__,
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "inputs": [{"name": p.name, "sha256": _sha256(p)} for p in inputs],
        "outputs": [
            {"path": str(p.relative_to(directory)), "sha256": _sha256(p)}
            for p in sorted(outputs)
        ],
    }
    if timings is not None:
        doc["timings"] = timings
    dump_json(doc, directory / "manifest.json")


class _Stopwatch:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.marks: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        if self.enabled:
            self.marks[name] = round(now - self._t0, 6)
        self._t0 = now

    def timings(self) -> dict | None:
        return self.marks if self.enabled else None


def _config_of(args: argparse.Namespace) -> dict:
    # jobs and timings are execution details that cannot affect results;
    # paths are run-local (inputs/outputs carry digests instead).  Keeping
    # any of them would break byte-identity of equivalent reruns.
    skip = {"func", "config", "command", "jobs", "timings"}
    out = {}
    for key, val in vars(args).items():
        if key in skip or isinstance(val, Path):
            continue
        out[key] = val
    return out


def _apply_config_file(parser: argparse.ArgumentParser, args: argparse.Namespace, argv: list[str]):
    if not getattr(args, "config", None):
        return
    file_values = read_config(args.config)
    by_dest = {}
    for action in parser._actions:
        if action.dest in ("help",):
            continue
        by_dest[action.dest] = action
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=", 1)[0].replace("-", "_"))
    for key, raw in file_values.items():
        dest = key.replace("-", "_")
        if dest not in by_dest:
            raise ValidationError(f"unknown config key {key!r}")
        if dest in explicit:
            continue  # flags override the config file
        action = by_dest[dest]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            value = raw.strip().lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            value = action.type(raw)
        else:
            value = raw
        setattr(args, dest, value)


def _read_gt_dir(gt_dir: Path, label_map: dict[str, int]):
    files = sorted(gt_dir.glob("*.json"))
    if not files:
        raise InputError(f"no annotation files in {gt_dir}")
    gts = []
    image_ids = []
    for path in files:
        image_ids.append(path.stem)
        gts.extend(read_annotations(path, label_map))
    return gts, image_ids


def _read_gt_detections(path: Path):
    """Ground truth supplied as a detection file: one instance per entry,
    scores ignored.  Convenient for programmatic callers (bindings)."""
    from dualview.evaluation import GtInstance

    dets, images = read_detection_file(path)
    gts = [
        GtInstance(image_id=d.image_id, class_id=d.class_id, mask=d.mask, gt_id=d.det_id)
        for d in dets
    ]
    image_ids = [str(img["image_id"]) for img in images]
    return gts, image_ids


def _load_gts(args):
    if getattr(args, "gt_detections", None):
        return _read_gt_detections(Path(args.gt_detections))
    if not args.gt_dir or not args.label_map:
        raise ValidationError("provide either --gt-detections or --gt-dir with --label-map")
    label_map = read_label_map(args.label_map)
    return _read_gt_dir(Path(args.gt_dir), label_map)


def _dets_by_image(dets: list[Detection]) -> dict[str, list[Detection]]:
    out: dict[str, list[Detection]] = {}
    for det in dets:
        out.setdefault(det.image_id, []).append(det)
    return out


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_rotate_views(args) -> int:
    watch = _Stopwatch(args.timings)
    img = read_raster(args.image)
    watch.lap("read")
    cfg = DvsConfig(theta=args.theta)
    views = generate_views(img, cfg, interpolation=args.interpolation)
    watch.lap("warp")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for tag, raster, transform in views:
        path = out_dir / f"{tag}.png"
        write_raster(raster, path)
        outputs.append(path)
        if tag == "rotated":
            tpath = out_dir / "transform.json"
            dump_json(
                {
                    "theta": args.theta,
                    "coefficients": [transform.a, transform.b, transform.tx,
                                     transform.c, transform.d, transform.ty],
                    "out_width": raster.width,
                    "out_height": raster.height,
                },
                tpath,
            )
            outputs.append(tpath)
    watch.lap("write")
    _write_manifest(out_dir, "rotate-views", _config_of(args), [Path(args.image)], outputs, watch.timings())
    return 0


def _dvs_cfg_from(args) -> DvsConfig:
    return DvsConfig(
        theta=args.theta,
        nms_iou=args.nms_iou,
        nms_metric=args.nms_metric,
        connectivity=args.connectivity,
        min_mask_area=args.min_mask_area,
        class_aware_nms=not args.class_agnostic_nms,
        fill_holes=args.fill_holes,
    )


def _cmd_fuse(args) -> int:
    watch = _Stopwatch(args.timings)
    orig_dets, orig_images = read_detection_file(args.orig)
    rot_dets, rot_images = read_detection_file(args.rotated)
    cfg = _dvs_cfg_from(args)
    dims_by_image = {str(i["image_id"]): (int(i["width"]), int(i["height"])) for i in orig_images}
    rot_dims = {str(i["image_id"]): (int(i["width"]), int(i["height"])) for i in rot_images}
    watch.lap("read")

    orig_by_img = _dets_by_image(orig_dets)
    rot_by_img = _dets_by_image(rot_dets)
    fused: list[Detection] = []
    for image_id in sorted(dims_by_image):
        w, h = dims_by_image[image_id]
        t, rw, rh = rotation_transform(w, h, cfg.theta)
        if image_id in rot_dims and rot_dims[image_id] != (rw, rh):
            raise ValidationError(
                f"rotated dims {rot_dims[image_id]} for image {image_id!r} "
                f"do not match theta={cfg.theta} (expected {(rw, rh)})"
            )
        fused.extend(
            dvs_fuse(
                orig_by_img.get(image_id, []),
                rot_by_img.get(image_id, []),
                t,
                (w, h),
                cfg,
            )
        )
    watch.lap("fuse")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_detections(fused, out, images=orig_images)
    watch.lap("write")
    _write_manifest(out.parent, "fuse", _config_of(args),
                    [Path(args.orig), Path(args.rotated)], [out], watch.timings())
    return 0


def _cmd_select(args) -> int:
    watch = _Stopwatch(args.timings)
    dets, images = read_detection_file(args.detections)
    ms_cfg = MsConfig(
        scorer_kind=args.scorer,
        keep_thresh=args.keep_thresh,
        tau_spot=args.tau_spot,
        representative=args.representative,
    )
    gts_by_img: dict[str, list] = {}
    scorer = None
    if args.scorer == "iou_oracle":
        gts, _ = _load_gts(args)
        for gt in gts:
            gts_by_img.setdefault(gt.image_id, []).append(gt)
    elif args.scorer == "external":
        if not args.scores:
            raise ValidationError("--scorer external requires --scores")
        import json

        table = json.loads(Path(args.scores).read_text(encoding="utf-8"))
        scorer = Scorer(kind="external", external_scores={int(k): float(v) for k, v in table.items()})
    else:
        raise ValidationError(f"unsupported scorer {args.scorer!r} for the CLI")
    watch.lap("read")

    selected: list[Detection] = []
    for image_id, cands in sorted(_dets_by_image(dets).items()):
        img_gts = gts_by_img.get(image_id, [])
        img_scorer = scorer if scorer is not None else Scorer(kind="iou_oracle", gts=img_gts)
        selected.extend(run_ms(cands, img_gts, None, ms_cfg, img_scorer))
    watch.lap("select")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_detections(selected, out, images=images)
    watch.lap("write")
    inputs = [Path(args.detections)]
    for extra in (args.scores, args.gt_detections, args.label_map):
        if extra:
            inputs.append(Path(extra))
    _write_manifest(out.parent, "select", _config_of(args), inputs, [out], watch.timings())
    return 0


_TP_COLORS = {1: (60, 220, 60), 2: (60, 200, 230)}
_FP_COLORS = {1: (230, 60, 60), 2: (230, 60, 200)}


def _draw_box(rgb: np.ndarray, box, color) -> None:
    h, w, _ = rgb.shape
    x0 = int(np.clip(np.floor(box.x), 0, w - 1))
    y0 = int(np.clip(np.floor(box.y), 0, h - 1))
    x1 = int(np.clip(np.ceil(box.x + box.w) - 1, 0, w - 1))
    y1 = int(np.clip(np.ceil(box.y + box.h) - 1, 0, h - 1))
    rgb[y0, x0 : x1 + 1] = color
    rgb[y1, x0 : x1 + 1] = color
    rgb[y0 : y1 + 1, x0] = color
    rgb[y0 : y1 + 1, x1] = color


def _render_overlay(raster: Raster, dets: list[Detection], gts, iou_type: str = "segm") -> Raster:
    from scipy import ndimage

    rgb = raster.samples.copy()
    if rgb.shape[2] == 1:
        rgb = np.repeat(rgb, 3, axis=2)
    tp_ids: set[int] = set()
    for class_id in sorted({d.class_id for d in dets}):
        class_dets = [d for d in dets if d.class_id == class_id]
        class_gts = [g for g in gts if g.class_id == class_id]
        ordered, flags, _ = match_detections(class_dets, class_gts, 0.5, iou_type)
        tp_ids.update(d.det_id for d, tp in zip(ordered, flags) if tp)
    for det in dets:
        color = (_TP_COLORS if det.det_id in tp_ids else _FP_COLORS).get(
            det.class_id, (230, 230, 60)
        )
        placed = det.placed()
        if not placed.is_empty:
            contour = placed.crop & ~ndimage.binary_erosion(placed.crop)
            ch, cw = placed.crop.shape
            window = rgb[placed.y0 : placed.y0 + ch, placed.x0 : placed.x0 + cw]
            window[contour] = color
        _draw_box(rgb, det.box, color)
    return Raster(rgb)


def _report_dict(summary: EvalSummary) -> dict:
    return {
        "metrics": {name: value for name, value in summary.six_metrics()},
        "bbox": summary.bbox.to_dict(),
        "segm": summary.segm.to_dict(),
    }


def _cmd_eval(args) -> int:
    watch = _Stopwatch(args.timings)
    dets, _ = read_detection_file(args.detections)
    gts, image_ids = _load_gts(args)
    watch.lap("read")
    cfg_kwargs = {"max_dets": args.max_dets}
    summary = evaluate_both(
        dets,
        gts,
        EvalConfig(iou_type="bbox", **cfg_kwargs),
        EvalConfig(iou_type="segm", **cfg_kwargs),
        image_ids=image_ids,
    )
    watch.lap("evaluate")
    print(summary.table())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_json(_report_dict(summary), out)
    outputs = [out]
    if args.overlay_dir:
        if not args.images_dir:
            raise ValidationError("--overlay-dir requires --images-dir")
        overlay_dir = Path(args.overlay_dir)
        overlay_dir.mkdir(parents=True, exist_ok=True)
        by_img = _dets_by_image(dets)
        gts_by_img: dict[str, list] = {}
        for gt in gts:
            gts_by_img.setdefault(gt.image_id, []).append(gt)
        for image_id in image_ids:
            img_path = Path(args.images_dir) / f"{image_id}.png"
            if not img_path.exists():
                raise InputError(f"missing image {img_path}")
            overlay = _render_overlay(
                read_raster(img_path), by_img.get(image_id, []), gts_by_img.get(image_id, [])
            )
            opath = overlay_dir / f"{image_id}.png"
            write_raster(overlay, opath)
            if overlay_dir == out.parent:
                outputs.append(opath)
    watch.lap("write")
    inputs = [Path(args.detections)]
    for extra in (args.gt_detections, args.label_map):
        if extra:
            inputs.append(Path(extra))
    _write_manifest(out.parent, "eval", _config_of(args), inputs, outputs, watch.timings())
    return 0


def _resolve_suite(name: str):
    """Suite name -> list of (suite_seed, scene_specs, oracle_spec)."""
    if name == "zero-noise":
        specs, oracle = zero_noise_suite()
        return [(0, specs, oracle)]
    if name == "fixed":
        return [(seed,) + fixed_suite(seed) for seed in range(5)]
    if name.startswith("fixed:"):
        seed = int(name.split(":", 1)[1])
        return [(seed,) + fixed_suite(seed)]
    if name == "mini":
        specs = [SceneSpec(seed=7000 + i, n_cells=6, width=384, height=288) for i in range(4)]
        import dataclasses

        return [(0, specs, dataclasses.replace(CALIBRATED_NOISE, seed=99))]
    raise ValidationError(f"unknown suite {name!r}")


def _cmd_synth(args) -> int:
    watch = _Stopwatch(args.timings)
    runs = _resolve_suite(args.suite)
    if len(runs) != 1:
        raise ValidationError("synth writes a single run; use --suite zero-noise, fixed:K, or mini")
    _, specs, oracle = runs[0]
    if args.images is not None:
        specs = specs[: args.images]
    out_dir = Path(args.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "annotations").mkdir(parents=True, exist_ok=True)

    from .synth import detect_views

    outputs = []
    orig_all: list[Detection] = []
    rot_all: list[Detection] = []
    orig_images = []
    rot_images = []
    for i, spec in enumerate(specs):
        image_id = f"img_{i:04d}"
        raster, gts = gen_scene(spec, image_id=image_id)
        img_path = out_dir / "images" / f"{image_id}.png"
        write_raster(raster, img_path)
        ann_path = out_dir / "annotations" / f"{image_id}.json"
        write_annotations(gts, ann_path, spec.width, spec.height, LABEL_NAMES,
                          image_path=f"../images/{image_id}.png")
        outputs.extend([img_path, ann_path])
        orig, rot, t = detect_views(gts, (spec.width, spec.height), oracle, args.theta, i, True)
        orig_all.extend(orig)
        rot_all.extend(rot)
        _, rw, rh = rotation_transform(spec.width, spec.height, args.theta)
        orig_images.append({"image_id": image_id, "width": spec.width, "height": spec.height,
                            "file_name": f"images/{image_id}.png"})
        rot_images.append({"image_id": image_id, "width": rw, "height": rh, "file_name": ""})
    watch.lap("generate")

    lm_path = out_dir / "label_map.json"
    dump_json(LABEL_MAP, lm_path)
    orig_path = out_dir / "detections_original.json"
    rot_path = out_dir / "detections_rotated.json"
    write_detections(orig_all, orig_path, images=orig_images)
    write_detections(rot_all, rot_path, images=rot_images)
    outputs.extend([lm_path, orig_path, rot_path])
    watch.lap("write")
    _write_manifest(out_dir, "synth", _config_of(args), [], outputs, watch.timings())
    return 0


def _cmd_split(args) -> int:
    watch = _Stopwatch(args.timings)
    sizes = tuple(int(s) for s in args.sizes.split(","))
    if len(sizes) != 3:
        raise ValidationError("--sizes must be three comma-separated integers")
    train, val, test = dataset_split(args.n, sizes, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name, indices in (("train", train), ("val", val), ("test", test)):
        path = out_dir / f"{name}.txt"
        path.write_text("".join(f"{i}\n" for i in indices), encoding="utf-8")
        outputs.append(path)
    watch.lap("split")
    _write_manifest(out_dir, "split", _config_of(args), [], outputs, watch.timings())
    return 0


def _cmd_losses_check(args) -> int:
    branch_cases = [(0.0, 0.0), (0.5, 0.125), (2.0, 1.5), (-1.0, 0.5)]
    branch_ok = all(smooth_l1(x) == want for x, want in branch_cases)
    print("smooth_l1 branches  " + ("PASS" if branch_ok else "FAIL"))
    rows, grads_ok = run_gradient_suite(args.samples, args.seed, tol=args.tol)
    for term, err, ok in rows:
        print(f"grad[{term:<4s}] max rel err {err:.3e}  {'PASS' if ok else 'FAIL'}")
    return 0 if (branch_ok and grads_ok) else 1


def _mean_metrics(summaries: list[EvalSummary]) -> dict[str, float]:
    keys = [name for name, _ in summaries[0].six_metrics()]
    acc = {k: 0.0 for k in keys}
    for summary in summaries:
        for name, value in summary.six_metrics():
            acc[name] += value
    return {k: acc[k] / len(summaries) for k in keys}


def _cmd_end_to_end(args) -> int:
    watch = _Stopwatch(args.timings)
    if args.mode not in MODES:
        raise ValidationError(f"--mode must be one of {MODES}")
    runs = _resolve_suite(args.suite)
    summaries = []
    run_docs = []
    for suite_seed, specs, oracle in runs:
        summary = run_end_to_end(specs, oracle, mode=args.mode, jobs=args.jobs)
        summaries.append(summary)
        run_docs.append({"suite_seed": suite_seed, **_report_dict(summary)})
    watch.lap("run")
    doc = {
        "suite": args.suite,
        "mode": args.mode,
        "mean_metrics": _mean_metrics(summaries),
        "runs": run_docs,
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_json(doc, out)
    watch.lap("write")
    for summary in summaries:
        print(summary.table())
    _write_manifest(out.parent, "end-to-end", _config_of(args), [], [out], watch.timings())
    return 0


def _cmd_mask_iou(args) -> int:
    dets, _ = read_detection_file(args.detections)
    by_id = {d.det_id: d for d in dets}
    id_a, id_b = (int(tok) for tok in args.ids.split(","))
    for want in (id_a, id_b):
        if want not in by_id:
            raise ValidationError(f"det_id {want} not present in {args.detections}")
    value = placed_iou(by_id[id_a].placed(), by_id[id_b].placed())
    print(repr(value))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None,
                     help="flat key=value config file; flags override it")
    sub.add_argument("--timings", action="store_true",
                     help="record wall-clock timings in the manifest (non-deterministic)")


def _add_dvs_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--theta", type=float, default=45.0)
    sub.add_argument("--nms-iou", type=float, default=0.9)
    sub.add_argument("--nms-metric", choices=("box", "mask"), default="box")
    sub.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    sub.add_argument("--min-mask-area", type=int, default=0)
    sub.add_argument("--class-agnostic-nms", action="store_true")
    sub.add_argument("--fill-holes", action="store_true",
                     help="fill interior mask holes before the component filter")


def build_parser() -> _Parser:
    parser = _Parser(prog="dualview", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dualview {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("rotate-views", help="write the rotated view of an image")
    p.add_argument("--image", required=True, type=Path)
    p.add_argument("--theta", type=float, default=45.0)
    p.add_argument("--interpolation", choices=("nearest", "bilinear"), default="nearest")
    p.add_argument("--out-dir", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_rotate_views)

    p = subs.add_parser("fuse", help="merge original and rotated-view detections")
    p.add_argument("--orig", required=True, type=Path)
    p.add_argument("--rotated", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_dvs_flags(p)
    _add_common(p)
    p.set_defaults(func=_cmd_fuse)

    p = subs.add_parser("select", help="supervised mask selection and spot dedup")
    p.add_argument("--detections", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--scorer", choices=("iou_oracle", "external"), default="iou_oracle")
    p.add_argument("--gt-dir", type=Path, default=None)
    p.add_argument("--label-map", type=Path, default=None)
    p.add_argument("--gt-detections", type=Path, default=None)
    p.add_argument("--scores", type=Path, default=None)
    p.add_argument("--keep-thresh", type=float, default=0.5)
    p.add_argument("--tau-spot", type=float, default=0.7)
    p.add_argument("--representative", choices=("consensus", "score"), default="consensus")
    _add_common(p)
    p.set_defaults(func=_cmd_select)

    p = subs.add_parser("eval", help="six-metric AP report")
    p.add_argument("--detections", required=True, type=Path)
    p.add_argument("--gt-dir", type=Path, default=None)
    p.add_argument("--label-map", type=Path, default=None)
    p.add_argument("--gt-detections", type=Path, default=None)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--max-dets", type=int, default=100)
    p.add_argument("--overlay-dir", type=Path, default=None)
    p.add_argument("--images-dir", type=Path, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = subs.add_parser("synth", help="write a synthetic scene suite")
    p.add_argument("--suite", default="zero-noise")
    p.add_argument("--images", type=int, default=None)
    p.add_argument("--theta", type=float, default=45.0)
    p.add_argument("--out-dir", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = subs.add_parser("split", help="train/val/test index split")
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--sizes", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_split)

    p = subs.add_parser("losses-check", help="finite-difference gradient verification")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_losses_check)

    p = subs.add_parser("end-to-end", help="synthetic suite through one pipeline mode")
    p.add_argument("--mode", required=True)
    p.add_argument("--suite", default="fixed")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_end_to_end)

    p = subs.add_parser("mask-iou", help="IoU of two stored masks (diagnostics)")
    p.add_argument("--detections", required=True, type=Path)
    p.add_argument("--ids", required=True, help="two det_ids, comma separated")
    p.set_defaults(func=_cmd_mask_iou)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        sub = None
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                sub = action.choices.get(args.command)
        if sub is not None and getattr(args, "config", None):
            _apply_config_file(sub, args, argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"dualview: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"dualview: i/o error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"dualview: i/o error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"dualview: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
