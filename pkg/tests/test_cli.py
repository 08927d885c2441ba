import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from dualview.cli import main

REPO = Path(__file__).resolve().parent.parent


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def run_cli_proc(*argv):
    return subprocess.run(
        [sys.executable, "-m", "dualview.cli", *[str(a) for a in argv]],
        capture_output=True, text=True,
    )


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("synth")
    assert run_cli("synth", "--suite", "mini", "--out-dir", out) == 0
    return out


class TestSplit:
    def test_paper_split(self, tmp_path):
        assert run_cli("split", "--n", 520, "--sizes", "312,104,104", "--seed", 1,
                       "--out-dir", tmp_path) == 0
        lengths = {
            name: len((tmp_path / f"{name}.txt").read_text().splitlines())
            for name in ("train", "val", "test")
        }
        assert lengths == {"train": 312, "val": 104, "test": 104}

    def test_bad_sizes_exit_1(self, tmp_path):
        assert run_cli("split", "--n", 10, "--sizes", "5,4,2", "--out-dir", tmp_path) == 1


class TestExitCodes:
    def test_missing_file_is_io_error(self, tmp_path):
        assert run_cli("eval", "--detections", tmp_path / "nope.json",
                       "--gt-dir", tmp_path, "--label-map", tmp_path / "lm.json",
                       "--out", tmp_path / "r.json") == 2

    def test_bad_flag_is_validation_error(self):
        assert run_cli("end-to-end", "--mode", "sideways", "--out", "/tmp/x.json") == 1

    def test_unknown_subcommand(self):
        assert run_cli("frobnicate") == 1

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("--version")
        assert exc.value.code == 0
        assert "dualview 0.1.0" in capsys.readouterr().out


class TestFilePipeline:
    def test_zero_noise_pipeline_is_perfect(self, tmp_path, capsys):
        out = tmp_path / "suite"
        assert run_cli("synth", "--suite", "zero-noise", "--images", 2, "--out-dir", out) == 0
        assert run_cli("fuse", "--orig", out / "detections_original.json",
                       "--rotated", out / "detections_rotated.json",
                       "--out", out / "fused.json") == 0
        assert run_cli("select", "--detections", out / "fused.json",
                       "--gt-dir", out / "annotations", "--label-map", out / "label_map.json",
                       "--out", out / "selected.json") == 0
        assert run_cli("eval", "--detections", out / "selected.json",
                       "--gt-dir", out / "annotations", "--label-map", out / "label_map.json",
                       "--out", out / "report.json") == 0
        stdout = capsys.readouterr().out
        assert "AP^bbox" in stdout
        report = json.loads((out / "report.json").read_text())
        assert list(report["metrics"].values()) == [1.0] * 6
        # six Table-1 metrics in Table-2 column order
        assert list(report["metrics"].keys()) == [
            "ap_bbox", "ap50_bbox", "ap75_bbox", "ap_segm", "ap50_segm", "ap75_segm",
        ]

    def test_eval_on_gt_as_predictions(self, synth_dir, tmp_path, capsys):
        from dualview.formats import read_annotations, read_label_map, write_detections
        from dualview.fusion import Detection

        label_map = read_label_map(synth_dir / "label_map.json")
        dets = []
        det_id = 0
        for ann in sorted((synth_dir / "annotations").glob("*.json")):
            for gt in read_annotations(ann, label_map):
                dets.append(Detection(
                    image_id=gt.image_id, class_id=gt.class_id, score=1.0,
                    box=gt.box, mask=gt.mask, det_id=det_id,
                ))
                det_id += 1
        pred_path = tmp_path / "preds.json"
        write_detections(dets, pred_path)
        assert run_cli("eval", "--detections", pred_path, "--gt-dir", synth_dir / "annotations",
                       "--label-map", synth_dir / "label_map.json",
                       "--out", tmp_path / "report.json") == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert list(report["metrics"].values()) == [1.0] * 6

    def test_overlay_does_not_change_metrics(self, synth_dir, tmp_path):
        base = tmp_path / "plain.json"
        with_overlay = tmp_path / "overlay.json"
        common = ["--detections", synth_dir / "detections_original.json",
                  "--gt-dir", synth_dir / "annotations",
                  "--label-map", synth_dir / "label_map.json"]
        assert run_cli("eval", *common, "--out", base) == 0
        assert run_cli("eval", *common, "--out", with_overlay,
                       "--overlay-dir", tmp_path / "ov", "--images-dir", synth_dir / "images") == 0
        assert base.read_bytes() == with_overlay.read_bytes()
        assert (tmp_path / "ov" / "img_0000.png").exists()


class TestDeterminism:
    def test_synth_reruns_byte_identical(self, synth_dir, tmp_path):
        again = tmp_path / "again"
        assert run_cli("synth", "--suite", "mini", "--out-dir", again) == 0
        assert tree_bytes(synth_dir) == tree_bytes(again)

    def test_end_to_end_jobs_invariant(self, tmp_path):
        reports = []
        for jobs in (1, 3):
            out = tmp_path / f"jobs{jobs}.json"
            assert run_cli("end-to-end", "--mode", "full", "--suite", "mini",
                           "--jobs", jobs, "--out", out) == 0
            reports.append(out.read_bytes())
        assert reports[0] == reports[1]

    def test_end_to_end_rerun_byte_identical(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name / "report.json"
            assert run_cli("end-to-end", "--mode", "dvs_only", "--suite", "mini",
                           "--out", out) == 0
            outs.append((out.read_bytes(), (out.parent / "manifest.json").read_bytes()))
        assert outs[0] == outs[1]

    def test_golden_end_to_end(self, tmp_path):
        golden = REPO / "tests" / "golden" / "e2e_full_fixed0.json"
        out = tmp_path / "report.json"
        assert run_cli("end-to-end", "--mode", "full", "--suite", "fixed:0", "--out", out) == 0
        assert out.read_bytes() == golden.read_bytes()


class TestConfigMerge:
    def test_config_supplies_defaults_flags_override(self, synth_dir, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("nms-iou = 0.5\n")
        from_cfg = tmp_path / "from_cfg.json"
        assert run_cli("fuse", "--orig", synth_dir / "detections_original.json",
                       "--rotated", synth_dir / "detections_rotated.json",
                       "--config", cfg, "--out", from_cfg) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["nms_iou"] == 0.5
        flag_wins = tmp_path / "flag" / "flag_wins.json"
        assert run_cli("fuse", "--orig", synth_dir / "detections_original.json",
                       "--rotated", synth_dir / "detections_rotated.json",
                       "--config", cfg, "--nms-iou", 0.9, "--out", flag_wins) == 0
        manifest = json.loads((flag_wins.parent / "manifest.json").read_text())
        assert manifest["config"]["nms_iou"] == 0.9

    def test_unknown_config_key_rejected(self, synth_dir, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("warp-speed = 9\n")
        assert run_cli("fuse", "--orig", synth_dir / "detections_original.json",
                       "--rotated", synth_dir / "detections_rotated.json",
                       "--config", cfg, "--out", tmp_path / "x.json") == 1


class TestUtilities:
    def test_mask_iou_third(self, tmp_path, capsys):
        import numpy as np

        from dualview.formats import write_detections
        from dualview.fusion import Detection
        from dualview.masks import BBox, PlacedMask

        a = PlacedMask.from_crop(2, 2, 0, 0, np.array([[True, True], [False, False]]))
        b = PlacedMask.from_crop(2, 2, 0, 0, np.array([[False, True], [False, True]]))
        dets = [
            Detection(image_id="i", class_id=1, score=0.5, box=a.bbox(), mask=a.to_rle(), det_id=0),
            Detection(image_id="i", class_id=1, score=0.5, box=b.bbox(), mask=b.to_rle(), det_id=1),
        ]
        path = tmp_path / "pair.json"
        write_detections(dets, path)
        assert run_cli("mask-iou", "--detections", path, "--ids", "0,1") == 0
        assert capsys.readouterr().out.strip() == repr(1 / 3)

    def test_losses_check_passes(self, capsys):
        assert run_cli("losses-check", "--samples", 25) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 4
        assert "FAIL" not in out

    def test_rotate_views(self, synth_dir, tmp_path):
        out_dir = tmp_path / "views"
        assert run_cli("rotate-views", "--image", synth_dir / "images" / "img_0000.png",
                       "--theta", 45, "--out-dir", out_dir) == 0
        meta = json.loads((out_dir / "transform.json").read_text())
        assert (meta["out_width"], meta["out_height"]) == (476, 476)
        assert (out_dir / "original.png").exists()
        assert (out_dir / "rotated.png").exists()

    def test_stderr_diagnostics(self):
        proc = run_cli_proc("split", "--n", "10", "--sizes", "1,2,3", "--out-dir", "/tmp/nope")
        assert proc.returncode == 1
        assert "error" in proc.stderr
