import json
import subprocess
import sys

import numpy as np
import pytest

from toothseg import cli, imaging, synth
from toothseg.keypoints import Keypoint, save_keypoints_json
from toothseg.synth import SynthConfig


def run_cli(*argv):
    return cli.run(list(argv))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    cfg = SynthConfig(size=128, teeth=(4, 6), seed=17)
    manifest = synth.generate_dataset(cfg, 2, out, views=("lower",))
    return out, manifest


class TestSynthCommand:
    def test_creates_scenes(self, tmp_path, capsys):
        code = run_cli("synth", "--out", str(tmp_path / "d"), "--count", "2", "--seed", "7",
                       "--views", "lower", "--size", "128")
        assert code == 0
        listing = {p.name for p in (tmp_path / "d").iterdir()}
        assert "manifest.json" in listing
        assert "lower_000.png" in listing and "lower_001_mask.png" in listing

    def test_unknown_view(self, tmp_path, capsys):
        code = run_cli("synth", "--out", str(tmp_path), "--count", "1", "--views", "sideways")
        assert code == 1

    def test_missing_required_flag(self, capsys):
        code = run_cli("synth", "--count", "2")
        assert code == 1
        assert "--out" in capsys.readouterr().err


class TestSegmentCommand:
    def test_ours_requires_features(self, dataset, tmp_path, capsys):
        out, manifest = dataset
        image_id, _ = manifest[0]
        code = run_cli("segment", "--image", str(out / f"{image_id}.png"), "--method", "ours")
        assert code == 1
        assert "--features" in capsys.readouterr().err

    def test_ours_runs(self, dataset, tmp_path):
        out, manifest = dataset
        image_id, _ = manifest[0]
        mask_path = tmp_path / "pred.png"
        code = run_cli(
            "segment", "--image", str(out / f"{image_id}.png"), "--method", "ours",
            "--features", str(out / f"{image_id}_s0.fmap"), str(out / f"{image_id}_s1.fmap"),
            str(out / f"{image_id}_s2.fmap"),
            "--heatmap", str(out / f"{image_id}_heat.fmap"),
            "--offsets", str(out / f"{image_id}_offx.fmap"), str(out / f"{image_id}_offy.fmap"),
            "--out", str(mask_path),
            "--labels", str(tmp_path / "labels.png"),
            "--debug-dir", str(tmp_path / "debug"),
        )
        assert code == 0
        assert mask_path.is_file()
        assert (tmp_path / "labels.png").is_file()
        debug_names = {p.name for p in (tmp_path / "debug").iterdir()}
        assert "01_fused.fmap" in debug_names and "08_labels.png" in debug_names

    def test_otsu_runs(self, dataset, tmp_path):
        out, manifest = dataset
        image_id, _ = manifest[0]
        mask_path = tmp_path / "otsu.png"
        code = run_cli("segment", "--image", str(out / f"{image_id}.png"), "--method", "otsu",
                       "--out", str(mask_path))
        assert code == 0
        assert imaging.load_mask(mask_path).shape == (128, 128)

    def test_missing_image(self, tmp_path):
        assert run_cli("segment", "--image", str(tmp_path / "nope.png"), "--method", "otsu") == 1


class TestInpaintCommand:
    def test_round_trip(self, tmp_path):
        img = np.full((32, 32, 3), 90, np.uint8)
        img[10:13, 10:13] = 255
        src = tmp_path / "src.png"
        imaging.save_image(img, src)
        dst = tmp_path / "out.png"
        assert run_cli("inpaint", "--image", str(src), "--out", str(dst)) == 0
        restored = imaging.load_image(dst)
        assert np.abs(restored[10:13, 10:13].astype(int) - 90).max() <= 2


class TestEvalMasks:
    def test_report_and_figure(self, dataset, tmp_path):
        out, manifest = dataset
        pred = tmp_path / "pred"
        pred.mkdir()
        for image_id, _ in manifest:
            imaging.save_mask(imaging.load_mask(out / f"{image_id}_mask.png"), pred / f"{image_id}.png")
        report = tmp_path / "report.json"
        code = run_cli("eval-masks", "--pred", str(pred), "--gt", str(out),
                       "--manifest", str(out / "manifest.json"), "--report", str(report))
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["overall"]["iou"] == 1.0
        assert report.with_suffix(".csv").is_file()
        assert report.with_name("report_views.png").is_file()

    def test_missing_pred_file(self, dataset, tmp_path):
        out, _ = dataset
        pred = tmp_path / "empty"
        pred.mkdir()
        code = run_cli("eval-masks", "--pred", str(pred), "--gt", str(out),
                       "--manifest", str(out / "manifest.json"), "--report", str(tmp_path / "r.json"))
        assert code == 1


class TestEvalKeypoints:
    def test_identical_files(self, tmp_path):
        kps = {"img": [Keypoint(10.0, 12.0), Keypoint(30.0, 31.0)]}
        pred = tmp_path / "pred.json"
        gt = tmp_path / "gt.json"
        save_keypoints_json(kps, pred)
        save_keypoints_json(kps, gt)
        report = tmp_path / "kp_report.json"
        code = run_cli("eval-keypoints", "--pred", str(pred), "--gt", str(gt),
                       "--t-max", "29", "--report", str(report))
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["mean_px"] == 0.0 and doc["median_px"] == 0.0
        assert doc["sweep"]["f1"][0] == 0.0
        assert all(f == 1.0 for f in doc["sweep"]["f1"][1:])
        csv_text = report.with_suffix(".csv").read_text().splitlines()
        assert csv_text[0] == "threshold,precision,recall,f1"
        assert len(csv_text) == 31
        assert report.with_name("kp_report_sweep.png").is_file()


class TestDeterminism:
    def test_synth_byte_identical(self, tmp_path):
        for name in ("one", "two"):
            assert run_cli("synth", "--out", str(tmp_path / name), "--count", "1", "--seed", "3",
                           "--views", "upper", "--size", "128") == 0
        for p in sorted((tmp_path / "one").iterdir()):
            assert p.read_bytes() == (tmp_path / "two" / p.name).read_bytes()

    def test_eval_keypoints_byte_identical(self, tmp_path, rng):
        pts = {"a": [Keypoint(float(x), float(y)) for x, y in rng.uniform(0, 100, (5, 2))]}
        jitter = {"a": [Keypoint(p.x + 1.5, p.y) for p in pts["a"]]}
        save_keypoints_json(jitter, tmp_path / "pred.json")
        save_keypoints_json(pts, tmp_path / "gt.json")
        outputs = []
        for name in ("r1", "r2"):
            report = tmp_path / f"{name}.json"
            assert run_cli("eval-keypoints", "--pred", str(tmp_path / "pred.json"),
                           "--gt", str(tmp_path / "gt.json"), "--report", str(report)) == 0
            outputs.append(
                report.read_bytes()
                + report.with_suffix(".csv").read_bytes()
                + report.with_name(f"{name}_sweep.png").read_bytes()
            )
        assert outputs[0] == outputs[1]


class TestEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "toothseg.cli", "--version"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "toothseg" in proc.stdout

    def test_exit_code_for_bad_subcommand(self):
        assert run_cli("frobnicate") == 1
