import numpy as np
import pytest

from toothseg import classical, synth
from toothseg.errors import InvalidConfigError
from toothseg.keypoints import decode_heatmap
from toothseg.synth import SynthConfig


class TestGenerateScene:
    def test_same_seed_bit_identical(self):
        cfg = SynthConfig(view="lower", size=256, seed=99)
        a = synth.generate_scene(cfg)
        b = synth.generate_scene(cfg)
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.gt_mask, b.gt_mask)
        assert a.gt_keypoints == b.gt_keypoints
        for sa, sb in zip(a.stacks, b.stacks):
            assert np.array_equal(sa, sb)
        assert np.array_equal(a.bundle.heatmap, b.bundle.heatmap)

    def test_different_seed_differs(self):
        a = synth.generate_scene(SynthConfig(size=256, seed=1))
        b = synth.generate_scene(SynthConfig(size=256, seed=2))
        assert not np.array_equal(a.image, b.image)

    def test_fixed_tooth_count(self):
        cfg = SynthConfig(view="lower", size=256, teeth=(12, 12), seed=5)
        scene = synth.generate_scene(cfg)
        assert len(scene.gt_keypoints) == 12
        assert classical.connected_components(scene.gt_mask, 8).max() == 12

    def test_keypoints_on_foreground(self):
        for seed in range(5):
            scene = synth.generate_scene(SynthConfig(view="upper", size=256, seed=seed))
            for k in scene.gt_keypoints:
                assert scene.gt_mask[int(k.y), int(k.x)]

    def test_bundle_decodes_to_keypoints(self):
        scene = synth.generate_scene(SynthConfig(view="lower", size=512, seed=11))
        decoded = decode_heatmap(scene.bundle, 0.3, 32)
        assert len(decoded) == len(scene.gt_keypoints)
        errors = []
        for d in decoded:
            errors.append(min(np.hypot(d.x - k.x, d.y - k.y) for k in scene.gt_keypoints))
        assert np.median(errors) <= 1.0

    def test_stack_shapes_and_nonnegative(self):
        scene = synth.generate_scene(SynthConfig(size=256, seed=3))
        assert [s.shape[1] for s in scene.stacks] == [64, 64, 32]
        assert all((s >= 0).all() for s in scene.stacks)

    def test_front_view_gaps_non_increasing(self):
        for seed in range(4):
            scene = synth.generate_scene(SynthConfig(view="front", size=512, seed=seed))
            ys = np.array([c[1] for c in scene.tooth_centers])
            xs = np.array([c[0] for c in scene.tooth_centers])
            for row_ids in (ys < ys.mean(), ys >= ys.mean()):
                row_x = np.sort(xs[row_ids])
                gaps = np.diff(row_x)
                mid = len(gaps) // 2
                left = gaps[: mid + 1]
                right = gaps[mid:]
                assert (np.diff(left) >= -1e-9).all(), "gaps must grow toward center"
                assert (np.diff(right) <= 1e-9).all(), "gaps must shrink toward border"

    def test_invalid_config(self):
        with pytest.raises(InvalidConfigError):
            SynthConfig(view="side")
        with pytest.raises(InvalidConfigError):
            SynthConfig(size=50)
        with pytest.raises(InvalidConfigError):
            SynthConfig(teeth=(1, 4))


class TestGenerateDataset:
    def test_files_and_manifest(self, tmp_path):
        cfg = SynthConfig(size=128, teeth=(4, 6), seed=13)
        manifest = synth.generate_dataset(cfg, 3, tmp_path, views=("lower",))
        assert len(manifest) == 3
        for image_id, view in manifest:
            assert view == "lower"
            for suffix in ("", "_mask", ):
                assert (tmp_path / f"{image_id}{suffix}.png").is_file()
            for name in ("_kps.json", "_s0.fmap", "_s1.fmap", "_s2.fmap", "_heat.fmap", "_offx.fmap", "_offy.fmap"):
                assert (tmp_path / f"{image_id}{name}").is_file()
        assert (tmp_path / "manifest.json").is_file()

    def test_rerun_byte_identical(self, tmp_path):
        cfg = SynthConfig(size=128, teeth=(4, 6), seed=21)
        synth.generate_dataset(cfg, 2, tmp_path / "a", views=("lower", "front"))
        synth.generate_dataset(cfg, 2, tmp_path / "b", views=("lower", "front"))
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*"))
        files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*"))
        assert files_a == files_b
        for rel in files_a:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_entries_reload_and_validate(self, tmp_path):
        cfg = SynthConfig(size=128, teeth=(4, 6), seed=34)
        manifest = synth.generate_dataset(cfg, 2, tmp_path, views=("upper",))
        for image_id, _ in manifest:
            entry = synth.load_scene_files(tmp_path, image_id)
            assert entry["image"].shape == (128, 128, 3)
            assert entry["mask"].shape == (128, 128)
            assert len(entry["keypoints"]) >= 4
            assert entry["bundle"].input_width == 128
            for k in entry["keypoints"]:
                assert entry["mask"][int(k.y), int(k.x)]

    def test_parallel_jobs_identical(self, tmp_path):
        cfg = SynthConfig(size=128, teeth=(4, 6), seed=55)
        synth.generate_dataset(cfg, 3, tmp_path / "serial", views=("lower",), jobs=1)
        synth.generate_dataset(cfg, 3, tmp_path / "parallel", views=("lower",), jobs=4)
        for p in sorted((tmp_path / "serial").iterdir()):
            assert p.read_bytes() == (tmp_path / "parallel" / p.name).read_bytes()
