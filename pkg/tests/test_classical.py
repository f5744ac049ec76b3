import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toothseg import classical
from toothseg.classical import InpaintConfig, StructuringElement
from toothseg.errors import ConstantInputError, SpotTouchesFullImageError


def brute_force_otsu(hist):
    """Independent oracle: exhaustive 256-threshold scan with exact integer
    comparison of between-class variance."""
    total = int(sum(hist))
    best_t, best = 0, (-1, 1)
    for t in range(256):
        c0 = int(sum(hist[: t + 1]))
        c1 = total - c0
        if c0 == 0 or c1 == 0:
            continue
        s0 = int(sum(i * hist[i] for i in range(t + 1)))
        s1 = int(sum(i * hist[i] for i in range(t + 1, 256)))
        a = s0 * c1 - s1 * c0
        num, den = a * a, c0 * c1
        if num * best[1] > best[0] * den:
            best_t, best = t, (num, den)
    return best_t


class TestOtsu:
    def test_bimodal_extreme(self):
        hist = np.zeros(256, int)
        hist[0] = 4
        hist[255] = 4
        assert classical.otsu_threshold_from_hist(hist) == 0
        assert brute_force_otsu(hist) == 0

    def test_two_cluster_matches_oracle(self):
        arr = np.array([50] * 90 + [200] * 10, np.uint8).reshape(10, 10)
        hist = np.bincount(arr.ravel(), minlength=256)
        assert classical.otsu_threshold(arr) == brute_force_otsu(hist)

    def test_constant_input(self):
        with pytest.raises(ConstantInputError):
            classical.otsu_threshold(np.full((4, 4), 128, np.uint8))

    def test_random_histogram_oracle(self, rng):
        for _ in range(100):
            hist = rng.integers(0, 50, 256)
            hist[rng.integers(0, 256, 200)] = 0
            if hist.max() == hist.sum():
                continue
            assert classical.otsu_threshold_from_hist(hist) == brute_force_otsu(hist)

    def test_float_map_quantized(self):
        m = np.array([[0.0, 0.0, 1.0, 1.0]], dtype=np.float32)
        t = classical.otsu_threshold(m)
        assert t == 0


class TestMorphology:
    def test_close_fills_center_hole(self):
        mask = np.ones((5, 5), bool)
        mask[2, 2] = False
        out = classical.morphology(mask, "close", StructuringElement("square", 1))
        assert out.all()

    def test_empty_mask_any_op(self):
        empty = np.zeros((6, 6), bool)
        for op in ("dilate", "erode", "close", "open"):
            assert not classical.morphology(empty, op, StructuringElement("square", 1)).any()

    def test_dilate_one_pixel(self):
        mask = np.zeros((5, 5), bool)
        mask[2, 2] = True
        out = classical.dilate(mask, StructuringElement("square", 1))
        assert out.sum() == 9 and out[1:4, 1:4].all()

    def test_disk_footprint(self):
        fp = StructuringElement("disk", 2).footprint()
        assert fp[2, 2] and fp[0, 2] and not fp[0, 0]

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000), radius=st.integers(1, 2))
    def test_properties(self, seed, radius):
        rng = np.random.default_rng(seed)
        mask = rng.random((12, 15)) < rng.uniform(0.2, 0.8)
        se = StructuringElement("square" if seed % 2 else "disk", radius)
        dilated = classical.dilate(mask, se)
        eroded = classical.erode(mask, se)
        closed = classical.morphology(mask, "close", se)
        assert (mask <= dilated).all(), "dilation must be extensive"
        assert (eroded <= mask).all(), "erosion must be anti-extensive"
        assert (mask <= closed).all(), "closing must be extensive"
        assert np.array_equal(classical.morphology(closed, "close", se), closed)


class TestFillHoles:
    def test_ring_becomes_disk(self):
        mask = np.zeros((7, 7), bool)
        mask[1:6, 1:6] = True
        mask[2:5, 2:5] = False  # enclosed hole
        mask[3, 3] = False
        filled = classical.fill_holes(mask)
        assert filled[1:6, 1:6].all()
        assert not filled[0, :].any()

    def test_no_holes_unchanged(self, rng):
        mask = np.zeros((8, 8), bool)
        mask[2:5, 2:6] = True
        assert np.array_equal(classical.fill_holes(mask), mask)

    def test_all_black(self):
        mask = np.zeros((5, 5), bool)
        assert not classical.fill_holes(mask).any()

    def test_never_removes_foreground(self, rng):
        for _ in range(20):
            mask = rng.random((10, 12)) < 0.5
            assert (mask <= classical.fill_holes(mask)).all()


class TestConnectedComponents:
    def test_two_blobs_ordering(self):
        mask = np.zeros((6, 8), bool)
        mask[0:2, 0:2] = True
        mask[4:6, 5:7] = True
        labels = classical.connected_components(mask, 8)
        assert labels.max() == 2
        assert labels[0, 0] == 1 and labels[4, 5] == 2

    def test_empty(self):
        assert classical.connected_components(np.zeros((3, 3), bool), 4).max() == 0

    def test_diagonal_connectivity(self):
        mask = np.zeros((2, 2), bool)
        mask[0, 0] = mask[1, 1] = True
        assert classical.connected_components(mask, 8).max() == 1
        assert classical.connected_components(mask, 4).max() == 2


def brute_force_distance(mask):
    """O(N^2) oracle: nearest in-image background pixel; distances to the
    out-of-bounds frame only when the mask has no background at all."""
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.float64)
    bg = np.argwhere(~mask)
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            if len(bg):
                d2 = ((bg[:, 0] - y) ** 2 + (bg[:, 1] - x) ** 2).min()
                out[y, x] = np.sqrt(d2)
            else:
                out[y, x] = min(x + 1, y + 1, w - x, h - y)
    return out


class TestDistanceTransform:
    def test_line_example(self):
        mask = np.array([[0, 1, 1, 1, 0]], dtype=bool)
        np.testing.assert_allclose(classical.distance_transform(mask), [[0, 1, 2, 1, 0]])

    def test_all_background(self):
        assert (classical.distance_transform(np.zeros((4, 4), bool)) == 0).all()

    def test_all_foreground_bounded(self):
        mask = np.ones((3, 5), bool)
        out = classical.distance_transform(mask)
        np.testing.assert_allclose(out, brute_force_distance(mask))
        assert out.max() <= max(mask.shape)

    def test_random_masks_match_oracle(self, rng):
        for _ in range(30):
            mask = rng.random((rng.integers(2, 20), rng.integers(2, 20))) < rng.uniform(0.2, 0.9)
            np.testing.assert_allclose(
                classical.distance_transform(mask), brute_force_distance(mask), atol=1e-9
            )


class TestBrightSpots:
    def test_constant_dim_image(self):
        img = np.full((4, 4, 3), 100, np.uint8)
        assert not classical.detect_bright_spots(img, InpaintConfig()).any()

    def test_single_pixel_dilates(self):
        img = np.full((5, 5, 3), 50, np.uint8)
        img[2, 2] = 255
        spots = classical.detect_bright_spots(img, InpaintConfig(spot_dilation=1))
        assert spots.sum() == 9 and spots[1:4, 1:4].all()

    def test_min_channel_rule(self):
        img = np.full((1, 1, 3), 0, np.uint8)
        img[0, 0] = (250, 200, 250)
        assert not classical.detect_bright_spots(img, InpaintConfig(spot_dilation=0)).any()


class TestInpaint:
    def _spot(self, h, w, y0, y1, x0, x1):
        spots = np.zeros((h, w), bool)
        spots[y0:y1, x0:x1] = True
        return spots

    @pytest.mark.parametrize("method", ["harmonic", "navier_stokes"])
    def test_constant_fill(self, method):
        img = np.full((16, 16, 3), 100, np.uint8)
        corrupted = img.copy()
        spots = self._spot(16, 16, 5, 10, 6, 11)
        corrupted[spots] = 255
        cfg = InpaintConfig(method=method, iterations=200)
        out = classical.inpaint(corrupted, spots, cfg)
        assert np.abs(out[spots].astype(int) - 100).max() <= 2

    def test_harmonic_reproduces_ramp(self):
        ramp = np.tile(np.arange(40, 120, 5, dtype=np.uint8), (8, 1))
        img = np.stack([ramp] * 3, axis=2)
        spots = self._spot(8, 16, 3, 6, 6, 10)
        corrupted = img.copy()
        corrupted[spots] = 0
        out = classical.inpaint(corrupted, spots, InpaintConfig(method="harmonic", iterations=400))
        assert np.abs(out[spots].astype(int) - img[spots].astype(int)).max() <= 3

    def test_untouched_outside_spots(self, rng):
        img = rng.integers(0, 255, (12, 12, 3)).astype(np.uint8)
        spots = self._spot(12, 12, 4, 8, 4, 8)
        out = classical.inpaint(img, spots, InpaintConfig(iterations=10))
        assert np.array_equal(out[~spots], img[~spots])

    def test_empty_spots_is_identity(self, rng):
        img = rng.integers(0, 255, (6, 6, 3)).astype(np.uint8)
        out = classical.inpaint(img, np.zeros((6, 6), bool), InpaintConfig())
        assert np.array_equal(out, img)

    def test_full_spot_rejected(self):
        img = np.zeros((4, 4, 3), np.uint8)
        with pytest.raises(SpotTouchesFullImageError):
            classical.inpaint(img, np.ones((4, 4), bool), InpaintConfig())
