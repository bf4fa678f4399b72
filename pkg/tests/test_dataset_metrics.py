import numpy as np
import pytest

from scenefield.dataset import (
    corrupt_labels,
    generate_dataset,
    load_dataset,
    write_dataset,
)
from scenefield.geometry import DomainError
from scenefield.metrics import (
    average_precision,
    mask_iou,
    masks_to_channels,
    psnr,
    ssim,
)


@pytest.fixture(scope="module")
def small_sets(scene):
    return generate_dataset(scene, n_train=8, n_test=3, resolution=24, seed=11)


class TestGenerate:
    def test_every_object_visible_in_training(self, scene, small_sets):
        train, _ = small_sets
        seen = set()
        for view in train.views:
            seen.update(np.unique(view.mask).tolist())
        for oid in scene.object_ids:
            assert oid in seen

    def test_masks_label_range(self, scene, small_sets):
        train, test = small_sets
        for ds in (train, test):
            for view in ds.views:
                assert view.mask.min() >= 0 and view.mask.max() <= scene.H

    def test_deterministic(self, scene):
        a_train, a_test = generate_dataset(scene, 2, 1, 12, seed=5)
        b_train, b_test = generate_dataset(scene, 2, 1, 12, seed=5)
        for va, vb in zip(a_train.views + a_test.views, b_train.views + b_test.views):
            np.testing.assert_array_equal(va.color, vb.color)
            np.testing.assert_array_equal(va.mask, vb.mask)
            np.testing.assert_array_equal(va.camera.pose, vb.camera.pose)

    def test_single_view_mask_matches_visible_ids(self, scene):
        train, _ = generate_dataset(scene, 1, 1, 24, seed=2)
        ids = set(np.unique(train.views[0].mask).tolist()) - {0}
        assert ids and ids.issubset(set(scene.object_ids))


class TestCorruptLabels:
    def _masks(self, rng, h=5):
        return rng.integers(0, h + 1, size=(3, 16, 16))

    @pytest.mark.parametrize("fraction", [0.1, 0.5, 0.9])
    def test_exact_fraction(self, rng, fraction):
        masks = self._masks(rng)
        out = corrupt_labels(masks, fraction, seed=0, H=5)
        expected = int(fraction * 16 * 16)
        for i in range(masks.shape[0]):
            assert (out[i] != masks[i]).sum() == expected

    def test_zero_fraction_identity(self, rng):
        masks = self._masks(rng)
        np.testing.assert_array_equal(corrupt_labels(masks, 0.0, 1, H=5), masks)

    def test_deterministic(self, rng):
        masks = self._masks(rng)
        a = corrupt_labels(masks, 0.5, seed=4, H=5)
        b = corrupt_labels(masks, 0.5, seed=4, H=5)
        np.testing.assert_array_equal(a, b)

    def test_wrong_labels_in_range(self, rng):
        masks = self._masks(rng)
        out = corrupt_labels(masks, 0.7, seed=9, H=5)
        assert out.min() >= 0 and out.max() <= 5

    def test_fraction_one_rejected(self, rng):
        with pytest.raises(DomainError):
            corrupt_labels(self._masks(rng), 1.0, 0, H=5)


class TestDatasetIO:
    def test_round_trip(self, tmp_path, scene, small_sets):
        train, test = small_sets
        write_dataset(tmp_path / "ds", scene, train, test)
        scene2, train2, test2 = load_dataset(tmp_path / "ds")
        assert scene2.H == scene.H
        for va, vb in zip(train.views + test.views, train2.views + test2.views):
            np.testing.assert_array_equal(vb.mask, va.mask)
            assert np.abs(vb.color - va.color).max() <= 0.5 / 255 + 1e-12  # 8-bit quantization
            np.testing.assert_allclose(vb.camera.pose, va.camera.pose)
            assert vb.t_near == pytest.approx(va.t_near)

    def test_write_is_deterministic(self, tmp_path, scene, small_sets):
        train, test = small_sets
        write_dataset(tmp_path / "a", scene, train, test)
        write_dataset(tmp_path / "b", scene, train, test)
        for rel in ["scene.json", "cameras.json", "train/color_0000.png", "test/mask_0001.png"]:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


class TestPsnr:
    def test_identical_capped(self, rng):
        img = rng.uniform(0, 1, (8, 8, 3))
        assert psnr(img, img) == 99.0

    def test_known_mse(self):
        a = np.zeros((10, 10))
        assert psnr(a, a + 0.1) == pytest.approx(20.0)
        assert psnr(a, a + 0.01) == pytest.approx(40.0)

    def test_symmetric(self, rng):
        a, b = rng.uniform(0, 1, (6, 6)), rng.uniform(0, 1, (6, 6))
        assert psnr(a, b) == pytest.approx(psnr(b, a))

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            psnr(np.zeros((4, 4)), np.zeros((5, 4)))


def ssim_direct(a, b, window=11, sigma=1.5):
    """Independent direct-summation SSIM oracle (explicit window loops)."""
    r = np.arange(window) - (window - 1) / 2.0
    g = np.exp(-(r**2) / (2 * sigma**2))
    w = np.outer(g, g)
    w /= w.sum()
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    c1, c2 = 0.01**2, 0.03**2
    chans = []
    for ch in range(a.shape[2]):
        vals = []
        for i in range(a.shape[0] - window + 1):
            for j in range(a.shape[1] - window + 1):
                x = a[i:i + window, j:j + window, ch]
                y = b[i:i + window, j:j + window, ch]
                mx = (w * x).sum()
                my = (w * y).sum()
                vx = (w * x * x).sum() - mx**2
                vy = (w * y * y).sum() - my**2
                cxy = (w * x * y).sum() - mx * my
                vals.append(((2 * mx * my + c1) * (2 * cxy + c2))
                            / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
        chans.append(np.mean(vals))
    return float(np.mean(chans))


class TestSsim:
    def test_identical_is_one(self, rng):
        img = rng.uniform(0, 1, (16, 16, 3))
        assert ssim(img, img) == pytest.approx(1.0)

    def test_constant_images(self):
        a = np.full((12, 12), 0.5)
        assert ssim(a, a) == pytest.approx(1.0)

    def test_matches_direct_summation(self, rng):
        a = rng.uniform(0, 1, (14, 17, 3))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(ssim_direct(a, b), abs=1e-6)

    def test_symmetric(self, rng):
        a = rng.uniform(0, 1, (13, 13))
        b = rng.uniform(0, 1, (13, 13))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_too_small_rejected(self):
        with pytest.raises(DomainError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))


class TestAveragePrecision:
    def _simple_gt(self):
        gt = np.zeros((10, 10), dtype=int)
        gt[1:4, 1:4] = 1
        gt[6:9, 6:9] = 2
        return gt

    def test_perfect_predictions(self):
        gt = self._simple_gt()
        pred = masks_to_channels(gt, 3)
        for tau in (0.5, 0.75, 0.9):
            assert average_precision([pred], [gt], tau) == pytest.approx(100.0)

    def test_all_background(self):
        gt = self._simple_gt()
        assert average_precision([np.zeros((3, 10, 10))], [gt], 0.75) == 0.0

    def test_half_right_hand_executed(self):
        # one perfect detection (TP), one disjoint detection (FP):
        # PR curve: (r=0.5, p=1.0) then (r=0.5, p=0.5) -> all-point AP = 0.5
        gt = self._simple_gt()
        pred = masks_to_channels(gt, 3)
        pred[1][:] = 0.0
        pred[1][0:2, 5:7] = 1.0  # disjoint from both gt objects
        assert average_precision([pred], [gt], 0.75) == pytest.approx(50.0)

    def test_monotone_in_threshold(self, rng):
        gt = self._simple_gt()
        pred = masks_to_channels(gt, 3)
        pred[0, 1:3, 1:5] = 1.0  # degrade object 1's mask
        aps = [average_precision([pred], [gt], tau) for tau in (0.5, 0.75, 0.9)]
        assert aps[0] >= aps[1] >= aps[2]

    def test_no_gt_errors(self):
        with pytest.raises(DomainError):
            average_precision([np.zeros((2, 4, 4))], [np.zeros((4, 4), dtype=int)], 0.5)

    def test_mask_iou(self):
        a = np.zeros((4, 4), dtype=bool)
        a[:2] = True
        b = np.zeros((4, 4), dtype=bool)
        b[1:3] = True
        assert mask_iou(a, b) == pytest.approx(4 / 12)
