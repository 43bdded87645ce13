import math

import numpy as np
import numpy.testing as npt
import pytest

from relightkit.lights import DeltaL, LightParams, delta_from_edit
from relightkit.mask import (MaskPredictorParams, bce_dice_loss, gt_mask,
                             luminance, mask_features, mask_loss_grad,
                             mask_to_weight, masked_blend, normalize_mask,
                             predict_mask, robust_distance, train_mask_predictor,
                             weighted_mse)
from relightkit.render import render
from relightkit.scene import CameraPose, Material, Primitive, SceneSpec


class TestLuminance:
    def test_white(self):
        assert luminance(np.ones((1, 1, 3)))[0, 0] == 1.0

    def test_green_coefficient(self):
        img = np.zeros((1, 1, 3))
        img[0, 0, 1] = 1.0
        assert luminance(img)[0, 0] == 0.7152

    def test_black_floors(self):
        assert luminance(np.zeros((2, 2, 3)))[0, 0] == 1e-6


def gaussian_reference(data, sigma, truncate=4.0):
    """Direct separable convolution with the same kernel gaussian_filter uses
    (radius = int(truncate * sigma + 0.5), 'reflect' boundary)."""
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    padded = np.pad(data, radius, mode="symmetric")
    rows = np.apply_along_axis(lambda r: np.convolve(r, k, mode="valid"), 1, padded)
    cols = np.apply_along_axis(lambda c: np.convolve(c, k, mode="valid"), 0, rows)
    return cols


class TestRobustDistance:
    def test_global_exposure_cancels(self):
        rng = np.random.default_rng(1)
        y = rng.uniform(0.1, 2.0, size=(16, 16))
        d = robust_distance(y, 2.0 * y)
        assert np.abs(d).max() < 1e-9

    def test_identity(self):
        y = np.full((8, 8), 0.4)
        npt.assert_array_equal(robust_distance(y, y), np.zeros((8, 8)))

    def test_blob_support_grows_with_sigma(self):
        y = np.full((33, 33), 0.5)
        y2 = y.copy()
        y2[16, 16] = 5.0
        for sigmas in [(1.0,), (2.0,), (4.0,)]:
            d = robust_distance(y, y2, sigmas=sigmas)
            # reference: median normalization then direct convolution
            base = np.abs(y2 / np.median(y2) - y / np.median(y))
            ref = gaussian_reference(base, sigmas[0])
            npt.assert_allclose(d, ref, atol=1e-12)
        support = [np.sum(robust_distance(y, y2, sigmas=(s,)) > 1e-6)
                   for s in (1.0, 2.0, 4.0)]
        assert support[0] < support[1] < support[2]

    def test_zero_median_falls_back_to_mean(self):
        y_s = np.zeros((6, 6))
        y_s[0, 0] = 1.0          # median 0, mean > 0
        y_t = np.full((6, 6), 0.5)
        d = robust_distance(y_s, y_t)
        assert np.all(np.isfinite(d))

    def test_both_zero_gives_zero_map(self):
        z = np.zeros((4, 4))
        npt.assert_array_equal(robust_distance(z, z), z)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            robust_distance(np.zeros((2, 2)), np.zeros((3, 3)))


class TestGtMask:
    def test_identical_images_zero_mask(self):
        rng = np.random.default_rng(2)
        img = rng.uniform(0, 1, size=(12, 12, 3))
        npt.assert_array_equal(gt_mask(img, img), np.zeros((12, 12)))

    def test_constant_log_ratio_saturates(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(0.2, 1.0, size=(10, 10, 3))
        m = gt_mask(img, math.e * img, alpha=1.0)
        npt.assert_allclose(m, np.ones((10, 10)), atol=1e-12)

    def test_exposure_invariance(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(0.05, 1.0, size=(12, 12, 3))
        b = rng.uniform(0.05, 1.0, size=(12, 12, 3))
        m1 = gt_mask(a, b)
        m2 = gt_mask(3.7 * a, 3.7 * b)
        npt.assert_allclose(m1, m2, atol=1e-9)

    def test_raw_monotone_in_log_difference(self):
        # raising one pixel's target luminance (already above source) must not
        # lower that pixel's raw response: rebuild the pre-normalization map
        # from the public pieces at the default alpha
        alpha = 0.7
        y_s = np.full((9, 9), 0.5)

        def raw(bump):
            y_t = y_s.copy()
            y_t[4, 4] = bump
            return (alpha * np.abs(np.log(y_t) - np.log(y_s))
                    + (1 - alpha) * robust_distance(y_s, y_t))[4, 4]

        values = [raw(b) for b in (0.6, 1.0, 2.0, 4.0)]
        assert all(b >= a for a, b in zip(values, values[1:]))


class TestNormalizeMask:
    def test_zeros(self):
        npt.assert_array_equal(normalize_mask(np.zeros((4, 4))), np.zeros((4, 4)))

    def test_constant_becomes_ones(self):
        npt.assert_array_equal(normalize_mask(np.full((4, 4), 0.37)), np.ones((4, 4)))

    def test_outlier_clamps_body_keeps_order(self):
        rng = np.random.default_rng(5)
        raw = rng.uniform(0.1, 1.0, size=(20, 20))
        p99 = np.percentile(raw, 99)
        raw_out = raw.copy()
        raw_out[0, 0] = 100.0 * p99
        m = normalize_mask(raw_out)
        assert m[0, 0] == 1.0
        body = raw_out < np.percentile(raw_out, 99)
        order_raw = np.argsort(raw_out[body])
        order_mask = np.argsort(m[body])
        npt.assert_array_equal(order_raw, order_mask)

    def test_range(self):
        rng = np.random.default_rng(6)
        m = normalize_mask(rng.exponential(size=(16, 16)))
        assert m.min() >= 0.0 and m.max() <= 1.0


class TestWeighting:
    def test_weight_map_trivials(self):
        npt.assert_array_equal(mask_to_weight(np.zeros((3, 3))), np.ones((3, 3)))
        npt.assert_array_equal(mask_to_weight(np.ones((3, 3)), 1.0),
                               np.full((3, 3), 2.0))

    def test_weight_mean_linearity(self):
        rng = np.random.default_rng(7)
        m = rng.uniform(0, 1, size=(9, 9))
        for gamma in (0.5, 1.0, 2.0):
            assert abs(mask_to_weight(m, gamma).mean() - (1 + gamma * m.mean())) < 1e-12

    def test_weighted_mse_trivials(self):
        rng = np.random.default_rng(8)
        a = rng.normal(size=(6, 6, 3))
        assert weighted_mse(np.ones((6, 6)), a, a) == 0.0
        b = rng.normal(size=(6, 6, 3))
        plain = float(np.mean(np.sum((a - b) ** 2, axis=2)))
        assert abs(weighted_mse(np.ones((6, 6)), a, b) - plain) < 1e-15

    def test_weighted_mse_hand_summed(self):
        pred = np.array([[1.0, 2.0], [3.0, 4.0]])
        target = np.zeros((2, 2))
        w = np.array([[2.0, 1.0], [1.0, 2.0]])
        # pixel terms: 4*1, 1*4, 1*9, 4*16 -> mean = (4+4+9+64)/4
        assert weighted_mse(w, pred, target) == (4 + 4 + 9 + 64) / 4

    def test_weight_doubling_quadruples_contribution(self):
        pred = np.array([[1.0, 1.0]])
        target = np.zeros((1, 2))
        w1 = np.ones((1, 2))
        w2 = np.array([[2.0, 1.0]])
        assert weighted_mse(w2, pred, target) == (4.0 + 1.0) / 2
        assert weighted_mse(w1, pred, target) == 1.0


class TestMaskedBlend:
    def test_endpoints(self):
        rng = np.random.default_rng(9)
        base = rng.normal(size=(5, 5, 3))
        full = rng.normal(size=(5, 5, 3))
        npt.assert_array_equal(masked_blend(np.zeros((5, 5)), base, full), base)
        npt.assert_array_equal(masked_blend(np.ones((5, 5)), base, full), full)

    def test_midpoint(self):
        base = np.zeros((2, 2))
        full = np.ones((2, 2))
        npt.assert_array_equal(masked_blend(np.full((2, 2), 0.5), base, full),
                               np.full((2, 2), 0.5))

    def test_same_input_fixed_point(self):
        rng = np.random.default_rng(10)
        a = rng.normal(size=(4, 4, 3))
        for _ in range(10):
            m = rng.uniform(0, 1, size=(4, 4))
            npt.assert_allclose(masked_blend(m, a, a), a, atol=1e-15)

    def test_shape_error(self):
        with pytest.raises(ValueError):
            masked_blend(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((3, 3)))


def sphere_fixture():
    mat = Material((0.7, 0.7, 0.7), roughness=0.8, metallic=0.0, specular=0.0)
    scene = SceneSpec(
        (Primitive("sphere", mat, (0, 0, 0.5), scale=(0.45, 0.45, 0.45)),))
    cam = CameraPose((0.0, -2.2, 1.6), (0, 0, 0.5), width=64, height=64)
    light = LightParams.directional(math.radians(30), math.radians(60), 1000, 5500)
    return scene, cam, light


class TestMaskFeatures:
    def test_zero_delta_channels(self):
        scene, cam, light = sphere_fixture()
        img, gb = render(scene, cam, light)
        feats = mask_features(img, gb.normal, gb.coverage, DeltaL.zero(), light, cam)
        npt.assert_array_equal(feats[:, :, 2], np.zeros((64, 64)))
        npt.assert_array_equal(feats[:, :, 3], np.zeros((64, 64)))
        npt.assert_array_equal(feats[:, :, 4], np.zeros((64, 64)))
        npt.assert_array_equal(feats[:, :, 5], gb.coverage)

    def test_flat_image_zero_gradient(self):
        scene, cam, light = sphere_fixture()
        _, gb = render(scene, cam, light)
        flat = np.full((64, 64, 3), 0.25)
        feats = mask_features(flat, gb.normal, gb.coverage, DeltaL.zero(), light, cam)
        npt.assert_array_equal(feats[:, :, 1], np.zeros((64, 64)))

    def test_shading_change_peaks_off_both_terminators(self):
        scene, cam, light = sphere_fixture()
        img, gb = render(scene, cam, light)
        delta = delta_from_edit(light, dyaw=math.radians(90.0))
        feats = mask_features(img, gb.normal, gb.coverage, delta, light, cam)
        chan = feats[:, :, 2]
        y, x = np.unravel_index(np.argmax(chan), chan.shape)
        basis = cam.basis()
        from relightkit.lights import apply_delta
        nds = gb.normal[y, x] @ (light.direction() @ basis)
        ndt = gb.normal[y, x] @ (apply_delta(light, delta).direction() @ basis)
        # the largest change happens where one light grazes or misses the pixel
        assert min(max(nds, 0.0), max(ndt, 0.0)) < 0.2


class TestPredictorAndLoss:
    def test_dice_zero_for_identical_interior_maps(self):
        rng = np.random.default_rng(11)
        m = rng.uniform(0.05, 0.95, size=(8, 8))
        loss = bce_dice_loss(m, m)
        entropy = float(-np.mean(m * np.log(m) + (1 - m) * np.log(1 - m)))
        assert abs(loss - entropy) < 1e-9      # dice contributes exactly 0

    def test_bce_half_on_balanced_binary(self):
        from relightkit.mask import _bce, _dice
        gt = np.zeros((4, 4))
        gt[:2] = 1.0
        pred = np.full((4, 4), 0.5)
        assert abs(_bce(pred, gt) - math.log(2)) < 1e-12
        # soft dice of the same fixture: 2*(0.5*8)/(16*0.25 + 8) = 2/3
        assert abs(_dice(pred, gt) - (1.0 - 2.0 / 3.0)) < 1e-6
        assert abs(bce_dice_loss(pred, gt) - (math.log(2) + 1.0 / 3.0)) < 1e-6

    def test_predictions_stay_in_unit_interval(self):
        rng = np.random.default_rng(12)
        for seed in range(10):
            params = MaskPredictorParams.init(seed=seed)
            params.w1 *= rng.uniform(0.1, 50)
            params.b2 += rng.normal() * 10
            feats = rng.normal(size=(7, 7, 6)) * 5
            p = predict_mask(params, feats)
            assert p.min() >= 0.0 and p.max() <= 1.0

    def test_gradient_matches_finite_differences(self):
        h = 1e-5
        for seed in range(10):
            rng = np.random.default_rng([99, seed])
            feats = rng.normal(size=(4, 4, 6))
            gt = rng.uniform(0.05, 0.95, size=(4, 4))
            params = MaskPredictorParams.init(hidden=5, seed=seed)
            _, grad = mask_loss_grad(params, feats, gt)
            theta = params.flat()
            ga = grad.flat()
            for i in range(theta.size):
                tp, tm = theta.copy(), theta.copy()
                tp[i] += h
                tm[i] -= h
                lp, _ = mask_loss_grad(params.with_flat(tp), feats, gt)
                lm, _ = mask_loss_grad(params.with_flat(tm), feats, gt)
                fd = (lp - lm) / (2 * h)
                rel = abs(fd - ga[i]) / max(abs(fd), abs(ga[i]), 1e-6)
                assert rel <= 1e-4, f"seed {seed} param {i}: {fd} vs {ga[i]}"

    def test_training_loss_nonincreasing(self):
        scene, cam, light = sphere_fixture()
        img_s, gb = render(scene, cam, light)
        delta = delta_from_edit(light, dyaw=math.radians(70.0))
        from relightkit.lights import apply_delta
        img_t, _ = render(scene, cam, apply_delta(light, delta))
        gt = gt_mask(img_s, img_t, coverage=gb.coverage)
        feats = mask_features(img_s, gb.normal, gb.coverage, delta, light, cam)
        params, history = train_mask_predictor([feats], [gt], iterations=60)
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
        assert history[-1] < history[0]

    def test_params_round_trip(self):
        params = MaskPredictorParams.init(seed=3)
        back = MaskPredictorParams.from_json(params.to_json())
        for name in ("w1", "b1", "w2", "b2"):
            npt.assert_array_equal(getattr(back, name), getattr(params, name))
