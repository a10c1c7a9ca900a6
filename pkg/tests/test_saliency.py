import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from jssreg import grid
from jssreg.errors import DimMismatch
from jssreg.saliency import joint_saliency, jsm, raw_jsm, raw_saliency, saliency
from jssreg.tensor import SymTensorField, image_lst

from synth import outlier_mask_in_reference, outlier_pair, smooth_texture


def d_oracle(t1, t2):
    d = t1 - t2
    return math.sqrt(max(0.0, 8 * math.pi / 15 * (np.trace(d @ d) - np.trace(d) ** 2 / 3)))


def saliency_oracle(tensors, r=1):
    """Direct loop over every pixel and neighbour with replicate edges."""
    ny, nx = tensors.shape[:2]
    out = np.zeros((ny, nx))
    for y, x in itertools.product(range(ny), range(nx)):
        acc = []
        for dy, dx in itertools.product(range(-r, r + 1), repeat=2):
            if dy == dx == 0:
                continue
            yy, xx = min(max(y + dy, 0), ny - 1), min(max(x + dx, 0), nx - 1)
            acc.append(d_oracle(tensors[yy, xx], tensors[y, x]))
        out[y, x] = np.mean(acc)
    return out


def random_tensor_field(rng, shape):
    a = rng.normal(size=shape + (2, 2))
    return a @ np.swapaxes(a, -1, -2)


class TestSaliency:
    def test_constant_image_is_zero(self):
        assert not np.any(saliency(image_lst(np.full((10, 10), 0.5))))

    def test_step_edge_against_brute_force(self):
        img = np.zeros((16, 16))
        img[:, 8:] = 1.0
        lst = image_lst(img)
        raw = raw_saliency(lst)
        np.testing.assert_allclose(raw, saliency_oracle(lst.tensors), atol=1e-12)
        sal = saliency(lst)
        band = sal[:, 5:11].max(axis=1)
        assert np.all(band == 1.0)
        assert np.all(sal[:, :3] < 1e-12) and np.all(sal[:, -3:] < 1e-12)

    def test_hand_summed_neighbourhood(self):
        rng = np.random.default_rng(0)
        t = random_tensor_field(rng, (3, 3))
        expect = np.mean([d_oracle(t[y, x], t[1, 1])
                          for y in range(3) for x in range(3) if (y, x) != (1, 1)])
        assert raw_saliency(SymTensorField.from_tensors(t))[1, 1] == pytest.approx(expect, abs=1e-12)

    def test_radius_two_matches_oracle(self):
        t = random_tensor_field(np.random.default_rng(1), (6, 7))
        np.testing.assert_allclose(raw_saliency(t, 2), saliency_oracle(t, 2), atol=1e-12)

    def test_3d_shape_and_range(self):
        lst = image_lst(smooth_texture(2, (6, 7, 8)))
        sal = saliency(lst)
        assert sal.shape == (6, 7, 8) and sal.min() == 0.0 and sal.max() == 1.0

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            raw_saliency(np.zeros((3, 3, 2, 2)), 0)


class TestJSM:
    def test_zero_saliency_gives_zero(self):
        t = random_tensor_field(np.random.default_rng(3), (5, 5))
        assert not np.any(jsm(np.zeros((5, 5)), np.zeros((5, 5)), t, t))

    def test_constant_images_give_zero(self):
        j, *_ = joint_saliency(np.full((9, 9), 0.2), np.full((9, 9), 0.2))
        assert not np.any(j)

    def test_identical_images_reproduce_saliency(self):
        img = smooth_texture(4, (20, 20))
        j, s_r, s_m, _, _ = joint_saliency(img, img)
        np.testing.assert_array_equal(s_r, s_m)
        np.testing.assert_allclose(j, s_r, atol=1e-15)

    def test_formula_oracle(self):
        rng = np.random.default_rng(5)
        t_r, t_m = random_tensor_field(rng, (4, 5)), random_tensor_field(rng, (4, 5))
        s_r, s_m = rng.random((4, 5)), rng.random((4, 5))
        d = np.array([[d_oracle(t_r[i, j], t_m[i, j]) for j in range(5)] for i in range(4)])
        b = d.max() / 2
        raw = np.minimum(s_r, s_m) * 10 * b / (b + d)
        np.testing.assert_allclose(raw_jsm(s_r, s_m, t_r, t_m), raw, rtol=1e-12)
        np.testing.assert_allclose(jsm(s_r, s_m, t_r, t_m), raw / raw.max(), rtol=1e-12)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.5))
    def test_monotone_in_saliency(self, s1, s2, s_m, bump):
        t_r = np.stack([np.eye(2), 2 * np.eye(2), np.diag([3.0, 0.0])])
        t_m = np.stack([np.diag([1.0, 0.0]), np.eye(2), np.zeros((2, 2))])
        s_ref = np.array([s1, s2, 0.5])
        s_mov = np.array([s_m, s_m, 0.5])
        before = raw_jsm(s_ref, s_mov, t_r, t_m)
        s_ref[0] += bump
        after = raw_jsm(s_ref, s_mov, t_r, t_m)
        assert after[0] >= before[0]

    def test_strictly_decreasing_in_distance(self):
        # pixel 0 carries the varying distance, pixel 1 pins b
        sal = np.ones(2)
        t_r = np.stack([np.zeros((2, 2)), np.zeros((2, 2))])
        values = []
        for k in np.linspace(0.0, 1.0, 6):
            t_m = np.stack([np.diag([k, 0.0]), np.diag([2.0, 0.0])])
            values.append(raw_jsm(sal, sal, t_r, t_m)[0])
        assert np.all(np.diff(values) < 0)

    def test_degenerate_b_is_finite(self):
        t = np.zeros((4, 4, 2, 2))
        raw = raw_jsm(np.full((4, 4), 0.3), np.full((4, 4), 0.6), t, t)
        np.testing.assert_allclose(raw, 3.0)

    @given(st.integers(0, 10_000))
    def test_values_in_unit_interval(self, seed):
        a = smooth_texture(seed, (12, 12))
        b = smooth_texture(seed + 1, (12, 12))
        j, s_r, s_m, _, _ = joint_saliency(a, b)
        for m in (j, s_r, s_m):
            assert np.all(np.isfinite(m)) and m.min() >= 0.0 and m.max() <= 1.0

    def test_painted_out_region_is_suppressed(self):
        ref, mov, truth = outlier_pair(0)
        j, *_ = joint_saliency(ref, grid.warp(mov, truth))
        inside = outlier_mask_in_reference(truth)
        assert j[ndimage.binary_erosion(inside, iterations=2)].mean() < 0.02
        assert j[inside].mean() < 0.5 * j[~ndimage.binary_dilation(inside, iterations=3)].mean()

    def test_dimension_mismatch(self):
        with pytest.raises(DimMismatch):
            jsm(np.zeros((3, 3)), np.zeros((3, 4)), np.zeros((3, 3, 2, 2)), np.zeros((3, 3, 2, 2)))
