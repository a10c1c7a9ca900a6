import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.transform import Rotation

from jssreg import tensor
from jssreg.errors import DimMismatch, TooSmall

from synth import smooth_texture


def random_psd(rng, n, count):
    a = rng.normal(size=(count, n, n))
    return a @ np.swapaxes(a, -1, -2)


def reconstruct(vals, vecs):
    return np.einsum("...ik,...k,...jk->...ij", vecs, vals, vecs)


def distance_oracle(t1, t2, iso):
    d = np.asarray(t1) - np.asarray(t2)
    frob = np.trace(d @ d)
    return math.sqrt(max(0.0, 8 * math.pi / 15 * (frob + iso * np.trace(d) ** 2)))


sym_entries = st.floats(-5.0, 5.0)


@st.composite
def sym_matrices(draw, n):
    m = draw(arrays(np.float64, (n, n), elements=sym_entries))
    return 0.5 * (m + m.T)


class TestGradient:
    def test_constant(self):
        assert not np.any(tensor.gradient(np.full((5, 6), 0.7)))

    def test_ramp(self):
        w = 10.0
        img = np.tile(np.arange(8) / w, (6, 1))
        g = tensor.gradient(img)
        np.testing.assert_allclose(g[1:-1, 1:-1, 1], 1 / w, atol=1e-15)
        np.testing.assert_allclose(g[..., 0], 0.0, atol=1e-15)

    def test_checkerboard_matches_finite_differences(self):
        board = (np.indices((4, 4)).sum(axis=0) % 2).astype(float)
        g = tensor.gradient(board)
        # interior: central differences of a checkerboard vanish; borders: one-sided
        for y in range(4):
            for x in range(4):
                if 0 < x < 3:
                    expect_x = (board[y, x + 1] - board[y, x - 1]) / 2
                elif x == 0:
                    expect_x = board[y, 1] - board[y, 0]
                else:
                    expect_x = board[y, 3] - board[y, 2]
                assert g[y, x, 1] == expect_x
        assert set(np.unique(g[:, 0, 1])) == {-1.0, 1.0}
        assert np.all(g[1:, 0, 1] * g[:-1, 0, 1] < 0)  # signs alternate down the border

    def test_too_small(self):
        with pytest.raises(TooSmall):
            tensor.gradient(np.zeros((2, 5)))


class TestGST:
    def test_outer_product_by_hand(self):
        t = tensor.outer(np.array([1.0, 2.0]))
        np.testing.assert_array_equal(t, [[1, 2], [2, 4]])

    def test_ramp_tensor(self):
        img = np.tile(np.arange(6) * 0.1, (5, 1))
        t = tensor.gst(img)[2, 2]
        np.testing.assert_allclose(t, [[0, 0], [0, 0.01]], atol=1e-15)

    def test_rank_one_with_gradient_eigenvalue(self):
        img = smooth_texture(0, (12, 12))
        t = tensor.gst(img)
        vals, _ = tensor.eig_sym(t)
        g2 = np.sum(tensor.gradient(img) ** 2, axis=-1)
        np.testing.assert_allclose(vals[..., 0], g2, atol=1e-9)
        np.testing.assert_allclose(vals[..., 1], 0.0, atol=1e-9)

    def test_3d_trace(self):
        vol = smooth_texture(1, (5, 6, 7))
        t = tensor.gst(vol)
        np.testing.assert_allclose(np.trace(t, axis1=-2, axis2=-1),
                                   np.sum(tensor.gradient(vol) ** 2, axis=-1), atol=1e-15)


class TestEigen:
    @pytest.mark.parametrize("n", [2, 3])
    def test_random_matches_eigh(self, n):
        rng = np.random.default_rng(n)
        t = random_psd(rng, n, 500)
        vals, vecs = tensor.eig_sym(t)
        ref = np.linalg.eigvalsh(t)[..., ::-1]
        np.testing.assert_allclose(vals, np.maximum(ref, 0), atol=1e-9)
        np.testing.assert_allclose(reconstruct(vals, vecs), t, atol=1e-9)
        eye = np.swapaxes(vecs, -1, -2) @ vecs
        np.testing.assert_allclose(eye, np.broadcast_to(np.eye(n), eye.shape), atol=1e-9)

    @given(sym_matrices(3))
    def test_3x3_property(self, m):
        psd = m @ m
        vals, vecs = tensor.eig_sym(psd)
        assert np.all(np.diff(vals) <= 1e-12)
        np.testing.assert_allclose(reconstruct(vals, vecs), psd, atol=1e-9 * max(1, np.abs(psd).max()))
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-9)

    @given(sym_matrices(2))
    def test_2x2_property(self, m):
        psd = m @ m
        vals, vecs = tensor.eig_sym(psd)
        np.testing.assert_allclose(reconstruct(vals, vecs), psd, atol=1e-9 * max(1, np.abs(psd).max()))

    def test_near_degenerate_3x3(self):
        rot = Rotation.from_euler("xyz", [0.3, -0.7, 1.1]).as_matrix()
        for vals_in in ([1.0, 1.0 + 1e-9, 0.5], [2.0, 2.0, 2.0], [1.0, 0.0, 0.0], [3.0, 1e-13, 0.0]):
            t = rot @ np.diag(vals_in) @ rot.T
            vals, vecs = tensor.eig_sym(t)
            np.testing.assert_allclose(vals, sorted(vals_in, reverse=True), atol=1e-9)
            np.testing.assert_allclose(reconstruct(vals, vecs), t, atol=1e-9)
            np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-9)

    @pytest.mark.parametrize("magnitude", [1e-130, 1e-300, 1e150])
    def test_extreme_magnitudes(self, magnitude):
        rot = Rotation.from_euler("xyz", [0.2, 0.9, -0.4]).as_matrix()
        t = magnitude * (rot @ np.diag([3.0, 2.0, 1.0]) @ rot.T)
        vals, vecs = tensor.eig_sym(t)
        np.testing.assert_allclose(vals / magnitude, [3.0, 2.0, 1.0], rtol=1e-9)
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-9)

    @pytest.mark.parametrize("n", [2, 3])
    def test_zero_tensor_gets_coordinate_axes(self, n):
        vals, vecs = tensor.eig_sym(np.zeros((n, n)))
        assert not np.any(vals)
        np.testing.assert_array_equal(vecs, np.eye(n))

    def test_sign_convention(self):
        rng = np.random.default_rng(7)
        _, vecs = tensor.eig_sym(random_psd(rng, 3, 200))
        cols = np.swapaxes(vecs, -1, -2).reshape(-1, 3)
        first = cols[np.arange(len(cols)), np.argmax(np.abs(cols) > 1e-12, axis=1)]
        assert np.all(first > 0)

    def test_bad_order(self):
        with pytest.raises(DimMismatch):
            tensor.eig_sym(np.zeros((4, 4)))


class TestLST:
    def test_zero_field(self):
        out = tensor.lst(np.zeros((6, 6, 2, 2)))
        assert not np.any(out.tensors) and not np.any(out.eigvals)

    def test_uniform_field_unchanged(self):
        t = np.broadcast_to([[2.0, 0.5], [0.5, 1.0]], (7, 5, 2, 2))
        np.testing.assert_allclose(tensor.lst(t).tensors, t, atol=1e-15)

    def test_impulse_spreads_with_gaussian_weights(self):
        field = np.zeros((5, 5, 2, 2))
        field[2, 2] = [[1.0, 0.0], [0.0, 0.0]]
        out = tensor.lst(field).tensors[..., 0, 0]
        w = np.exp(-np.array([1.0, 0.0, 1.0]) / (2 * 1.5**2))
        w /= w.sum()
        np.testing.assert_allclose(out[1:4, 1:4], np.outer(w, w), atol=1e-15)
        assert out.sum() == pytest.approx(1.0, abs=1e-15)

    def test_trace_commutes_with_smoothing(self):
        img = smooth_texture(2, (16, 16))
        g = tensor.gst(img)
        out = tensor.lst(g)
        tr = np.trace(out.tensors, axis1=-2, axis2=-1)
        smoothed_tr = tensor.smooth_entries(np.trace(g, axis1=-2, axis2=-1)[..., None, None])
        np.testing.assert_allclose(tr, smoothed_tr[..., 0, 0], atol=1e-9)
        assert np.all(out.eigvals >= 0)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            tensor.lst(np.zeros((3, 3, 2, 2)), sigma=0)


class TestDistances:
    def test_hand_values(self):
        delta = np.diag([1.0, 0.0])
        zero = np.zeros((2, 2))
        assert tensor.tensor_distance_L(delta, zero) == pytest.approx(math.sqrt(4 * math.pi / 5), abs=1e-12)
        assert tensor.tensor_distance_D(delta, zero) == pytest.approx(math.sqrt(16 * math.pi / 45), abs=1e-12)
        assert tensor.tensor_distance_L(delta, zero) == pytest.approx(1.5853, abs=1e-4)

    def test_isotropic_difference_3d_is_invisible_to_D(self):
        assert tensor.tensor_distance_D(2.5 * np.eye(3), np.zeros((3, 3))) == 0.0

    @pytest.mark.parametrize("n", [2, 3])
    def test_against_oracle(self, n):
        rng = np.random.default_rng(10 + n)
        a, b = random_psd(rng, n, 200), random_psd(rng, n, 200)
        dl = tensor.tensor_distance_L(a, b)
        dd = tensor.tensor_distance_D(a, b)
        for i in range(200):
            assert dl[i] == pytest.approx(distance_oracle(a[i], b[i], 0.5), rel=1e-12)
            assert dd[i] == pytest.approx(distance_oracle(a[i], b[i], -1 / 3), rel=1e-9, abs=1e-12)

    @given(sym_matrices(3), sym_matrices(3))
    def test_metric_properties(self, m1, m2):
        t1, t2 = m1 @ m1, m2 @ m2
        for dist in (tensor.tensor_distance_L, tensor.tensor_distance_D):
            d12 = dist(t1, t2)
            assert d12 >= 0
            assert d12 == pytest.approx(dist(t2, t1), abs=1e-12)
            assert dist(t1, t1) == 0.0
        assert tensor.tensor_distance_D(t1, t2) <= tensor.tensor_distance_L(t1, t2) + 1e-12

    @given(sym_matrices(3), sym_matrices(3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
    def test_rotation_invariance(self, m1, m2, a, b, c):
        rot = Rotation.from_euler("xyz", [a, b, c]).as_matrix()
        t1, t2 = m1 @ m1, m2 @ m2
        for dist in (tensor.tensor_distance_L, tensor.tensor_distance_D):
            scale = max(1.0, float(dist(t1, t2)))
            assert dist(rot @ t1 @ rot.T, rot @ t2 @ rot.T) == pytest.approx(dist(t1, t2), abs=1e-9 * scale)

    def test_order_mismatch(self):
        with pytest.raises((DimMismatch, ValueError)):
            tensor.tensor_distance_L(np.zeros((2, 2)), np.zeros((3, 3)))
