"""Gradient and local structure tensors, their eigen-structure and distances.

Tensor fields are stored as arrays of shape ``grid + (n, n)``; eigenvalues
are sorted in descending order and eigenvectors are the *columns* of
``eigvecs`` (``eigvecs[..., :, 0]`` belongs to the largest eigenvalue).
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimMismatch, TooSmall

LST_SIGMA = 1.5
LST_WINDOW = 3
METRIC_SCALE = 8.0 * np.pi / 15.0

_SIGN_TOL = 1e-12
_GAP_TOL = 1e-3
_JACOBI_SWEEPS = 12


def gradient(image):
    """Central differences inside the grid, one-sided at the borders.

    Returns an array of shape ``image.shape + (ndim,)``.
    """
    image = np.asarray(image, dtype=np.float64)
    if min(image.shape) < 3:
        raise TooSmall(f"gradient needs >= 3 points per axis, got {image.shape}")
    return np.stack(np.gradient(image, edge_order=1), axis=-1)


def outer(vectors):
    return vectors[..., :, None] * vectors[..., None, :]


def gst(image):
    """Gradient structure tensor: the outer product of the gradient with itself."""
    return outer(gradient(image))


def _fix_signs(vecs):
    """Flip each column so its first non-negligible component is positive."""
    significant = np.abs(vecs) > _SIGN_TOL
    first = np.argmax(significant, axis=-2)
    lead = np.take_along_axis(vecs, first[..., None, :], axis=-2)
    return np.where(lead < 0.0, -vecs, vecs)


def _eig2(t):
    a, b, c = t[..., 0, 0], t[..., 0, 1], t[..., 1, 1]
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    vals = np.stack([mean + rad, mean - rad], axis=-1)
    theta = 0.5 * np.arctan2(2.0 * b, a - c)
    cos, sin = np.cos(theta), np.sin(theta)
    vecs = np.empty(t.shape)
    vecs[..., 0, 0], vecs[..., 1, 0] = cos, sin
    vecs[..., 0, 1], vecs[..., 1, 1] = -sin, cos
    return vals, vecs


def _jacobi3(t, sweeps=_JACOBI_SWEEPS):
    """Cyclic Jacobi rotations on a batch of symmetric 3x3 matrices."""
    a = np.array(t, dtype=np.float64, copy=True)
    v = np.broadcast_to(np.eye(3), a.shape).copy()
    for _ in range(sweeps):
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[:, p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            tau = np.where(active, (a[:, q, q] - a[:, p, p]) / np.where(active, 2.0 * apq, 1.0), 0.0)
            tt = np.where(
                active, np.sign(tau + (tau == 0)) / (np.abs(tau) + np.hypot(1.0, tau)), 0.0
            )
            c = 1.0 / np.hypot(1.0, tt)
            s = tt * c
            rot = np.broadcast_to(np.eye(3), a.shape).copy()
            rot[:, p, p] = c
            rot[:, q, q] = c
            rot[:, p, q] = s
            rot[:, q, p] = -s
            a = np.einsum("nji,njk,nkl->nil", rot, a, rot)
            v = np.einsum("nij,njk->nik", v, rot)
    vals = np.diagonal(a, axis1=1, axis2=2).copy()
    return vals, v


def _eig3(t):
    flat = t.reshape(-1, 3, 3)
    n = flat.shape[0]
    vals = np.zeros((n, 3))
    vecs = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
    # unit max-abs entry keeps the cross products clear of under/overflow
    scale = np.max(np.abs(flat), axis=(1, 2))
    nonzero = scale > 0.0
    flat = flat / np.where(nonzero, scale, 1.0)[:, None, None]

    # trigonometric eigenvalues
    q = np.trace(flat, axis1=1, axis2=2) / 3.0
    off = flat[:, 0, 1] ** 2 + flat[:, 0, 2] ** 2 + flat[:, 1, 2] ** 2
    diag = flat[:, [0, 1, 2], [0, 1, 2]] - q[:, None]
    p = np.sqrt(np.maximum((np.sum(diag**2, axis=1) + 2.0 * off) / 6.0, 0.0))
    safe_p = np.where(p > 0.0, p, 1.0)
    b = (flat - q[:, None, None] * np.eye(3)) / safe_p[:, None, None]
    r = np.clip(np.linalg.det(b) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    l1 = q + 2.0 * p * np.cos(phi)
    l3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    l2 = 3.0 * q - l1 - l3
    trig = np.stack([l1, l2, l3], axis=1)

    gaps = np.minimum(l1 - l2, l2 - l3)
    separated = nonzero & (gaps > _GAP_TOL)
    if np.any(separated):
        m = flat[separated]
        lam = trig[separated]
        cols = []
        for k in (0, 2):
            shifted = m - lam[:, k, None, None] * np.eye(3)
            r0, r1, r2 = shifted[:, 0], shifted[:, 1], shifted[:, 2]
            cands = np.stack([np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2)], axis=1)
            norms = np.linalg.norm(cands, axis=2)
            pick = np.argmax(norms, axis=1)
            best = cands[np.arange(len(pick)), pick]
            cols.append(best / norms[np.arange(len(pick)), pick][:, None])
        u, w = cols
        v = np.cross(w, u)
        v /= np.linalg.norm(v, axis=1)[:, None]
        w = np.cross(u, v)
        vals[separated] = lam
        vecs[separated] = np.stack([u, v, w], axis=2)

    fallback = nonzero & ~separated
    if np.any(fallback):
        jvals, jvecs = _jacobi3(flat[fallback])
        order = np.argsort(-jvals, axis=1, kind="stable")
        vals[fallback] = np.take_along_axis(jvals, order, axis=1)
        vecs[fallback] = np.take_along_axis(jvecs, order[:, None, :], axis=2)
    vals *= scale[:, None]
    return vals.reshape(t.shape[:-1]), vecs.reshape(t.shape)


def eig_sym(tensors):
    """Eigen-decomposition of symmetric 2x2 or 3x3 tensors (broadcast over the grid).

    Returns ``(eigvals, eigvecs)`` with eigenvalues sorted descending and
    clamped at zero; eigenvectors are orthonormal columns, each with its first
    non-negligible component positive.  Zero tensors get the coordinate axes.
    """
    t = np.asarray(tensors, dtype=np.float64)
    n = t.shape[-1]
    if t.shape[-2:] == (2, 2):
        vals, vecs = _eig2(t)
    elif t.shape[-2:] == (3, 3):
        vals, vecs = _eig3(t)
    else:
        raise DimMismatch(f"tensors must be 2x2 or 3x3, got {t.shape[-2:]}")
    zero = ~np.any(t.reshape(t.shape[:-2] + (n * n,)) != 0.0, axis=-1)
    vecs = np.where(zero[..., None, None], np.eye(n), vecs)
    return np.maximum(vals, 0.0), _fix_signs(vecs)


@dataclass(frozen=True)
class SymTensorField:
    """Tensor field with its cached eigen-decomposition."""

    tensors: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @classmethod
    def from_tensors(cls, tensors):
        tensors = np.asarray(tensors, dtype=np.float64)
        vals, vecs = eig_sym(tensors)
        return cls(tensors, vals, vecs)

    @property
    def shape(self):
        return self.tensors.shape[:-2]

    @property
    def ndim(self):
        return self.tensors.shape[-1]


def window_weights(sigma=LST_SIGMA, window=LST_WINDOW):
    """Normalised 1D Gaussian taps of length ``window``."""
    half = window // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    w = np.exp(-(x**2) / (2.0 * sigma**2))
    return w / w.sum()


def smooth_entries(tensors, sigma=LST_SIGMA, window=LST_WINDOW):
    """Smooth every tensor entry with a truncated separable Gaussian (replicate edges)."""
    taps = window_weights(sigma, window)
    out = np.asarray(tensors, dtype=np.float64)
    for axis in range(out.ndim - 2):
        out = ndimage.correlate1d(out, taps, axis=axis, mode="nearest")
    return out


def lst(gst_field, sigma=LST_SIGMA, window=LST_WINDOW):
    """Local structure tensor field: Gaussian-smoothed GST plus eigen-analysis.

    ``gst_field`` may be a raw tensor array or a :class:`SymTensorField`.
    The default 3-tap window with sigma 1.5 is deliberately narrow.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    tensors = gst_field.tensors if isinstance(gst_field, SymTensorField) else gst_field
    return SymTensorField.from_tensors(smooth_entries(tensors, sigma, window))


def image_lst(image, sigma=LST_SIGMA, window=LST_WINDOW):
    return lst(gst(image), sigma, window)


def _metric_terms(t1, t2):
    delta = np.asarray(t1, dtype=np.float64) - np.asarray(t2, dtype=np.float64)
    if delta.shape[-1] not in (2, 3) or delta.shape[-2] != delta.shape[-1]:
        raise DimMismatch("tensor distances need 2x2 or 3x3 tensors of equal order")
    frob_sq = np.sum(delta * delta, axis=(-2, -1))
    trace = np.trace(delta, axis1=-2, axis2=-1)
    return frob_sq, trace


def tensor_distance_L(t1, t2):
    """``sqrt(8pi/15 * (|D|_C^2 + Tr(D)^2 / 2))`` for ``D = t1 - t2``."""
    frob_sq, trace = _metric_terms(t1, t2)
    return np.sqrt(METRIC_SCALE * (frob_sq + 0.5 * trace**2))


def tensor_distance_D(t1, t2):
    """Anisotropic-part distance ``sqrt(8pi/15 * (|D|_C^2 - Tr(D)^2 / 3))``."""
    frob_sq, trace = _metric_terms(t1, t2)
    radicand = METRIC_SCALE * (frob_sq - trace**2 / 3.0)
    return np.sqrt(np.maximum(radicand, 0.0))
