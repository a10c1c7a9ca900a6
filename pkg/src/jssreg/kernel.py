"""Structure-adaptive anisotropic Gaussian kernels built from reference LSTs.

The exponent keeps the scale (not its square) in the denominator, e.g.
``exp(-(d_u**2 / (2*s_u) + d_v**2 / (2*s_v)))`` in 2D, so the scales act
like variances.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveParam
from .tensor import SymTensorField, eig_sym

ALPHA = 0.5
SIGMA_C = 1.5
SIGMA_FLOOR = 1e-3
MAX_SUPPORT = 15
_EIG_EPS = 1e-12


def anisotropy_2d(eigvals):
    """``(l_u - l_v) / (l_u + l_v)``; zero where the tensor is (nearly) zero."""
    vals = np.asarray(eigvals, dtype=np.float64)
    total = vals[..., 0] + vals[..., 1]
    safe = np.where(total < _EIG_EPS, 1.0, total)
    return np.where(total < _EIG_EPS, 0.0, (vals[..., 0] - vals[..., 1]) / safe)


def scales_2d(anisotropy, alpha=ALPHA, sigma_c=SIGMA_C):
    """Directional scales ``(sigma_u, sigma_v)``; their product is ``sigma_c**2``."""
    if alpha <= 0 or sigma_c <= 0:
        raise NonPositiveParam("alpha and sigma_c must be positive")
    a = np.asarray(anisotropy, dtype=np.float64)
    sigma_u = alpha / (alpha + a) * sigma_c
    sigma_v = (alpha + a) / alpha * sigma_c
    return np.stack([sigma_u, sigma_v], axis=-1)


def anisotropy_3d(eigvals):
    """Return ``(a_vw, a_uw)``; both zero where the eigenvalue sum vanishes."""
    vals = np.asarray(eigvals, dtype=np.float64)
    total = vals.sum(axis=-1)
    small = total < _EIG_EPS
    safe = np.where(small, 1.0, total)
    a_vw = np.where(small, 0.0, (vals[..., 1] - vals[..., 2]) / safe)
    a_uw = np.where(small, 0.0, (vals[..., 0] - vals[..., 2]) / safe)
    return a_vw, a_uw


def scales_3d(eigvals, grad_mag_sq, sigma_c=SIGMA_C):
    """Directional scales ``(sigma_u, sigma_v, sigma_w)`` from 3D LST eigenvalues.

    The corner strength is ``(1 - a_vw - a_uw) * |grad I|**2``.  Scales that
    come out below 1e-3 (strong corners, or ``a_vw >= 1/2``) are floored.
    """
    if sigma_c <= 0:
        raise NonPositiveParam("sigma_c must be positive")
    a_vw, a_uw = anisotropy_3d(eigvals)
    rest = 1.0 - a_vw - a_uw
    corner = rest * np.asarray(grad_mag_sq, dtype=np.float64)
    denom = 1.0 + corner
    sigma_w = np.broadcast_to(sigma_c / denom, rest.shape)
    scales = np.stack(
        [sigma_c * rest / denom, sigma_c * (1.0 - 2.0 * a_vw) / denom, sigma_w], axis=-1
    )
    return np.maximum(scales, SIGMA_FLOOR)


def support_radius(scales):
    """``ceil(3 * sqrt(max scale))`` grid units, capped at 15."""
    scales = np.asarray(scales, dtype=np.float64)
    r = np.ceil(3.0 * np.sqrt(scales.max(axis=-1)))
    r = np.minimum(r, MAX_SUPPORT).astype(np.intp)
    return int(r) if r.ndim == 0 else r


def prefactor(scales):
    """Gaussian normalising constant ``1 / ((2 pi)^(n/2) prod(sigma))``."""
    scales = np.asarray(scales, dtype=np.float64)
    n = scales.shape[-1]
    return 1.0 / ((2.0 * np.pi) ** (n / 2.0) * np.prod(scales, axis=-1))


@dataclass(frozen=True)
class KernelSpec:
    center: np.ndarray
    axes: np.ndarray  # columns are the kernel axes u, v (, w)
    scales: np.ndarray
    support_radius: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.scales)) or np.any(self.scales <= 0):
            raise NonPositiveParam("kernel scales must be positive and finite")

    def weight(self, query):
        """Kernel weight at ``query`` (a point or an array of points)."""
        d = np.asarray(query, dtype=np.float64) - self.center
        return kernel_weight(d, self.axes, self.scales)


def kernel_weight(offset, axes, scales):
    """Weight of an offset ``d = x - x0`` under the kernel ``(axes, scales)``.

    Broadcasts over leading dimensions of all three arguments.
    """
    d = np.asarray(offset, dtype=np.float64)
    proj = np.einsum("...j,...jk->...k", d, axes)
    expo = np.sum(proj**2 / (2.0 * scales), axis=-1)
    return prefactor(scales) * np.exp(-expo)


def _as_tensor(lst):
    return np.asarray(lst.tensors if isinstance(lst, SymTensorField) else lst, dtype=np.float64)


def kernel_spec_2d(lst, center, alpha=ALPHA, sigma_c=SIGMA_C, isotropic=False):
    """Kernel at ``center`` from a single 2x2 LST."""
    vals, vecs = eig_sym(_as_tensor(lst))
    a = 0.0 if isotropic else float(anisotropy_2d(vals))
    scales = scales_2d(a, alpha, sigma_c)
    return KernelSpec(np.asarray(center, dtype=np.float64), vecs, scales, support_radius(scales))


def kernel_2d(lst, alpha, sigma_c, center, query):
    return float(kernel_spec_2d(lst, center, alpha, sigma_c).weight(query))


def kernel_spec_3d(lst, grad_mag_sq, center, sigma_c=SIGMA_C):
    """Kernel at ``center`` from a single 3x3 LST and the local squared gradient norm."""
    vals, vecs = eig_sym(_as_tensor(lst))
    scales = scales_3d(vals, grad_mag_sq, sigma_c)
    return KernelSpec(np.asarray(center, dtype=np.float64), vecs, scales, support_radius(scales))


def kernel_3d(lst, grad_mag_sq, sigma_c, center, query):
    return float(kernel_spec_3d(lst, grad_mag_sq, center, sigma_c).weight(query))


def kernel_field(ref_lst, grad_mag_sq=None, alpha=ALPHA, sigma_c=SIGMA_C, isotropic=False):
    """Per-pixel kernel parameters ``(axes, scales, radius)`` over a whole grid.

    Axes always come from the reference LST.  ``isotropic=True`` forces the
    2D anisotropy to zero (and the 3D anisotropies and corner strength to
    zero), giving plain Gaussian kernels of scale ``sigma_c``.
    """
    if alpha <= 0 or sigma_c <= 0:
        raise NonPositiveParam("alpha and sigma_c must be positive")
    n = ref_lst.ndim
    if n == 2:
        a = anisotropy_2d(ref_lst.eigvals)
        if isotropic:
            a = np.zeros_like(a)
        scales = scales_2d(a, alpha, sigma_c)
    else:
        if isotropic:
            scales = np.full(ref_lst.eigvals.shape, float(sigma_c))
        else:
            if grad_mag_sq is None:
                raise ValueError("3D kernels need the squared gradient magnitude")
            scales = scales_3d(ref_lst.eigvals, grad_mag_sq, sigma_c)
    return ref_lst.eigvecs, scales, support_radius(scales)


def rasterize(spec, shape):
    """Evaluate a kernel on every node of a grid (for debug images)."""
    from .grid import grid_coordinates

    return spec.weight(grid_coordinates(shape))
