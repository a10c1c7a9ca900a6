"""Dense deformation from sparse displacements by local kernel regression.

Order 0 is the certainty-weighted Nadaraya-Watson quotient
``sum K(x_i - x) c_i y_i / sum K(x_i - x) c_i``; orders 1 and 2 solve the
weighted least-squares Taylor fit and keep the constant term.  Each
displacement component is regressed on its own.
"""
from dataclasses import dataclass
import itertools

import numpy as np
from scipy import ndimage

from . import _backend
from .errors import DimMismatch, EmptySamples, SingularSystem
from .kernel import ALPHA, SIGMA_C, KernelSpec, kernel_field, kernel_weight, prefactor

MIN_TOTAL_WEIGHT = 1e-8
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class RegressionConfig:
    order: int = 0
    alpha: float = ALPHA
    sigma_c: float = SIGMA_C
    min_total_weight: float = MIN_TOTAL_WEIGHT
    isotropic: bool = False  # force A = 0 (plain Gaussian kernels)

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        if self.alpha <= 0 or self.sigma_c <= 0 or self.min_total_weight <= 0:
            raise ValueError("regression parameters must be positive")


def design_row(offsets, order):
    """Taylor basis ``[1, d, vech(d d^T)]`` up to ``order`` for offsets ``(..., n)``."""
    d = np.asarray(offsets, dtype=np.float64)
    cols = [np.ones(d.shape[:-1])]
    n = d.shape[-1]
    if order >= 1:
        cols.extend(d[..., k] for k in range(n))
    if order >= 2:
        cols.extend(d[..., i] * d[..., j] for i in range(n) for j in range(i, n))
    return np.stack(cols, axis=-1)


def solve_wls(design, weights, values):
    """``(X^T W X)^-1 X^T W y``; raises :class:`SingularSystem` when ill-posed."""
    xtw = design.T * weights
    gram = xtw @ design
    if np.count_nonzero(weights > 0) < design.shape[1] or np.linalg.cond(gram) > _COND_LIMIT:
        raise SingularSystem("design matrix is rank deficient")
    return np.linalg.solve(gram, xtw @ values)


def _window(positions, x, radius):
    d = positions - x
    return d, np.max(np.abs(d), axis=1) <= radius


def fit_local(positions, displacements, certainties, kernel, config, x):
    """Estimate the displacement at ``x`` from the samples in the kernel window.

    Returns ``(estimate, low_confidence)``.  When the certainty-weighted total
    weight is below ``config.min_total_weight`` the unweighted estimate is
    used; if that is also too small the estimate is zero and flagged.
    """
    positions = np.asarray(positions, dtype=np.float64)
    values = np.asarray(displacements, dtype=np.float64)
    cert = np.asarray(certainties, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    d, inside = _window(positions, x, kernel.support_radius)
    d, values, cert = d[inside], values[inside], cert[inside]
    k = kernel_weight(d, kernel.axes, kernel.scales)

    w = k * cert
    if w.sum() < config.min_total_weight:
        w = k
        if w.sum() < config.min_total_weight:
            return np.zeros(x.shape), True
    if config.order > 0:
        try:
            return solve_wls(design_row(d, config.order), w, values)[0], False
        except SingularSystem:
            pass
    return w @ values / w.sum(), False


def _kernel_arrays(ref_lst, config, grad_mag_sq):
    axes, scales, radius = kernel_field(
        ref_lst, grad_mag_sq, config.alpha, config.sigma_c, config.isotropic
    )
    return axes, scales, radius


def _sample_grids(sparse, shape):
    pos = np.asarray(sparse.positions)
    if not np.all(pos == np.round(pos)):
        raise ValueError("densify needs integer sample positions")
    pos = pos.astype(np.intp)
    if np.any(pos < 0) or np.any(pos >= np.array(shape)):
        raise ValueError("sample positions fall outside the grid")
    has = np.zeros(shape, dtype=np.uint8)
    idx = tuple(pos.T)
    has[idx] = 1
    if has.sum() != len(pos):
        raise ValueError("sample positions must be unique")
    values = np.zeros(shape + (len(shape),))
    values[idx] = sparse.displacements
    cert = np.zeros(shape)
    cert[idx] = sparse.certainties
    return has, values, cert


def _accumulate_order0(has, values, cert, axes, scales, radius, threads, kernels):
    n = has.ndim
    if n == 2:
        ax3 = np.zeros(has.shape + (3, 3))
        ax3[..., 0, 0] = 1.0
        ax3[..., 1:, 1:] = axes
        sc3 = np.concatenate([np.ones(has.shape + (1,)), scales], axis=-1)
        lifted = [a[None] for a in (has, values, cert, ax3, 0.5 / sc3, prefactor(scales), radius)]
    else:
        lifted = [has, values, cert, axes, 0.5 / scales, prefactor(scales), radius]
    num, den, num_u, den_u = kernels.nw_accumulate(*lifted, threads)
    if n == 2:
        num, den, num_u, den_u = num[0], den[0], num_u[0], den_u[0]
    return num, den, num_u, den_u


def _accumulate_normal_equations(has, values, cert, axes, scales, radius, order):
    """Per-pixel weighted normal equations for the order-1/2 Taylor fit."""
    shape = has.shape
    n = len(shape)
    m = design_row(np.zeros(n), order).shape[-1]
    gram = np.zeros(shape + (m, m))
    rhs = np.zeros(shape + (m, n))
    gram_u = np.zeros_like(gram)
    rhs_u = np.zeros_like(rhs)
    positions = np.argwhere(has)
    sample_vals = values[has.astype(bool)]
    sample_cert = cert[has.astype(bool)]
    upper = np.array(shape)
    r_max = int(radius.max())
    for d in itertools.product(*(range(-min(r_max, s - 1), min(r_max, s - 1) + 1) for s in shape)):
        d = np.array(d)
        pix = positions - d
        inside = np.all((pix >= 0) & (pix < upper), axis=1)
        p = tuple(pix[inside].T)
        if not p or len(p[0]) == 0:
            continue
        ok = radius[p] >= np.max(np.abs(d))
        p = tuple(c[ok] for c in p)
        sel = np.flatnonzero(inside)[ok]
        if len(sel) == 0:
            continue
        dd = np.broadcast_to(d.astype(np.float64), (len(sel), n))
        w = kernel_weight(dd, axes[p], scales[p])
        xrow = design_row(d.astype(np.float64), order)
        outer = np.outer(xrow, xrow)
        wc = w * sample_cert[sel]
        gram[p] += wc[:, None, None] * outer
        rhs[p] += wc[:, None, None] * xrow[None, :, None] * sample_vals[sel][:, None, :]
        gram_u[p] += w[:, None, None] * outer
        rhs_u[p] += w[:, None, None] * xrow[None, :, None] * sample_vals[sel][:, None, :]
    return gram, rhs, gram_u, rhs_u


def _solve_batched(gram, rhs):
    """Constant terms of the batched WLS fits and a mask of well-posed systems."""
    flat_g = gram.reshape(-1, *gram.shape[-2:])
    flat_r = rhs.reshape(-1, *rhs.shape[-2:])
    cond = np.linalg.cond(flat_g)
    ok = np.isfinite(cond) & (cond < _COND_LIMIT)
    out = np.zeros((flat_g.shape[0], flat_r.shape[-1]))
    if np.any(ok):
        out[ok] = np.linalg.solve(flat_g[ok], flat_r[ok])[:, 0, :]
    return out.reshape(rhs.shape[:-2] + rhs.shape[-1:]), ok.reshape(gram.shape[:-2])


def densify(sparse, ref_lst, config=None, grad_mag_sq=None, threads=1, kernels=None,
            return_mask=False):
    """Dense displacement field from ``sparse`` samples on the reference grid.

    The kernel at every pixel is built from the reference LST there.  Pixels
    whose window carries too little weight even without certainties take
    the value of the nearest confident pixel.  With ``return_mask=True``
    the boolean low-confidence mask is returned as well.
    """
    config = config or RegressionConfig()
    kernels = kernels or _backend.kernels
    if len(sparse) == 0:
        raise EmptySamples("no sparse displacements to densify")
    shape = tuple(ref_lst.shape)
    if tuple(sparse.level_dims) != shape:
        raise DimMismatch(f"samples live on {sparse.level_dims}, tensors on {shape}")
    has, values, cert = _sample_grids(sparse, shape)
    axes, scales, radius = _kernel_arrays(ref_lst, config, grad_mag_sq)
    thr = config.min_total_weight

    num, den, num_u, den_u = _accumulate_order0(
        has, values, cert, axes, scales, radius, threads, kernels
    )
    weighted = den >= thr
    unweighted = ~weighted & (den_u >= thr)
    field = np.zeros(shape + (len(shape),))
    field[weighted] = num[weighted] / den[weighted][:, None]
    field[unweighted] = num_u[unweighted] / den_u[unweighted][:, None]

    if config.order > 0:
        gram, rhs, gram_u, rhs_u = _accumulate_normal_equations(
            has, values, cert, axes, scales, radius, config.order
        )
        beta, ok = _solve_batched(gram, rhs)
        beta_u, ok_u = _solve_batched(gram_u, rhs_u)
        use = weighted & ok
        field[use] = beta[use]
        use_u = unweighted & ok_u
        field[use_u] = beta_u[use_u]

    low = ~(weighted | unweighted)
    if np.any(low) and not np.all(low):
        _, nearest = ndimage.distance_transform_edt(low, return_indices=True)
        field[low] = field[tuple(idx[low] for idx in nearest)]
    return (field, low) if return_mask else field


def local_kernel(ref_lst, x, config=None, grad_mag_sq=None):
    """The :class:`KernelSpec` that :func:`densify` uses at grid point ``x``."""
    config = config or RegressionConfig()
    axes, scales, radius = _kernel_arrays(ref_lst, config, grad_mag_sq)
    idx = tuple(int(c) for c in x)
    return KernelSpec(np.asarray(x, dtype=np.float64), axes[idx], scales[idx], int(radius[idx]))
