"""Pure numpy implementations of the hot loops (fallback backend).

Both functions work on 3D-lifted arrays: 2D problems are passed with a
leading axis of length one.  Signatures and results mirror ``_ckernels``;
``threads`` is accepted for interface parity and ignored.
"""
import numpy as np


def _clamped_block(image_shape, centers, offsets):
    """Flat indices of ``centers + offsets`` with each coordinate clamped."""
    idx = centers[:, None, :] + offsets[None, :, :]
    upper = np.array(image_shape) - 1
    idx = np.clip(idx, 0, upper)
    return np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), image_shape)


def match_blocks(ref_bins, mov_bins, sites, offsets, block_radius, bins, nlogn, threads=1):
    """Exhaustive MI block search; returns ``(best_index, best_mi)`` per site.

    ``offsets`` must already be in tie-break order: a candidate replaces the
    current best only if its MI is larger by more than 1e-12.
    """
    shape = ref_bins.shape
    sites = np.asarray(sites, dtype=np.intp)
    rz, ry, rx = (int(r) for r in block_radius)
    grid = np.stack(
        np.meshgrid(
            np.arange(-rz, rz + 1), np.arange(-ry, ry + 1), np.arange(-rx, rx + 1), indexing="ij"
        ),
        axis=-1,
    ).reshape(-1, 3)
    n_sites, n_px = len(sites), len(grid)
    ref_flat = ref_bins.ravel()
    mov_flat = mov_bins.ravel()

    a = ref_flat[_clamped_block(shape, sites, grid)].astype(np.intp)
    hist_a = np.zeros((n_sites, bins), dtype=np.intp)
    np.add.at(hist_a, (np.repeat(np.arange(n_sites), n_px), a.ravel()), 1)
    sum_a = nlogn[hist_a].sum(axis=1)
    log_n = np.log(n_px)
    site_base = (np.arange(n_sites) * bins * bins)[:, None]

    best_idx = np.zeros(n_sites, dtype=np.intp)
    best_mi = np.full(n_sites, -np.inf)
    for k, d in enumerate(np.asarray(offsets, dtype=np.intp)):
        b = mov_flat[_clamped_block(shape, sites + d, grid)].astype(np.intp)
        joint = np.bincount((site_base + a * bins + b).ravel(), minlength=n_sites * bins * bins)
        joint = joint.reshape(n_sites, bins, bins)
        hist_b = joint.sum(axis=1)
        mi = log_n + (nlogn[joint].sum(axis=(1, 2)) - sum_a - nlogn[hist_b].sum(axis=1)) / n_px
        better = mi > best_mi + 1e-12
        best_mi[better] = mi[better]
        best_idx[better] = k
    return best_idx, best_mi


def nw_accumulate(has, values, cert, axes, inv2s, pref, rad, threads=1):
    """Kernel-weighted sums over the samples inside each pixel's window.

    Returns ``(num, den, num_u, den_u)``: the certainty-weighted numerator
    (per component) and denominator, and the same sums with unit certainty.
    """
    shape = has.shape
    positions = np.argwhere(has)
    sample_vals = values[has.astype(bool)]
    sample_cert = cert[has.astype(bool)]
    num = np.zeros(shape + (values.shape[-1],))
    den = np.zeros(shape)
    num_u = np.zeros_like(num)
    den_u = np.zeros(shape)
    if len(positions) == 0:
        return num, den, num_u, den_u

    r_max = int(rad.max())
    reach = [min(r_max, n - 1) for n in shape]
    upper = np.array(shape)
    for dz in range(-reach[0], reach[0] + 1):
        for dy in range(-reach[1], reach[1] + 1):
            for dx in range(-reach[2], reach[2] + 1):
                d = np.array([dz, dy, dx])
                pix = positions - d
                inside = np.all((pix >= 0) & (pix < upper), axis=1)
                if not np.any(inside):
                    continue
                p = tuple(pix[inside].T)
                in_window = rad[p] >= max(abs(dz), abs(dy), abs(dx))
                if not np.any(in_window):
                    continue
                p = tuple(c[in_window] for c in p)
                sel = np.flatnonzero(inside)[in_window]
                proj = np.einsum("j,njk->nk", d.astype(np.float64), axes[p])
                w = pref[p] * np.exp(-np.sum(proj * proj * inv2s[p], axis=1))
                wc = w * sample_cert[sel]
                num[p] += wc[:, None] * sample_vals[sel]
                den[p] += wc
                num_u[p] += w[:, None] * sample_vals[sel]
                den_u[p] += w
    return num, den, num_u, den_u
