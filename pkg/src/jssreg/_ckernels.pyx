# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: MI block search and kernel-regression accumulation.

Same interface and semantics as :mod:`jssreg._pykernels`.  Every output
element is computed by exactly one thread with a fixed loop order, so the
results do not depend on ``threads``.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, log, INFINITY
from libc.stdlib cimport calloc, free
from libc.string cimport memset

cnp.import_array()


cdef inline Py_ssize_t _clamp(Py_ssize_t v, Py_ssize_t n) noexcept nogil:
    if v < 0:
        return 0
    if v >= n:
        return n - 1
    return v


cdef void _match_site(
    const int[:, :, ::1] ref_bins,
    const int[:, :, ::1] mov_bins,
    Py_ssize_t cz, Py_ssize_t cy, Py_ssize_t cx,
    const Py_ssize_t[:, ::1] offsets,
    Py_ssize_t rz, Py_ssize_t ry, Py_ssize_t rx,
    int bins,
    const double[::1] nlogn,
    Py_ssize_t* out_idx,
    double* out_mi,
) noexcept nogil:
    cdef Py_ssize_t nz = ref_bins.shape[0], ny = ref_bins.shape[1], nx = ref_bins.shape[2]
    cdef Py_ssize_t n_px = (2 * rz + 1) * (2 * ry + 1) * (2 * rx + 1)
    cdef int* block_a = <int*> calloc(n_px, sizeof(int))
    cdef int* hist_a = <int*> calloc(bins, sizeof(int))
    cdef int* hist_b = <int*> calloc(bins, sizeof(int))
    cdef int* joint = <int*> calloc(bins * bins, sizeof(int))
    cdef Py_ssize_t i, k, z, y, x, dz, dy, dx, mz, my, mx
    cdef double sum_a = 0.0, sum_b, sum_ab, mi
    cdef double best = -INFINITY
    cdef Py_ssize_t best_k = 0
    cdef double log_n = log(<double> n_px)
    cdef int a, b

    i = 0
    for z in range(-rz, rz + 1):
        for y in range(-ry, ry + 1):
            for x in range(-rx, rx + 1):
                a = ref_bins[_clamp(cz + z, nz), _clamp(cy + y, ny), _clamp(cx + x, nx)]
                block_a[i] = a
                hist_a[a] += 1
                i += 1
    for i in range(bins):
        sum_a += nlogn[hist_a[i]]

    for k in range(offsets.shape[0]):
        dz = offsets[k, 0]
        dy = offsets[k, 1]
        dx = offsets[k, 2]
        memset(hist_b, 0, bins * sizeof(int))
        memset(joint, 0, bins * bins * sizeof(int))
        i = 0
        for z in range(-rz, rz + 1):
            mz = _clamp(cz + dz + z, nz)
            for y in range(-ry, ry + 1):
                my = _clamp(cy + dy + y, ny)
                for x in range(-rx, rx + 1):
                    mx = _clamp(cx + dx + x, nx)
                    b = mov_bins[mz, my, mx]
                    hist_b[b] += 1
                    joint[block_a[i] * bins + b] += 1
                    i += 1
        sum_b = 0.0
        for i in range(bins):
            sum_b += nlogn[hist_b[i]]
        sum_ab = 0.0
        for i in range(bins * bins):
            sum_ab += nlogn[joint[i]]
        mi = log_n + (sum_ab - sum_a - sum_b) / n_px
        if mi > best + 1e-12:
            best = mi
            best_k = k

    out_idx[0] = best_k
    out_mi[0] = best
    free(block_a)
    free(hist_a)
    free(hist_b)
    free(joint)


def match_blocks(ref_bins, mov_bins, sites, offsets, block_radius, int bins, nlogn, int threads=1):
    cdef const int[:, :, ::1] rb = np.ascontiguousarray(ref_bins, dtype=np.intc)
    cdef const int[:, :, ::1] mb = np.ascontiguousarray(mov_bins, dtype=np.intc)
    cdef const Py_ssize_t[:, ::1] st = np.ascontiguousarray(sites, dtype=np.intp)
    cdef const Py_ssize_t[:, ::1] off = np.ascontiguousarray(offsets, dtype=np.intp)
    cdef const double[::1] tab = np.ascontiguousarray(nlogn, dtype=np.float64)
    cdef Py_ssize_t rz = block_radius[0], ry = block_radius[1], rx = block_radius[2]
    cdef Py_ssize_t n_sites = st.shape[0], s
    best_idx = np.zeros(n_sites, dtype=np.intp)
    best_mi = np.zeros(n_sites, dtype=np.float64)
    cdef Py_ssize_t[::1] bi = best_idx
    cdef double[::1] bm = best_mi
    for s in prange(n_sites, nogil=True, num_threads=max(threads, 1), schedule="static"):
        _match_site(rb, mb, st[s, 0], st[s, 1], st[s, 2], off, rz, ry, rx, bins, tab,
                    &bi[s], &bm[s])
    return best_idx, best_mi


def nw_accumulate(has, values, cert, axes, inv2s, pref, rad, int threads=1):
    cdef const unsigned char[:, :, ::1] hs = np.ascontiguousarray(has, dtype=np.uint8)
    cdef const double[:, :, :, ::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[:, :, ::1] cs = np.ascontiguousarray(cert, dtype=np.float64)
    cdef const double[:, :, :, :, ::1] ax = np.ascontiguousarray(axes, dtype=np.float64)
    cdef const double[:, :, :, ::1] i2s = np.ascontiguousarray(inv2s, dtype=np.float64)
    cdef const double[:, :, ::1] pf = np.ascontiguousarray(pref, dtype=np.float64)
    cdef const Py_ssize_t[:, :, ::1] rd = np.ascontiguousarray(rad, dtype=np.intp)
    cdef Py_ssize_t nz = hs.shape[0], ny = hs.shape[1], nx = hs.shape[2]
    cdef Py_ssize_t nc = vals.shape[3]
    num_arr = np.zeros((nz, ny, nx, nc))
    den_arr = np.zeros((nz, ny, nx))
    numu_arr = np.zeros((nz, ny, nx, nc))
    denu_arr = np.zeros((nz, ny, nx))
    cdef double[:, :, :, ::1] num = num_arr
    cdef double[:, :, ::1] den = den_arr
    cdef double[:, :, :, ::1] num_u = numu_arr
    cdef double[:, :, ::1] den_u = denu_arr
    cdef Py_ssize_t p, z, y, x, r, sz, sy, sx, c
    cdef double dz, dy, dx, p0, p1, p2, w, wc

    for p in prange(nz * ny * nx, nogil=True, num_threads=max(threads, 1), schedule="static"):
        z = p // (ny * nx)
        y = (p // nx) % ny
        x = p % nx
        r = rd[z, y, x]
        for sz in range(z - r if z - r > 0 else 0, z + r + 1 if z + r + 1 < nz else nz):
            for sy in range(y - r if y - r > 0 else 0, y + r + 1 if y + r + 1 < ny else ny):
                for sx in range(x - r if x - r > 0 else 0, x + r + 1 if x + r + 1 < nx else nx):
                    if not hs[sz, sy, sx]:
                        continue
                    dz = <double> (sz - z)
                    dy = <double> (sy - y)
                    dx = <double> (sx - x)
                    p0 = dz * ax[z, y, x, 0, 0] + dy * ax[z, y, x, 1, 0] + dx * ax[z, y, x, 2, 0]
                    p1 = dz * ax[z, y, x, 0, 1] + dy * ax[z, y, x, 1, 1] + dx * ax[z, y, x, 2, 1]
                    p2 = dz * ax[z, y, x, 0, 2] + dy * ax[z, y, x, 1, 2] + dx * ax[z, y, x, 2, 2]
                    w = pf[z, y, x] * exp(-(p0 * p0 * i2s[z, y, x, 0]
                                            + p1 * p1 * i2s[z, y, x, 1]
                                            + p2 * p2 * i2s[z, y, x, 2]))
                    wc = w * cs[sz, sy, sx]
                    for c in range(nc):
                        num[z, y, x, c] += wc * vals[sz, sy, sx, c]
                        num_u[z, y, x, c] += w * vals[sz, sy, sx, c]
                    den[z, y, x] += wc
                    den_u[z, y, x] += w
    return num_arr, den_arr, numu_arr, denu_arr
