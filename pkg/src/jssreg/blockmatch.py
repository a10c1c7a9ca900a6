"""Sparse displacements from exhaustive mutual-information block matching."""
from dataclasses import dataclass
import itertools

import numpy as np

from . import _backend
from .errors import DimMismatch, TooFewSamples

SPACING = 1
BLOCK_RADIUS = 5
SEARCH_RADIUS = 5
MI_BINS = 16


@dataclass(frozen=True)
class SparseDisplacements:
    """Irregular displacement samples on a level grid (axis-ordered coordinates)."""

    positions: np.ndarray  # (P, ndim) integer grid coordinates
    displacements: np.ndarray  # (P, ndim) pixels
    certainties: np.ndarray  # (P,) in [0, 1]
    level_dims: tuple

    def __post_init__(self):
        p = len(self.positions)
        if self.displacements.shape != self.positions.shape or self.certainties.shape != (p,):
            raise DimMismatch("positions, displacements and certainties disagree in length")

    def __len__(self):
        return len(self.positions)

    @property
    def ndim(self):
        return len(self.level_dims)

    def with_certainties(self, certainties):
        return SparseDisplacements(
            self.positions, self.displacements, np.asarray(certainties, dtype=np.float64),
            self.level_dims,
        )


def quantize(values, bins):
    """Equal-width bin index of intensities in [0, 1]; 1.0 falls in the last bin."""
    idx = np.floor(np.asarray(values, dtype=np.float64) * bins).astype(np.intc)
    return np.clip(idx, 0, bins - 1)


def nlogn_table(n):
    k = np.arange(n + 1, dtype=np.float64)
    out = np.zeros(n + 1)
    out[1:] = k[1:] * np.log(k[1:])
    return out


def mutual_information(block_a, block_b, bins=MI_BINS):
    """Histogram MI ``H(a) + H(b) - H(a, b)`` in nats over ``bins`` bins on [0, 1]."""
    a = np.asarray(block_a, dtype=np.float64).ravel()
    b = np.asarray(block_b, dtype=np.float64).ravel()
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if a.size != b.size:
        raise DimMismatch("blocks must hold the same number of samples")
    if a.size < bins:
        raise TooFewSamples(f"{a.size} samples cannot populate {bins} bins")
    joint = np.zeros((bins, bins))
    np.add.at(joint, (quantize(a, bins), quantize(b, bins)), 1.0)
    p_ab = joint / a.size

    def entropy(p):
        p = p[p > 0]
        return -np.sum(p * np.log(p))

    mi = entropy(p_ab.sum(axis=1)) + entropy(p_ab.sum(axis=0)) - entropy(p_ab)
    return max(float(mi), 0.0)


def lattice_positions(shape, spacing, margin=0):
    """Lattice sites every ``spacing`` pixels, centred in each axis.

    Sites keep ``margin`` pixels from the borders (reduced to
    ``(n - 1) // 2`` on axes too short for it).
    """
    if spacing < 1:
        raise ValueError("spacing must be >= 1")
    axes = []
    for n in shape:
        m = min(margin, (n - 1) // 2)
        span = n - 2 * m
        axes.append(np.arange(m + ((span - 1) % spacing) // 2, n - m, spacing))
    return np.array(list(itertools.product(*axes)), dtype=np.intp).reshape(-1, len(shape))


def search_offsets(ndim, search_radius):
    """Integer displacements in the search box, sorted by ``|d|^2`` then lexicographically."""
    rng = range(-search_radius, search_radius + 1)
    offs = sorted(itertools.product(rng, repeat=ndim), key=lambda d: (sum(c * c for c in d), d))
    return np.array(offs, dtype=np.intp)


def _lift(points, ndim):
    """Embed 2D axis-ordered coordinates in 3D (leading z of zero)."""
    if ndim == 3:
        return np.ascontiguousarray(points, dtype=np.intp)
    out = np.zeros((len(points), 3), dtype=np.intp)
    out[:, 1:] = points
    return out


def match_blocks(reference, moving_warped, jsm=None, spacing=SPACING,
                 block_radius=BLOCK_RADIUS, search_radius=SEARCH_RADIUS, bins=MI_BINS,
                 threads=1, kernels=None):
    """Block-match ``reference`` against ``moving_warped`` on a regular lattice.

    Lattice sites keep the reference block inside the image.  For each
    site every integer displacement with ``|d|_inf <=
    search_radius`` is scored by MI between the reference block at ``x`` and
    the moving block at ``x + d`` (both clamped at the borders).  Ties go to
    the smallest ``|d|^2``, then to the lexicographically smallest ``d``.
    Certainties are the JSM values at the sites (ones when ``jsm`` is None).
    """
    ref = np.asarray(reference, dtype=np.float64)
    mov = np.asarray(moving_warped, dtype=np.float64)
    if ref.shape != mov.shape:
        raise DimMismatch(f"reference {ref.shape} and moving {mov.shape} differ")
    if jsm is not None and np.shape(jsm) != ref.shape:
        raise DimMismatch("JSM grid differs from the image grid")
    if block_radius < 1 or search_radius < 1:
        raise ValueError("block and search radii must be >= 1")
    n_block = (2 * block_radius + 1) ** ref.ndim
    if n_block < bins:
        raise TooFewSamples(f"blocks of {n_block} samples cannot populate {bins} bins")
    kernels = kernels or _backend.kernels

    ndim = ref.ndim
    lift = (1,) * (3 - ndim)
    sites = lattice_positions(ref.shape, spacing, margin=block_radius)
    offsets = search_offsets(ndim, search_radius)
    radius = (0,) * (3 - ndim) + (block_radius,) * ndim
    best, _ = kernels.match_blocks(
        quantize(ref, bins).reshape(lift + ref.shape),
        quantize(mov, bins).reshape(lift + mov.shape),
        _lift(sites, ndim),
        _lift(offsets, ndim),
        np.array(radius, dtype=np.intp),
        bins,
        nlogn_table(n_block),
        threads,
    )
    displacements = offsets[best].astype(np.float64)
    if jsm is None:
        cert = np.ones(len(sites))
    else:
        cert = np.asarray(jsm, dtype=np.float64)[tuple(sites.T)]
    return SparseDisplacements(sites, displacements, cert, tuple(ref.shape))
