"""Synthetic images and ground-truth fields shared by the tests."""
import numpy as np
from scipy import ndimage

from jssreg import grid


def fractal(seed, n=128, octaves=(1, 2, 4, 8)):
    """Equal-energy sum of band-limited noise octaves, scaled to [0, 1].

    Structure at every scale keeps each pyramid level textured.
    """
    rng = np.random.default_rng(seed)
    t = np.zeros((n, n))
    for s in octaves:
        g = ndimage.gaussian_filter(rng.standard_normal((n, n)), s, mode="wrap")
        t += g / g.std()
    return grid.normalize_intensity(t)


def smooth_texture(seed, shape, sigma=1.5):
    rng = np.random.default_rng(seed)
    return grid.normalize_intensity(ndimage.gaussian_filter(rng.random(shape), sigma))


def bump(n=128, amp=8.0, width=18.0, center=(64.0, 64.0), direction=(0.6, 0.8)):
    """Gaussian-bump displacement of peak magnitude ``amp`` (axis order)."""
    c = grid.grid_coordinates((n, n))
    g = np.exp(-np.sum((c - np.array(center)) ** 2, axis=-1) / (2.0 * width**2))
    return amp * g[..., None] * np.array(direction)


def invert(field, iterations=50):
    """Fixed-point inverse of a backward-warp field."""
    coords = grid.grid_coordinates(field.shape[:-1])
    inv = -field.copy()
    for _ in range(iterations):
        inv = -grid._interpolate_field(field, coords + inv)
    return inv


def warped_pair(seed, n=128):
    """``(reference, moving, truth)`` with ``warp(moving, truth) ~ reference``."""
    ref = fractal(seed, n)
    truth = bump(n)
    return ref, grid.warp(ref, invert(truth)), truth


OUTLIER_BOX = (slice(54, 74), slice(34, 54))


def outlier_pair(seed):
    """Warped pair with a 20x20 block of the moving image painted with its mean."""
    ref, mov, truth = warped_pair(seed)
    mov = mov.copy()
    mov[OUTLIER_BOX] = mov[OUTLIER_BOX].mean()
    return ref, mov, truth


def outlier_mask_in_reference(truth):
    """Reference pixels whose correspondence falls inside the painted block."""
    c = grid.grid_coordinates(truth.shape[:-1]) + truth
    rows, cols = OUTLIER_BOX
    return ((c[..., 0] >= rows.start) & (c[..., 0] <= rows.stop - 1)
            & (c[..., 1] >= cols.start) & (c[..., 1] <= cols.stop - 1))


def interior(shape, margin=8):
    mask = np.zeros(shape, dtype=bool)
    mask[tuple(slice(margin, n - margin) for n in shape)] = True
    return mask


def sign_flips(values):
    """Number of sign changes along the last axis (zeros count as their own sign)."""
    s = np.sign(values)
    return int(np.sum(s[..., 1:] != s[..., :-1]))
