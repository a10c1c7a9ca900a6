"""Image and displacement-field containers on regular 2D/3D grids.

Conventions used across the package:

* a scalar image is a float64 ``ndarray`` of shape ``(ny, nx)`` or
  ``(nz, ny, nx)`` with values in [0, 1];
* a displacement field has shape ``image.shape + (ndim,)``; component ``k``
  is the displacement along array axis ``k`` (so ``field[..., -1]`` is the
  x component), in pixels of the grid it lives on;
* every interpolation is (bi/tri)linear and clamps out-of-domain coordinates
  to the boundary (replicate-edge).
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import ndimage

from .errors import DimMismatch, LevelsExceedResolution

PYRAMID_SIGMA = 0.8
MIN_LEVEL_EXTENT = 4


def normalize_intensity(data):
    """Min-max normalise ``data`` to [0, 1]; a constant array maps to zeros."""
    data = np.asarray(data, dtype=np.float64)
    lo, hi = data.min(), data.max()
    if hi <= lo:
        return np.zeros_like(data)
    return (data - lo) / (hi - lo)


def as_image(data):
    """Validate an array as a scalar image and return it as float64."""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim not in (2, 3):
        raise DimMismatch(f"images must be 2D or 3D, got ndim={img.ndim}")
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")
    return img


def zero_field(shape):
    shape = tuple(shape)
    return np.zeros(shape + (len(shape),))


def check_field(field, shape=None):
    field = np.asarray(field, dtype=np.float64)
    if field.ndim < 3 or field.shape[-1] != field.ndim - 1:
        raise DimMismatch(f"field of shape {field.shape} is not a displacement field")
    if shape is not None and field.shape[:-1] != tuple(shape):
        raise DimMismatch(f"field grid {field.shape[:-1]} != image grid {tuple(shape)}")
    return field


def grid_coordinates(shape):
    """Return the grid node coordinates as an array of shape ``shape + (ndim,)``."""
    axes = [np.arange(n, dtype=np.float64) for n in shape]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def gaussian_smooth(image, sigma):
    """Separable Gaussian smoothing with replicate-edge boundaries.

    The filter is applied to the deviation from the first pixel so that a
    constant image is returned bit-exactly.
    """
    image = np.asarray(image, dtype=np.float64)
    anchor = image.flat[0]
    return anchor + ndimage.gaussian_filter(image - anchor, sigma, mode="nearest")


@dataclass(frozen=True)
class PyramidLevel:
    level_index: int
    image: np.ndarray
    scale_factor: int


def pyramid_shapes(shape, levels):
    """Extents of every pyramid level, coarsest first."""
    return [
        tuple(math.ceil(n / 2 ** (levels - 1 - lvl)) for n in shape)
        for lvl in range(levels)
    ]


def build_pyramid(image, levels):
    """Gaussian pyramid of ``image`` with ``levels`` entries, coarsest first.

    Each coarser level is the next finer one smoothed with sigma 0.8 and
    decimated by two (``[::2]`` on every axis), so level ``L`` has extents
    ``ceil(n / 2**(levels-1-L))``.
    """
    image = np.asarray(image, dtype=np.float64)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    coarsest = pyramid_shapes(image.shape, levels)[0]
    if levels > 1 and min(coarsest) < MIN_LEVEL_EXTENT:
        raise LevelsExceedResolution(
            f"{levels} levels on a {image.shape} grid leave a {coarsest} coarsest level"
        )
    images = [image]
    for _ in range(levels - 1):
        smoothed = gaussian_smooth(images[-1], PYRAMID_SIGMA)
        images.append(smoothed[(slice(None, None, 2),) * image.ndim])
    images.reverse()
    return [
        PyramidLevel(level_index=i, image=img, scale_factor=2 ** (levels - 1 - i))
        for i, img in enumerate(images)
    ]


def _interpolate(array, coords):
    """Linear interpolation of ``array`` at ``coords`` (``(..., ndim)``), clamped."""
    coords = np.asarray(coords, dtype=np.float64)
    upper = np.array(array.shape, dtype=np.float64) - 1.0
    clamped = np.clip(coords, 0.0, upper)
    pts = np.moveaxis(clamped, -1, 0)
    return ndimage.map_coordinates(array, pts, order=1, mode="nearest")


def sample(image, position):
    """Linearly interpolated intensity at continuous ``position`` (axis order).

    ``position`` may be a single point of length ``ndim`` or an array of
    points with shape ``(..., ndim)``.
    """
    image = np.asarray(image, dtype=np.float64)
    position = np.asarray(position, dtype=np.float64)
    if position.shape[-1] != image.ndim:
        raise DimMismatch("position dimensionality differs from the image")
    if position.ndim == 1:
        return float(_interpolate(image, position[None])[0])
    return _interpolate(image, position)


def warp(image, field):
    """Backward warp: ``out(x) = image(x + field(x))``."""
    image = np.asarray(image, dtype=np.float64)
    field = check_field(field, image.shape)
    if not np.any(field):
        return image.copy()
    return _interpolate(image, grid_coordinates(image.shape) + field)


def _interpolate_field(field, coords):
    return np.stack(
        [_interpolate(field[..., k], coords) for k in range(field.shape[-1])], axis=-1
    )


def compose(initial, current):
    """``result(x) = current(x) + initial(x + current(x))``."""
    initial = check_field(initial)
    current = check_field(current, initial.shape[:-1])
    coords = grid_coordinates(current.shape[:-1]) + current
    return current + _interpolate_field(initial, coords)


def _axis_factor(src, dst):
    # factor-2 decimation keeps coarse node i on fine node 2i
    if math.ceil(dst / 2) == src:
        return 2.0
    return dst / src


def upsample_field(field, target_shape):
    """Resample a coarse field onto ``target_shape`` and rescale to fine pixels."""
    field = check_field(field)
    target_shape = tuple(int(n) for n in target_shape)
    if len(target_shape) != field.ndim - 1:
        raise DimMismatch("target dimensionality differs from the field")
    factors = np.array(
        [_axis_factor(s, t) for s, t in zip(field.shape[:-1], target_shape)]
    )
    coords = grid_coordinates(target_shape) / factors
    return _interpolate_field(field, coords) * factors
