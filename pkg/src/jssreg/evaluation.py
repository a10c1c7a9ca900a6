"""Landmark accuracy (MRE/SD) and difference images."""
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, EmptyLandmarks
from .grid import as_image, check_field, sample


@dataclass(frozen=True)
class LandmarkSet:
    """Corresponding points in full-resolution, axis-ordered pixel coordinates."""

    reference: np.ndarray  # (P, ndim)
    moving: np.ndarray  # (P, ndim)

    def __post_init__(self):
        ref = np.atleast_2d(np.asarray(self.reference, dtype=np.float64))
        mov = np.atleast_2d(np.asarray(self.moving, dtype=np.float64))
        if ref.shape != mov.shape:
            raise DimMismatch("reference and moving landmarks disagree in shape")
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "moving", mov)

    def __len__(self):
        return 0 if self.reference.size == 0 else len(self.reference)

    def check_inside(self, shape):
        upper = np.array(shape) - 1
        for pts in (self.reference, self.moving):
            if np.any(pts < 0) or np.any(pts > upper):
                raise ValueError("landmarks must lie inside the image domain")


def grid_landmarks(shape, step=8, margin=8):
    """Identity landmark pairs on a regular grid, used when none are supplied."""
    axes = [np.arange(min(margin, n // 2), n - min(margin, n // 2), step) for n in shape]
    axes = [a if a.size else np.array([n // 2]) for a, n in zip(axes, shape)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(shape))
    pts = pts.astype(np.float64)
    return LandmarkSet(pts, pts.copy())


def landmark_error(landmarks, field):
    """Return ``(mre, sd, errors)`` of ``field`` on the landmark pairs.

    The field maps a reference point ``r`` to ``r + u(r)`` in the moving
    image; the error of a pair is the distance from the moving landmark to
    that prediction.  SD is the population standard deviation.
    """
    if len(landmarks) == 0:
        raise EmptyLandmarks("landmark set is empty")
    field = check_field(field)
    if landmarks.reference.shape[1] != field.ndim - 1:
        raise DimMismatch("landmark dimensionality differs from the field")
    landmarks.check_inside(field.shape[:-1])
    u = np.stack([sample(field[..., k], landmarks.reference) for k in range(field.shape[-1])],
                 axis=-1)
    errors = np.linalg.norm(landmarks.moving - (landmarks.reference + u), axis=1)
    return float(errors.mean()), float(errors.std()), errors


def difference_image(reference, warped):
    """Per-pixel absolute intensity difference."""
    ref = as_image(reference)
    wrp = as_image(warped)
    if ref.shape != wrp.shape:
        raise DimMismatch(f"images differ in shape: {ref.shape} vs {wrp.shape}")
    return np.abs(ref - wrp)


def endpoint_error(field, truth, margin=0):
    """Per-pixel endpoint error between two fields, optionally cropped by ``margin``."""
    field = check_field(field)
    truth = check_field(truth, field.shape[:-1])
    err = np.linalg.norm(field - truth, axis=-1)
    if margin:
        err = err[tuple(slice(margin, n - margin) for n in err.shape)]
    return err

