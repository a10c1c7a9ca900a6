"""Nonrigid registration by joint-saliency-structure adaptive kernel regression.

Sparse displacements from mutual-information block matching are densified
with structure-adaptive Gaussian kernels and weighted by a joint saliency
map, inside a coarse-to-fine pyramid.
"""
from ._backend import NAME as backend
from .blockmatch import SparseDisplacements, match_blocks
from .errors import (
    DimMismatch, EmptyLandmarks, EmptySamples, LevelsExceedResolution, NonPositiveParam,
    RegistrationError, SingularSystem, TooFewSamples, TooSmall,
)
from .evaluation import LandmarkSet, difference_image, landmark_error
from .grid import build_pyramid, compose, sample, upsample_field, warp
from .io import read_field, read_image, read_landmarks, write_field, write_image
from .kernel import KernelSpec, kernel_2d, kernel_3d
from .pipeline import RegistrationConfig, RegistrationResult, register
from .regression import RegressionConfig, densify
from .saliency import jsm, saliency
from .tensor import SymTensorField, gst, lst, tensor_distance_D, tensor_distance_L

__version__ = "0.1.0"
