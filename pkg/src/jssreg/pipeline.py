"""Coarse-to-fine registration driver.

Per pyramid level: upsample the global field from the previous level, then
for each iteration warp the original moving image by the global field,
compute the joint saliency map, block-match, densify with structure-adaptive
kernel regression and compose the update into the global field.
"""
from dataclasses import asdict, dataclass, field, fields
import json
import time

import numpy as np

from .blockmatch import BLOCK_RADIUS, MI_BINS, SEARCH_RADIUS, SPACING, match_blocks
from .errors import DimMismatch
from .grid import as_image, build_pyramid, compose, upsample_field, warp, zero_field
from .kernel import ALPHA, SIGMA_C
from .regression import MIN_TOTAL_WEIGHT, RegressionConfig, densify
from .saliency import JSM_A, jsm, saliency
from .tensor import gradient, image_lst

STAGES = ("pyramid", "warp", "saliency", "block_match", "regression", "compose")


@dataclass(frozen=True)
class RegistrationConfig:
    levels: int = 5
    iterations_per_level: int = 2
    spacing: int = SPACING
    block_radius: int = BLOCK_RADIUS
    search_radius: int = SEARCH_RADIUS
    mi_bins: int = MI_BINS
    order: int = 0
    alpha: float = ALPHA
    sigma_c: float = SIGMA_C
    min_total_weight: float = MIN_TOTAL_WEIGHT
    jsm_a: float = JSM_A
    saliency_radius: int = 1
    certainty: str = "jsm"  # or "uniform": every c_i = 1
    isotropic: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.levels < 1 or self.iterations_per_level < 1:
            raise ValueError("levels and iterations_per_level must be >= 1")
        if self.certainty not in ("jsm", "uniform"):
            raise ValueError("certainty must be 'jsm' or 'uniform'")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def regression(self):
        return RegressionConfig(
            order=self.order, alpha=self.alpha, sigma_c=self.sigma_c,
            min_total_weight=self.min_total_weight, isotropic=self.isotropic,
        )

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LevelDiagnostic:
    level: int
    iteration: int
    mean_displacement: float  # global field, level pixels
    mean_jsm: float
    mean_update: float


@dataclass
class RegistrationResult:
    field: np.ndarray
    warped: np.ndarray
    per_level_diagnostics: list
    timings: dict
    level_entry_fields: list = field(default_factory=list)


def _mean_norm(f):
    return float(np.mean(np.linalg.norm(f, axis=-1)))


def register(reference, moving, config=None, keep_level_fields=False):
    """Register ``moving`` onto ``reference``; both are [0, 1] images of one shape.

    Returns a :class:`RegistrationResult` whose ``field`` maps reference
    coordinates into the moving image (``warped = warp(moving, field)``).
    """
    config = config or RegistrationConfig()
    ref = as_image(reference)
    mov = as_image(moving)
    if ref.shape != mov.shape:
        raise DimMismatch(f"reference {ref.shape} and moving {mov.shape} differ")

    timings = dict.fromkeys(STAGES, 0.0)
    clock = time.perf_counter()
    ref_pyr = build_pyramid(ref, config.levels)
    mov_pyr = build_pyramid(mov, config.levels)
    timings["pyramid"] += time.perf_counter() - clock

    reg_config = config.regression
    diagnostics = []
    entry_fields = []
    global_field = zero_field(ref_pyr[0].image.shape)
    for ref_level, mov_level in zip(ref_pyr, mov_pyr):
        r_img, m_img = ref_level.image, mov_level.image
        if global_field.shape[:-1] != r_img.shape:
            global_field = upsample_field(global_field, r_img.shape)
        if keep_level_fields:
            entry_fields.append(global_field.copy())

        clock = time.perf_counter()
        ref_lst = image_lst(r_img)
        ref_sal = saliency(ref_lst, config.saliency_radius)
        grad_sq = np.sum(gradient(r_img) ** 2, axis=-1) if r_img.ndim == 3 else None
        timings["saliency"] += time.perf_counter() - clock

        for it in range(config.iterations_per_level):
            clock = time.perf_counter()
            warped = warp(m_img, global_field)
            timings["warp"] += time.perf_counter() - clock

            clock = time.perf_counter()
            mov_lst = image_lst(warped)
            joint = jsm(ref_sal, saliency(mov_lst, config.saliency_radius), ref_lst, mov_lst,
                        a=config.jsm_a)
            timings["saliency"] += time.perf_counter() - clock

            clock = time.perf_counter()
            sparse = match_blocks(
                r_img, warped, joint, spacing=config.spacing, block_radius=config.block_radius,
                search_radius=config.search_radius, bins=config.mi_bins, threads=config.threads,
            )
            if config.certainty == "uniform":
                sparse = sparse.with_certainties(np.ones(len(sparse)))
            timings["block_match"] += time.perf_counter() - clock

            clock = time.perf_counter()
            update = densify(sparse, ref_lst, reg_config, grad_mag_sq=grad_sq,
                             threads=config.threads)
            timings["regression"] += time.perf_counter() - clock

            clock = time.perf_counter()
            global_field = compose(global_field, update)
            timings["compose"] += time.perf_counter() - clock

            diagnostics.append(LevelDiagnostic(
                level=ref_level.level_index, iteration=it,
                mean_displacement=_mean_norm(global_field), mean_jsm=float(joint.mean()),
                mean_update=_mean_norm(update),
            ))

    clock = time.perf_counter()
    warped = np.clip(warp(mov, global_field), 0.0, 1.0)
    timings["warp"] += time.perf_counter() - clock
    return RegistrationResult(global_field, warped, diagnostics, timings, entry_fields)
