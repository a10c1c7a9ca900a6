"""Structure saliency maps and the joint saliency map (JSM) of an image pair."""
import itertools

import numpy as np

from .errors import DimMismatch
from .tensor import SymTensorField, tensor_distance_D

JSM_A = 10.0


def _tensors(field):
    return field.tensors if isinstance(field, SymTensorField) else np.asarray(field, dtype=np.float64)


def minmax_normalize(values):
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi <= lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def raw_saliency(lst_field, neighborhood_radius=1):
    """Mean anisotropic distance between each LST and its neighbours (centre excluded).

    Neighbours beyond the border are replicated from the edge, consistent
    with the boundary policy used everywhere else.
    """
    if neighborhood_radius < 1:
        raise ValueError("neighborhood_radius must be >= 1")
    t = _tensors(lst_field)
    nd = t.ndim - 2
    r = neighborhood_radius
    padded = np.pad(t, [(r, r)] * nd + [(0, 0), (0, 0)], mode="edge")
    shape = t.shape[:nd]
    total = np.zeros(shape)
    count = 0
    for offset in itertools.product(range(-r, r + 1), repeat=nd):
        if not any(offset):
            continue
        window = tuple(slice(r + o, r + o + n) for o, n in zip(offset, shape))
        total += tensor_distance_D(padded[window], t)
        count += 1
    return total / count


def saliency(lst_field, neighborhood_radius=1):
    """Saliency map in [0, 1]: LST contrast, min-max normalised over the map."""
    return minmax_normalize(raw_saliency(lst_field, neighborhood_radius))


def raw_jsm(ref_saliency, mov_saliency, ref_lst, mov_lst, a=JSM_A):
    """Unnormalised joint saliency ``min(S_R, S_M) * a*b / (b + d)``.

    ``d`` is the anisotropic distance between the two LSTs and ``b`` is half
    its maximum over the grid.  When the two LST fields are identical
    (``b == 0``) the quotient is taken as ``a``.
    """
    s_r = np.asarray(ref_saliency, dtype=np.float64)
    s_m = np.asarray(mov_saliency, dtype=np.float64)
    t_r, t_m = _tensors(ref_lst), _tensors(mov_lst)
    if not (s_r.shape == s_m.shape == t_r.shape[:-2] == t_m.shape[:-2]):
        raise DimMismatch("saliency maps and tensor fields must share one grid")
    dist = tensor_distance_D(t_r, t_m)
    b = 0.5 * dist.max()
    factor = a * b / (b + dist) if b > 0.0 else np.full(dist.shape, float(a))
    return np.minimum(s_r, s_m) * factor


def jsm(ref_saliency, mov_saliency, ref_lst, mov_lst, a=JSM_A):
    """Joint saliency map of a reference and an (already warped) moving image.

    The raw map of :func:`raw_jsm` divided by its maximum; an all-zero raw
    map stays zero.
    """
    raw = raw_jsm(ref_saliency, mov_saliency, ref_lst, mov_lst, a)
    peak = raw.max()
    if peak <= 0.0:
        return np.zeros_like(raw)
    return raw / peak


def joint_saliency(reference, moving_warped, neighborhood_radius=1):
    """Convenience wrapper: LSTs, both saliency maps and the JSM from two images.

    Returns ``(jsm, ref_saliency, mov_saliency, ref_lst, mov_lst)``.
    """
    from .tensor import image_lst

    ref_lst = image_lst(reference)
    mov_lst = image_lst(moving_warped)
    s_r = saliency(ref_lst, neighborhood_radius)
    s_m = saliency(mov_lst, neighborhood_radius)
    return jsm(s_r, s_m, ref_lst, mov_lst), s_r, s_m, ref_lst, mov_lst
