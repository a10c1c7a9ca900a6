"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 I/O error (missing or malformed
files), 4 validation error (inputs that are readable but inconsistent).
Coordinates on the command line and in files are x-first.
"""
import argparse
import json
import sys
import time

import numpy as np

from . import _backend
from . import io as jio
from .blockmatch import match_blocks
from .errors import RegistrationError
from .evaluation import LandmarkSet, difference_image, grid_landmarks, landmark_error
from .grid import as_image, check_field, warp
from .kernel import rasterize
from .pipeline import RegistrationConfig, register
from .regression import RegressionConfig, local_kernel
from .saliency import joint_saliency, saliency
from .tensor import image_lst

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4

_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_COLOURS = np.array([
    [0.0, 0.0, 0.5],
    [0.0, 0.4, 1.0],
    [0.2, 0.9, 0.6],
    [1.0, 0.8, 0.0],
    [0.6, 0.0, 0.0],
])


def heatmap(values):
    """Blue (low) to red (high) false colour for a map in [0, 1]."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.stack([np.interp(v, _STOPS, _COLOURS[:, c]) for c in range(3)], axis=-1)


def _central_slice(volume):
    return volume if volume.ndim == 2 else volume[volume.shape[0] // 2]


def _write_map(path, values):
    """Heatmap PNG for a 2D map (central slice of a 3D one) or an f32 volume."""
    if path.lower().endswith(".json"):
        jio.write_volume(path, values, dtype="f32")
    else:
        jio.write_rgb(path, heatmap(_central_slice(values)))


def _parse_point(text, ndim):
    try:
        coords = [float(c) for c in text.split(",")]
    except ValueError:
        raise ValueError(f"cannot parse point {text!r}") from None
    if len(coords) != ndim:
        raise ValueError(f"point {text!r} needs {ndim} coordinates")
    return np.array(coords[::-1])


def _load_pair(ref_path, mov_path):
    ref = as_image(jio.read_image(ref_path))
    mov = as_image(jio.read_image(mov_path))
    if ref.shape != mov.shape:
        raise RegistrationError(f"reference {ref.shape} and moving {mov.shape} differ")
    return ref, mov


def _load_landmarks(path, shape):
    if path is None:
        return grid_landmarks(shape), True
    ref_pts, mov_pts = jio.read_landmarks(path)
    return LandmarkSet(ref_pts, mov_pts), False


def _emit(payload, path=None):
    if path:
        jio.write_json(path, payload)
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_register(args):
    ref, mov = _load_pair(args.reference, args.moving)
    config = RegistrationConfig.from_json(args.config) if args.config else RegistrationConfig()
    if args.threads is not None:
        config = RegistrationConfig.from_dict(dict(config.to_dict(), threads=args.threads))
    landmarks, auto = _load_landmarks(args.landmarks, ref.shape)
    start = time.perf_counter()
    result = register(ref, mov, config)
    total = time.perf_counter() - start
    if args.out_field:
        jio.write_field(args.out_field, result.field)
    if args.out_warped:
        jio.write_image(args.out_warped, result.warped)
    mre, sd, _ = landmark_error(landmarks, result.field)
    report = {
        "mre": mre,
        "sd": sd,
        "landmarks": "auto-grid" if auto else args.landmarks,
        "n_landmarks": len(landmarks),
        "per_level_diagnostics": [vars(d) for d in result.per_level_diagnostics],
        "timings_seconds": dict(result.timings, total=total),
        "backend": _backend.NAME,
        "config": config.to_dict(),
    }
    _emit(report, args.report)
    return 0


def cmd_eval(args):
    field = jio.read_field(args.field)
    ref_pts, mov_pts = jio.read_landmarks(args.landmarks)
    mre, sd, errors = landmark_error(LandmarkSet(ref_pts, mov_pts), field)
    _emit({"mre": mre, "sd": sd, "errors": errors.tolist()}, args.report)
    return 0


def cmd_saliency(args):
    image = as_image(jio.read_image(args.image))
    lst_field = image_lst(image)
    sal = saliency(lst_field, args.radius)
    _write_map(args.out, sal)
    if args.anisotropy_out:
        ev = lst_field.eigvals
        spread = ev[..., 0] - ev[..., -1]
        total = ev.sum(axis=-1)
        aniso = np.divide(spread, total, out=np.zeros_like(total), where=total > 1e-12)
        _write_map(args.anisotropy_out, aniso)
    print(json.dumps({"out": args.out, "mean": float(sal.mean()), "max": float(sal.max())}))
    return 0


def cmd_jsm(args):
    ref, mov = _load_pair(args.reference, args.moving)
    if args.field:
        mov = np.clip(warp(mov, check_field(jio.read_field(args.field), ref.shape)), 0.0, 1.0)
    joint, s_r, s_m, _, _ = joint_saliency(ref, mov, args.radius)
    _write_map(args.out, joint)
    if args.samples_out:
        jio.write_samples(args.samples_out, match_blocks(ref, mov, joint))
    print(json.dumps({"out": args.out, "mean_jsm": float(joint.mean()),
                      "mean_saliency_reference": float(s_r.mean()),
                      "mean_saliency_moving": float(s_m.mean())}))
    return 0


def cmd_warp(args):
    image = as_image(jio.read_image(args.image))
    field = check_field(jio.read_field(args.field), image.shape)
    jio.write_image(args.out, np.clip(warp(image, field), 0.0, 1.0))
    return 0


def cmd_diff(args):
    a = as_image(jio.read_image(args.a))
    b = as_image(jio.read_image(args.b))
    diff = difference_image(a, b)
    jio.write_image(args.out, diff)
    print(json.dumps({"out": args.out, "mean_abs_diff": float(diff.mean())}))
    return 0


def cmd_kernel_debug(args):
    image = as_image(jio.read_image(args.image))
    x = _parse_point(args.at, image.ndim)
    if np.any(x < 0) or np.any(x > np.array(image.shape) - 1) or np.any(x != np.round(x)):
        raise ValueError("--at must be an integer pixel inside the image")
    lst_field = image_lst(image)
    grad_sq = None
    if image.ndim == 3:
        from .tensor import gradient
        grad_sq = np.sum(gradient(image) ** 2, axis=-1)
    spec = local_kernel(lst_field, x, RegressionConfig(isotropic=args.isotropic), grad_sq)
    weights = rasterize(spec, image.shape)
    window = np.max(np.abs(np.moveaxis(np.indices(image.shape), 0, -1) - x), axis=-1)
    weights = np.where(window <= spec.support_radius, weights, 0.0)
    peak = weights.max()
    scaled = weights / peak if peak > 0 else weights
    if image.ndim == 3:
        scaled = scaled[int(x[0])]
    _write_map(args.out, scaled)
    print(json.dumps({
        "at": args.at, "scales": spec.scales.tolist(),
        "axes_xyz": spec.axes[::-1, :].T.tolist(), "support_radius": spec.support_radius,
    }))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="jssreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="register a moving image onto a reference")
    p.add_argument("reference")
    p.add_argument("moving")
    p.add_argument("--config", help="JSON file with RegistrationConfig fields")
    p.add_argument("--out-field", help="field header path (raw data beside it)")
    p.add_argument("--out-warped", help="warped moving image")
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--landmarks", help="CSV rx,ry[,rz],mx,my[,mz]; default: identity grid")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("eval", help="landmark MRE/SD of a field")
    p.add_argument("--field", required=True)
    p.add_argument("--landmarks", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("saliency", help="saliency heatmap of one image")
    p.add_argument("image")
    p.add_argument("--out", default="saliency.png")
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--anisotropy-out", help="optional anisotropy heatmap")
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("jsm", help="joint saliency map of an image pair")
    p.add_argument("reference")
    p.add_argument("moving")
    p.add_argument("--field", help="warp the moving image by this field first")
    p.add_argument("--out", default="jsm.png")
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--samples-out", help="CSV dump of block-matching samples")
    p.set_defaults(func=cmd_jsm)

    p = sub.add_parser("warp", help="warp an image by a field")
    p.add_argument("image")
    p.add_argument("--field", required=True)
    p.add_argument("--out", default="warped.png")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("diff", help="absolute difference image")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out", default="diff.png")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("kernel-debug", help="rasterize the adaptive kernel at one pixel")
    p.add_argument("image")
    p.add_argument("--at", required=True, help="X,Y or X,Y,Z")
    p.add_argument("--out", default="kernel.png")
    p.add_argument("--isotropic", action="store_true")
    p.set_defaults(func=cmd_kernel_debug)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, jio.FormatError, json.JSONDecodeError) as exc:
        print(f"jssreg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RegistrationError, ValueError, TypeError) as exc:
        print(f"jssreg: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
