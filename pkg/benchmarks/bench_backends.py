"""Time the compiled kernels against the numpy fallback.

Runs block matching and order-0 densification on a synthetic textured
pair for each available backend and checks that the outputs agree.

    python benchmarks/bench_backends.py --size 128 --repeat 3
"""
import argparse
import time

import numpy as np
from scipy import ndimage

from jssreg import _backend
from jssreg.blockmatch import match_blocks
from jssreg.grid import normalize_intensity
from jssreg.regression import densify
from jssreg.saliency import joint_saliency


def texture(seed, n):
    rng = np.random.default_rng(seed)
    return normalize_intensity(ndimage.gaussian_filter(rng.random((n, n)), 1.5))


def best_time(func, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = func()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--spacing", type=int, default=1)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    ref = texture(0, args.size)
    mov = np.roll(ref, (2, -3), axis=(0, 1))
    jsm, _, _, ref_lst, _ = joint_saliency(ref, mov)

    backends = {"python": _backend.python_kernels}
    if _backend.compiled_kernels is not None:
        backends["cython"] = _backend.compiled_kernels
    else:
        print("compiled extension not built; timing the fallback only")

    results = {}
    for name, kern in backends.items():
        t_match, sparse = best_time(
            lambda: match_blocks(ref, mov, jsm, spacing=args.spacing, threads=args.threads,
                                 kernels=kern), args.repeat)
        t_dens, field = best_time(
            lambda: densify(sparse, ref_lst, threads=args.threads, kernels=kern), args.repeat)
        results[name] = (t_match, t_dens, sparse, field)
        print(f"{name:>7}: block_match {t_match:8.3f}s  densify {t_dens:8.3f}s  "
              f"({len(sparse)} samples, {args.size}x{args.size})")

    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        same = (np.array_equal(py[2].displacements, cy[2].displacements)
                and np.abs(py[3] - cy[3]).max() <= 1e-12)
        print(f"speed-up: block_match x{py[0] / cy[0]:.1f}  densify x{py[1] / cy[1]:.1f}  "
              f"outputs agree: {same}")


if __name__ == "__main__":
    main()
