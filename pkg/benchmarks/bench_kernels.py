"""Compare the compiled and numpy kernel backends.

Times each kernel on patch-sized inputs, checks that both backends agree,
and times the full per-patch descriptor with each backend swapped in.

    python benchmarks/bench_kernels.py [--repeat 200] [--patch 64]
"""
import argparse
import timeit

import numpy as np

from splicenet import _pykernels, kernels
from splicenet.noisefeat import init_filter_bank
from splicenet.pipeline import patch_vector

KERNEL_NAMES = ("correlate3x3_valid", "lbp_codes", "row_moments")


def _inputs(patch: int, rng):
    img = rng.random((patch + 2, patch + 2))
    bank = rng.standard_normal((8, 3, 3))
    rows = rng.standard_normal((8, patch * patch))
    return {
        "correlate3x3_valid": (img, bank),
        "lbp_codes": (img,),
        "row_moments": (rows,),
    }


def _best(fn, args, repeat: int) -> float:
    # best of 5 rounds, per call
    return min(timeit.repeat(lambda: fn(*args), number=repeat, repeat=5)) / repeat


def _with_backend(module, fn):
    saved = {n: getattr(kernels, n) for n in KERNEL_NAMES}
    try:
        for n in KERNEL_NAMES:
            setattr(kernels, n, getattr(module, n))
        return fn()
    finally:
        for n, f in saved.items():
            setattr(kernels, n, f)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200, help="calls per timing round")
    ap.add_argument("--patch", type=int, default=64, help="patch side in pixels")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    try:
        from splicenet import _ckernels
    except ImportError:
        print("compiled backend not built; only the numpy backend is available")
        _ckernels = None

    rng = np.random.default_rng(args.seed)
    inputs = _inputs(args.patch, rng)
    print(f"active backend: {kernels.BACKEND}; patch {args.patch}x{args.patch}, {args.repeat} calls/round")
    print(f"{'kernel':<22}{'numpy us':>12}{'cython us':>12}{'speedup':>10}{'max |diff|':>13}")

    for name in KERNEL_NAMES:
        py_fn = getattr(_pykernels, name)
        t_py = _best(py_fn, inputs[name], args.repeat)
        if _ckernels is None:
            print(f"{name:<22}{t_py * 1e6:>12.1f}{'-':>12}{'-':>10}{'-':>13}")
            continue
        c_fn = getattr(_ckernels, name)
        t_c = _best(c_fn, inputs[name], args.repeat)
        diff = np.max(np.abs(np.asarray(py_fn(*inputs[name]), float) - np.asarray(c_fn(*inputs[name]), float)))
        print(f"{name:<22}{t_py * 1e6:>12.1f}{t_c * 1e6:>12.1f}{t_py / t_c:>9.2f}x{diff:>13.2e}")

    # full descriptor of one RGB patch, kernels swapped in place
    pixels = rng.random((args.patch, args.patch, 3))
    bank = init_filter_bank(5, 0)
    reps = max(1, args.repeat // 10)
    t_py = _with_backend(_pykernels, lambda: _best(patch_vector, (pixels, bank), reps))
    if _ckernels is None:
        print(f"{'patch_vector':<22}{t_py * 1e6:>12.1f}{'-':>12}{'-':>10}{'-':>13}")
        return 0
    t_c = _with_backend(_ckernels, lambda: _best(patch_vector, (pixels, bank), reps))
    v_py = _with_backend(_pykernels, lambda: patch_vector(pixels, bank))
    v_c = _with_backend(_ckernels, lambda: patch_vector(pixels, bank))
    diff = np.max(np.abs(v_py - v_c))
    print(f"{'patch_vector':<22}{t_py * 1e6:>12.1f}{t_c * 1e6:>12.1f}{t_py / t_c:>9.2f}x{diff:>13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
