"""Benchmark the compiled image kernels against the numpy fallback.

Runs the four hot routines on identical inputs through both backends,
checks the outputs are bit-identical, and reports per-call timings. The
package itself picks a backend at import time via LOOPSLAM_KERNELS
(auto|c|py); this script imports both implementations directly so one
process can compare them.

    python3 benchmarks/bench_kernels.py --size 480x640 --repeats 20
"""

import argparse
import sys
import time

import numpy as np

from loopslam.brief_pattern import PATTERN
from loopslam.kernels import BACKEND
from loopslam.kernels import _numpy as py_impl

try:
    from loopslam import _kernels_c as c_impl
except ImportError:
    c_impl = None


def synth_frame(h, w, seed=0):
    """Structured test image: smooth background plus seeded square sprites."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    img = (96 + 40 * np.sin(xx / 37.0) * np.cos(yy / 23.0)).astype(np.float64)
    for _ in range(160):
        u = int(rng.integers(8, w - 8))
        v = int(rng.integers(8, h - 8))
        s = int(rng.integers(2, 7))
        img[v - s : v + s, u - s : u + s] = rng.integers(0, 256)
    img += rng.normal(0, 2.0, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def time_call(fn, *args, repeats=10):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", default="480x640", help="image size as HxW")
    ap.add_argument("--repeats", type=int, default=10, help="timing repeats (best-of)")
    ap.add_argument("--threshold", type=int, default=20, help="corner threshold")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    h, w = (int(t) for t in args.size.lower().split("x"))

    img = synth_frame(h, w, args.seed)
    rng = np.random.default_rng(args.seed + 1)
    da = rng.integers(0, 256, (500, 32), dtype=np.uint8)
    db = rng.integers(0, 256, (400, 32), dtype=np.uint8)

    blurred = py_impl.box_blur9(img)
    corners = py_impl.fast_corners(img, args.threshold, margin=24)
    kp = corners[np.argsort(-corners[:, 2], kind="stable")[:500]]
    us, vs = kp[:, 0], kp[:, 1]

    cases = [
        ("box_blur9", (img,)),
        ("fast_corners", (img, args.threshold, 24)),
        ("brief_describe", (blurred, us, vs, PATTERN)),
        ("hamming_cdist", (da, db)),
    ]

    print("image %dx%d, %d corners, package backend=%s" % (h, w, len(corners), BACKEND))
    if c_impl is None:
        print("compiled extension not importable; timing numpy fallback only")
    header = "%-16s %12s %12s %9s  %s" % ("kernel", "numpy", "c", "speedup", "outputs")
    print(header)
    print("-" * len(header))
    status = 0
    for name, call_args in cases:
        out_py, t_py = time_call(getattr(py_impl, name), *call_args, repeats=args.repeats)
        if c_impl is None:
            print("%-16s %10.3fms %12s %9s" % (name, t_py * 1e3, "-", "-"))
            continue
        out_c, t_c = time_call(getattr(c_impl, name), *call_args, repeats=args.repeats)
        same = np.array_equal(np.asarray(out_py), np.asarray(out_c))
        if not same:
            status = 1
        print(
            "%-16s %10.3fms %10.3fms %8.1fx  %s"
            % (name, t_py * 1e3, t_c * 1e3, t_py / t_c, "identical" if same else "DIFFER")
        )
    return status


if __name__ == "__main__":
    sys.exit(main())
