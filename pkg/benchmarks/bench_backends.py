"""Compare the numba kernels with their numpy twins.

    python3 benchmarks/bench_backends.py [--dim 16] [--n 65536] [--repeats 5]

Times one pointwise cdf, one pointwise pdf, a 21-node batch curve and the
unsmoothed lattice rule on each backend (best of ``--repeats``), checks the
backends agree, and prints a small table. The backend is switched through
the ``PREINT_DISABLE_NUMBA`` flag, which the package reads at call time.
"""

import argparse
import os
import time

import numpy as np

from preint import harness, lattice
from preint import preintegration as Q
from preint._backend import ENV_FLAG
from preint.interp import chebyshev_grid
from preint.model import lognormal_from_covariance


def best_of(fn, repeats):
    fn()  # warm-up (JIT compilation on the numba path)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--dim", type=int, default=16, help="d+1")
    ap.add_argument("--n", type=int, default=2 ** 16)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    m = lognormal_from_covariance(f"equicorr:{args.dim}:1:0.5")
    t = float(harness.pilot_quantiles(m, [0.5])[0])
    lo, hi = harness.pilot_quantiles(m, [0.1, 0.9])
    nodes = chebyshev_grid(lo, hi, 20).nodes
    z = lattice.builtin_vector()
    pts = lattice.lattice_points(z, args.n, m.dim, lattice.draw_shifts(1, m.dim, 0)[0])
    plain = lattice.lattice_points(z, args.n, m.dim + 1, lattice.draw_shifts(1, m.dim + 1, 0)[0])
    cases = {
        "pointwise cdf": lambda: Q.pointwise_cdf(m, t, pts),
        "pointwise pdf": lambda: Q.pointwise_pdf(m, t, pts),
        "batch cdf (21 nodes)": lambda: Q.batch_curve(m, "cdf", nodes, pts),
        "plain lattice cdf": lambda: Q.plain_indicator_mean(m, t, plain),
    }
    saved = os.environ.get(ENV_FLAG)
    results = {}
    try:
        for backend, flag in (("numba", "0"), ("numpy", "1")):
            os.environ[ENV_FLAG] = flag
            results[backend] = {name: best_of(fn, args.repeats) for name, fn in cases.items()}
    finally:
        if saved is None:
            os.environ.pop(ENV_FLAG, None)
        else:
            os.environ[ENV_FLAG] = saved

    print(f"d+1={args.dim}, N={args.n}, best of {args.repeats}")
    print(f"{'case':<22} {'numba s':>10} {'numpy s':>10} {'speed-up':>9} {'max |diff|':>11}")
    for name in cases:
        (tn, vn), (tp, vp) = results["numba"][name], results["numpy"][name]
        diff = float(np.max(np.abs(np.asarray(vn) - np.asarray(vp))))
        print(f"{name:<22} {tn:10.4f} {tp:10.4f} {tp / tn:9.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
