"""Compare the compiled and numpy stencil kernels on the Schwarzschild grid problem.

    python benchmarks/bench_kernels.py --n 64 96 --repeat 20
"""
import argparse
import time

import numpy as np

from eqyamabe import kernels
from eqyamabe.geom import RadialMetric
from eqyamabe.gridsolve import GridSpec, assemble, pcg


def _time_matvec(backend, op, x, repeat):
    k = kernels.get_backend(backend)
    out = np.empty_like(x)
    k.matvec_dot(*op, x, out)
    t0 = time.perf_counter()
    for _ in range(repeat):
        k.matvec_dot(*op, x, out)
    return (time.perf_counter() - t0) / repeat, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[48, 64])
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--solve", action="store_true", help="also time a full PCG solve")
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy fallback only")
    end = RadialMetric.schwarzschild(2.0)
    rng = np.random.default_rng(0)
    print(f"{'n':>5} {'backend':>9} {'matvec ms':>10} {'solve s':>8} {'iters':>6}")
    for n in args.n:
        spec = GridSpec(n=n)
        op, rhs, active, r = assemble(end, 1.0, spec)
        x = np.where(active, rng.standard_normal(r.shape), 0.0)
        ref = None
        for b in backends:
            dt, out = _time_matvec(b, op, x, args.repeat)
            if ref is None:
                ref = out.copy()
            elif np.max(np.abs(out - ref)) > 1e-12 * np.max(np.abs(ref)):
                raise SystemExit(f"backend {b} disagrees with {backends[0]}")
            solve, iters = float("nan"), 0
            if args.solve:
                t0 = time.perf_counter()
                _, hist = pcg(op, rhs, spec.rtol, spec.maxiter, backend=b)
                solve, iters = time.perf_counter() - t0, len(hist) - 1
            print(f"{n:5d} {b:>9} {1e3 * dt:10.3f} {solve:8.3f} {iters:6d}")


if __name__ == "__main__":
    main()
