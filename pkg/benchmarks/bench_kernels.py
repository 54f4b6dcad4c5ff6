"""Compare the compiled and numpy stepping loops.

    python3 benchmarks/bench_kernels.py [--dimers 41 81] [--steps 20000] [--repeat 3]
"""
import argparse
import timeit

import numpy as np
import scipy.linalg

from ptdimer import _kernels_py
from ptdimer.lattice import LatticeParams, build_hamiltonian

try:
    from ptdimer import _kernels as _compiled
except ImportError:
    _compiled = None


def setup(n_dimers, dt=0.01):
    h = build_hamiltonian(LatticeParams(n_dimers, 1.0, 1.0, 0.5))
    u = np.ascontiguousarray(scipy.linalg.expm(-1j * dt * h))
    psi = np.zeros(2 * n_dimers, complex)
    psi[n_dimers - 1] = 1.0
    return u, psi


def bench(impl, kernel, u, psi, steps, repeat):
    if kernel == "propagate_record":
        fn = lambda: impl.propagate_record(u, psi.copy(), steps)
    else:
        acc = np.zeros(u.shape[0] // 2)
        fn = lambda: impl.absorb_steps(u, psi.copy(), steps, 0.0, -0.005, acc)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dimers", type=int, nargs="+", default=[21, 41, 81])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    impls = [("python", _kernels_py)] + ([("cython", _compiled)] if _compiled else [])
    if _compiled is None:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'kernel':<18}{'N':>5}{'backend':>9}{'seconds':>10}{'us/step':>10}{'speedup':>9}")
    for kernel in ("propagate_record", "absorb_steps"):
        for n in args.dimers:
            u, psi = setup(n)
            base = None
            for name, impl in impls:
                sec = bench(impl, kernel, u, psi, args.steps, args.repeat)
                base = base or sec
                print(f"{kernel:<18}{n:>5}{name:>9}{sec:>10.3f}{1e6 * sec / args.steps:>10.2f}{base / sec:>8.2f}x")


if __name__ == "__main__":
    main()
