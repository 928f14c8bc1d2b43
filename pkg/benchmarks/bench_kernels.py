"""Time the compiled and vectorised numpy orbit backends on a bifurcation sweep.

    python benchmarks/bench_kernels.py [--count 400] [--n-transient 2000] [--repeat 3]

Both backends must return identical samples; the script exits non-zero if they
do not. Without numba only the numpy backend is timed.
"""

import argparse
import sys
import time

import numpy as np

from triopoly import kernels
from triopoly.model import Model, ModelParams, equilibria


def sweep_inputs(model, count):
    if model is Model.ANB:
        base = ModelParams(model, 1.63, 2.1, 2.2, 1.0, 0.6)
        ks = np.linspace(0.5, 2.3, count)
    else:
        base = ModelParams(model, 0.5, 0.55, 0.6, 1.0)
        ks = np.linspace(1.0, 9.0, count)
    rows = np.array([base.replace(k=float(k)).as_row() for k in ks])
    e2 = np.array(equilibria(base).e2)
    x0 = np.tile(e2 + [1e-3, 0.0, 0.0], (count, 1))
    return rows, x0


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=400)
    ap.add_argument("--n-transient", type=int, default=2000)
    ap.add_argument("--n-keep", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    print(f"backend in use: {kernels.BACKEND}; {args.count} orbits x {args.n_transient + args.n_keep} steps")
    status = 0
    for model in Model:
        rows, x0 = sweep_inputs(model, args.count)
        call = (model.code, rows, x0, args.n_transient, args.n_keep)
        t_np, out_np = best_of(lambda: kernels.run_orbits_numpy(*call), args.repeat)
        line = f"{model.value}: numpy {t_np * 1e3:9.1f} ms"
        if kernels.HAVE_NUMBA:
            kernels.run_orbits_compiled(model.code, rows[:2], x0[:2], 1, 1)  # warm the JIT
            t_nb, out_nb = best_of(lambda: kernels.run_orbits_compiled(*call), args.repeat)
            same = all(np.array_equal(a, b, equal_nan=True) for a, b in zip(out_np, out_nb))
            line += f" | numba {t_nb * 1e3:9.1f} ms | speedup {t_np / t_nb:6.1f}x | identical {same}"
            status |= not same
        print(line)
    return status


if __name__ == "__main__":
    sys.exit(main())
