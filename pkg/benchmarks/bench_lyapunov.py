"""Compare the compiled and pure-Python Lyapunov back-substitution kernels.

Times the quasi-triangular kernel alone (the part each backend owns) and the
full solve including the shared real Schur factorization, on random stable
systems and on the 39/118-bus all-GFM models.

    python3 benchmarks/bench_lyapunov.py --sizes 10 19 50 100 --repeat 5
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from gridlab import numlin
from gridlab.assembly import assemble_all_gfm, uniform_fleet
from gridlab.devices import GfmParams
from gridlab.netcase import bundled_case, kron_reduce
from gridlab.numlin import _kernels
from gridlab.numlin.lyapunov import SchurLyapunov


def random_stable(rng, n):
    A = rng.normal(size=(n, n))
    return A - (np.linalg.eigvals(A).real.max() + 0.5) * np.eye(n)


def best_of(fn, repeat: int) -> float:
    number = 1
    # grow the loop count until one batch takes at least 20 ms
    while timeit.timeit(fn, number=number) < 0.02 and number < 10_000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def cases(sizes, rng):
    for n in sizes:
        yield f"random n={n}", random_stable(rng, n)
    for name in ("ieee39", "ieee118"):
        rn = kron_reduce(bundled_case(name))
        sys = assemble_all_gfm(rn, uniform_fleet(rn, GfmParams(T_c=0.0318, R=0.05)))
        yield f"{name} GFM n={sys.n_states}", sys.A


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 50, 100])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = numlin.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the python backend is available")
    rng = np.random.default_rng(args.seed)
    header = f"{'case':<22}" + "".join(f"{b + ' kernel':>16}{b + ' solve':>16}" for b in backends)
    if len(backends) > 1:
        header += f"{'kernel speedup':>16}"
    print(header)
    for label, A in cases(args.sizes, rng):
        Q = rng.normal(size=(A.shape[0], 1))
        ref = SchurLyapunov(A)
        F = -(ref.U.T @ (Q @ Q.T) @ ref.U)
        F = np.ascontiguousarray(0.5 * (F + F.T))
        row, kernel_times = f"{label:<22}", {}
        for b in backends:
            kernel = _kernels.get_kernel(b)
            kernel_times[b] = best_of(lambda: kernel(ref.T, F, ref._starts, ref._sizes), args.repeat)
            solve = best_of(lambda: numlin.solve_lyapunov(A, Q, backend=b), args.repeat)
            row += f"{kernel_times[b] * 1e3:>14.3f}ms{solve * 1e3:>14.3f}ms"
        if len(backends) > 1:
            row += f"{kernel_times['python'] / kernel_times['cython']:>15.1f}x"
        print(row)


if __name__ == "__main__":
    main()
