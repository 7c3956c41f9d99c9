"""Compare the compiled and numpy Wilson stencil kernels.

Also times the assembled sparse matvec and one dense eigendecomposition at
the same size, which is what the index pipelines actually spend time on.

    python benchmarks/bench_kernels.py [N ...]
"""

import sys
import timeit

import numpy as np

from latindex import kernels
from latindex.clifford import build_gamma_rep
from latindex.gauge import ConnectionDescriptor, discretize, make_generalized_link
from latindex.latops import WilsonFamily, WilsonStencil


def bench(N, repeat=5):
    rep = build_gamma_rep(2)
    lf = discretize(make_generalized_link(ConnectionDescriptor.u1_flux(1)), N)
    rng = np.random.default_rng(0)
    dim = 2 * N * N
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    row = {"N": N, "dim": dim}
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    results = {}
    for b in backends:
        st = WilsonStencil(lf, rep, -1.0, backend=b)
        results[b] = st.apply(v)
        n = 20
        row[b] = min(timeit.repeat(lambda: st.apply(v), number=n, repeat=repeat)) / n
    if len(results) == 2:
        row["max_diff"] = float(np.abs(results["python"] - results["cython"]).max())
    H = WilsonFamily(lf, rep).matrix(-1.0)
    row["assembled"] = min(timeit.repeat(lambda: H @ v, number=20, repeat=repeat)) / 20
    if dim <= 2048:
        Hd = np.asarray(H)
        row["eigh"] = min(timeit.repeat(lambda: np.linalg.eigh(Hd), number=1, repeat=2))
    return row


def main(argv):
    sizes = [int(a) for a in argv] or [8, 16, 32, 64]
    print(f"compiled kernel available: {kernels.BACKEND == 'cython'}")
    print(f"{'N':>4} {'dim':>7} {'python[s]':>11} {'cython[s]':>11} {'speedup':>8} "
          f"{'assembled[s]':>13} {'eigh[s]':>9}")
    for N in sizes:
        r = bench(N)
        cy = r.get("cython", float("nan"))
        print(f"{N:>4} {r['dim']:>7} {r['python']:>11.2e} {cy:>11.2e} {r['python'] / cy:>8.1f} "
              f"{r['assembled']:>13.2e} {r.get('eigh', float('nan')):>9.2e}")
        if "max_diff" in r and r["max_diff"] > 1e-10:
            raise SystemExit(f"backends disagree: {r['max_diff']:.2e}")


if __name__ == "__main__":
    main(sys.argv[1:])
