"""Time the numba kernels against their numpy twins.

Usage::

    python benchmarks/bench_kernels.py [--pow 5] [--repeat 5]

Covers the CSR product, one MGS orthogonalization sweep, and a full
RGSS-II preconditioned GMRES solve on the Poisson control problem.  The
first numba call of each kernel is made before timing so compilation is
excluded.
"""
import argparse
import timeit

import numpy as np

from dspp import Kind, PoissonControlSpec, SolverConfig, _kernels, assemble_full, gmres, poisson_control, prepare


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pow", type=int, default=5, help="mesh exponent of the Poisson problem")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--krylov", type=int, default=60, help="basis size for the MGS timing")
    args = ap.parse_args(argv)

    blocks, rhs = poisson_control(PoissonControlSpec(pow=args.pow))
    K = assemble_full(blocks)
    N = K.shape[0]
    rng = np.random.default_rng(0)
    x = rng.standard_normal(N)
    X = rng.standard_normal((N, 8))
    V = np.linalg.qr(rng.standard_normal((N, args.krylov)))[0].T.copy()
    w0 = rng.standard_normal(N)
    prep = prepare(blocks, kind=Kind.RGSS_II)
    scfg = SolverConfig(tol=1e-10, side="right")

    backends = _kernels.available_backends()
    saved = _kernels.BACKEND
    results = {}
    try:
        for name in backends:
            _kernels.set_backend(name)
            ip, ix, data = K.indptr, K.indices, K.data
            _kernels.csr_matvec(ip, ix, data, x)
            _kernels.csr_matmat(ip, ix, data, X)
            _kernels.mgs_orthogonalize(V, args.krylov, w0.copy(), np.zeros(args.krylov + 1))
            results[name] = {
                "spmv": _best(lambda: _kernels.csr_matvec(ip, ix, data, x), args.repeat, 50),
                "spmm(8)": _best(lambda: _kernels.csr_matmat(ip, ix, data, X), args.repeat, 10),
                f"mgs({args.krylov})": _best(
                    lambda: _kernels.mgs_orthogonalize(V, args.krylov, w0.copy(), np.zeros(args.krylov + 1)),
                    args.repeat, 5),
                "gmres": _best(lambda: gmres(blocks, rhs.vector, prep, scfg), args.repeat, 1),
            }
    finally:
        _kernels.set_backend(saved)

    print(f"order {N}, nnz {K.nnz}")
    header = f"{'kernel':<12}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for kernel in results[backends[0]]:
        line = f"{kernel:<12}" + "".join(f"{results[b][kernel] * 1e3:>12.3f}ms" for b in backends)
        if len(backends) == 2:
            line += f"{results['numpy'][kernel] / results['numba'][kernel]:>9.2f}x"
        print(line)


if __name__ == "__main__":
    main()
