"""Hot inner loops: CSR products, Arnoldi orthogonalization, Givens updates.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical semantics.  The numba path is used when numba is
importable and ``DSPP_DISABLE_NUMBA`` is not set; :func:`set_backend`
switches at runtime (benchmarks and equivalence tests use it).

Callers must go through the module attributes (``_kernels.csr_matvec``),
never ``from _kernels import csr_matvec``, so a backend switch is seen.
"""
import math

import numpy as np

from ._config import numba_disabled

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_OPTIONS = {"nogil": True, "cache": True}


# --------------------------------------------------------------------------
# pure numpy
# --------------------------------------------------------------------------

def _segment_sum(indptr, values, n_rows):
    out = np.zeros((n_rows,) + values.shape[1:], dtype=np.float64)
    starts = indptr[:-1]
    nonempty = starts < indptr[1:]
    if values.shape[0]:
        out[nonempty] = np.add.reduceat(values, starts[nonempty], axis=0)
    return out


def csr_matvec_numpy(indptr, indices, data, x):
    return _segment_sum(indptr, data * x[indices], indptr.shape[0] - 1)


def csr_matmat_numpy(indptr, indices, data, X):
    return _segment_sum(indptr, data[:, None] * X[indices], indptr.shape[0] - 1)


def mgs_orthogonalize_numpy(V, k, w, h):
    """Orthogonalize ``w`` against rows ``V[:k]`` in place (MGS, two passes).

    The projection coefficients are accumulated into ``h[:k]``; the 2-norm
    of the orthogonalized ``w`` is returned.
    """
    for _ in range(2):
        for i in range(k):
            c = V[i] @ w
            h[i] += c
            w -= c * V[i]
    return float(np.sqrt(w @ w))


def givens_update_numpy(h, cs, sn, g, k):
    """Fold column ``h[:k+2]`` of the Hessenberg matrix into the running QR.

    Rotations ``0..k-1`` are applied to ``h``, rotation ``k`` is generated to
    annihilate ``h[k+1]``, and the right-hand side ``g`` is rotated.  Returns
    the least-squares residual estimate ``|g[k+1]|``.
    """
    for i in range(k):
        t = cs[i] * h[i] + sn[i] * h[i + 1]
        h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1]
        h[i] = t
    a, b = h[k], h[k + 1]
    r = math.hypot(a, b)
    if r == 0.0:
        cs[k], sn[k] = 1.0, 0.0
    else:
        cs[k], sn[k] = a / r, b / r
    h[k] = r
    h[k + 1] = 0.0
    g[k + 1] = -sn[k] * g[k]
    g[k] = cs[k] * g[k]
    return abs(g[k + 1])


# --------------------------------------------------------------------------
# numba
# --------------------------------------------------------------------------

if numba is not None:

    @numba.njit(**JIT_OPTIONS)
    def csr_matvec_numba(indptr, indices, data, x):
        n_rows = indptr.shape[0] - 1
        y = np.zeros(n_rows)
        for i in range(n_rows):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc += data[p] * x[indices[p]]
            y[i] = acc
        return y

    @numba.njit(**JIT_OPTIONS)
    def csr_matmat_numba(indptr, indices, data, X):
        n_rows = indptr.shape[0] - 1
        k = X.shape[1]
        Y = np.zeros((n_rows, k))
        for i in range(n_rows):
            for p in range(indptr[i], indptr[i + 1]):
                v = data[p]
                j = indices[p]
                for c in range(k):
                    Y[i, c] += v * X[j, c]
        return Y

    @numba.njit(**JIT_OPTIONS)
    def mgs_orthogonalize_numba(V, k, w, h):
        n = w.shape[0]
        for _ in range(2):
            for i in range(k):
                c = 0.0
                for j in range(n):
                    c += V[i, j] * w[j]
                h[i] += c
                for j in range(n):
                    w[j] -= c * V[i, j]
        s = 0.0
        for j in range(n):
            s += w[j] * w[j]
        return math.sqrt(s)

    @numba.njit(**JIT_OPTIONS)
    def givens_update_numba(h, cs, sn, g, k):
        for i in range(k):
            t = cs[i] * h[i] + sn[i] * h[i + 1]
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1]
            h[i] = t
        a = h[k]
        b = h[k + 1]
        r = math.hypot(a, b)
        if r == 0.0:
            cs[k] = 1.0
            sn[k] = 0.0
        else:
            cs[k] = a / r
            sn[k] = b / r
        h[k] = r
        h[k + 1] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        return abs(g[k + 1])


_IMPLEMENTATIONS = {
    "numpy": {
        "csr_matvec": csr_matvec_numpy,
        "csr_matmat": csr_matmat_numpy,
        "mgs_orthogonalize": mgs_orthogonalize_numpy,
        "givens_update": givens_update_numpy,
    },
}
if numba is not None:
    _IMPLEMENTATIONS["numba"] = {
        "csr_matvec": csr_matvec_numba,
        "csr_matmat": csr_matmat_numba,
        "mgs_orthogonalize": mgs_orthogonalize_numba,
        "givens_update": givens_update_numba,
    }

BACKEND = "numpy"


def available_backends():
    return sorted(_IMPLEMENTATIONS)


def set_backend(name):
    """Select the kernel implementation ("numba" or "numpy")."""
    global BACKEND, csr_matvec, csr_matmat, mgs_orthogonalize, givens_update
    if name not in _IMPLEMENTATIONS:
        raise ValueError(f"unknown kernel backend {name!r}; available: {available_backends()}")
    impl = _IMPLEMENTATIONS[name]
    csr_matvec = impl["csr_matvec"]
    csr_matmat = impl["csr_matmat"]
    mgs_orthogonalize = impl["mgs_orthogonalize"]
    givens_update = impl["givens_update"]
    BACKEND = name


set_backend("numpy" if numba is None or numba_disabled() else "numba")
