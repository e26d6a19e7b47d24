"""Sparse storage, SPD factorizations and dense certification tools.

Dense matrices are plain 2-D ``numpy`` arrays throughout the package;
:class:`SparseMatrix` is a small immutable CSR container whose products run
through the kernels in :mod:`dspp._kernels`.
"""
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from . import _kernels
from ._config import DEFAULT_DENSE_FACTOR_MAX, dense_cap
from .errors import DimensionMismatch, NoConvergence, NotSpd, Singular, TooLarge


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


class SparseMatrix:
    """Immutable compressed-row matrix of float64 values.

    Column indices are strictly increasing inside each row and no exact zero
    is stored.  Every constructor except the raw ``__init__`` canonicalizes
    its input; ``__init__`` checks the invariants unless ``check=False``.
    """

    __slots__ = ("shape", "indptr", "indices", "data")

    def __init__(self, indptr, indices, data, shape, *, check=True):
        self.shape = (int(shape[0]), int(shape[1]))
        self.indptr = _frozen(indptr, np.int64)
        self.indices = _frozen(indices, np.int64)
        self.data = _frozen(data, np.float64)
        if check:
            self._check()

    def _check(self):
        rows, cols = self.shape
        if self.indptr.shape != (rows + 1,) or self.indptr[0] != 0:
            raise ValueError("row offsets must have length rows+1 and start at 0")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("row offsets must be nondecreasing")
        if self.indptr[-1] != self.data.size or self.indices.size != self.data.size:
            raise ValueError("row offsets, column indices and values disagree in length")
        if self.data.size:
            if self.indices.min() < 0 or self.indices.max() >= cols:
                raise ValueError("column index out of range")
            d = np.diff(self.indices)
            row_start = np.zeros(self.data.size, dtype=bool)
            row_start[self.indptr[:-1][self.indptr[:-1] < self.data.size]] = True
            if np.any(d[~row_start[1:]] <= 0):
                raise ValueError("column indices must be strictly increasing within each row")
            if np.any(self.data == 0.0):
                raise ValueError("explicit zeros must be pruned")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_scipy(cls, M):
        M = sp.csr_array(M, dtype=np.float64, copy=True)
        M.sum_duplicates()
        M.eliminate_zeros()
        M.sort_indices()
        return cls(M.indptr, M.indices, M.data, M.shape, check=False)

    @classmethod
    def from_triplets(cls, rows, cols, values, shape):
        """Build from (row, col, value) triplets; duplicates are summed."""
        M = sp.coo_array((np.asarray(values, dtype=np.float64),
                          (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                         shape=shape)
        return cls.from_scipy(M)

    @classmethod
    def from_dense(cls, a):
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        return cls.from_scipy(sp.csr_array(a))

    @classmethod
    def identity(cls, n, scale=1.0):
        if scale == 0.0:
            return cls.zeros(n, n)
        idx = np.arange(n)
        return cls(np.arange(n + 1), idx, np.full(n, float(scale)), (n, n), check=False)

    @classmethod
    def zeros(cls, rows, cols):
        return cls(np.zeros(rows + 1), np.zeros(0), np.zeros(0), (rows, cols), check=False)

    @classmethod
    def block(cls, blocks):
        """Assemble a block matrix; ``None`` entries are zero blocks."""
        sci = [[None if b is None else b.to_scipy() for b in row] for row in blocks]
        return cls.from_scipy(sp.block_array(sci, format="csr"))

    # -- views -------------------------------------------------------------

    @property
    def nnz(self):
        return int(self.data.size)

    @property
    def T(self):
        return SparseMatrix.from_scipy(self.to_scipy().T)

    def to_scipy(self):
        return sp.csr_array((self.data, self.indices, self.indptr), shape=self.shape)

    def to_dense(self, cap=None):
        cap = dense_cap() if cap is None else cap
        if max(self.shape) > cap:
            raise TooLarge(f"densifying a {self.shape} matrix exceeds the dense cap {cap}")
        return self.to_scipy().toarray()

    def diagonal(self):
        return self.to_scipy().diagonal()

    def is_symmetric(self, rtol=1e-12):
        return asymmetry(self) <= rtol

    # -- arithmetic --------------------------------------------------------

    def __matmul__(self, other):
        if isinstance(other, SparseMatrix):
            if self.shape[1] != other.shape[0]:
                raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
            return SparseMatrix.from_scipy(self.to_scipy() @ other.to_scipy())
        x = np.asarray(other, dtype=np.float64)
        if x.shape[0] != self.shape[1]:
            raise DimensionMismatch(f"cannot multiply {self.shape} by array of shape {x.shape}")
        if x.ndim == 1:
            return _kernels.csr_matvec(self.indptr, self.indices, self.data, np.ascontiguousarray(x))
        if x.ndim == 2:
            return _kernels.csr_matmat(self.indptr, self.indices, self.data, np.ascontiguousarray(x))
        raise DimensionMismatch("only vectors and matrices can be multiplied")

    def _combine(self, other, sign):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if self.shape != other.shape:
            raise DimensionMismatch(f"shapes {self.shape} and {other.shape} differ")
        return SparseMatrix.from_scipy(self.to_scipy() + sign * other.to_scipy())

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return SparseMatrix(self.indptr, self.indices, -self.data, self.shape, check=False)

    def __mul__(self, c):
        c = float(c)
        if c == 0.0:
            return SparseMatrix.zeros(*self.shape)
        return SparseMatrix(self.indptr, self.indices, c * self.data, self.shape, check=False)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def as_sparse(M) -> SparseMatrix:
    if isinstance(M, SparseMatrix):
        return M
    if sp.issparse(M):
        return SparseMatrix.from_scipy(M)
    return SparseMatrix.from_dense(M)


def as_dense(M, cap=None) -> np.ndarray:
    cap = dense_cap() if cap is None else cap
    if isinstance(M, SparseMatrix):
        return M.to_dense(cap)
    a = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if max(a.shape) > cap:
        raise TooLarge(f"a {a.shape} dense operation exceeds the dense cap {cap}")
    return a


def asymmetry(M) -> float:
    """Relative Frobenius asymmetry ``||M - M^T||_F / ||M||_F``."""
    if isinstance(M, SparseMatrix):
        S = M.to_scipy()
        num = sp.linalg.norm(S - S.T)
        den = sp.linalg.norm(S)
    else:
        num = np.linalg.norm(M - M.T)
        den = np.linalg.norm(M)
    return 0.0 if den == 0.0 else float(num / den)


# --------------------------------------------------------------------------
# SPD factorization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpdFactor:
    """Cholesky factor ``L L^T = M[perm][:, perm]``.

    ``form`` is ``"dense"`` (``factor`` is the full lower triangle) or
    ``"banded"`` (``factor`` is LAPACK lower band storage, rows indexed by
    subdiagonal offset).  ``perm`` is the symmetric reordering, or ``None``.
    """

    dimension: int
    form: str
    factor: np.ndarray
    perm: Optional[np.ndarray] = None

    def solve(self, b):
        return spd_solve(self, b)

    def lower(self) -> np.ndarray:
        """Dense lower-triangular factor in the permuted ordering."""
        if self.form == "dense":
            return np.tril(self.factor)
        bw1, n = self.factor.shape
        L = np.zeros((n, n))
        for i in range(bw1):
            idx = np.arange(n - i)
            L[idx + i, idx] = self.factor[i, : n - i]
        return L

    def reconstruct(self) -> np.ndarray:
        L = self.lower()
        Mp = L @ L.T
        if self.perm is None:
            return Mp
        M = np.empty_like(Mp)
        M[np.ix_(self.perm, self.perm)] = Mp
        return M


def spd_factorize(M, *, dense_max=None, sym_tol=1e-12) -> SpdFactor:
    """Cholesky-factor a symmetric positive definite matrix.

    The input is symmetrized as ``(M + M^T)/2`` first; a warning is issued
    when its relative asymmetry exceeds ``sym_tol``.  Orders up to
    ``dense_max`` are factored densely, larger sparse inputs are reordered
    with reverse Cuthill-McKee and factored in band storage.

    Raises
    ------
    NotSpd
        If a nonpositive pivot is met.
    """
    dense_max = DEFAULT_DENSE_FACTOR_MAX if dense_max is None else dense_max
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"SPD factorization needs a square matrix, got {M.shape}")
    n = M.shape[0]
    asym = asymmetry(M)
    if asym > sym_tol:
        warnings.warn(f"matrix asymmetry {asym:.3e} exceeds {sym_tol:.0e}; symmetrizing", RuntimeWarning,
                      stacklevel=2)

    if isinstance(M, SparseMatrix) and n > dense_max:
        S = M.to_scipy()
        S = ((S + S.T) * 0.5).tocsr()
        perm = reverse_cuthill_mckee(S, symmetric_mode=True).astype(np.int64)
        Sp = sp.coo_array(S[perm][:, perm])
        low = Sp.row >= Sp.col
        r, c, v = Sp.row[low], Sp.col[low], Sp.data[low]
        bw = int((r - c).max()) if r.size else 0
        ab = np.zeros((bw + 1, n))
        ab[r - c, c] = v
        try:
            cb = sla.cholesky_banded(ab, lower=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise NotSpd(f"banded Cholesky failed: {exc}") from None
        return SpdFactor(n, "banded", cb, perm)

    a = M.to_scipy().toarray() if isinstance(M, SparseMatrix) else np.asarray(M, dtype=np.float64)
    a = 0.5 * (a + a.T)
    if not np.all(np.isfinite(a)):
        raise NotSpd("matrix has non-finite entries")
    try:
        L = sla.cholesky(a, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NotSpd(f"Cholesky failed: {exc}") from None
    return SpdFactor(n, "dense", L, None)


def spd_solve(f: SpdFactor, b) -> np.ndarray:
    """Solve ``M x = b`` with a factor from :func:`spd_factorize`.

    ``b`` may be a vector or a matrix of right-hand sides (one per column).
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != f.dimension:
        raise DimensionMismatch(f"right-hand side of length {b.shape[0]} for a factor of order {f.dimension}")
    if f.dimension == 0:
        return b.copy()
    if f.form == "dense":
        return sla.cho_solve((f.factor, True), b, check_finite=False)
    x = np.empty_like(b)
    x[f.perm] = sla.cho_solve_banded((f.factor, True), b[f.perm], check_finite=False)
    return x


def is_spd(M) -> bool:
    try:
        spd_factorize(M)
    except NotSpd:
        return False
    return True


# --------------------------------------------------------------------------
# dense certification
# --------------------------------------------------------------------------

def dense_eigenvalues(M, *, cap=None) -> np.ndarray:
    """All eigenvalues of a square matrix, as a complex array.

    Symmetric inputs go to the symmetric solver (real spectrum); everything
    else through Hessenberg reduction and shifted QR (LAPACK ``geev``).
    """
    a = as_dense(M, cap)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"eigenvalues need a square matrix, got {a.shape}")
    try:
        if asymmetry(a) <= 1e-14:
            return sla.eigvalsh(0.5 * (a + a.T)).astype(np.complex128)
        return sla.eigvals(a)
    except sla.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None


def singular_values(M, *, cap=None) -> np.ndarray:
    return sla.svdvals(as_dense(M, cap))


def two_norm_condition(M, *, cap=None) -> float:
    """Spectral condition number ``sigma_max / sigma_min``."""
    a = as_dense(M, cap)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"condition number needs a square matrix, got {a.shape}")
    s = sla.svdvals(a)
    if s[0] == 0.0 or s[-1] < 1e-14 * s[0]:
        raise Singular(f"smallest singular value {s[-1]:.3e} below 1e-14 * {s[0]:.3e}")
    return float(s[0] / s[-1])


def frobenius_norm_sq(M) -> float:
    if isinstance(M, SparseMatrix):
        return float(M.data @ M.data)
    a = np.asarray(M, dtype=np.float64)
    return float(np.sum(a * a))


def trace_product(P, A) -> float:
    """``tr(P A)`` summed over stored entries only."""
    P, A = as_sparse(P), as_sparse(A)
    if P.shape[1] != A.shape[0] or P.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"tr(PA) undefined for shapes {P.shape} and {A.shape}")
    return float(P.to_scipy().multiply(A.to_scipy().T).sum())
