"""The 3x3 block double saddle point system.

Unknowns are ordered ``u = [x; y; z]`` with sizes ``n, l, m`` and the system
matrix is::

    [  A    0   B^T ]
    [  0    D   C   ]
    [ -B  -C^T  0   ]

with ``A`` n x n, ``B`` m x n, ``C`` l x m and ``D`` l x l.
"""
import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla

from ._config import dense_cap
from .errors import DimensionMismatch, NotSpd, ZeroRhs
from .linalg import SparseMatrix, as_sparse, spd_factorize
from .mmio import read_mtx, read_vec, write_mtx, write_vec

RANK_RTOL = 1e-10
RANK_CHECK_MAX = 2000


@dataclass(frozen=True)
class DsppBlocks:
    A: SparseMatrix
    B: SparseMatrix
    C: SparseMatrix
    D: SparseMatrix

    def __post_init__(self):
        for name in "ABCD":
            object.__setattr__(self, name, as_sparse(getattr(self, name)))
        n, l, m = self.A.shape[0], self.D.shape[0], self.B.shape[0]
        expected = {"A": (n, n), "B": (m, n), "C": (l, m), "D": (l, l)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(
                    f"block {name} has shape {getattr(self, name).shape}, expected {shape} "
                    f"for n={n}, l={l}, m={m}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def l(self):  # noqa: E743
        return self.D.shape[0]

    @property
    def m(self):
        return self.B.shape[0]

    @property
    def order(self):
        return self.n + self.l + self.m

    @property
    def sizes(self):
        return self.n, self.l, self.m

    @cached_property
    def Bt(self):
        return self.B.T

    @cached_property
    def Ct(self):
        return self.C.T

    def split(self, u):
        """Views of the x, y, z parts of ``u`` (vectors or column stacks)."""
        n, l = self.n, self.l
        return u[:n], u[n:n + l], u[n + l:]


@dataclass(frozen=True)
class Rhs:
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.p, self.q, self.r])

    @classmethod
    def from_vector(cls, b, blocks: DsppBlocks):
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (blocks.order,):
            raise DimensionMismatch(f"rhs of length {b.shape} for a system of order {blocks.order}")
        p, q, r = blocks.split(b)
        return cls(p.copy(), q.copy(), r.copy())


@dataclass
class ValidationReport:
    a_spd: bool
    d_spd: bool
    d_sps: Optional[bool]
    b_full_row_rank: Optional[bool]
    c_full_row_rank: Optional[bool]
    nonsingular_estimate: Optional[float]
    rank_rtol: float = RANK_RTOL
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        flags = [self.a_spd, self.d_sps, self.b_full_row_rank]
        return all(f is not False for f in flags)


def assemble_full(blocks: DsppBlocks) -> SparseMatrix:
    return SparseMatrix.block([
        [blocks.A, None, blocks.Bt],
        [None, blocks.D, blocks.C],
        [-blocks.B, -blocks.Ct, None],
    ])


def apply_operator(blocks: DsppBlocks, u) -> np.ndarray:
    """Matrix-free product with the system matrix (vector or column stack)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[0] != blocks.order:
        raise DimensionMismatch(f"vector of length {u.shape[0]} for a system of order {blocks.order}")
    x, y, z = blocks.split(u)
    return np.concatenate([
        blocks.A @ x + blocks.Bt @ z,
        blocks.D @ y + blocks.C @ z,
        -(blocks.B @ x) - blocks.Ct @ y,
    ])


def residual(blocks: DsppBlocks, u, b) -> float:
    """Relative residual ``||B u - b|| / ||b||``."""
    b = np.asarray(b, dtype=np.float64)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        raise ZeroRhs("relative residual undefined for a zero right-hand side")
    return float(np.linalg.norm(apply_operator(blocks, u) - b) / nb)


def _full_row_rank(M: SparseMatrix):
    rows, cols = M.shape
    if min(rows, cols) > RANK_CHECK_MAX:
        return None
    if rows > cols:
        return False
    s = sla.svdvals(M.to_scipy().toarray())
    if s.size == 0 or s[0] == 0.0:
        return False
    return int(np.sum(s > RANK_RTOL * s[0])) == rows


def _spd_flag(M):
    try:
        spd_factorize(M)
    except NotSpd:
        return False
    return True


def validate(blocks: DsppBlocks) -> ValidationReport:
    """Check the structural hypotheses on the blocks; never raises."""
    notes = []
    n, l, m = blocks.sizes
    if not n >= m >= l:
        msg = f"dimensions n={n}, m={m}, l={l} violate n >= m >= l"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    for name in "AD":
        M = getattr(blocks, name)
        if not M.is_symmetric():
            notes.append(f"block {name} is not symmetric")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a_spd = _spd_flag(blocks.A)
        d_spd = _spd_flag(blocks.D)

    d_sps = True if d_spd else None
    if not d_spd and l <= dense_cap():
        Dd = blocks.D.to_dense()
        ev = sla.eigvalsh(0.5 * (Dd + Dd.T))
        scale = max(abs(ev[0]), abs(ev[-1]))
        d_sps = bool(ev[0] >= -1e-12 * scale) and blocks.D.is_symmetric()

    b_rank = _full_row_rank(blocks.B)
    c_rank = _full_row_rank(blocks.C)
    if b_rank is None:
        notes.append("rank check of B skipped (too large)")
    if c_rank is None:
        notes.append("rank check of C skipped (too large)")

    sigma_min = None
    if blocks.order <= dense_cap():
        s = sla.svdvals(assemble_full(blocks).to_dense())
        sigma_min = float(s[-1])
    return ValidationReport(a_spd, d_spd, d_sps, b_rank, c_rank, sigma_min, warnings=notes)


# --------------------------------------------------------------------------
# block bundle directories
# --------------------------------------------------------------------------

def save_bundle(directory, blocks: DsppBlocks, b=None):
    """Write ``A.mtx B.mtx C.mtx D.mtx meta.json`` (and ``b.vec``)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in "ABCD":
        write_mtx(d / f"{name}.mtx", getattr(blocks, name))
    meta = {"n": blocks.n, "l": blocks.l, "m": blocks.m}
    (d / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    if b is not None:
        write_vec(d / "b.vec", b.vector if isinstance(b, Rhs) else b)


def load_bundle(directory):
    """Read a bundle; returns ``(blocks, b)`` with ``b`` None if absent."""
    d = Path(directory)
    blocks = DsppBlocks(*(read_mtx(d / f"{name}.mtx") for name in "ABCD"))
    meta = json.loads((d / "meta.json").read_text())
    if (meta["n"], meta["l"], meta["m"]) != blocks.sizes:
        raise DimensionMismatch(f"meta.json sizes {meta} disagree with the stored blocks {blocks.sizes}")
    b = read_vec(d / "b.vec") if (d / "b.vec").exists() else None
    if b is not None and b.shape != (blocks.order,):
        raise DimensionMismatch(f"b.vec has {b.size} entries, expected {blocks.order}")
    return blocks, b
