"""Shift-splitting preconditioners and the DS / RDF comparators.

The GSS family shares one block-elimination solve::

    t1 = K1^{-1} r1,  t2 = K2^{-1} r2
    z3 = S^{-1} (r3 + w B t1 + w C^T t2)
    z1 = K1^{-1} (r1 - w B^T z3)
    z2 = K2^{-1} (r2 - w C z3)

with ``S = tau R + w^2 B K1^{-1} B^T + w^2 C^T K2^{-1} C`` and

============  =================  =================
kind          K1                 K2
============  =================  =================
GSS           alpha P + w A      beta Q + w D
RGSS-I        w A                beta Q + w D
RGSS-II       w A                w D
============  =================  =================

For RGSS-I/II ``S`` reduces to ``tau R + w B A^{-1} B^T + w^2 C^T K2^{-1} C``
and ``tau R + w B A^{-1} B^T + w C^T D^{-1} C`` respectively.
"""
import dataclasses
import json
import time
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from ._config import dense_cap
from .errors import ConfigError, DimensionMismatch, DSingular, NotSpd, Singular, TooLarge
from .linalg import SparseMatrix, SpdFactor, frobenius_norm_sq, spd_factorize, spd_solve, trace_product
from .mmio import read_mtx
from .model import DsppBlocks, assemble_full


class Kind(str, Enum):
    GSS = "GSS"
    RGSS_I = "RGSS-I"
    RGSS_II = "RGSS-II"
    DS = "DS"
    RDF = "RDF"
    NONE = "None"
    EXACT = "Exact"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("_", "").replace("-", "")
        key = {"RGSS1": "RGSSI", "RGSS2": "RGSSII", "IDENTITY": "NONE"}.get(key, key)
        for k in cls:
            if k.value.upper().replace("-", "") == key:
                return k
        raise ConfigError(f"unknown preconditioner kind {value!r}")

    @property
    def shift_family(self):
        return self in (Kind.GSS, Kind.RGSS_I, Kind.RGSS_II)

    def __str__(self):
        return self.value


PROPOSED = (Kind.GSS, Kind.RGSS_I, Kind.RGSS_II)
SHIFT_RECIPES = ("Identity", "BlockA", "BlockD", "CCt")
Shift = Union[str, SparseMatrix]


@dataclass(frozen=True)
class GssParams:
    """Scalars and shift matrices; defaults are the Poisson-control choice."""

    alpha: float = 0.01
    beta: float = 0.01
    tau: float = 0.001
    omega: float = 30.0
    P: Shift = "BlockA"
    Q: Shift = "CCt"
    R: Shift = "Identity"

    def __post_init__(self):
        for name in ("alpha", "beta", "tau", "omega"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0.0:
                raise ValueError(f"parameter {name} must be positive, got {v}")
            object.__setattr__(self, name, v)
        for name in "PQR":
            recipe = getattr(self, name)
            if isinstance(recipe, str) and recipe not in SHIFT_RECIPES:
                raise ValueError(f"unknown shift recipe {recipe!r} for {name}; expected one of {SHIFT_RECIPES}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def scaled(self):
        """Parameters of the scaled preconditioner: (a/w, b/w, t/w, 1)."""
        w = self.omega
        return self.replace(alpha=self.alpha / w, beta=self.beta / w, tau=self.tau / w, omega=1.0)

    def describe(self):
        out = {"alpha": self.alpha, "beta": self.beta, "tau": self.tau, "omega": self.omega}
        for name in "PQR":
            recipe = getattr(self, name)
            out[name] = recipe if isinstance(recipe, str) else "Custom"
        return out


def expand_shift(recipe: Shift, blocks: DsppBlocks, role: str) -> SparseMatrix:
    """Materialize shift matrix ``role`` ("P", "Q" or "R") for ``blocks``."""
    size = {"P": blocks.n, "Q": blocks.l, "R": blocks.m}[role]
    if isinstance(recipe, SparseMatrix):
        M = recipe
    elif recipe == "Identity":
        M = SparseMatrix.identity(size)
    elif recipe == "BlockA":
        M = blocks.A
    elif recipe == "BlockD":
        M = blocks.D
    elif recipe == "CCt":
        M = blocks.C @ blocks.Ct
    else:
        raise ValueError(f"unknown shift recipe {recipe!r}")
    if M.shape != (size, size):
        raise DimensionMismatch(f"shift {role} must be {size}x{size}, recipe {recipe!r} gives {M.shape}")
    return M


def _spectral_norm_sym(M: SparseMatrix) -> float:
    if M.shape[0] <= dense_cap():
        return float(np.max(np.abs(sla.eigvalsh(M.to_dense()))))
    return float(abs(spla.eigsh(M.to_scipy(), k=1, which="LM", return_eigenvectors=False)[0]))


def checked_shifts(blocks: DsppBlocks, params: GssParams, roles="PQR"):
    """Expand the shift recipes and verify each is SPD.

    A ``CCt`` shift that fails to factor gets a ridge of
    ``1e-12 * ||C C^T||_2`` on the diagonal, with a warning.
    """
    out = {}
    for role in roles:
        recipe = getattr(params, role)
        M = expand_shift(recipe, blocks, role)
        if not (isinstance(recipe, str) and recipe == "Identity"):
            try:
                spd_factorize(M)
            except NotSpd:
                if recipe != "CCt":
                    raise NotSpd(f"shift matrix {role} ({recipe if isinstance(recipe, str) else 'Custom'}) "
                                 "is not SPD") from None
                ridge = 1e-12 * _spectral_norm_sym(M)
                warnings.warn(f"C C^T is not numerically SPD; adding ridge {ridge:.3e}", RuntimeWarning,
                              stacklevel=2)
                M = M + SparseMatrix.identity(M.shape[0], ridge)
                try:
                    spd_factorize(M)
                except NotSpd:
                    raise NotSpd("C C^T is not SPD even after the ridge") from None
        out[role] = M
    return out


@dataclass(frozen=True, eq=False)
class PreparedPreconditioner:
    """Cached factorizations for repeated application.

    For the shift family ``factor1``/``factor2`` factor ``K1``/``K2`` and
    ``schur`` is the dense m x m Schur-like matrix.  For DS/RDF ``factor1``
    and ``factor2`` factor ``aI + A`` / ``aI + D`` (``A`` / ``D`` for RDF),
    ``schur`` belongs to the first factor and ``schur2`` to the second.
    """

    kind: Kind
    blocks: DsppBlocks
    params: Optional[GssParams] = None
    factor1: Optional[SpdFactor] = None
    factor2: Optional[SpdFactor] = None
    schur: Optional[np.ndarray] = None
    schur_factor: Optional[SpdFactor] = None
    schur2: Optional[np.ndarray] = None
    schur2_factor: Optional[SpdFactor] = None
    lu: object = None
    setup_seconds: float = 0.0

    @property
    def omega(self):
        return None if self.params is None else self.params.omega

    def apply(self, r):
        return apply(self, r)


def _dense_sym(S):
    return 0.5 * (S + S.T)


def _require_dense_ok(m, what):
    cap = dense_cap()
    if m > cap:
        raise TooLarge(f"{what} is assembled densely; m={m} exceeds the dense cap {cap}")


def _schur(blocks, diag_term, F1, c1, F2, c2):
    """``diag_term + c1 B F1^{-1} B^T + c2 C^T F2^{-1} C`` as a dense SPD matrix."""
    S = diag_term.copy()
    if blocks.B.nnz:
        S += c1 * (blocks.B @ spd_solve(F1, blocks.Bt.to_scipy().toarray()))
    if blocks.C.nnz:
        S += c2 * (blocks.Ct @ spd_solve(F2, blocks.C.to_scipy().toarray()))
    return _dense_sym(S)


def _factor_d(M, kind):
    try:
        return spd_factorize(M)
    except NotSpd:
        raise DSingular(f"{kind} needs a strictly SPD block D") from None


def prepare(blocks: DsppBlocks, params: Optional[GssParams] = None, kind=Kind.GSS) -> PreparedPreconditioner:
    """Factor everything one application of the preconditioner needs."""
    kind = Kind.parse(kind)
    params = GssParams() if params is None else params
    t0 = time.perf_counter()
    n, l, m = blocks.sizes

    if kind is Kind.NONE:
        return PreparedPreconditioner(kind, blocks, params, setup_seconds=time.perf_counter() - t0)
    if kind is Kind.EXACT:
        lu = spla.splu(assemble_full(blocks).to_scipy().tocsc())
        return PreparedPreconditioner(kind, blocks, params, lu=lu, setup_seconds=time.perf_counter() - t0)

    _require_dense_ok(m, f"the {kind} Schur matrix")
    w = params.omega
    if kind.shift_family:
        roles = {Kind.GSS: "PQR", Kind.RGSS_I: "QR", Kind.RGSS_II: "R"}[kind]
        shifts = checked_shifts(blocks, params, roles)
        if kind is Kind.GSS:
            K1 = params.alpha * shifts["P"] + w * blocks.A
        else:
            K1 = w * blocks.A
        try:
            F1 = spd_factorize(K1)
        except NotSpd:
            raise NotSpd(f"(1,1) block of {kind} is not SPD") from None
        if kind is Kind.RGSS_II:
            F2 = _factor_d(w * blocks.D, kind)
        else:
            try:
                F2 = spd_factorize(params.beta * shifts["Q"] + w * blocks.D)
            except NotSpd:
                raise NotSpd(f"(2,2) block of {kind} is not SPD") from None
        tauR = params.tau * shifts["R"].to_dense()
        S = _schur(blocks, tauR, F1, w * w, F2, w * w)
        SF = spd_factorize(S)
        return PreparedPreconditioner(kind, blocks, params, F1, F2, S, SF,
                                      setup_seconds=time.perf_counter() - t0)

    # DS / RDF
    a = params.alpha
    if kind is Kind.DS:
        F1 = spd_factorize(blocks.A + SparseMatrix.identity(n, a))
        F2 = spd_factorize(blocks.D + SparseMatrix.identity(l, a))
    else:
        try:
            F1 = spd_factorize(blocks.A)
        except NotSpd:
            raise Singular("RDF needs a nonsingular (SPD) block A") from None
        F2 = _factor_d(blocks.D, kind)
    aI = a * np.eye(m)
    S1 = _schur(blocks, aI, F1, 1.0, F2, 0.0)
    S2 = _dense_sym(aI + (blocks.Ct @ spd_solve(F2, blocks.C.to_scipy().toarray()) if blocks.C.nnz else 0.0))
    return PreparedPreconditioner(kind, blocks, params, F1, F2, S1, spd_factorize(S1), S2, spd_factorize(S2),
                                  setup_seconds=time.perf_counter() - t0)


def apply(prep: PreparedPreconditioner, r) -> np.ndarray:
    """Solve ``M z = r`` for the prepared preconditioner ``M``.

    ``r`` may be a vector or a stack of column vectors.
    """
    blocks = prep.blocks
    r = np.asarray(r, dtype=np.float64)
    if r.shape[0] != blocks.order:
        raise DimensionMismatch(f"vector of length {r.shape[0]} for a system of order {blocks.order}")
    kind = prep.kind
    if kind is Kind.NONE:
        return r.copy()
    if kind is Kind.EXACT:
        return prep.lu.solve(r)

    r1, r2, r3 = blocks.split(r)
    B, Bt, C, Ct = blocks.B, blocks.Bt, blocks.C, blocks.Ct
    if kind.shift_family:
        w = prep.params.omega
        t1 = spd_solve(prep.factor1, r1)
        t2 = spd_solve(prep.factor2, r2)
        z3 = spd_solve(prep.schur_factor, r3 + w * (B @ t1 + Ct @ t2))
        z1 = spd_solve(prep.factor1, r1 - w * (Bt @ z3))
        z2 = spd_solve(prep.factor2, r2 - w * (C @ z3))
        return np.concatenate([z1, z2, z3])

    a = prep.params.alpha
    s1, s2, s3 = a * r1, a * r2, a * r3
    # first factor
    w2 = s2 / a
    w3 = spd_solve(prep.schur_factor, s3 + B @ spd_solve(prep.factor1, s1))
    w1 = spd_solve(prep.factor1, s1 - Bt @ w3)
    # second factor
    z1 = w1 / a
    z3 = spd_solve(prep.schur2_factor, w3 + Ct @ spd_solve(prep.factor2, w2))
    z2 = spd_solve(prep.factor2, w2 - C @ z3)
    return np.concatenate([z1, z2, z3])


def prepare_ds(blocks, alpha):
    return prepare(blocks, GssParams(alpha=alpha), Kind.DS)


def prepare_rdf(blocks, alpha):
    return prepare(blocks, GssParams(alpha=alpha), Kind.RDF)


apply_ds = apply
apply_rdf = apply


# --------------------------------------------------------------------------
# explicit matrices
# --------------------------------------------------------------------------

def _ds_factors(blocks, a, relaxed):
    n, l, m = blocks.sizes
    In, Il, Im = (SparseMatrix.identity(k, a) for k in (n, l, m))
    F1 = blocks.A if relaxed else blocks.A + In
    F2 = blocks.D if relaxed else blocks.D + Il
    P1 = SparseMatrix.block([[F1, None, blocks.Bt], [None, Il, None], [-blocks.B, None, Im]])
    P2 = SparseMatrix.block([[In, None, None], [None, F2, blocks.C], [None, -blocks.Ct, Im]])
    return P1, P2


def assemble_m(blocks: DsppBlocks, params: Optional[GssParams] = None, kind=Kind.GSS) -> SparseMatrix:
    """The preconditioner as an explicit sparse matrix (for certification)."""
    kind = Kind.parse(kind)
    params = GssParams() if params is None else params
    if kind is Kind.NONE:
        return SparseMatrix.identity(blocks.order)
    if kind is Kind.EXACT:
        return assemble_full(blocks)
    w = params.omega
    if kind.shift_family:
        roles = {Kind.GSS: "PQR", Kind.RGSS_I: "QR", Kind.RGSS_II: "R"}[kind]
        sh = {role: expand_shift(getattr(params, role), blocks, role) for role in roles}
        K1 = w * blocks.A + (params.alpha * sh["P"] if kind is Kind.GSS else SparseMatrix.zeros(blocks.n, blocks.n))
        K2 = w * blocks.D + (params.beta * sh["Q"] if kind is not Kind.RGSS_II
                             else SparseMatrix.zeros(blocks.l, blocks.l))
        return SparseMatrix.block([
            [K1, None, w * blocks.Bt],
            [None, K2, w * blocks.C],
            [-w * blocks.B, -w * blocks.Ct, params.tau * sh["R"]],
        ])
    P1, P2 = _ds_factors(blocks, params.alpha, relaxed=kind is Kind.RDF)
    return (P1 @ P2) / params.alpha


def assemble_theta(blocks: DsppBlocks, params: GssParams) -> SparseMatrix:
    sh = {role: expand_shift(getattr(params, role), blocks, role) for role in "PQR"}
    return SparseMatrix.block([
        [params.alpha * sh["P"], None, None],
        [None, params.beta * sh["Q"], None],
        [None, None, params.tau * sh["R"]],
    ])


def assemble_n_gss(blocks: DsppBlocks, params: GssParams) -> SparseMatrix:
    """The complementary splitting matrix ``N = Theta - (1 - w) B``."""
    sh = {role: expand_shift(getattr(params, role), blocks, role) for role in "PQR"}
    c = 1.0 - params.omega
    return SparseMatrix.block([
        [params.alpha * sh["P"] - c * blocks.A, None, -c * blocks.Bt],
        [None, params.beta * sh["Q"] - c * blocks.D, -c * blocks.C],
        [c * blocks.B, c * blocks.Ct, params.tau * sh["R"]],
    ])


def phi(blocks: DsppBlocks, params: GssParams) -> float:
    """``||N||_F^2`` through its closed-form expansion in the block norms."""
    sh = {role: expand_shift(getattr(params, role), blocks, role) for role in "PQR"}
    a, b, t, w = params.alpha, params.beta, params.tau, params.omega
    c2 = (1.0 - w) ** 2
    return (a * a * frobenius_norm_sq(sh["P"]) + b * b * frobenius_norm_sq(sh["Q"])
            + t * t * frobenius_norm_sq(sh["R"])
            + c2 * (frobenius_norm_sq(blocks.A) + frobenius_norm_sq(blocks.D))
            + 2.0 * a * (w - 1.0) * trace_product(sh["P"], blocks.A)
            + 2.0 * b * (w - 1.0) * trace_product(sh["Q"], blocks.D)
            + 2.0 * c2 * (frobenius_norm_sq(blocks.B) + frobenius_norm_sq(blocks.C)))


def ds_alpha(blocks: DsppBlocks) -> float:
    """Default DS parameter from the block Frobenius norms."""
    n, l, m = blocks.sizes
    top = np.sqrt(frobenius_norm_sq(blocks.A) + 2.0 * frobenius_norm_sq(blocks.B))
    bottom = np.sqrt(frobenius_norm_sq(blocks.D) + 2.0 * frobenius_norm_sq(blocks.C))
    return float((top + bottom) / (2.0 * (n + m + l)))


# --------------------------------------------------------------------------
# parameter files
# --------------------------------------------------------------------------

def params_from_dict(d, base_dir=None):
    """Parse ``{kind, alpha, beta, tau, omega, P, Q, R}``; returns ``(kind, params)``.

    Custom shifts are written ``{"Custom": "path/to/matrix.mtx"}``; relative
    paths resolve against ``base_dir``.
    """
    d = dict(d)
    kind = Kind.parse(d.pop("kind", "GSS"))
    fields = {}
    for name in ("alpha", "beta", "tau", "omega"):
        if name in d:
            fields[name] = float(d.pop(name))
    for name in "PQR":
        if name not in d:
            continue
        recipe = d.pop(name)
        if isinstance(recipe, dict):
            if set(recipe) != {"Custom"}:
                raise ConfigError(f"shift {name}: expected {{'Custom': path}}, got {recipe}")
            path = Path(recipe["Custom"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            recipe = read_mtx(path)
        elif recipe not in SHIFT_RECIPES:
            raise ConfigError(f"shift {name}: unknown recipe {recipe!r}")
        fields[name] = recipe
    if d:
        raise ConfigError(f"unknown parameter keys: {sorted(d)}")
    try:
        return kind, GssParams(**fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_params(path):
    path = Path(path)
    return params_from_dict(json.loads(path.read_text()), base_dir=path.parent)


def dump_params(path, kind, params: GssParams, custom_paths=None):
    """Write a parameter file; custom shifts need an entry in ``custom_paths``."""
    out = {"kind": Kind.parse(kind).value, "alpha": params.alpha, "beta": params.beta,
           "tau": params.tau, "omega": params.omega}
    for name in "PQR":
        recipe = getattr(params, name)
        if isinstance(recipe, str):
            out[name] = recipe
        else:
            if not custom_paths or name not in custom_paths:
                raise ConfigError(f"custom shift {name} needs a Matrix Market path")
            out[name] = {"Custom": str(custom_paths[name])}
    Path(path).write_text(json.dumps(out, indent=2) + "\n")
