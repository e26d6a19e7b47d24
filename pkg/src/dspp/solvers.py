"""Stationary shift-splitting iteration and preconditioned full GMRES.

Both solvers stop on the true relative residual of the original system,
``||B u - b|| / ||b||``, evaluated after every step.
"""
import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import _kernels
from ._config import dense_cap
from .errors import DimensionMismatch, TooLarge
from .model import DsppBlocks, apply_operator, assemble_full
from .preconditioners import GssParams, Kind, PreparedPreconditioner, apply, assemble_m, assemble_n_gss, \
    assemble_theta, prepare

BREAKDOWN_RTOL = 1e-14
DIVERGED_RES = 1e100


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 5000
    side: str = "left"
    record_history: bool = True
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        side = str(self.side).lower()
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "max_iter", int(self.max_iter))


@dataclass
class SolveReport:
    """Outcome of one solve.

    ``status`` is one of ``converged``, ``max_iter``, ``breakdown`` or
    ``diverged``; ``res_history[0]`` is the residual of the initial guess.
    """

    converged: bool
    iterations: int
    res_history: list = field(default_factory=list)
    setup_seconds: float = 0.0
    iterate_seconds: float = 0.0
    status: str = "converged"
    final_res: float = float("nan")

    def to_dict(self):
        d = asdict(self)
        d["timings"] = {"setup_seconds": d.pop("setup_seconds"), "iterate_seconds": d.pop("iterate_seconds")}
        return d

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_history_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "RES"])
            for k, res in enumerate(self.res_history):
                w.writerow([k, repr(float(res))])


def _check_rhs(blocks, b):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (blocks.order,):
        raise DimensionMismatch(f"rhs of shape {b.shape} for a system of order {blocks.order}")
    return b


def _trivial_report(t_setup):
    return SolveReport(True, 0, [0.0], t_setup, 0.0, "converged", 0.0)


class _Basis:
    """Row-stacked Krylov vectors with geometric growth."""

    def __init__(self, n, cap):
        self.rows = np.zeros((max(cap, 1), n))

    def ensure(self, k):
        if k >= self.rows.shape[0]:
            grown = np.zeros((max(2 * self.rows.shape[0], k + 1), self.rows.shape[1]))
            grown[:self.rows.shape[0]] = self.rows
            self.rows = grown


def gmres(blocks: DsppBlocks, b, prep: Optional[PreparedPreconditioner] = None,
          cfg: Optional[SolverConfig] = None):
    """Preconditioned full GMRES on the double saddle point system.

    Parameters
    ----------
    blocks : DsppBlocks
    b : ndarray
        Right-hand side of length ``n + l + m``.
    prep : PreparedPreconditioner, optional
        Defaults to no preconditioning.
    cfg : SolverConfig, optional

    Returns
    -------
    u : ndarray
        Best iterate (the last one computed).
    report : SolveReport

    Notes
    -----
    Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass and
    the Hessenberg least-squares problem is updated with Givens rotations.
    ``iterations`` counts Arnoldi steps.  Breakdown and the iteration limit
    are reported through ``status`` rather than raised.
    """
    cfg = SolverConfig() if cfg is None else cfg
    if prep is None:
        prep = prepare(blocks, kind=Kind.NONE)
    b = _check_rhs(blocks, b)
    N = blocks.order
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        return np.zeros(N), _trivial_report(prep.setup_seconds)

    t0 = time.perf_counter()
    right = cfg.side == "right"
    x0 = np.zeros(N) if cfg.x0 is None else np.asarray(cfg.x0, dtype=np.float64).copy()
    if x0.shape != (N,):
        raise DimensionMismatch(f"x0 of shape {x0.shape} for a system of order {N}")

    r_true = b - apply_operator(blocks, x0)
    res = float(np.linalg.norm(r_true)) / nb
    history = [res]

    def finish(x, k, status, res):
        report = SolveReport(status == "converged", k, history if cfg.record_history else [history[0], res],
                             prep.setup_seconds, time.perf_counter() - t0, status, res)
        return x, report

    if res < cfg.tol:
        return finish(x0, 0, "converged", res)

    r0 = r_true if right else apply(prep, r_true)
    beta = float(np.linalg.norm(r0))
    if beta == 0.0:
        # M^{-1} r = 0 with r != 0 cannot happen for a nonsingular M
        return finish(x0, 0, "breakdown", res)

    max_iter = cfg.max_iter
    cap = min(max_iter, N) + 1
    V = _Basis(N, min(cap, 64))
    Z = _Basis(N, min(cap, 64)) if right else None
    V.rows[0] = r0 / beta
    R = np.zeros((min(cap, 64) + 1, min(cap, 64)))
    cs = np.zeros(cap + 1)
    sn = np.zeros(cap + 1)
    g = np.zeros(cap + 2)
    g[0] = beta
    x = x0

    for k in range(max_iter):
        if right:
            Z.ensure(k)
            Z.rows[k] = apply(prep, V.rows[k])
            w = apply_operator(blocks, Z.rows[k])
        else:
            w = apply(prep, apply_operator(blocks, V.rows[k]))

        if k >= R.shape[1]:
            grown = np.zeros((2 * R.shape[1] + 1, 2 * R.shape[1]))
            grown[:R.shape[0], :R.shape[1]] = R
            R = grown
        if k + 2 > cs.shape[0]:
            cs, sn = np.resize(cs, 2 * (k + 2)), np.resize(sn, 2 * (k + 2))
            g = np.concatenate([g, np.zeros(g.shape[0] + 2)])
        h = np.zeros(k + 2)
        h_next = _kernels.mgs_orthogonalize(V.rows, k + 1, w, h)
        h[k + 1] = h_next
        _kernels.givens_update(h, cs, sn, g, k)
        R[:k + 1, k] = h[:k + 1]

        y = sla.solve_triangular(R[:k + 1, :k + 1], g[:k + 1], lower=False, check_finite=False)
        basis = Z.rows if right else V.rows
        x = x0 + basis[:k + 1].T @ y
        res = float(np.linalg.norm(b - apply_operator(blocks, x))) / nb
        history.append(res)
        if not np.isfinite(res) or res > DIVERGED_RES:
            return finish(x, k + 1, "diverged", res)
        if res < cfg.tol:
            return finish(x, k + 1, "converged", res)
        if h_next <= BREAKDOWN_RTOL * beta:
            return finish(x, k + 1, "breakdown", res)
        V.ensure(k + 1)
        V.rows[k + 1] = w / h_next
    return finish(x, max_iter, "max_iter", res)


def stationary_gss(blocks: DsppBlocks, params: GssParams, b, tol=1e-6, max_iter=5000,
                   prep: Optional[PreparedPreconditioner] = None, record_history=True):
    """Shift-splitting fixed-point iteration ``u <- u + M^{-1}(b - B u)`` from zero."""
    b = _check_rhs(blocks, b)
    if prep is None:
        prep = prepare(blocks, params, Kind.GSS)
    N = blocks.order
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        return np.zeros(N), _trivial_report(prep.setup_seconds)
    t0 = time.perf_counter()
    u = np.zeros(N)
    res = 1.0
    history = [res]
    status = "max_iter"
    k = 0
    while k < max_iter:
        r = b - apply_operator(blocks, u)
        u = u + apply(prep, r)
        k += 1
        res = float(np.linalg.norm(b - apply_operator(blocks, u))) / nb
        if record_history:
            history.append(res)
        if not np.isfinite(res) or res > DIVERGED_RES:
            status = "diverged"
            break
        if res < tol:
            status = "converged"
            break
    if not record_history:
        history.append(res)
    report = SolveReport(status == "converged", k, history, prep.setup_seconds, time.perf_counter() - t0,
                         status, res)
    return u, report


def _dense_guard(blocks, what):
    cap = dense_cap()
    if blocks.order > cap:
        raise TooLarge(f"{what} needs dense matrices of order {blocks.order} > cap {cap}")


def iteration_matrix(blocks: DsppBlocks, params: GssParams) -> np.ndarray:
    """Dense ``M^{-1} N`` for the GSS splitting."""
    _dense_guard(blocks, "the iteration matrix")
    M = assemble_m(blocks, params, Kind.GSS).to_dense()
    Nmat = assemble_n_gss(blocks, params).to_dense()
    return sla.solve(M, Nmat)


def iteration_matrix_spectral_radius(blocks: DsppBlocks, params: GssParams) -> float:
    G = iteration_matrix(blocks, params)
    return float(np.max(np.abs(sla.eigvals(G)))) if G.size else 0.0


def convergence_omega_threshold(blocks: DsppBlocks, params: GssParams) -> float:
    """Sufficient lower bound on ``omega`` for the stationary iteration.

    Returns ``max(1/2 - lambda_min(H) / theta**2, 0)`` where
    ``H = (T + T^T)/2``, ``T = Theta^{-1} B`` and ``theta`` is the spectral
    radius of ``T``.  Any ``omega`` strictly above it converges; the bound
    is not necessary.
    """
    _dense_guard(blocks, "the convergence threshold")
    Theta = assemble_theta(blocks, params).to_dense()
    T = sla.solve(Theta, assemble_full(blocks).to_dense())
    lam_min = float(sla.eigvalsh(0.5 * (T + T.T))[0])
    vartheta = float(np.max(np.abs(sla.eigvals(T))))
    return max(0.5 - lam_min / vartheta ** 2, 0.0)
