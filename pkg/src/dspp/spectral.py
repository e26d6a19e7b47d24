"""Dense spectral certification of the preconditioned operators.

Everything here forms ``M^{-1} B`` (or related small matrices) densely and is
therefore limited by the dense cap.
"""
import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from ._config import dense_cap
from .errors import DSingular, NotSpd, TooLarge
from .linalg import spd_factorize, spd_solve, two_norm_condition
from .model import DsppBlocks, assemble_full
from .preconditioners import GssParams, Kind, PreparedPreconditioner, apply, checked_shifts, prepare
from .solvers import SolverConfig, gmres

MULTIPLICITY_RTOL = 1e-6
BOUND_INFLATION = 1e-8
COMPLEX_RTOL = 1e-8
CLUSTER_EXCLUDE = 1e-12


@dataclass
class BoundCheck:
    name: str
    passed: bool
    value: float
    lower: Optional[float] = None
    upper: Optional[float] = None

    @property
    def margin(self):
        """Distance to the nearest violated side (negative when failing)."""
        parts = []
        if self.lower is not None:
            parts.append(self.value - self.lower)
        if self.upper is not None:
            parts.append(self.upper - self.value)
        return min(parts) if parts else float("nan")


@dataclass
class SpectrumReport:
    kind: Kind
    eigenvalues: np.ndarray
    omega: Optional[float]
    cluster_radius: float
    one_over_omega_multiplicity: Optional[int]
    distances: Optional[np.ndarray] = None
    bound_checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.passed for c in self.bound_checks)


def _dense_guard(order, what):
    cap = dense_cap()
    if order > cap:
        raise TooLarge(f"{what} needs a dense matrix of order {order} > cap {cap}")


def preconditioned_operator(blocks: DsppBlocks, prep: PreparedPreconditioner) -> np.ndarray:
    """Dense ``M^{-1} B``."""
    _dense_guard(blocks.order, "the preconditioned operator")
    return apply(prep, assemble_full(blocks).to_dense())


def _inflate(bound, sign):
    return bound + sign * BOUND_INFLATION * max(1.0, abs(bound))


def split_cluster(eigenvalues, omega):
    """Split off the eigenvalues with ``|1 - w mu| < 1e-12`` (the ``1/w`` cluster)."""
    near = np.abs(1.0 - omega * eigenvalues) < CLUSTER_EXCLUDE
    return eigenvalues[near], eigenvalues[~near]


def preconditioned_spectrum(blocks: DsppBlocks, prep: PreparedPreconditioner) -> SpectrumReport:
    lam = sla.eigvals(preconditioned_operator(blocks, prep))
    kind = prep.kind
    omega = prep.omega if kind.shift_family else None
    radius = float(np.max(np.abs(lam - 1.0))) if lam.size else 0.0
    mult, dist, checks = None, None, []
    if omega is not None:
        dist = np.sort(np.abs(lam - 1.0 / omega) * omega)
        mult = int(np.sum(dist < MULTIPLICITY_RTOL))
    if kind is Kind.GSS:
        checks.append(BoundCheck("cluster_radius", radius < 1.0, radius, upper=1.0))
    elif kind is Kind.RGSS_I:
        checks.append(BoundCheck("multiplicity_n", mult >= blocks.n, float(mult), lower=float(blocks.n)))
    elif kind is Kind.RGSS_II:
        need = blocks.n + blocks.l
        checks.append(BoundCheck("multiplicity_n_plus_l", mult >= need, float(mult), lower=float(need)))
    elif kind is Kind.NONE:
        re_min = float(np.min(lam.real)) if lam.size else 0.0
        checks.append(BoundCheck("positive_stable", re_min > 0.0, re_min, lower=0.0))
    return SpectrumReport(kind, lam, omega, radius, mult, dist, checks)


def _schur_bt(blocks):
    """Dense ``B A^{-1} B^T``."""
    FA = spd_factorize(blocks.A)
    return _sym(blocks.B @ spd_solve(FA, blocks.Bt.to_scipy().toarray()))


def _ct_dinv_c(blocks):
    try:
        FD = spd_factorize(blocks.D)
    except NotSpd:
        raise DSingular("the bound needs a strictly SPD block D") from None
    return _sym(blocks.Ct @ spd_solve(FD, blocks.C.to_scipy().toarray()))


def _sym(X):
    return 0.5 * (X + X.T)


def _pencil_extremes(X, Y):
    """Extreme eigenvalues of ``Y^{-1} X`` for symmetric ``X`` and SPD ``Y``."""
    if X.shape[0] == 0:
        return 0.0, 0.0
    ev = sla.eigh(X, Y, eigvals_only=True)
    return float(ev[0]), float(ev[-1])


@dataclass
class Rgss1Bounds:
    d_min: float
    d_max: float
    s_min: float
    s_max: float
    c_sigma_max: float
    beta: float
    tau: float

    @property
    def complex_real_part(self):
        return (0.5 * (self.d_min / self.beta + self.s_min / self.tau),
                0.5 * (self.d_max / self.beta + self.s_max / self.tau))

    @property
    def real_interval(self):
        return (min(self.d_min / self.beta, self.s_min / self.tau),
                max(self.d_max / self.beta, self.s_max / self.tau))


def rgss1_bounds(blocks: DsppBlocks, params: GssParams) -> Rgss1Bounds:
    """Ingredients of the RGSS-I bounds on ``theta = mu / (1 - w mu)``.

    ``lambda(Q^{-1}D)`` and ``lambda(R^{-1}S)`` come from symmetric-definite
    pencils; the imaginary-part bound uses the singular values of
    ``Q^{-1/2} C R^{-1/2} / sqrt(beta tau)``.
    """
    _dense_guard(max(blocks.m, blocks.l), "the RGSS-I bounds")
    sh = checked_shifts(blocks, params, "QR")
    Q, R = sh["Q"].to_dense(), sh["R"].to_dense()
    D = blocks.D.to_dense()
    S = _schur_bt(blocks)
    d_min, d_max = _pencil_extremes(_sym(D), Q)
    s_min, s_max = _pencil_extremes(S, R)
    Lq = sla.cholesky(Q, lower=True)
    Lr = sla.cholesky(R, lower=True)
    Ct = sla.solve_triangular(Lq, blocks.C.to_dense(), lower=True)
    Ct = sla.solve_triangular(Lr, Ct.T, lower=True).T
    sig = float(sla.svdvals(Ct)[0]) if Ct.size else 0.0
    return Rgss1Bounds(d_min, d_max, s_min, s_max, sig / np.sqrt(params.beta * params.tau),
                       params.beta, params.tau)


def rgss1_bound_check(blocks: DsppBlocks, params: GssParams, spectrum: SpectrumReport):
    """Check every non-cluster RGSS-I eigenvalue against its bounds.

    Eigenvalues with ``|1 - w mu| < 1e-12`` form the cluster; each other
    ``mu`` is mapped to ``theta = mu / (1 - w mu)``.  Complex ``theta`` must
    satisfy the real-part and imaginary-part bounds, real ``theta`` the
    interval ``[min(.), max(.)]``.  All bounds are inflated by 1e-8.
    """
    w = params.omega
    bounds = rgss1_bounds(blocks, params)
    _, rest = split_cluster(spectrum.eigenvalues, w)
    theta = rest / (1.0 - w * rest)
    checks = []
    re_lo, re_hi = bounds.complex_real_part
    lo, hi = bounds.real_interval
    for k, t in enumerate(theta):
        if abs(t.imag) > COMPLEX_RTOL * max(1.0, abs(t)):
            ok_re = _inflate(re_lo, -1) <= t.real <= _inflate(re_hi, 1)
            checks.append(BoundCheck(f"theta[{k}].real", ok_re, float(t.real), re_lo, re_hi))
            im_hi = bounds.c_sigma_max
            checks.append(BoundCheck(f"theta[{k}].imag", abs(t.imag) <= _inflate(im_hi, 1), float(abs(t.imag)),
                                     upper=im_hi))
        else:
            ok = _inflate(lo, -1) <= t.real <= _inflate(hi, 1)
            checks.append(BoundCheck(f"theta[{k}]", ok, float(t.real), lo, hi))
    return checks


def _rgss2_extremes(blocks, params):
    _dense_guard(blocks.m, "the RGSS-II interval")
    R = checked_shifts(blocks, params, "R")["R"].to_dense()
    return _pencil_extremes(_schur_bt(blocks), R) + _pencil_extremes(_ct_dinv_c(blocks), R)


def rgss2_interval(blocks: DsppBlocks, params: GssParams):
    """Stated interval for the non-cluster RGSS-II eigenvalues.

    ``[(em + xm + t) / (w eM + w xM + t), (eM + xM + t) / (w em + w xm + t)]``
    with ``e`` the eigenvalues of ``R^{-1} B A^{-1} B^T`` and ``x`` those of
    ``R^{-1} C^T D^{-1} C``.  It is not a valid enclosure in general (see
    :func:`rgss2_sharp_interval`); it holds when ``tau`` is small against the
    spread of ``e + x``.
    """
    eta_min, eta_max, xi_min, xi_max = _rgss2_extremes(blocks, params)
    w, tau = params.omega, params.tau
    lam_min = (eta_min + xi_min + tau) / (w * eta_max + w * xi_max + tau)
    lam_max = (eta_max + xi_max + tau) / (w * eta_min + w * xi_min + tau)
    return lam_min, lam_max


def rgss2_sharp_interval(blocks: DsppBlocks, params: GssParams):
    """Provable enclosure ``[s/(t + w s)]`` for ``s`` in ``[em + xm, eM + xM]``.

    The non-cluster eigenvalues solve ``(S + W) x = lam (t R + w S + w W) x``
    with ``S = B A^{-1} B^T`` and ``W = C^T D^{-1} C``, so each is
    ``s / (t + w s)`` for a Rayleigh quotient ``s`` of ``R^{-1}(S + W)``;
    the map is increasing in ``s``.
    """
    eta_min, eta_max, xi_min, xi_max = _rgss2_extremes(blocks, params)
    w, tau = params.omega, params.tau
    lo, hi = eta_min + xi_min, eta_max + xi_max
    return lo / (tau + w * lo), hi / (tau + w * hi)


def rgss2_pencil(blocks: DsppBlocks, params: GssParams):
    """Dense ``(S + W, t R + w S + w W)`` whose eigenvalues are the non-cluster spectrum."""
    R = checked_shifts(blocks, params, "R")["R"].to_dense()
    X = _schur_bt(blocks) + _ct_dinv_c(blocks)
    return X, params.tau * R + params.omega * X


def rgss2_interval_check(blocks: DsppBlocks, params: GssParams, spectrum: SpectrumReport, sharp=False):
    lam_min, lam_max = (rgss2_sharp_interval if sharp else rgss2_interval)(blocks, params)
    _, rest = split_cluster(spectrum.eigenvalues, params.omega)
    checks = []
    tag = "sharp" if sharp else "stated"
    for k, mu in enumerate(rest):
        ok = (abs(mu.imag) <= BOUND_INFLATION * max(1.0, abs(mu))
              and _inflate(lam_min, -1) <= mu.real <= _inflate(lam_max, 1))
        checks.append(BoundCheck(f"{tag}_interval[{k}]", ok, float(mu.real), lam_min, lam_max))
    return checks


@dataclass
class KrylovCheck:
    iterations: int
    bound: int
    passed: bool
    converged: bool


def krylov_bound_check(blocks: DsppBlocks, params: GssParams, b=None, tol=1e-12):
    """RGSS-II GMRES should finish within ``m + 1`` steps (+1 for roundoff)."""
    if b is None:
        b = np.ones(blocks.order)
    prep = prepare(blocks, params, Kind.RGSS_II)
    _, rep = gmres(blocks, b, prep, SolverConfig(tol=tol, max_iter=blocks.order + 5))
    bound = blocks.m + 1
    return KrylovCheck(rep.iterations, bound, rep.converged and rep.iterations <= bound + 1, rep.converged)


def preconditioned_condition_number(blocks: DsppBlocks, prep: PreparedPreconditioner) -> float:
    return two_norm_condition(preconditioned_operator(blocks, prep))


def write_scatter_csv(path, reports):
    """Eigenvalue scatter rows ``re, im, kind, omega`` for one or more spectra."""
    if isinstance(reports, SpectrumReport):
        reports = [reports]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "kind", "omega"])
        for rep in reports:
            omega = "" if rep.omega is None else repr(rep.omega)
            for lam in rep.eigenvalues:
                w.writerow([repr(float(lam.real)), repr(float(lam.imag)), rep.kind.value, omega])
