import csv
import json

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from corpus import OMEGAS, SMALL_SHIFT_PARAMS, STATIONARY_PARAMS, params, random_corpus, rhs_for
from dspp import (GssParams, Kind, SolverConfig, _kernels, apply, assemble_full, gmres, prepare, random_dspp,
                  residual, stationary_gss)
from dspp.errors import DimensionMismatch
from dspp.solvers import convergence_omega_threshold, iteration_matrix, iteration_matrix_spectral_radius
from dspp.spectral import preconditioned_operator

UNIT = GssParams(alpha=1.0, beta=1.0, tau=1.0, omega=1.0, P="Identity", Q="Identity", R="Identity")


def test_toy_first_stationary_step(toy):
    blocks, rhs = toy
    u, rep = stationary_gss(blocks, UNIT, rhs.vector, tol=1e-300, max_iter=1)
    np.testing.assert_allclose(u, [5 / 19, -1 / 19, 4 / 19], atol=1e-16)
    assert rep.iterations == 1 and rep.status == "max_iter" and not rep.converged


def test_toy_iteration_matrix(toy):
    G = iteration_matrix(toy[0], UNIT)
    np.testing.assert_allclose(19 * G, [[5, -1, -4], [-1, 4, -3], [4, 3, 12]], atol=1e-13)
    assert iteration_matrix_spectral_radius(toy[0], UNIT) == pytest.approx(0.4445504924401425, rel=1e-12)


def test_toy_stationary_converges(toy):
    blocks, rhs = toy
    u, rep = stationary_gss(blocks, UNIT, rhs.vector, tol=1e-12)
    assert rep.converged and rep.status == "converged"
    np.testing.assert_allclose(u, [0.2, -0.2, 0.6], atol=1e-11)
    # the residual contracts at the spectral radius asymptotically
    h = np.array(rep.res_history)
    assert h[-1] / h[-6] < 0.45 ** 5 * 3


@pytest.mark.parametrize("blocks", random_corpus(4, seed=41))
@pytest.mark.parametrize("omega", OMEGAS)
def test_rho_equals_distance_of_spectrum_from_one(blocks, omega):
    p = params(omega, STATIONARY_PARAMS)
    lam = np.linalg.eigvals(preconditioned_operator(blocks, prepare(blocks, p, Kind.GSS)))
    assert iteration_matrix_spectral_radius(blocks, p) == pytest.approx(np.max(np.abs(1 - lam)), abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), factor=st.floats(1.01, 4.0))
def test_property_threshold_is_sufficient(seed, factor):
    blocks = random_dspp(8, 2, 4, seed=seed)
    p = GssParams(alpha=0.5, beta=0.5, tau=0.5, omega=1.0, P="Identity", Q="Identity", R="Identity")
    w0 = convergence_omega_threshold(blocks, p)
    assert 0.0 <= w0 <= 0.5
    w = max(w0 * factor, 1e-3)
    assert iteration_matrix_spectral_radius(blocks, p.replace(omega=w)) < 1.0


@pytest.mark.parametrize("blocks", random_corpus(6, seed=42))
def test_rho_below_one_at_half(blocks):
    assert iteration_matrix_spectral_radius(blocks, params(0.5, STATIONARY_PARAMS)) < 1.0


@pytest.mark.parametrize("blocks", random_corpus(5, seed=43))
@pytest.mark.parametrize("kind", [Kind.GSS, Kind.RGSS_I, Kind.RGSS_II, Kind.DS, Kind.NONE])
def test_left_and_right_agree(blocks, kind):
    b = rhs_for(blocks, 1)
    tol = 1e-10
    p = params(2.0, SMALL_SHIFT_PARAMS)
    prep = prepare(blocks, p.replace(alpha=0.5) if kind is Kind.DS else p, kind)
    uL, rL = gmres(blocks, b, prep, SolverConfig(tol=tol, side="left"))
    uR, rR = gmres(blocks, b, prep, SolverConfig(tol=tol, side="right"))
    assert rL.converged and rR.converged
    assert residual(blocks, uL, b) < tol and residual(blocks, uR, b) < tol
    kappa = np.linalg.cond(assemble_full(blocks).to_dense())
    assert np.linalg.norm(uL - uR) / np.linalg.norm(uR) <= 10 * tol * kappa
    # right preconditioning minimizes the true residual
    h = np.array(rR.res_history)
    assert np.all(np.diff(h) <= 1e-12 * h[:-1] + 1e-15)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_property_unpreconditioned_finishes_within_order(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    m = int(rng.integers(1, n + 1))
    l = int(rng.integers(1, m + 1))  # noqa: E741
    blocks = random_dspp(n, l, m, seed=seed)
    b = rng.standard_normal(blocks.order)
    kappa = np.linalg.cond(assemble_full(blocks).to_dense())
    u, rep = gmres(blocks, b, cfg=SolverConfig(tol=1e-9, side="right"))
    assert rep.converged and rep.iterations <= blocks.order + 2
    assert residual(blocks, u, b) < 1e-9
    assert np.linalg.norm(u - sla.solve(assemble_full(blocks).to_dense(), b)) <= 1e-7 * kappa * np.linalg.norm(u)


def test_exact_preconditioner_one_step():
    blocks = random_corpus(1, seed=44)[0]
    b = rhs_for(blocks)
    u, rep = gmres(blocks, b, prepare(blocks, None, Kind.EXACT), SolverConfig(tol=1e-10))
    assert rep.converged and rep.iterations == 1


def test_zero_rhs_and_initial_guess(toy):
    blocks, rhs = toy
    u, rep = gmres(blocks, np.zeros(3))
    assert rep.converged and rep.iterations == 0 and not u.any()
    exact = np.array([0.2, -0.2, 0.6])
    u, rep = gmres(blocks, rhs.vector, cfg=SolverConfig(x0=exact))
    assert rep.iterations == 0 and rep.converged
    with pytest.raises(DimensionMismatch):
        gmres(blocks, np.ones(2))
    with pytest.raises(DimensionMismatch):
        gmres(blocks, rhs.vector, cfg=SolverConfig(x0=np.ones(4)))


def test_max_iter_reported_not_raised():
    blocks = random_corpus(1, seed=45)[0]
    u, rep = gmres(blocks, rhs_for(blocks), cfg=SolverConfig(tol=1e-14, max_iter=2))
    assert rep.status == "max_iter" and rep.iterations == 2 and not rep.converged
    assert len(rep.res_history) == 3 and rep.final_res == rep.res_history[-1]
    np.testing.assert_allclose(rep.final_res, residual(blocks, u, rhs_for(blocks)))


def test_stationary_divergence_reported(toy):
    blocks, rhs = toy
    # below omega = 1/2 the splitting can expand: rho ~ 8.96 here
    p = GssParams(alpha=1e-3, beta=1e-3, tau=1e-3, omega=0.1, P="Identity", Q="Identity", R="Identity")
    assert iteration_matrix_spectral_radius(blocks, p) > 8.0
    _, rep = stationary_gss(blocks, p, rhs.vector, tol=1e-8, max_iter=5000)
    assert rep.status == "diverged" and not rep.converged and rep.iterations < 200


def test_no_history_mode(toy):
    blocks, rhs = toy
    _, rep = gmres(blocks, rhs.vector, cfg=SolverConfig(record_history=False))
    assert len(rep.res_history) == 2
    _, rep = stationary_gss(blocks, UNIT, rhs.vector, record_history=False)
    assert len(rep.res_history) == 2


@pytest.mark.parametrize("kwargs", [dict(tol=0.0), dict(max_iter=0), dict(side="middle")])
def test_solver_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_report_serialization(tmp_path, toy):
    blocks, rhs = toy
    _, rep = gmres(blocks, rhs.vector, prepare(blocks, UNIT, Kind.GSS))
    rep.write_json(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["converged"] and set(d["timings"]) == {"setup_seconds", "iterate_seconds"}
    rep.write_history_csv(tmp_path / "h.csv")
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["iteration", "RES"] and len(rows) == len(rep.res_history) + 1
    assert float(rows[1][1]) == 1.0


@pytest.mark.skipif(len(_kernels.available_backends()) < 2, reason="numba unavailable")
def test_backends_give_same_solve():
    blocks = random_corpus(1, seed=46)[0]
    b = rhs_for(blocks)
    saved = _kernels.BACKEND
    out = {}
    try:
        for name in _kernels.available_backends():
            _kernels.set_backend(name)
            out[name] = gmres(blocks, b, cfg=SolverConfig(tol=1e-10))
    finally:
        _kernels.set_backend(saved)
    (u1, r1), (u2, r2) = out.values()
    assert r1.iterations == r2.iterations
    np.testing.assert_allclose(u1, u2, rtol=1e-9, atol=1e-12)


def test_preconditioned_gmres_reduces_iterations():
    blocks = random_corpus(1, seed=47, n_max=40, m_max=20)[0]
    b = rhs_for(blocks)
    _, plain = gmres(blocks, b, cfg=SolverConfig(tol=1e-8))
    _, pre = gmres(blocks, b, prepare(blocks, params(30.0, SMALL_SHIFT_PARAMS), Kind.RGSS_II),
                   SolverConfig(tol=1e-8))
    assert pre.converged and pre.iterations < plain.iterations
    assert np.allclose(apply(prepare(blocks, None, Kind.NONE), b), b)
