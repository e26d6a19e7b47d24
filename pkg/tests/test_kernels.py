"""numba and numpy kernels must agree to roundoff."""
import numpy as np
import pytest
import scipy.sparse as sp

from dspp import _kernels

BACKENDS = _kernels.available_backends()


@pytest.fixture
def restore_backend():
    saved = _kernels.BACKEND
    yield
    _kernels.set_backend(saved)


def _random_csr(rng, rows, cols, density):
    M = sp.random(rows, cols, density=density, format="csr", random_state=rng)
    M.sort_indices()
    return M


@pytest.mark.parametrize("seed", range(8))
def test_matvec_and_matmat_match_scipy(seed, restore_backend):
    rng = np.random.default_rng(seed)
    rows, cols = int(rng.integers(1, 60)), int(rng.integers(1, 60))
    M = _random_csr(rng, rows, cols, float(rng.uniform(0.0, 0.4)))
    x = rng.standard_normal(cols)
    X = rng.standard_normal((cols, 3))
    for name in BACKENDS:
        _kernels.set_backend(name)
        y = _kernels.csr_matvec(M.indptr.astype(np.int64), M.indices.astype(np.int64), M.data, x)
        Y = _kernels.csr_matmat(M.indptr.astype(np.int64), M.indices.astype(np.int64), M.data, X)
        np.testing.assert_allclose(y, M @ x, rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(Y, M @ X, rtol=1e-13, atol=1e-13)


def test_empty_rows_give_zero(restore_backend):
    indptr = np.array([0, 0, 1, 1], dtype=np.int64)
    indices = np.array([2], dtype=np.int64)
    data = np.array([5.0])
    for name in BACKENDS:
        _kernels.set_backend(name)
        np.testing.assert_array_equal(_kernels.csr_matvec(indptr, indices, data, np.ones(3)), [0.0, 5.0, 0.0])


@pytest.mark.parametrize("seed", range(5))
def test_mgs_backends_agree(seed, restore_backend):
    rng = np.random.default_rng(seed)
    n, k = 30, 6
    V = np.linalg.qr(rng.standard_normal((n, k)))[0].T.copy()
    w0 = rng.standard_normal(n)
    out = {}
    for name in BACKENDS:
        _kernels.set_backend(name)
        w, h = w0.copy(), np.zeros(k + 1)
        nrm = _kernels.mgs_orthogonalize(V, k, w, h)
        np.testing.assert_allclose(V @ w, 0.0, atol=1e-13)
        assert nrm == pytest.approx(np.linalg.norm(w), rel=1e-14)
        np.testing.assert_allclose(V.T @ h[:k] + w, w0, atol=1e-13)
        out[name] = (w, h, nrm)
    ref = out[BACKENDS[0]]
    for w, h, nrm in out.values():
        np.testing.assert_allclose(w, ref[0], atol=1e-13)
        np.testing.assert_allclose(h, ref[1], atol=1e-13)


def test_givens_triangularizes_hessenberg(restore_backend):
    rng = np.random.default_rng(3)
    k_max = 5
    H = np.triu(rng.standard_normal((k_max + 1, k_max)), -1)
    for name in BACKENDS:
        _kernels.set_backend(name)
        cs, sn = np.zeros(k_max), np.zeros(k_max)
        g = np.zeros(k_max + 1)
        g[0] = 2.0
        R = np.zeros((k_max + 1, k_max))
        for k in range(k_max):
            h = H[:, k].copy()
            est = _kernels.givens_update(h, cs, sn, g, k)
            R[:, k] = h
        np.testing.assert_allclose(np.tril(R, -1), 0.0, atol=1e-14)
        # the estimate equals the true least-squares residual of H y = 2 e1
        e1 = np.zeros(k_max + 1)
        e1[0] = 2.0
        y = np.linalg.lstsq(H, e1, rcond=None)[0]
        assert est == pytest.approx(np.linalg.norm(H @ y - e1), rel=1e-12)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")


def test_env_flag_selects_numpy(monkeypatch):
    import importlib

    monkeypatch.setenv("DSPP_DISABLE_NUMBA", "1")
    from dspp import _config
    assert _config.numba_disabled()
    mod = importlib.reload(_kernels)
    try:
        assert mod.BACKEND == "numpy"
    finally:
        monkeypatch.delenv("DSPP_DISABLE_NUMBA")
        importlib.reload(_kernels)


def test_benchmark_script_runs(capsys):
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--pow", "2", "--repeat", "1", "--krylov", "4"])
    out = capsys.readouterr().out
    assert "spmv" in out and "gmres" in out
