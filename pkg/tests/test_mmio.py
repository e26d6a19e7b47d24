import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dspp import SparseMatrix
from dspp.mmio import read_mtx, read_vec, write_mtx, write_vec


@settings(max_examples=30, deadline=None)
@given(rows=st.integers(1, 12), cols=st.integers(1, 12), seed=st.integers(0, 2 ** 31 - 1), symmetric=st.booleans())
def test_round_trip_is_exact(rows, cols, seed, symmetric, tmp_path_factory):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((rows, cols)) * (rng.random((rows, cols)) < 0.4)
    if symmetric:
        a = a[:rows, :rows] if rows <= cols else a[:cols, :cols]
        a = a + a.T
    M = SparseMatrix.from_dense(a)
    path = tmp_path_factory.mktemp("mtx") / "M.mtx"
    write_mtx(path, M)
    header = path.read_text().splitlines()[0]
    assert ("symmetric" in header) == (a.shape[0] == a.shape[1] and np.array_equal(a, a.T))
    back = read_mtx(path)
    assert back.shape == M.shape
    np.testing.assert_array_equal(back.to_dense(), a)


def test_reads_comments_and_pattern(tmp_path):
    p = tmp_path / "p.mtx"
    p.write_text("%%MatrixMarket matrix coordinate pattern general\n% comment\n2 2 2\n1 1\n2 1\n")
    np.testing.assert_array_equal(read_mtx(p).to_dense(), [[1.0, 0.0], [1.0, 0.0]])


@pytest.mark.parametrize("text", [
    "%%MatrixMarket matrix array real general\n1 1\n1.0\n",
    "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
])
def test_rejects_bad_files(tmp_path, text):
    p = tmp_path / "bad.mtx"
    p.write_text(text)
    with pytest.raises(ValueError):
        read_mtx(p)


def test_vector_round_trip(tmp_path):
    v = np.array([1.0, -2.5e-300, np.pi, 0.0])
    write_vec(tmp_path / "v.vec", v)
    np.testing.assert_array_equal(read_vec(tmp_path / "v.vec"), v)
