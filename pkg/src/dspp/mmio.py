"""Matrix Market coordinate files and plain-text vectors."""
from pathlib import Path

import numpy as np

from .linalg import SparseMatrix, asymmetry

HEADER_GENERAL = "%%MatrixMarket matrix coordinate real general"
HEADER_SYMMETRIC = "%%MatrixMarket matrix coordinate real symmetric"


def _fmt(v):
    return repr(float(v))


def write_mtx(path, M: SparseMatrix, symmetric=None):
    """Write ``M`` in coordinate format with 1-based indices.

    With ``symmetric=None`` the symmetric header is used exactly when ``M``
    equals its transpose bit for bit; only the lower triangle is then stored.
    """
    if symmetric is None:
        symmetric = M.shape[0] == M.shape[1] and asymmetry(M) == 0.0
    coo = M.to_scipy().tocoo()
    rows, cols, vals = coo.row, coo.col, coo.data
    if symmetric:
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    order = np.lexsort((rows, cols))
    lines = [HEADER_SYMMETRIC if symmetric else HEADER_GENERAL,
             f"{M.shape[0]} {M.shape[1]} {rows.size}"]
    lines.extend(f"{rows[k] + 1} {cols[k] + 1} {_fmt(vals[k])}" for k in order)
    Path(path).write_text("\n".join(lines) + "\n")


def read_mtx(path) -> SparseMatrix:
    with open(path) as fh:
        header = fh.readline().strip()
        tokens = header.lower().split()
        if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix" or tokens[2] != "coordinate":
            raise ValueError(f"{path}: not a Matrix Market coordinate file: {header!r}")
        field, symmetry = tokens[3], tokens[4]
        if field not in ("real", "integer", "pattern"):
            raise ValueError(f"{path}: unsupported field {field!r}")
        if symmetry not in ("general", "symmetric"):
            raise ValueError(f"{path}: unsupported symmetry {symmetry!r}")
        line = fh.readline()
        while line.startswith("%") or not line.strip():
            line = fh.readline()
        n_rows, n_cols, nnz = (int(t) for t in line.split())
        body = fh.read().split()
    width = 2 if field == "pattern" else 3
    if len(body) != width * nnz:
        raise ValueError(f"{path}: expected {nnz} entries")
    table = np.array(body, dtype=np.float64).reshape(nnz, width) if nnz else np.zeros((0, width))
    rows = table[:, 0].astype(np.int64) - 1
    cols = table[:, 1].astype(np.int64) - 1
    vals = np.ones(nnz) if field == "pattern" else table[:, 2]
    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return SparseMatrix.from_triplets(rows, cols, vals, (n_rows, n_cols))


def write_vec(path, v):
    Path(path).write_text("".join(_fmt(x) + "\n" for x in np.asarray(v, dtype=np.float64)))


def read_vec(path) -> np.ndarray:
    return np.array(Path(path).read_text().split(), dtype=np.float64)
