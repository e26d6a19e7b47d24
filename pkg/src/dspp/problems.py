"""Test systems: Poisson control, seeded random instances, a 1x1x1 toy, noise."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DimensionMismatch, RankDeficient
from .linalg import SparseMatrix
from .model import DsppBlocks, Rhs

DESIRED_STATES = ("corner_bump", "sin")
RANK_SIGMA_RTOL = 1e-8
MAX_RESAMPLES = 10
RANK_CHECK_MAX = 2000


@dataclass(frozen=True)
class PoissonControlSpec:
    """Distributed control of the 2D Poisson equation on the unit square.

    ``pow`` fixes the mesh width ``h = 2**-pow`` and the grid of
    ``(2**pow - 1)**2`` interior nodes.  ``desired_state`` is
    ``"corner_bump"`` (``(2x-1)^2 (2y-1)^2`` on ``[0, 1/2]^2``, zero elsewhere)
    or ``"sin"`` (``sin(pi x) sin(pi y)``).
    """

    pow: int = 5
    reg_beta: float = 0.1
    desired_state: str = "corner_bump"

    def __post_init__(self):
        if int(self.pow) != self.pow or self.pow < 2:
            raise ValueError(f"pow must be an integer >= 2, got {self.pow}")
        if not 0.0 < self.reg_beta <= 1.0:
            raise ValueError(f"reg_beta must lie in (0, 1], got {self.reg_beta}")
        if self.desired_state not in DESIRED_STATES:
            raise ValueError(f"desired_state must be one of {DESIRED_STATES}, got {self.desired_state!r}")

    @property
    def grid_size(self):
        return 2 ** self.pow - 1

    @property
    def order(self):
        return 3 * self.grid_size ** 2


@dataclass(frozen=True)
class PerturbationSpec:
    noise_percent: float = 0.0
    epsilon: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.noise_percent <= 100.0:
            raise ValueError(f"noise_percent must lie in [0, 100], got {self.noise_percent}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")


def _tridiag(N, off, diag):
    return sp.diags([off * np.ones(N - 1), diag * np.ones(N), off * np.ones(N - 1)], [-1, 0, 1], format="csr")


def mass_and_laplacian(pow):
    """Q1 mass matrix and 5-point Laplacian on the interior grid of mesh ``2**-pow``."""
    N = 2 ** pow - 1
    h = 2.0 ** -pow
    M1 = (h / 6.0) * _tridiag(N, 1.0, 4.0)
    T = _tridiag(N, -1.0, 2.0)
    I = sp.identity(N, format="csr")
    M = sp.kron(M1, M1, format="csr")
    K = sp.kron(T, I, format="csr") + sp.kron(I, T, format="csr")
    return SparseMatrix.from_scipy(M), SparseMatrix.from_scipy(K)


def desired_state(spec: PoissonControlSpec) -> np.ndarray:
    N = spec.grid_size
    t = np.arange(1, N + 1) / (N + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    if spec.desired_state == "sin":
        u = np.sin(np.pi * X) * np.sin(np.pi * Y)
    else:
        u = np.where((X <= 0.5) & (Y <= 0.5), (2 * X - 1) ** 2 * (2 * Y - 1) ** 2, 0.0)
    return u.ravel()


def poisson_control(spec: PoissonControlSpec = PoissonControlSpec()):
    """Optimality system ``[bM 0 K^T; 0 M -M; -K M 0]`` and its right-hand side.

    Blocks map as ``A = reg_beta * M``, ``B = K``, ``C = -M``, ``D = M``; the
    right-hand side is ``[0; M u_hat; 0]``.
    """
    M, K = mass_and_laplacian(spec.pow)
    blocks = DsppBlocks(A=spec.reg_beta * M, B=K, C=-M, D=M)
    n = M.shape[0]
    rhs = Rhs(np.zeros(n), M @ desired_state(spec), np.zeros(n))
    return blocks, rhs


def _spd_block(rng, size, density):
    G = sp.random(size, size, density=density, format="csr", random_state=rng, data_rvs=rng.standard_normal)
    return SparseMatrix.from_scipy(G @ G.T + size * sp.identity(size, format="csr"))


def _full_rank_block(rng, rows, cols, density, name):
    for _ in range(MAX_RESAMPLES):
        X = sp.random(rows, cols, density=density, format="lil", random_state=rng, data_rvs=rng.standard_normal)
        # one guaranteed entry per row, in distinct columns
        for i, j in enumerate(rng.permutation(cols)[:rows]):
            X[i, j] = X[i, j] + rng.choice([-1.0, 1.0]) * (1.0 + rng.random())
        X = SparseMatrix.from_scipy(X.tocsr())
        if max(rows, cols) > RANK_CHECK_MAX:
            return X
        s = sla.svdvals(X.to_dense())
        if s[-1] > RANK_SIGMA_RTOL * s[0]:
            return X
    raise RankDeficient(f"could not draw a full-row-rank {name} ({rows}x{cols}) in {MAX_RESAMPLES} attempts")


def random_dspp(n, l, m, seed=0, density=0.3):  # noqa: E741
    """Seeded random instance: ``A, D`` SPD and ``B, C`` of full row rank."""
    if not n >= m >= l >= 1:
        raise DimensionMismatch(f"random instances need n >= m >= l >= 1, got n={n}, m={m}, l={l}")
    rng = np.random.default_rng(seed)
    A = _spd_block(rng, n, density)
    D = _spd_block(rng, l, density)
    B = _full_rank_block(rng, m, n, density, "B")
    C = _full_rank_block(rng, l, m, density, "C")
    return DsppBlocks(A, B, C, D)


def toy_111():
    """``A=[2], D=[3], B=[1], C=[1]`` with ``b = [1, 0, 0]``."""
    one = SparseMatrix.identity(1)
    blocks = DsppBlocks(A=2.0 * one, B=one, C=one, D=3.0 * one)
    return blocks, Rhs(np.array([1.0]), np.array([0.0]), np.array([0.0]))


def gaussian(seed, count) -> np.ndarray:
    """Standard normal samples from Philox-4x64 through Box-Muller.

    Raw 64-bit outputs ``x`` become uniforms ``((x >> 11) + 1) * 2**-53`` in
    ``(0, 1]``; consecutive pairs ``(u1, u2)`` give
    ``sqrt(-2 log u1) * (cos, sin)(2 pi u2)``.
    """
    pairs = (count + 1) // 2
    raw = np.random.Philox(seed).random_raw(2 * pairs)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:count]


def dense_std(M: SparseMatrix) -> float:
    """Population standard deviation over every position of the dense shape."""
    size = M.shape[0] * M.shape[1]
    if size == 0:
        return 0.0
    mean = M.data.sum() / size
    sq = np.sum((M.data - mean) ** 2) + (size - M.nnz) * mean * mean
    return float(np.sqrt(sq / size))


def perturb(blocks: DsppBlocks, spec: PerturbationSpec) -> DsppBlocks:
    """Add dense Gaussian noise ``eps * n_p * std(X) * Z`` to ``B`` and ``C``.

    Samples fill ``B`` row by row first, then ``C``.  ``A`` and ``D`` are
    shared with the input.
    """
    if spec.noise_percent == 0.0 or spec.epsilon == 0.0:
        return blocks
    (m, n), (l, _) = blocks.B.shape, blocks.C.shape
    z = gaussian(spec.seed, m * n + l * m)
    scale = spec.epsilon * spec.noise_percent
    dB = scale * dense_std(blocks.B) * z[:m * n].reshape(m, n)
    dC = scale * dense_std(blocks.C) * z[m * n:].reshape(l, m)
    B = SparseMatrix.from_dense(blocks.B.to_scipy().toarray() + dB)
    C = SparseMatrix.from_dense(blocks.C.to_scipy().toarray() + dC)
    return DsppBlocks(blocks.A, B, C, blocks.D)
