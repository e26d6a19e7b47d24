"""Seeded instance corpora shared by the property and acceptance tests."""
import numpy as np

from dspp import GssParams, random_dspp

OMEGAS = (0.5, 1.0, 2.0, 30.0)

# moderate shifts: the stationary iteration converges quickly at every omega
STATIONARY_PARAMS = dict(alpha=0.1, beta=0.1, tau=0.1, P="BlockA", Q="BlockD", R="Identity")
# the Poisson-control choice of scalars, with the shifts that make sense on random blocks
SMALL_SHIFT_PARAMS = dict(alpha=0.01, beta=0.01, tau=0.001, P="Identity", Q="CCt", R="Identity")


def sizes(rng, n_max=40, m_max=20, l_max=10):
    n = int(rng.integers(4, n_max + 1))
    m = int(rng.integers(2, min(n, m_max) + 1))
    l = int(rng.integers(1, min(m, l_max) + 1))  # noqa: E741
    return n, l, m


def random_corpus(count, seed=2024, **limits):
    """``count`` random instances with n <= 40, m <= 20, l <= 10 by default."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n, l, m = sizes(rng, **limits)
        out.append(random_dspp(n, l, m, seed=seed * 1000 + k, density=float(rng.uniform(0.1, 0.5))))
    return out


def params(omega, base):
    return GssParams(omega=omega, **base)


def rhs_for(blocks, seed=0):
    return np.random.default_rng(seed).standard_normal(blocks.order)
