"""Shift-splitting preconditioners for double saddle point systems."""
from .errors import (ConfigError, DimensionMismatch, DsppError, DSingular, NoConvergence, NotSpd, RankDeficient,
                     Singular, TooLarge, ZeroRhs)
from .linalg import SparseMatrix, SpdFactor, spd_factorize, spd_solve
from .model import DsppBlocks, Rhs, apply_operator, assemble_full, residual, validate
from .preconditioners import GssParams, Kind, PreparedPreconditioner, apply, assemble_m, phi, prepare
from .problems import PerturbationSpec, PoissonControlSpec, perturb, poisson_control, random_dspp, toy_111
from .solvers import SolveReport, SolverConfig, gmres, stationary_gss

__version__ = "0.1.0"
