"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`DsppError`, so callers can catch the whole family at once.
"""


class DsppError(Exception):
    pass


class DimensionMismatch(DsppError, ValueError):
    pass


class NotSpd(DsppError):
    """A matrix that must be symmetric positive definite failed to factor."""


class Singular(DsppError):
    pass


class DSingular(Singular):
    """The (2,2) block D is only semidefinite where a strict SPD D is needed."""


class TooLarge(DsppError):
    """The requested dense operation exceeds the configured size cap."""


class NoConvergence(DsppError):
    pass


class ZeroRhs(DsppError, ValueError):
    pass


class RankDeficient(DsppError):
    pass


class ConfigError(DsppError, ValueError):
    pass
