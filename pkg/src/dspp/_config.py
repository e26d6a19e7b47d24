"""Runtime switches read from the environment."""
import os

DEFAULT_DENSE_CAP = 4000
# SPD matrices up to this order are factored densely; larger ones use a
# reverse Cuthill-McKee ordering and a banded Cholesky factor.
DEFAULT_DENSE_FACTOR_MAX = 500


def dense_cap() -> int:
    """Largest order that may be densified (``DSPP_DENSE_CAP``)."""
    raw = os.environ.get("DSPP_DENSE_CAP")
    if raw is None or raw.strip() == "":
        return DEFAULT_DENSE_CAP
    return int(raw)


def numba_disabled() -> bool:
    return os.environ.get("DSPP_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes", "on")
