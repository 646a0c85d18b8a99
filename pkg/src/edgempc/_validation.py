"""Input validation helpers shared by the estimators and free functions."""

from numbers import Integral, Real

import numpy as np

PMF_ATOL = 1e-9


def check_rng(random_state):
    """Turn ``None``, an int seed, a SeedSequence or a Generator into a Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, (Integral, np.random.SeedSequence)):
        return np.random.default_rng(random_state)
    raise TypeError(f"cannot build a numpy Generator from {random_state!r}")


def check_nonnegative_int(value, name):
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_fraction(value, name):
    if not isinstance(value, Real) or not 0.0 <= float(value) <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return float(value)


def check_pmf(pmf, n_outcomes=None):
    """Validate a probability vector and return it as a float array."""
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or pmf.size == 0:
        raise ValueError("pmf must be a non-empty 1-D array")
    if n_outcomes is not None and pmf.size != n_outcomes:
        raise ValueError(f"pmf has {pmf.size} entries, expected {n_outcomes}")
    if not np.all(np.isfinite(pmf)) or np.any(pmf < 0):
        raise ValueError("pmf entries must be finite and non-negative")
    if abs(pmf.sum() - 1.0) > PMF_ATOL:
        raise ValueError(f"pmf sums to {pmf.sum()!r}, not 1")
    return pmf


def check_states(states):
    """Coerce a single (x, y, theta) state or a batch of them to an (n, 3) array."""
    arr = np.asarray(states, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"states must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("states contain non-finite values")
    return arr


def check_point(p, name="point"):
    arr = np.asarray(p, dtype=float)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be a finite (x, y) pair, got {p!r}")
    return float(arr[0]), float(arr[1])
