"""Input-validation helpers used by the estimators and config loaders.

All helpers raise :class:`policy_reciprocity.errors.ConfigError` (for scalar
parameter domains) or :class:`ContractViolationError` (for structural
mismatches) with messages that name the offending field.
"""
from __future__ import annotations

import numbers

import numpy as np

from .errors import ConfigError, ContractViolationError


def check_scalar(value, name: str, *, low=None, high=None,
                 include_low: bool = True, include_high: bool = True,
                 integral: bool = False):
    """Validate a numeric scalar against an interval and return it.

    Parameters
    ----------
    value : number
        Value to validate.
    name : str
        Field name used in error messages.
    low, high : number or None
        Interval end points; ``None`` means unbounded on that side.
    include_low, include_high : bool
        Whether the end points themselves are admissible.
    integral : bool
        Require an integer (bools are rejected).
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if integral and not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if not np.isfinite(float(value)):
        raise ConfigError(f"{name}: must be finite, got {value!r}")
    if low is not None:
        if include_low:
            if value < low:
                raise ConfigError(f"{name}: must be >= {low}, got {value!r}")
        elif value <= low:
            raise ConfigError(f"{name}: must be > {low}, got {value!r}")
    if high is not None:
        if include_high:
            if value > high:
                raise ConfigError(f"{name}: must be <= {high}, got {value!r}")
        elif value >= high:
            raise ConfigError(f"{name}: must be < {high}, got {value!r}")
    return value


def check_choice(value, name: str, choices):
    if value not in choices:
        raise ConfigError(
            f"{name}: must be one of {sorted(choices)}, got {value!r}")
    return value


def check_row_stochastic(probs: np.ndarray, name: str = "probs",
                         tol: float = 1e-12) -> np.ndarray:
    """Validate that the trailing axis of ``probs`` holds distributions."""
    probs = np.asarray(probs, dtype=np.float64)
    if not np.all(np.isfinite(probs)):
        raise ContractViolationError(f"{name}: contains non-finite entries")
    if np.any(probs < 0):
        raise ContractViolationError(f"{name}: contains negative entries")
    sums = probs.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ContractViolationError(
            f"{name}: rows must sum to 1 within {tol}, worst error {worst:g}")
    return probs


def as_generator(seed) -> np.random.Generator:
    """Coerce an int / SeedSequence / Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if seed is None or isinstance(seed, numbers.Integral):
        return np.random.default_rng(seed)
    raise ConfigError(f"seed: expected int, SeedSequence or Generator, "
                      f"got {type(seed).__name__}")
