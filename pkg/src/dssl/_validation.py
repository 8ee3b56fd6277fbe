"""Input validation helpers shared by the numerical modules."""

import numpy as np

from .exceptions import ConfigError, DomainError

SIMPLEX_ATOL = 1e-9


def as_float_array(a, name="array"):
    arr = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def check_simplex(theta, name="theta"):
    """Return ``theta`` as a float array of shape (K,) or (n, K) on the simplex.

    Raises DomainError when K < 2, a component leaves [0, 1], or a row does
    not sum to one within ``SIMPLEX_ATOL``.
    """
    arr = as_float_array(theta, name)
    if arr.ndim not in (1, 2):
        raise DomainError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[-1] < 2:
        raise DomainError(f"{name} needs at least 2 components")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} components must lie in [0, 1]")
    if np.any(np.abs(arr.sum(axis=-1) - 1.0) > SIMPLEX_ATOL):
        raise DomainError(f"{name} must sum to 1")
    return arr


def check_box(theta, name="theta"):
    """Return ``theta`` as a float array with every component in [0, 1]."""
    arr = as_float_array(theta, name)
    if arr.ndim not in (1, 2):
        raise DomainError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} components must lie in [0, 1]")
    return arr


# Hyperparameter checks raise ConfigError naming the parameter.


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise ConfigError(f"must be positive, got {value!r}", name)
    return float(value)


def check_epsilon(eps):
    if not 0.0 < eps <= 1e-3:
        raise ConfigError(f"must lie in (0, 1e-3], got {eps!r}", "epsilon")
    return float(eps)
