"""Input validation helpers shared across the package."""

import numpy as np


def check_array(x, name, ndim=None, shape=None, dtype=float):
    """Coerce ``x`` to a contiguous float64 array and validate its layout.

    Parameters
    ----------
    x : array-like
        Input to validate.
    name : str
        Name used in error messages.
    ndim : int, optional
        Required number of dimensions.
    shape : tuple, optional
        Required shape; entries set to None are not checked.
    """
    arr = np.ascontiguousarray(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimensions, got {arr.ndim}")
    if shape is not None:
        if len(shape) != arr.ndim:
            raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
        for want, got in zip(shape, arr.shape):
            if want is not None and want != got:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_in_unit_box(x, name):
    """Validate that every entry of ``x`` lies in [0, 1]."""
    arr = check_array(x, name)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got range "
                         f"[{arr.min():.6g}, {arr.max():.6g}]")
    return arr


def check_scalar(value, name, low=None, high=None):
    """Validate a finite scalar, optionally against inclusive bounds."""
    v = float(value)
    if not np.isfinite(v):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if low is not None and v < low:
        raise ValueError(f"{name} must be >= {low}, got {v}")
    if high is not None and v > high:
        raise ValueError(f"{name} must be <= {high}, got {v}")
    return v


def check_positive(value, name):
    v = check_scalar(value, name)
    if v <= 0.0:
        raise ValueError(f"{name} must be positive, got {v}")
    return v


def check_random_state(seed):
    """Return a numpy Generator from a seed, Generator, or SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
