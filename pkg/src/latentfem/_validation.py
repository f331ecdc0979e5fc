"""Input validation helpers shared by the estimators and the low-level routines."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a non-negative finite number, got {value!r}")
    return float(value)


def check_fraction(value, name, *, open_interval=False):
    value = float(value)
    if open_interval:
        ok = 0.0 < value < 1.0
    else:
        ok = 0.0 <= value <= 1.0
    if not ok:
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise ValueError(f"{name} must lie in {bounds}, got {value!r}")
    return value


def check_option(value, name, options):
    if value not in options:
        raise ValueError(f"{name} must be one of {sorted(options)}, got {value!r}")
    return value


def check_points(X, dim):
    """Validate a query point array of shape (n_points, dim)."""
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    if X.shape[1] != dim:
        raise ValueError(f"expected points with {dim} coordinate(s), got shape {X.shape}")
    return X


def check_node_vector(values, n_nodes, name="temperature"):
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (n_nodes,):
        raise ValueError(f"{name} vector must have shape ({n_nodes},), got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} vector contains non-finite entries")
    return values
