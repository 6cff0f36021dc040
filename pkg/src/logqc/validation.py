"""Input validation helpers used by the estimators and metric functions."""

from __future__ import annotations

import numpy as np

from .errors import DataError, FitError


def as_float_matrix(X, allow_missing: bool = False, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array; reject non-finite values unless allowed."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not allow_missing and not np.isfinite(arr).all():
        raise DataError(f"{name} contains non-finite values")
    if allow_missing and np.isinf(arr).any():
        raise DataError(f"{name} contains infinities; use NaN for missing cells")
    return arr


def as_binary_labels(y, name: str = "y") -> np.ndarray:
    """Coerce labels to an int8 0/1 vector (1 = Pass)."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise DataError(f"{name} must be 1-dimensional")
    values = np.unique(arr)
    if not np.isin(values, (0, 1)).all():
        raise DataError(f"{name} must contain only 0/1 labels, got {values!r}")
    return arr.astype(np.int8)


def check_fit_inputs(X, y):
    """Shared precondition checks for classifier fit: finite X, both classes in y."""
    X = as_float_matrix(X)
    y = as_binary_labels(y)
    if X.shape[0] != y.shape[0]:
        raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if np.unique(y).size < 2:
        raise FitError("training labels contain a single class")
    return X, y


def as_scores(scores, name: str = "scores") -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be 1-dimensional")
    if not np.isfinite(arr).all():
        raise DataError(f"{name} contains non-finite values")
    return arr
