"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ShapeError
from .labels import Label


def check_features(X, n_nodes: int, n_features: int | None = None) -> np.ndarray:
    """Return ``X`` as a finite float64 matrix with one row per graph node."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=0, ensure_all_finite=True)
    if X.shape[0] != n_nodes:
        raise ShapeError(f"expected {n_nodes} feature rows, got {X.shape[0]}")
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeError(f"expected {n_features} feature columns, got {X.shape[1]}")
    if X.shape[1] < 2:
        raise ShapeError("features need at least the y_hat and label columns")
    return X


def check_labels(y, n: int) -> np.ndarray:
    """Coerce labels (codes or 'fake'/'real' strings) to an int array of length ``n``."""
    y = np.asarray([int(Label.parse(v)) for v in np.ravel(np.asarray(y, dtype=object))], dtype=np.int64)
    if y.shape[0] != n:
        raise ShapeError(f"expected {n} labels, got {y.shape[0]}")
    return y


def check_mask(mask, n: int) -> np.ndarray:
    if mask is None:
        return np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ShapeError(f"mask must have shape ({n},), got {mask.shape}")
    if not mask.any():
        raise ValueError("mask selects no nodes")
    return mask
