"""Input validation helpers shared by the estimator API and the harness."""

from __future__ import annotations

import numbers

import numpy as np


def check_images(X, A: float = 255.0, image_shape=None) -> np.ndarray:
    """Coerce X to a (N, H, W, C) float array in [0, A].

    Accepts 4-D image arrays or 2-D (N, H*W*C) rows when image_shape is
    given, so the estimator composes with flat-feature pipelines.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        if image_shape is None:
            raise ValueError("2-D input needs image_shape=(H, W, C)")
        X = X.reshape((len(X),) + tuple(image_shape))
    if X.ndim != 4:
        raise ValueError(f"expected (N, H, W, C) images, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("input contains NaN or infinity")
    if X.min() < 0 or X.max() > A:
        raise ValueError(f"pixel values must lie in [0, {A}]")
    return X


def check_scalar(value, name: str, low=None, high=None):
    if not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    if low is not None and value < low:
        raise ValueError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ValueError(f"{name} must be <= {high}, got {value}")
    return float(value)
