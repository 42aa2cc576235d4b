"""Image distortion metrics: per-image MSE, PSNR, and a global-statistics
SSIM (whole-image moments, no sliding window; fine at 32x32).

Images are (B, H, W, C) arrays in [0, A]. MSE is a mean over pixels and
channels, which makes PSNR = 10 log10(A^2 / MSE) the standard quantity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ImageBatch:
    data: np.ndarray  # (B, H, W, C)
    A: float = 255.0

    def __post_init__(self):
        if self.data.ndim != 4:
            raise ValueError(f"expected (B, H, W, C), got shape {self.data.shape}")


def _check_pair(x: np.ndarray, y: np.ndarray):
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim != 4:
        raise ValueError(f"expected (B, H, W, C), got shape {x.shape}")


def mse(x: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    """Per-image mean squared error over all pixels and channels."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    _check_pair(x, x_hat)
    d = x - x_hat
    return np.mean(d * d, axis=(1, 2, 3))


def psnr(x: np.ndarray, x_hat: np.ndarray, A: float = 255.0) -> np.ndarray:
    """Per-image PSNR in dB; identical images give +inf."""
    m = mse(x, x_hat)
    out = np.full_like(m, np.inf)
    nz = m > 0
    out[nz] = 10.0 * np.log10(A * A / m[nz])
    return out


def ssim(x: np.ndarray, x_hat: np.ndarray, A: float = 255.0) -> np.ndarray:
    """Per-image SSIM from whole-image statistics, channels averaged.

    Luminance term (2 mu mu' + v1)/(mu^2 + mu'^2 + v1) times structure
    term (2 cov + v2)/(var + var' + v2), v1 = (0.01 A)^2, v2 = (0.03 A)^2.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    _check_pair(x, x_hat)
    v1 = (0.01 * A) ** 2
    v2 = (0.03 * A) ** 2
    ax = (1, 2)  # per image, per channel
    mu_x = x.mean(axis=ax)
    mu_y = x_hat.mean(axis=ax)
    var_x = x.var(axis=ax)
    var_y = x_hat.var(axis=ax)
    cov = ((x - mu_x[:, None, None, :]) * (x_hat - mu_y[:, None, None, :])).mean(axis=ax)
    lum = (2 * mu_x * mu_y + v1) / (mu_x ** 2 + mu_y ** 2 + v1)
    struct = (2 * cov + v2) / (var_x + var_y + v2)
    return (lum * struct).mean(axis=1)
