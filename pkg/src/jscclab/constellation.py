"""Square M-QAM constellations and soft-to-hard quantization.

Complex values are carried as (..., 2) real arrays: [..., 0] real part,
[..., 1] imaginary part. Constellation points are ordered row-major over
the grid, real axis fastest, ascending, so index j is stable across runs
and serializations.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, custom_node

SUPPORTED_M = (4, 16, 64, 256, 1024, 4096)


@dataclass(frozen=True)
class QuantizerConfig:
    """Softmax hardness for the soft assignment; larger is harder."""
    sigma_q: float = 100.0

    def __post_init__(self):
        if self.sigma_q <= 0:
            raise ValueError(f"sigma_q must be > 0, got {self.sigma_q}")


@dataclass(frozen=True)
class Constellation:
    """An ordered set of M grid points with average power P."""
    points: np.ndarray  # (M, 2), read-only
    M: int
    P: float
    d_sym: float
    A_max: float

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def complex_points(self) -> np.ndarray:
        return self.points[:, 0] + 1j * self.points[:, 1]

    def dump_csv(self) -> str:
        """index, re, im rows for plotting and debugging."""
        buf = io.StringIO()
        buf.write("index,re,im\n")
        for j, (re, im) in enumerate(self.points):
            buf.write(f"{j},{float(re)!r},{float(im)!r}\n")
        return buf.getvalue()


def make_qam(M: int, P: float = 1.0) -> Constellation:
    """Square M-QAM with L = sqrt(M) per-axis levels at odd multiples of
    d/2, scaled so the average complex power over all M points equals P.
    """
    if M < 4 or int(round(math.sqrt(M))) ** 2 != M:
        raise ValueError(f"M must be a perfect square >= 4, got {M}")
    if P <= 0:
        raise ValueError(f"P must be > 0, got {P}")
    L = int(round(math.sqrt(M)))
    d_sym = math.sqrt(6.0 * P / (L * L - 1))
    axis = (np.arange(L) - (L - 1) / 2.0) * d_sym
    # row-major over the grid, real axis fastest, both axes ascending
    re, im = np.meshgrid(axis, axis, indexing="xy")
    points = np.stack([re.reshape(-1), im.reshape(-1)], axis=1)
    a_max = (L - 1) * d_sym / 2.0
    return Constellation(points=points, M=M, P=float(P), d_sym=d_sym, A_max=a_max)


def _sq_dists(z: np.ndarray, c: Constellation) -> np.ndarray:
    """(k, M) squared Euclidean distances for z of shape (k, 2)."""
    diff = z[:, None, :] - c.points[None, :, :]
    return np.sum(diff * diff, axis=2)


def hard_quantize(z: np.ndarray, c: Constellation) -> np.ndarray:
    """Snap each (re, im) pair to its nearest constellation point.
    Exact-midpoint ties go to the lowest index (argmin convention).
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1, 2)
    idx = np.argmin(_sq_dists(z, c), axis=1)
    return c.points[idx].copy()


def hard_indices(z: np.ndarray, c: Constellation) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64).reshape(-1, 2)
    return np.argmin(_sq_dists(z, c), axis=1)


@dataclass(frozen=True)
class QuantizerOutput:
    hard: np.ndarray     # (k, 2)
    soft: np.ndarray     # (k, 2)
    weights: np.ndarray  # (k, M), rows sum to 1


def soft_assignment(z: np.ndarray, c: Constellation, cfg: QuantizerConfig) -> np.ndarray:
    """Row-stochastic softmax weights over constellation points,
    exp(-sigma_q * d_ij) normalized per row, with row-max subtraction so
    sigma_q = 100 does not underflow every entry.
    """
    d = _sq_dists(np.asarray(z, dtype=np.float64).reshape(-1, 2), c)
    logits = -cfg.sigma_q * d
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    return w


def soft_quantize(z: np.ndarray, c: Constellation, cfg: QuantizerConfig) -> QuantizerOutput:
    z = np.asarray(z, dtype=np.float64).reshape(-1, 2)
    w = soft_assignment(z, c, cfg)
    soft = w @ c.points
    return QuantizerOutput(hard=hard_quantize(z, c), soft=soft, weights=w)


def soft_jacobian(z: np.ndarray, c: Constellation, cfg: QuantizerConfig) -> np.ndarray:
    """(k, 2, 2) Jacobians d soft_i / d z_i of the soft map.

    With w = softmax(-sigma_q * d) and d_ij = |z_i - c_j|^2:
      dw_ij/dz_i = -2 sigma_q w_ij ((z_i - c_j) - sum_n w_in (z_i - c_n))
      d soft_i/dz_i = sum_j c_j dw_ij/dz_i^T
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1, 2)
    w = soft_assignment(z, c, cfg)
    diff = z[:, None, :] - c.points[None, :, :]          # (k, M, 2)
    mean_diff = np.einsum("km,kmd->kd", w, diff)         # (k, 2)
    centered = diff - mean_diff[:, None, :]              # (k, M, 2)
    # J[k, a, b] = d soft_a / d z_b
    return -2.0 * cfg.sigma_q * np.einsum("km,ma,kmb->kab", w, c.points, centered)


def quantize_straight_through(z: Tensor, c: Constellation, cfg: QuantizerConfig) -> Tensor:
    """Forward: hard symbols. Backward: exact Jacobian of the soft map.

    z has shape (..., 2); the output keeps that shape.
    """
    shape = z.shape
    if shape[-1] != 2:
        raise ValueError(f"expected trailing axis of size 2, got shape {shape}")
    flat = z.data.reshape(-1, 2)
    hard = hard_quantize(flat, c).reshape(shape)

    def bwd(g):
        # Jacobian evaluated lazily: inference-only forwards skip it
        jac = soft_jacobian(flat, c, cfg)  # (k, 2, 2)
        gz = np.einsum("kab,ka->kb", jac, g.reshape(-1, 2))
        return (gz.reshape(shape),)

    return custom_node([z], hard, bwd)


def soft_assignment_node(z: Tensor, c: Constellation, cfg: QuantizerConfig) -> Tensor:
    """Differentiable soft-assignment weights (k, M) for the KL
    regularizer; backward routes through the softmax derivative.
    """
    shape = z.shape
    flat = z.data.reshape(-1, 2)
    w = soft_assignment(flat, c, cfg)
    diff = flat[:, None, :] - c.points[None, :, :]
    mean_diff = np.einsum("km,kmd->kd", w, diff)
    centered = diff - mean_diff[:, None, :]

    def bwd(g):
        # dL/dz_kb = sum_j g_kj * dw_kj/dz_kb
        gz = -2.0 * cfg.sigma_q * np.einsum("km,km,kmb->kb", g, w, centered)
        return (gz.reshape(shape),)

    return custom_node([z], w, bwd)


def empirical_distribution(weights_batch: np.ndarray) -> np.ndarray:
    """Average soft-assignment rows into one distribution over the
    constellation."""
    w = np.asarray(weights_batch, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] == 0:
        raise ValueError(f"need a non-empty (rows, M) matrix, got shape {w.shape}")
    return w.mean(axis=0)
