"""Complex AWGN channel with decoupled true and estimated noise power.

Noise convention: a complex sample has total variance sigma2, i.e.
sigma2 / 2 per real axis. Misreading this as sigma2 per axis shifts every
SNR curve by 3 dB, so it is pinned here and asserted in the tests.

Randomness: Philox counter-based generator keyed by (seed, stream), so a
given (seed, stream index) always reproduces the same noise sequence and
independent trials can draw from disjoint streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, as_tensor, custom_node


def noise_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), stream]))


def snr_to_sigma2(snr_db: float, P: float) -> float:
    """Total complex noise power for a target SNR given signal power P."""
    if P <= 0:
        raise ValueError(f"P must be > 0, got {P}")
    return P * 10.0 ** (-snr_db / 10.0)


def sigma2_to_snr(sigma2: float, P: float) -> float:
    return 10.0 * math.log10(P / sigma2)


@dataclass(frozen=True)
class ChannelModel:
    """True noise power drives transmission; the estimate only feeds the
    model's conditioning input and never touches the noise draw."""
    sigma2: float
    sigma2_est: float
    P: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma2 <= 0 or self.sigma2_est <= 0:
            raise ValueError("noise powers must be > 0")

    @property
    def snr_db(self) -> float:
        return sigma2_to_snr(self.sigma2, self.P)

    @property
    def snr_est_db(self) -> float:
        return sigma2_to_snr(self.sigma2_est, self.P)

    @classmethod
    def from_snr(cls, snr_db: float, snr_est_db: float | None = None,
                 P: float = 1.0, rng_seed: int = 0) -> "ChannelModel":
        if snr_est_db is None:
            snr_est_db = snr_db
        return cls(sigma2=snr_to_sigma2(snr_db, P),
                   sigma2_est=snr_to_sigma2(snr_est_db, P),
                   P=P, rng_seed=rng_seed)


def sample_noise(shape: tuple, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """I/Q noise with sigma2 / 2 variance per axis; shape ends in 2."""
    return rng.normal(0.0, math.sqrt(sigma2 / 2.0), size=shape)


def transmit(z_bar: np.ndarray, ch: ChannelModel, stream: int = 0) -> np.ndarray:
    """y = z_bar + noise over a private (seed, stream) RNG stream."""
    z_bar = np.asarray(z_bar, dtype=np.float64)
    rng = noise_rng(ch.rng_seed, stream)
    return z_bar + sample_noise(z_bar.shape, ch.sigma2, rng)


def transmit_tensor(z_bar: Tensor, ch: ChannelModel, stream: int = 0) -> Tensor:
    """Channel pass inside the gradient graph; the noise is a constant,
    so the gradient flows through unchanged."""
    rng = noise_rng(ch.rng_seed, stream)
    noise = sample_noise(z_bar.shape, ch.sigma2, rng)
    return as_tensor(z_bar) + Tensor(noise)


def normalize_power(z: np.ndarray, P: float) -> np.ndarray:
    """Scale a (k, 2) vector so its total complex power equals k * P."""
    z = np.asarray(z, dtype=np.float64)
    norm = np.sqrt(np.sum(z * z))
    if norm == 0.0:
        raise ValueError("cannot normalize an all-zero vector")
    k = z.size // 2
    return math.sqrt(k * P) / norm * z


def normalize_power_tensor(z: Tensor, P: float) -> Tensor:
    """Differentiable per-image power normalization for continuous mode.

    z has shape (B, k, 2); each image's k complex values are scaled onto
    the sqrt(k P) sphere independently.
    """
    b = z.shape[0]
    k = int(np.prod(z.shape[1:])) // 2
    flat = z.data.reshape(b, -1)
    norms = np.sqrt(np.sum(flat * flat, axis=1))
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize an all-zero vector")
    scale = math.sqrt(k * P) / norms
    out = (flat * scale[:, None]).reshape(z.shape)

    def bwd(g):
        gf = g.reshape(b, -1)
        # y = a x / |x|: dL/dx = a/|x| (g - (g.x̂) x̂) with x̂ = x/|x|
        unit = flat / norms[:, None]
        proj = np.sum(gf * unit, axis=1, keepdims=True)
        gx = scale[:, None] * (gf - proj * unit)
        return (gx.reshape(z.shape),)

    return custom_node([z], out, bwd)
