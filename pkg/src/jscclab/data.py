"""Dataset ingestion: CIFAR-10 binary batches and a synthetic smooth-image
generator for desk-scale runs, plus the deterministic 5:1 split."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

RECORD_BYTES = 3073  # 1 label byte + 3 * 1024 channel-planar pixels


def load_cifar10(path: str) -> np.ndarray:
    """Read CIFAR-10 binary batch files into (N, 32, 32, 3) uint8-valued
    float arrays in [0, 255]; labels are discarded.

    `path` may be a single .bin file or a directory of them.
    """
    if os.path.isdir(path):
        files = sorted(f for f in os.listdir(path) if f.endswith(".bin"))
        if not files:
            raise FileNotFoundError(f"no .bin files under {path}")
        parts = [load_cifar10(os.path.join(path, f)) for f in files]
        return np.concatenate(parts, axis=0)
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) % RECORD_BYTES:
        raise ValueError(
            f"{path}: truncated file, {len(raw)} bytes is not a multiple of "
            f"{RECORD_BYTES} (extra data begins at byte offset "
            f"{len(raw) - len(raw) % RECORD_BYTES})")
    n = len(raw) // RECORD_BYTES
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(n, RECORD_BYTES)
    images = arr[:, 1:].reshape(n, 3, 32, 32)  # channel-planar R, G, B
    return np.transpose(images, (0, 2, 3, 1)).astype(np.float64)


def synthetic_images(n: int, h: int = 32, w: int = 32, c: int = 3,
                     seed: int = 0) -> np.ndarray:
    """Smooth random images in [0, 255]: low-frequency Fourier noise per
    channel, rescaled per image. Deterministic given the seed."""
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0xDA7A]))
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    lowpass = np.exp(-((fy * h / 2) ** 2 + (fx * w / 2) ** 2))
    spec = (rng.normal(size=(n, c, h, w)) + 1j * rng.normal(size=(n, c, h, w)))
    img = np.real(np.fft.ifft2(spec * lowpass, axes=(2, 3)))
    img = np.transpose(img, (0, 2, 3, 1))
    lo = img.min(axis=(1, 2, 3), keepdims=True)
    hi = img.max(axis=(1, 2, 3), keepdims=True)
    img = (img - lo) / (hi - lo)
    # S-curve contrast: realistic dynamic range instead of mid-gray mush
    img = 1.0 / (1.0 + np.exp(-4.0 * (img - 0.5)))
    img = (img - img.min(axis=(1, 2, 3), keepdims=True))
    img /= img.max(axis=(1, 2, 3), keepdims=True)
    return 255.0 * img


def split_train_test(images: np.ndarray, seed: int = 0,
                     ratio: tuple[int, int] = (5, 1)) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint deterministic split, train:test = ratio."""
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0x5197]))
    order = rng.permutation(len(images))
    n_train = len(images) * ratio[0] // sum(ratio)
    return images[order[:n_train]], images[order[n_train:]]


@dataclass(frozen=True)
class DatasetSpec:
    source: str = "synthetic"  # cifar10-binary | synthetic
    path: str = ""
    subset: int = 0  # 0 = all
    seed: int = 0
    h: int = 32  # synthetic image dimensions
    w: int = 32
    c: int = 3

    def load(self) -> tuple[np.ndarray, np.ndarray]:
        if self.source == "cifar10-binary":
            images = load_cifar10(self.path)
        elif self.source == "synthetic":
            images = synthetic_images(self.subset or 1200, h=self.h, w=self.w,
                                      c=self.c, seed=self.seed)
        else:
            raise ValueError(f"unknown dataset source {self.source!r}")
        if self.subset and len(images) > self.subset:
            images = images[:self.subset]
        return split_train_test(images, seed=self.seed)
