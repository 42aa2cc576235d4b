"""SNR-conditioned convolutional autoencoder.

Reduced-scale rendering of the usual deep JSCC stack: two stride-2
downsampling stages with residual blocks and attention-feature (AF)
gates in the encoder, mirrored with pixel-shuffle upsampling in the
decoder. The AF gate rescales feature channels from (pooled features,
estimated SNR), which is what lets one model cover a range of channel
conditions. GDN and non-local attention layers are deliberately absent;
activations are parametric leaky ReLUs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, parameter


@dataclass(frozen=True)
class ModelConfig:
    H: int = 32
    W: int = 32
    C: int = 3
    C_mid: int = 32
    C_out: int = 40
    M: int = 4
    sigma_q: float = 100.0
    P: float = 1.0
    mode: str = "quantized"  # quantized | continuous

    def __post_init__(self):
        if self.H % 4 or self.W % 4:
            raise ValueError("H and W must be divisible by 4 (two stride-2 stages)")
        if self.C_out % 2:
            raise ValueError("C_out must be even: channels pair into complex values")
        if self.mode not in ("quantized", "continuous"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def k(self) -> int:
        """Complex channel uses per image."""
        return (self.H // 4) * (self.W // 4) * self.C_out // 2

    @property
    def rho(self) -> float:
        """Channel symbols per source pixel value."""
        return self.k / (self.H * self.W * self.C)

    def to_kv(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in vars(self).items())

    @staticmethod
    def from_kv(text: str) -> "ModelConfig":
        kwargs = {}
        for line in text.strip().splitlines():
            k, v = line.split("=", 1)
            if k in ("H", "W", "C", "C_mid", "C_out", "M"):
                kwargs[k] = int(v)
            elif k in ("sigma_q", "P"):
                kwargs[k] = float(v)
            else:
                kwargs[k] = v
        return ModelConfig(**kwargs)


# ----- parameter initialization -----

def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def _conv_init(rng, name, params, ci, co, k=3):
    fan_in, fan_out = ci * k * k, co * k * k
    params[name + ".w"] = _glorot(rng, (co, ci, k, k), fan_in, fan_out)
    params[name + ".b"] = np.zeros(co)


def _dense_init(rng, name, params, ci, co):
    params[name + ".w"] = _glorot(rng, (ci, co), ci, co)
    params[name + ".b"] = np.zeros(co)


def _af_init(rng, name, params, ch):
    _dense_init(rng, name + ".fc1", params, ch + 1, ch)
    _dense_init(rng, name + ".fc2", params, ch, ch)


def _res_init(rng, name, params, ch):
    _conv_init(rng, name + ".conv1", params, ch, ch)
    _conv_init(rng, name + ".conv2", params, ch, ch)
    params[name + ".slope"] = np.array(0.25)


def init_parameters(config: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0xA11]))
    params: dict[str, np.ndarray] = {}
    cm, co = config.C_mid, config.C_out
    # encoder
    _conv_init(rng, "enc.down1", params, config.C, cm)
    params["enc.slope1"] = np.array(0.25)
    _res_init(rng, "enc.res1", params, cm)
    _af_init(rng, "enc.af1", params, cm)
    _conv_init(rng, "enc.down2", params, cm, cm)
    params["enc.slope2"] = np.array(0.25)
    _res_init(rng, "enc.res2", params, cm)
    _af_init(rng, "enc.af2", params, cm)
    _conv_init(rng, "enc.head", params, cm, co)
    # decoder
    _conv_init(rng, "dec.stem", params, co, cm)
    params["dec.slope0"] = np.array(0.25)
    _res_init(rng, "dec.res1", params, cm)
    _af_init(rng, "dec.af1", params, cm)
    _conv_init(rng, "dec.up1", params, cm, 4 * cm)
    params["dec.slope1"] = np.array(0.25)
    _res_init(rng, "dec.res2", params, cm)
    _af_init(rng, "dec.af2", params, cm)
    _conv_init(rng, "dec.up2", params, cm, 4 * cm)
    params["dec.slope2"] = np.array(0.25)
    _conv_init(rng, "dec.head", params, cm, config.C)
    return params


def as_parameters(arrays: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {name: parameter(arr.copy(), name=name) for name, arr in arrays.items()}


# ----- forward blocks -----

def af_gate(features: Tensor, snr_est_db: float, params: dict[str, Tensor],
            prefix: str) -> Tensor:
    """Per-channel multiplicative gate from (pooled features, SNR estimate).

    Global average pool -> concat snr_est_db / 10 -> dense -> relu ->
    dense -> sigmoid -> broadcast multiply. Zero weights give 0.5 gates.
    """
    b, ch = features.shape[0], features.shape[1]
    pooled = ad.mean(features, axis=(2, 3))                      # (B, Ch)
    snr_col = Tensor(np.full((b, 1), snr_est_db / 10.0))
    h = ad.concat([pooled, snr_col], axis=1)                     # (B, Ch+1)
    h = ad.relu(ad.matmul(h, params[prefix + ".fc1.w"]) + params[prefix + ".fc1.b"])
    gate = ad.sigmoid(ad.matmul(h, params[prefix + ".fc2.w"]) + params[prefix + ".fc2.b"])
    gate = ad.reshape(gate, (b, ch, 1, 1))
    return features * gate


def _conv(x, params, name, stride=1):
    return ad.conv2d(x, params[name + ".w"], params[name + ".b"], stride=stride)


def _res_block(x, params, name):
    h = ad.prelu(_conv(x, params, name + ".conv1"), params[name + ".slope"])
    h = _conv(h, params, name + ".conv2")
    return x + h


def encode(x: np.ndarray, A: float, snr_est_db: float,
           params: dict[str, Tensor], config: ModelConfig) -> Tensor:
    """Images (B, H, W, C) in [0, A] -> latent (B, k, 2)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != (config.H, config.W, config.C):
        raise ValueError(f"input shape {x.shape[1:]} does not match config "
                         f"({config.H}, {config.W}, {config.C})")
    b = x.shape[0]
    h = Tensor(np.transpose(x / A, (0, 3, 1, 2)))  # NCHW in [0, 1]
    h = ad.prelu(_conv(h, params, "enc.down1", stride=2), params["enc.slope1"])
    h = _res_block(h, params, "enc.res1")
    h = af_gate(h, snr_est_db, params, "enc.af1")
    h = ad.prelu(_conv(h, params, "enc.down2", stride=2), params["enc.slope2"])
    h = _res_block(h, params, "enc.res2")
    h = af_gate(h, snr_est_db, params, "enc.af2")
    h = _conv(h, params, "enc.head")                # (B, C_out, H/4, W/4)
    return latent_to_pairs(h, config)


def latent_to_pairs(h: Tensor, config: ModelConfig) -> Tensor:
    """(B, C_out, H', W') -> (B, k, 2): first half of the channel axis is
    the real parts, second half the imaginary parts, flattened row-major.
    """
    b, co = h.shape[0], h.shape[1]
    half = co // 2
    k = half * h.shape[2] * h.shape[3]

    def bwd(g):
        gh = np.concatenate([g[:, :, 0].reshape(b, half, h.shape[2], h.shape[3]),
                             g[:, :, 1].reshape(b, half, h.shape[2], h.shape[3])],
                            axis=1)
        return (gh,)

    fwd = np.stack([h.data[:, :half].reshape(b, k),
                    h.data[:, half:].reshape(b, k)], axis=2)
    return ad.custom_node([h], fwd, bwd)


def pairs_to_latent(y: Tensor, config: ModelConfig) -> Tensor:
    """(B, k, 2) -> (B, C_out, H/4, W/4), inverse of latent_to_pairs."""
    b = y.shape[0]
    hh, ww = config.H // 4, config.W // 4
    half = config.C_out // 2

    def bwd(g):
        gy = np.stack([g[:, :half].reshape(b, -1),
                       g[:, half:].reshape(b, -1)], axis=2)
        return (gy,)

    fwd = np.concatenate([y.data[:, :, 0].reshape(b, half, hh, ww),
                          y.data[:, :, 1].reshape(b, half, hh, ww)], axis=1)
    return ad.custom_node([y], fwd, bwd)


def decode(y: Tensor, snr_est_db: float, params: dict[str, Tensor],
           config: ModelConfig) -> Tensor:
    """Channel output (B, k, 2) -> reconstruction (B, C, H, W) in [0, 1]."""
    if y.shape[1] != config.k or y.shape[2] != 2:
        raise ValueError(f"latent shape {y.shape[1:]} does not match (k={config.k}, 2)")
    h = pairs_to_latent(y, config)
    h = ad.prelu(_conv(h, params, "dec.stem"), params["dec.slope0"])
    h = _res_block(h, params, "dec.res1")
    h = af_gate(h, snr_est_db, params, "dec.af1")
    h = ad.prelu(ad.pixel_shuffle(_conv(h, params, "dec.up1"), 2), params["dec.slope1"])
    h = _res_block(h, params, "dec.res2")
    h = af_gate(h, snr_est_db, params, "dec.af2")
    h = ad.prelu(ad.pixel_shuffle(_conv(h, params, "dec.up2"), 2), params["dec.slope2"])
    return ad.sigmoid(_conv(h, params, "dec.head"))


def to_image_batch(x_hat: Tensor | np.ndarray, A: float) -> np.ndarray:
    """(B, C, H, W) in [0, 1] -> (B, H, W, C) in [0, A] for the metrics."""
    data = x_hat.data if isinstance(x_hat, Tensor) else x_hat
    return np.transpose(data, (0, 2, 3, 1)) * A


# ----- checkpoints -----

def save_checkpoint(path: str, params: dict, config: ModelConfig):
    header = config.to_kv().encode("utf-8")
    blob = ad.save_parameters(params)
    with open(path, "wb") as f:
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(blob)


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], ModelConfig]:
    with open(path, "rb") as f:
        raw = f.read()
    (hlen,) = struct.unpack_from("<I", raw, 0)
    config = ModelConfig.from_kv(raw[4:4 + hlen].decode("utf-8"))
    params = ad.load_parameters(raw[4 + hlen:])
    return params, config
