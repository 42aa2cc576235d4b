"""End-to-end training: distortion + KL-to-uniform regularizer, Adam,
plateau LR decay, early stopping, per-batch SNR randomization.

During training the channel SNR is drawn uniformly per batch from the
configured range and the conditioning estimate is set equal to the true
value. Validation runs at the midpoint SNR with a fixed noise stream so
epoch-to-epoch comparisons are not dominated by noise resampling.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import model as mdl
from .autodiff import Tensor
from .channel import ChannelModel, normalize_power_tensor, transmit_tensor
from .constellation import (Constellation, QuantizerConfig, make_qam,
                            quantize_straight_through, soft_assignment_node)
from .metrics import mse as np_mse
from .metrics import psnr as np_psnr
from .metrics import ssim as np_ssim


def default_lambda(M: int) -> float:
    """Regularizer weight policy: 0.05 below 64-point constellations,
    0 at and above (large constellations do better using a subset)."""
    return 0.05 if M < 64 else 0.0


@dataclass
class TrainConfig:
    distortion: str = "mse"  # mse | ssim (trains on 1 - SSIM)
    lam: float | None = None  # None -> default_lambda(M)
    snr_lo: float = 0.0
    snr_hi: float = 10.0
    batch_size: int = 32
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    lr_decay: float = 0.8
    lr_patience: int = 4
    stop_patience: int = 8
    max_epochs: int = 100
    min_improvement: float = 1e-6

    def __post_init__(self):
        if self.distortion not in ("mse", "ssim"):
            raise ValueError(f"unknown distortion {self.distortion!r}")
        if not 0.0 < self.lr_decay < 1.0:
            raise ValueError("lr_decay must be in (0, 1)")
        if self.lr_patience <= 0 or self.stop_patience <= 0:
            raise ValueError("patience values must be positive")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be >= 0")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_metric: float
    kl: float
    lr: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = math.nan
    metric_name: str = "mse"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epoch,loss,val_metric,kl,lr\n")
        for r in self.epochs:
            buf.write(f"{r.epoch},{r.train_loss:.10g},{r.val_metric:.10g},"
                      f"{r.kl:.10g},{r.lr:.10g}\n")
        return buf.getvalue()

    def summary(self) -> str:
        return (f"best epoch {self.best_epoch}: "
                f"{self.metric_name}={self.best_val:.6g} over {len(self.epochs)} epochs")


# ----- loss pieces -----

def kl_to_uniform(p_hat: np.ndarray) -> float:
    """KL divergence from a distribution over M constellation points to
    the uniform distribution, in nats: sum p ln(p M), with 0 ln 0 = 0."""
    p = np.asarray(p_hat, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities must sum to 1, got {p.sum()!r}")
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] * p.size)))


def distribution_entropy(p_hat: np.ndarray) -> float:
    p = np.asarray(p_hat, dtype=np.float64)
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def _kl_node(weights: Tensor, M: int) -> Tensor:
    """Differentiable KL-to-uniform from soft-assignment rows."""
    p = ad.mean(weights, axis=0)  # (M,)
    # epsilon keeps log finite when a symbol's mass underflows to zero
    return ad.tsum(p * ad.log(p + 1e-300) + math.log(M) * p)


def _ssim_node(x: np.ndarray, x_hat: Tensor) -> Tensor:
    """Differentiable global-statistics SSIM on (B, C, H, W) in [0, 1],
    averaged over channels and batch. Mirrors metrics.ssim with A = 1."""
    v1, v2 = 0.01 ** 2, 0.03 ** 2
    xt = Tensor(x)
    ax = (2, 3)
    mu_x = ad.mean(xt, axis=ax, keepdims=True)
    mu_y = ad.mean(x_hat, axis=ax, keepdims=True)
    var_x = ad.mean(ad.square(xt - mu_x), axis=ax, keepdims=True)
    var_y = ad.mean(ad.square(x_hat - mu_y), axis=ax, keepdims=True)
    cov = ad.mean((xt - mu_x) * (x_hat - mu_y), axis=ax, keepdims=True)
    lum = (2.0 * mu_x * mu_y + v1) / (ad.square(mu_x) + ad.square(mu_y) + v1)
    struct = (2.0 * cov + v2) / (var_x + var_y + v2)
    return ad.mean(lum * struct)


def distortion_loss(x: np.ndarray, x_hat: Tensor, kind: str) -> Tensor:
    """Batch-mean distortion on normalized (B, C, H, W) images."""
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    if kind == "mse":
        return ad.mean(ad.square(Tensor(x) - x_hat))
    return 1.0 - _ssim_node(x, x_hat)


def total_loss(x: np.ndarray, x_hat: Tensor, weights: Tensor | None,
               lam: float, M: int, kind: str = "mse") -> Tensor:
    """Distortion plus lambda times the KL-to-uniform of the empirical
    constellation usage; both terms stay in the gradient graph."""
    loss = distortion_loss(x, x_hat, kind)
    if lam > 0 and weights is not None:
        loss = loss + lam * _kl_node(weights, M)
    return loss


# ----- optimizer -----

class Adam:
    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            mhat = self.m[name] / (1 - b1 ** self.t)
            vhat = self.v[name] / (1 - b2 ** self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


# ----- forward pass through the full chain -----

def forward_chain(x: np.ndarray, A: float, params: dict[str, Tensor],
                  config: mdl.ModelConfig, const: Constellation,
                  qcfg: QuantizerConfig, ch: ChannelModel, stream: int,
                  want_weights: bool = False):
    """encode -> (quantize | normalize) -> channel -> decode.

    Returns (x_hat tensor in [0,1] NCHW, soft-assignment weights tensor
    or None, latent tensor).
    """
    z = mdl.encode(x, A, ch.snr_est_db, params, config)
    weights = None
    if config.mode == "quantized":
        if want_weights:
            flat = ad.reshape(z, (-1, 2))
            weights = soft_assignment_node(flat, const, qcfg)
        z_bar = quantize_straight_through(z, const, qcfg)
    else:
        z_bar = normalize_power_tensor(z, config.P)
    y = transmit_tensor(z_bar, ch, stream)
    x_hat = mdl.decode(y, ch.snr_est_db, params, config)
    return x_hat, weights, z


def evaluate(images: np.ndarray, A: float, params: dict[str, Tensor],
             config: mdl.ModelConfig, const: Constellation, qcfg: QuantizerConfig,
             ch: ChannelModel, stream: int, batch_size: int = 64) -> dict[str, np.ndarray]:
    """Per-image PSNR / SSIM / MSE of the full chain at one channel setting."""
    out = {"psnr": [], "ssim": [], "mse": []}
    for lo in range(0, len(images), batch_size):
        x = images[lo:lo + batch_size]
        x_hat, _, _ = forward_chain(x, A, params, config, const, qcfg, ch,
                                    stream * 100003 + lo)
        rec = mdl.to_image_batch(x_hat, A)
        out["psnr"].append(np_psnr(x, rec, A))
        out["ssim"].append(np_ssim(x, rec, A))
        out["mse"].append(np_mse(x, rec))
    return {k: np.concatenate(v) for k, v in out.items()}


# ----- training loop -----

def train(config: mdl.ModelConfig, tcfg: TrainConfig, train_images: np.ndarray,
          val_images: np.ndarray, seed: int = 0, A: float = 255.0,
          init_params: dict[str, np.ndarray] | None = None,
          verbose: bool = False) -> tuple[dict[str, np.ndarray], TrainReport]:
    """Train on (N, H, W, C) images in [0, A]; returns the parameters of
    the best validation epoch and the per-epoch report. Deterministic
    given the seed.

    `init_params` warm-starts from existing weights (e.g. fine-tuning a
    model trained at one modulation order for a finer one); by default
    parameters are freshly initialized from the seed.
    """
    if len(train_images) == 0 or len(val_images) == 0:
        raise ValueError("train and validation sets must be non-empty")
    lam = default_lambda(config.M) if tcfg.lam is None else tcfg.lam
    const = make_qam(config.M, config.P)
    qcfg = QuantizerConfig(config.sigma_q)
    params = mdl.as_parameters(init_params if init_params is not None
                               else mdl.init_parameters(config, seed))
    opt = Adam(params, lr=tcfg.lr, beta1=tcfg.beta1, beta2=tcfg.beta2)
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0x7121]))

    val_snr = 0.5 * (tcfg.snr_lo + tcfg.snr_hi)
    val_ch = ChannelModel.from_snr(val_snr, P=config.P, rng_seed=seed ^ 0x5A5A)
    metric_name = "mse" if tcfg.distortion == "mse" else "ssim"
    report = TrainReport(metric_name=metric_name)
    best_cost = math.inf
    best_params: dict[str, np.ndarray] = {k: p.data.copy() for k, p in params.items()}
    since_improve_lr = 0
    since_improve_stop = 0
    step = 0

    for epoch in range(tcfg.max_epochs):
        order = rng.permutation(len(train_images))
        losses, kls = [], []
        for lo in range(0, len(order), tcfg.batch_size):
            x = train_images[order[lo:lo + tcfg.batch_size]]
            snr = rng.uniform(tcfg.snr_lo, tcfg.snr_hi)  # shared by the batch
            ch = ChannelModel.from_snr(snr, P=config.P, rng_seed=seed)
            x_hat, weights, _ = forward_chain(
                x, A, params, config, const, qcfg, ch, stream=step,
                want_weights=lam > 0 and config.mode == "quantized")
            x_norm = np.transpose(x / A, (0, 3, 1, 2))
            loss = total_loss(x_norm, x_hat, weights, lam, config.M, tcfg.distortion)
            if not np.isfinite(loss.data):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch} step {step}")
            loss.backward()
            opt.step()
            opt.zero_grad()
            losses.append(float(loss.data))
            if weights is not None:
                kls.append(kl_to_uniform(weights.data.mean(axis=0)))
            step += 1

        res = evaluate(val_images, A, params, config, const, qcfg, val_ch, stream=0)
        val_metric = float(res[metric_name].mean())
        # cost is minimized: mse directly, ssim via 1 - ssim
        cost = val_metric if metric_name == "mse" else 1.0 - val_metric
        report.epochs.append(EpochRecord(epoch, float(np.mean(losses)), val_metric,
                                         float(np.mean(kls)) if kls else 0.0, opt.lr))
        if verbose:
            print(f"epoch {epoch}: loss={np.mean(losses):.6g} "
                  f"val_{metric_name}={val_metric:.6g} lr={opt.lr:.3g}")
        if cost < best_cost - tcfg.min_improvement:
            best_cost = cost
            report.best_epoch = epoch
            report.best_val = val_metric
            best_params = {k: p.data.copy() for k, p in params.items()}
            since_improve_lr = 0
            since_improve_stop = 0
        else:
            since_improve_lr += 1
            since_improve_stop += 1
            if since_improve_lr >= tcfg.lr_patience:
                opt.lr *= tcfg.lr_decay
                since_improve_lr = 0
            if since_improve_stop >= tcfg.stop_patience:
                break
    return best_params, report
