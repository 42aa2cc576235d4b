"""Constellation-constrained joint source-channel coding of images:
a learned QAM-quantized autoencoder, an AWGN channel, and a classical
codec + LDPC separation baseline over the same symbol budget."""

from .autodiff import Tensor, parameter
from .channel import ChannelModel, snr_to_sigma2, sigma2_to_snr, transmit
from .constellation import (Constellation, QuantizerConfig, empirical_distribution,
                            hard_quantize, make_qam, quantize_straight_through,
                            soft_quantize)
from .estimator import ChannelAutoencoder
from .metrics import ImageBatch, mse, psnr, ssim
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .training import TrainConfig, TrainReport, kl_to_uniform, total_loss, train

__all__ = [
    "Tensor", "parameter",
    "ChannelModel", "snr_to_sigma2", "sigma2_to_snr", "transmit",
    "Constellation", "QuantizerConfig", "empirical_distribution",
    "hard_quantize", "make_qam", "quantize_straight_through", "soft_quantize",
    "ChannelAutoencoder",
    "ImageBatch", "mse", "psnr", "ssim",
    "ModelConfig", "load_checkpoint", "save_checkpoint",
    "TrainConfig", "TrainReport", "kl_to_uniform", "total_loss", "train",
]

__version__ = "0.1.0"
