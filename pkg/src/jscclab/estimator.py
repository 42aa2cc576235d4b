"""Scikit-learn style wrapper around the constellation-constrained
autoencoder, so the learned transmission chain composes with pipelines
and model selection utilities: fit(X) trains, transform(X) pushes images
through encoder -> channel -> decoder, score(X) is mean PSNR.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import model as mdl
from .channel import ChannelModel
from .constellation import QuantizerConfig, make_qam
from .metrics import psnr
from .training import TrainConfig, train
from .validation import check_images, check_scalar


class ChannelAutoencoder(TransformerMixin, BaseEstimator):
    """Joint source-channel image autoencoder with a QAM-constrained
    (or continuous, power-normalized) channel input.

    Parameters mirror the model and training configuration; all are
    plain constructor attributes, so get_params/set_params and cloning
    work the sklearn way.
    """

    def __init__(self, M=4, mode="quantized", C_mid=32, C_out=40,
                 sigma_q=100.0, P=1.0, distortion="mse", lam=None,
                 snr_lo=0.0, snr_hi=10.0, eval_snr_db=10.0,
                 batch_size=32, lr=1e-4, max_epochs=100, val_fraction=0.2,
                 A=255.0, seed=0):
        self.M = M
        self.mode = mode
        self.C_mid = C_mid
        self.C_out = C_out
        self.sigma_q = sigma_q
        self.P = P
        self.distortion = distortion
        self.lam = lam
        self.snr_lo = snr_lo
        self.snr_hi = snr_hi
        self.eval_snr_db = eval_snr_db
        self.batch_size = batch_size
        self.lr = lr
        self.max_epochs = max_epochs
        self.val_fraction = val_fraction
        self.A = A
        self.seed = seed

    def _model_config(self, shape) -> mdl.ModelConfig:
        h, w, c = shape
        return mdl.ModelConfig(H=h, W=w, C=c, C_mid=self.C_mid, C_out=self.C_out,
                               M=self.M, sigma_q=self.sigma_q, P=self.P,
                               mode=self.mode)

    def fit(self, X, y=None):
        X = check_images(X, self.A)
        check_scalar(self.snr_lo, "snr_lo")
        check_scalar(self.snr_hi, "snr_hi", low=self.snr_lo)
        config = self._model_config(X.shape[1:])
        n_val = max(1, int(len(X) * self.val_fraction))
        if len(X) - n_val < 1:
            raise ValueError("need at least 2 images to fit")
        tcfg = TrainConfig(distortion=self.distortion, lam=self.lam,
                           snr_lo=self.snr_lo, snr_hi=self.snr_hi,
                           batch_size=self.batch_size, lr=self.lr,
                           max_epochs=self.max_epochs)
        params, report = train(config, tcfg, X[:-n_val], X[-n_val:],
                               seed=self.seed, A=self.A)
        self.config_ = config
        self.params_ = params
        self.report_ = report
        self.image_shape_ = X.shape[1:]
        return self

    def transform(self, X):
        """Reconstructions after one pass through the noisy channel at
        eval_snr_db (matched estimate), same shape and range as X."""
        check_is_fitted(self, "params_")
        X = check_images(X, self.A, self.image_shape_)
        params = mdl.as_parameters(self.params_)
        const = make_qam(self.config_.M, self.config_.P)
        qcfg = QuantizerConfig(self.config_.sigma_q)
        ch = ChannelModel.from_snr(self.eval_snr_db, P=self.config_.P,
                                   rng_seed=self.seed)
        from .training import forward_chain

        out = np.empty_like(X)
        for lo in range(0, len(X), 64):
            xb = X[lo:lo + 64]
            x_hat, _, _ = forward_chain(xb, self.A, params, self.config_,
                                        const, qcfg, ch, stream=lo)
            out[lo:lo + len(xb)] = mdl.to_image_batch(x_hat, self.A)
        return out

    def score(self, X, y=None) -> float:
        """Mean PSNR (dB) of the reconstructions; higher is better."""
        X = check_images(X, self.A)
        rec = self.transform(X)
        vals = psnr(X, rec, self.A)
        return float(vals[np.isfinite(vals)].mean())
