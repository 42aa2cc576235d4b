"""Separation pipeline: budget accounting, error-free operation, and the
mid-gray failure convention."""

import numpy as np
import pytest

from jscclab.baseline.codec import codec_decode, codec_encode
from jscclab.baseline.ldpc import make_regular_ldpc
from jscclab.baseline.pipeline import (MID_GRAY, bit_budget, choose_quality,
                                       separation_pipeline, transmit_image)
from jscclab.channel import ChannelModel
from jscclab.constellation import make_qam
from jscclab.data import synthetic_images
from jscclab.metrics import psnr

CODE = make_regular_ldpc(n=1024, m=512, seed=1)
QPSK = make_qam(4, 1.0)


class TestBudget:
    def test_bit_budget_arithmetic(self):
        # 1280 QPSK symbols = 2560 coded bits = 2 blocks of 1024 = 1024 info
        nblocks, capacity = bit_budget(1280, CODE, QPSK)
        assert nblocks == 2
        assert capacity == 1024

    def test_higher_order_carries_more(self):
        nblocks, capacity = bit_budget(1280, CODE, make_qam(16, 1.0))
        assert nblocks == 5
        assert capacity == 2560

    def test_symbols_within_budget(self):
        img = synthetic_images(1, seed=2)[0]
        ch = ChannelModel.from_snr(10.0, rng_seed=0)
        res = transmit_image(img, CODE, QPSK, ch)
        assert 0 < res.symbols_used <= 1280

    def test_choose_quality_picks_finest_fitting(self):
        img = synthetic_images(1, seed=2)[0]
        q, stream = choose_quality(img, 1024)
        assert stream.bit_length <= 1024
        if q > 1:
            assert codec_encode(img, q - 1).bit_length > 1024

    def test_choose_quality_none_when_budget_too_small(self):
        img = synthetic_images(1, seed=2)[0]
        assert choose_quality(img, 16) is None


class TestErrorFree:
    def test_clean_channel_matches_codec_only(self):
        img = synthetic_images(1, seed=4)[0]
        ch = ChannelModel.from_snr(60.0, rng_seed=0)  # effectively noiseless
        res = transmit_image(img, CODE, QPSK, ch)
        assert res.success
        _, stream = choose_quality(img, 1024)
        codec_only = codec_decode(stream)
        np.testing.assert_array_equal(res.reconstruction, codec_only)

    def test_deterministic_given_stream(self):
        img = synthetic_images(1, seed=4)[0]
        ch = ChannelModel.from_snr(3.0, rng_seed=5)
        a = transmit_image(img, CODE, QPSK, ch, stream_index=2)
        b = transmit_image(img, CODE, QPSK, ch, stream_index=2)
        np.testing.assert_array_equal(a.reconstruction, b.reconstruction)


class TestFailure:
    def test_deep_noise_scores_mid_gray(self):
        img = synthetic_images(1, seed=4)[0]
        ch = ChannelModel.from_snr(-5.0, rng_seed=0)
        res = transmit_image(img, CODE, QPSK, ch, max_iters=10)
        assert not res.success
        np.testing.assert_array_equal(res.reconstruction, np.full_like(img, MID_GRAY))

    def test_budget_too_small_reports_failure(self):
        img = synthetic_images(1, seed=4)[0]
        ch = ChannelModel.from_snr(10.0, rng_seed=0)
        res = transmit_image(img, CODE, QPSK, ch, symbol_budget=10)
        assert not res.success
        assert res.symbols_used == 0


class TestBatch:
    def test_shapes_and_flags(self):
        imgs = synthetic_images(3, seed=6)
        ch = ChannelModel.from_snr(10.0, rng_seed=1)
        recons, flags = separation_pipeline(imgs, CODE, QPSK, ch)
        assert recons.shape == imgs.shape
        assert flags.shape == (3,)
        assert flags.all()
        assert psnr(imgs, recons).mean() > 20.0

    def test_quality_ordering_across_snr(self):
        imgs = synthetic_images(3, seed=6)
        good = separation_pipeline(imgs, CODE, QPSK,
                                   ChannelModel.from_snr(10.0, rng_seed=1))[0]
        bad = separation_pipeline(imgs, CODE, QPSK,
                                  ChannelModel.from_snr(-5.0, rng_seed=1),
                                  max_iters=10)[0]
        assert psnr(imgs, good).mean() > psnr(imgs, bad).mean()
