"""AWGN channel statistics, reproducibility, and power normalization."""

import numpy as np
import pytest

from jscclab.autodiff import Tensor, parameter, square, tsum
from jscclab.channel import (ChannelModel, noise_rng, normalize_power,
                             normalize_power_tensor, sample_noise, sigma2_to_snr,
                             snr_to_sigma2, transmit, transmit_tensor)


class TestConversions:
    def test_snr_sigma2_roundtrip(self):
        for snr in (-5.0, 0.0, 3.7, 10.0):
            assert sigma2_to_snr(snr_to_sigma2(snr, 2.0), 2.0) == pytest.approx(snr, abs=1e-12)

    def test_known_points(self):
        assert snr_to_sigma2(0.0, 1.0) == pytest.approx(1.0)
        assert snr_to_sigma2(10.0, 1.0) == pytest.approx(0.1)
        assert snr_to_sigma2(0.0, 4.0) == pytest.approx(4.0)

    def test_invalid_power_rejected(self):
        with pytest.raises(ValueError):
            snr_to_sigma2(0.0, 0.0)


class TestNoiseStatistics:
    def test_complex_variance_convention(self):
        # total complex variance sigma2 means sigma2 / 2 per real axis
        rng = noise_rng(0, 0)
        n = sample_noise((100000, 2), 1.0, rng)
        complex_var = np.mean(np.sum(n * n, axis=1))
        assert 0.98 <= complex_var <= 1.02
        # per-axis check guards against the classic 3 dB convention bug
        assert np.var(n[:, 0]) == pytest.approx(0.5, abs=0.02)

    @pytest.mark.parametrize("snr_db", [0.0, 10.0])
    def test_measured_snr_matches_configured(self, snr_db):
        ch = ChannelModel.from_snr(snr_db, P=1.0, rng_seed=1)
        rng = noise_rng(ch.rng_seed, 0)
        z = np.full((50000, 2), np.sqrt(0.5))  # unit-power signal
        noise = sample_noise(z.shape, ch.sigma2, rng)
        measured = 10 * np.log10(np.mean(np.sum(z * z, axis=1))
                                 / np.mean(np.sum(noise * noise, axis=1)))
        assert measured == pytest.approx(snr_db, abs=0.1)


class TestReproducibility:
    def test_same_seed_stream_identical(self):
        ch = ChannelModel.from_snr(5.0, rng_seed=42)
        z = np.ones((16, 2))
        np.testing.assert_array_equal(transmit(z, ch, stream=3), transmit(z, ch, stream=3))

    def test_streams_disjoint(self):
        ch = ChannelModel.from_snr(5.0, rng_seed=42)
        z = np.ones((16, 2))
        assert not np.array_equal(transmit(z, ch, stream=0), transmit(z, ch, stream=1))

    def test_estimate_never_touches_the_noise(self):
        z = np.ones((16, 2))
        a = transmit(z, ChannelModel.from_snr(5.0, snr_est_db=0.0, rng_seed=7))
        b = transmit(z, ChannelModel.from_snr(5.0, snr_est_db=10.0, rng_seed=7))
        np.testing.assert_array_equal(a, b)


class TestChannelModel:
    def test_from_snr_defaults_estimate_to_truth(self):
        ch = ChannelModel.from_snr(4.0)
        assert ch.snr_est_db == pytest.approx(ch.snr_db)

    def test_invalid_noise_power_rejected(self):
        with pytest.raises(ValueError):
            ChannelModel(sigma2=0.0, sigma2_est=1.0)

    def test_transmit_tensor_matches_transmit(self):
        ch = ChannelModel.from_snr(3.0, rng_seed=9)
        z = np.ones((8, 2))
        np.testing.assert_array_equal(transmit_tensor(Tensor(z), ch, stream=2).data,
                                      transmit(z, ch, stream=2))

    def test_transmit_tensor_gradient_is_identity(self):
        ch = ChannelModel.from_snr(3.0, rng_seed=9)
        p = parameter(np.ones((8, 2)))
        tsum(transmit_tensor(p, ch)).backward()
        np.testing.assert_array_equal(p.grad, np.ones((8, 2)))


class TestNormalizePower:
    def test_total_power_on_sphere(self):
        rng = np.random.Generator(np.random.Philox(key=[1, 1]))
        z = rng.standard_normal((20, 2))
        out = normalize_power(z, 2.0)
        assert np.sum(out * out) == pytest.approx(20 * 2.0, rel=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            normalize_power(np.zeros((4, 2)), 1.0)

    def test_tensor_version_per_image(self):
        rng = np.random.Generator(np.random.Philox(key=[2, 2]))
        z = rng.standard_normal((3, 10, 2))
        out = normalize_power_tensor(Tensor(z), 1.5).data
        for i in range(3):
            np.testing.assert_allclose(out[i], normalize_power(z[i], 1.5), rtol=1e-12)

    def test_tensor_version_gradient_orthogonal_to_direction(self):
        # scaling the input along itself must not change the output,
        # so the gradient has no radial component
        rng = np.random.Generator(np.random.Philox(key=[3, 3]))
        z0 = rng.standard_normal((1, 6, 2))
        p = parameter(z0.copy())
        sel = rng.standard_normal((1, 6, 2))
        tsum(normalize_power_tensor(p, 1.0) * Tensor(sel)).backward()
        radial = np.sum(p.grad * z0)
        assert radial == pytest.approx(0.0, abs=1e-10)
