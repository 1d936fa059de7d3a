import numpy as np
import pytest

from jcm.channel import (ChannelConfig, PowerMismatch, awgn_transmit, complex_noise,
                         snr_to_sigma2, to_real)
from jcm.constellation import normalize_power


@pytest.mark.parametrize("snr,sigma2", [(0, 1.0), (10, 0.1), (-6, 3.981071705534973)])
def test_snr_to_sigma2(snr, sigma2):
    assert snr_to_sigma2(snr, 1.0) == pytest.approx(sigma2, rel=1e-12)
    assert ChannelConfig(snr).sigma2 == pytest.approx(sigma2, rel=1e-12)


def test_noiseless_limit_and_seeding(rng):
    z = normalize_power(rng.standard_normal(8) + 1j * rng.standard_normal(8))
    np.testing.assert_allclose(awgn_transmit(z, ChannelConfig(300.0), seed=1), z, atol=1e-6)
    a = awgn_transmit(z, ChannelConfig(3.0), seed=5)
    np.testing.assert_array_equal(a, awgn_transmit(z, ChannelConfig(3.0), seed=5))


def test_unnormalized_input_is_rejected():
    with pytest.raises(PowerMismatch):
        awgn_transmit(np.array([2.0, 2.0]), ChannelConfig(0.0))


def test_noise_power_and_moments():
    n = 100_000
    z = np.ones(n, complex)
    eps = awgn_transmit(z, ChannelConfig(0.0), seed=11) - z
    assert np.mean(np.abs(eps) ** 2) == pytest.approx(1.0, abs=0.02)
    sigma = 1.0
    for part in (eps.real, eps.imag):
        assert abs(part.mean()) < 3 * sigma / np.sqrt(n)
        assert part.var() == pytest.approx(0.5, rel=0.02)


def test_channel_is_memoryless(rng):
    eps = complex_noise(np.random.default_rng(2), (6,), 0.3)
    z = normalize_power(rng.standard_normal(6) + 1j * rng.standard_normal(6))
    perm = rng.permutation(6)
    np.testing.assert_array_equal((z + eps)[perm], z[perm] + eps[perm])


def test_to_real_layout():
    zhat = np.array([[1 + 2j, 3 + 4j]])
    np.testing.assert_array_equal(to_real(zhat), [[1, 3, 2, 4]])
