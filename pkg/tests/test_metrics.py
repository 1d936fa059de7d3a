import math

import numpy as np
import pytest

from jcm.constellation import make_rect_qam
from jcm.metrics import (ShapingReport, accuracy, empirical_constellation_pmf, kl_divergence,
                         maxwell_boltzmann, maxwell_boltzmann_fit, psnr, shaping_report)

QAM16 = make_rect_qam(16)


def test_psnr():
    assert psnr(0.01) == pytest.approx(20.0)
    assert psnr(0.0) == math.inf


def test_accuracy():
    assert accuracy([[0.2, 0.8], [0.9, 0.1]], [1, 1]) == 0.5


def test_empirical_pmf():
    np.testing.assert_array_equal(empirical_constellation_pmf([3] * 7, 4), [0, 0, 0, 1])
    rng = np.random.default_rng(0)
    p = empirical_constellation_pmf(rng.integers(0, 16, 100_000), 16)
    assert np.max(np.abs(p - 1 / 16)) < 0.01
    a, b = rng.integers(0, 4, 30), rng.integers(0, 4, 70)
    mix = 0.3 * empirical_constellation_pmf(a, 4) + 0.7 * empirical_constellation_pmf(b, 4)
    np.testing.assert_allclose(empirical_constellation_pmf(np.r_[a, b], 4), mix)
    with pytest.raises(ValueError):
        empirical_constellation_pmf([], 4)


def test_kl_examples():
    assert kl_divergence([0.2, 0.8], [0.2, 0.8]) == 0
    assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert kl_divergence([0.75, 0.25], [0.5, 0.5]) == pytest.approx(
        0.75 * math.log(1.5) + 0.25 * math.log(0.5))
    assert kl_divergence([0.75, 0.25], [0.5, 0.5]) == pytest.approx(0.1308, abs=1e-4)


def test_fit_uniform():
    nu, fitted, kl = maxwell_boltzmann_fit(QAM16, np.full(16, 1 / 16))
    assert nu < 1e-4 and kl < 1e-9


def test_fit_recovers_planted_parameter():
    # generate the target independently of the library helper
    e = np.abs(QAM16.points) ** 2
    target = np.exp(-0.5 * e) / np.exp(-0.5 * e).sum()
    nu, fitted, kl = maxwell_boltzmann_fit(QAM16, target)
    assert nu == pytest.approx(0.5, abs=1e-3)
    np.testing.assert_allclose(fitted, target, atol=1e-6)


def test_fit_degenerate_corner_terminates():
    corner = np.zeros(16)
    corner[0] = 1.0
    nu, _, kl = maxwell_boltzmann_fit(QAM16, corner)
    assert nu == pytest.approx(0.0, abs=1e-6) or kl > 1.0


def test_fit_never_worse_than_uniform():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rng.dirichlet(np.ones(16) * 0.5)
        _, _, kl = maxwell_boltzmann_fit(QAM16, p)
        assert kl <= kl_divergence(p, np.full(16, 1 / 16)) + 1e-12


def test_inner_heavy_usage_gives_positive_nu():
    p = maxwell_boltzmann(QAM16, 1.2)
    idx = np.repeat(np.arange(16), np.round(p * 10_000).astype(int))
    rep = shaping_report(QAM16, idx, -6)
    assert rep.nu == pytest.approx(1.2, abs=0.02)
    assert rep.kl_mb < rep.kl_uniform
    assert ShapingReport.from_json(rep.to_json()) == rep
