import numpy as np
import pytest

from jcm import baselines as bl
from jcm.channel import ChannelConfig
from jcm.constellation import make_bpsk, make_rect_qam, normalize_power


def test_uniform_quantizer_examples():
    assert bl.uniform_quantize(-1.0, 4) == 0
    assert bl.dequantize(0, 4) == pytest.approx(-0.75)
    assert bl.uniform_quantize(0.3, 4) == 2
    assert bl.dequantize(2, 4) == pytest.approx(0.25)
    assert bl.uniform_quantize(1.7, 4) == 3
    assert bl.uniform_quantize(1.0, 4) == 3
    np.testing.assert_array_equal(bl.uniform_quantize(np.array([-5, 0.0, 0.49]), 2), [0, 1, 1])


def test_analog_transmit_noiseless():
    out = np.array([[3.0, 1.0, -2.0, 0.5]])
    zhat = bl.analog_transmit(out, ChannelConfig(300.0), seed=0)
    expected = normalize_power(np.array([[3 + 1j, -2 + 0.5j]]))
    np.testing.assert_allclose(zhat, expected, atol=1e-6)
    assert np.mean(np.abs(expected) ** 2) == pytest.approx(1.0)


def test_learned_quantizer_beats_closed_form_uniform():
    corpus = np.random.default_rng(0).uniform(-1, 1, 20_000)
    q = bl.learned_quantizer_train(corpus, 4)
    delta = 2 / 4
    assert q.mse(corpus) <= delta ** 2 / 12 + 1e-3
    assert np.all(np.diff(np.sort(q.levels)) > 0)


def test_learned_quantizer_symmetric_two_levels():
    corpus = np.random.default_rng(1).normal(0, 0.5, 20_000)
    corpus = np.r_[corpus, -corpus]
    lv = np.sort(bl.learned_quantizer_train(corpus, 2).levels)
    assert abs(lv[0] + lv[1]) < 0.05


def test_learned_quantizer_rejects_constant():
    with pytest.raises(ValueError):
        bl.learned_quantizer_train(np.full(100, 0.3), 4)


def test_learned_quantizer_is_nearest_level():
    q = bl.LearnedQuantizer(np.array([0.5, -0.5, 0.1]))
    v = np.linspace(-1, 1, 101)
    np.testing.assert_array_equal(q.quantize(v), np.argmin(np.abs(v[:, None] - q.levels), axis=1))
    np.testing.assert_array_equal(q.rank(np.array([0, 1, 2])), [2, 0, 1])


def test_hard_soft_quantizer():
    c = make_rect_qam(16)
    hard, soft = bl.hard_soft_quantize(c.points[5], c, 0.01)
    assert abs(hard - soft) < 1e-6
    hard, _ = bl.hard_soft_quantize(0.0 + (-1 / 3) * 1j, c, 1.0)
    # equidistant from I levels -1/3 and 1/3: the lower index wins
    assert hard == c.points[4 + 1]
    _, soft = bl.hard_soft_quantize(0.7 - 0.2j, c, 1e9)
    assert abs(soft - c.points.mean()) < 1e-6


@pytest.mark.parametrize("c", [make_bpsk(), make_rect_qam(4), make_rect_qam(16)],
                         ids=["bpsk", "4qam", "16qam"])
def test_uniform_transmitter_lands_on_points(rng, c):
    z = normalize_power(rng.standard_normal((50, 8)) + 1j * rng.standard_normal((50, 8)))
    sent, idx = bl.uniform_transmitter(c)(z)
    np.testing.assert_allclose(np.mean(np.abs(sent) ** 2, axis=1), 1.0, rtol=1e-12)
    scale = np.sqrt(np.mean(np.abs(c.points[idx]) ** 2, axis=1, keepdims=True))
    np.testing.assert_allclose(sent * scale, c.points[idx], atol=1e-12)
    # the per-axis bin agrees with the level ordering
    axis = bl.uniform_quantize(z.real, c.side)
    levels = np.sort(c.axis_levels)
    np.testing.assert_array_equal(np.sign(c.points[idx].real), np.sign(levels[axis]))
