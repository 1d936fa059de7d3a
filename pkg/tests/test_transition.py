import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from jcm.constellation import make_bpsk, make_rect_qam
from jcm.transition import (PROB_FLOOR, joint_symbol_pmf, pmf_from_logits, pmf_from_probs,
                            sequence_log_probability, sequence_probability)

BPSK = make_bpsk()
QAM4 = make_rect_qam(4)
QAM16 = make_rect_qam(16)


def test_logits_examples():
    np.testing.assert_allclose(pmf_from_logits([[0.0, 0.0]], BPSK).probs, [[0.5, 0.5]])
    np.testing.assert_allclose(pmf_from_logits([[math.log(3), 0.0]], BPSK).probs,
                               [[0.75, 0.25]], rtol=1e-14)
    p = pmf_from_logits([[1000.0, 0.0]], BPSK).probs[0]
    assert np.all(np.isfinite(p))
    assert p[1] == pytest.approx(PROB_FLOOR, rel=1e-6)
    assert p[0] == pytest.approx(1 - PROB_FLOOR, abs=1e-15)


def test_logits_validation():
    with pytest.raises(ValueError):
        pmf_from_logits([[0.0, np.nan]], BPSK)
    with pytest.raises(ValueError):
        pmf_from_logits([[0.0, 0.0, 0.0]], BPSK)
    assert pmf_from_logits(np.zeros((3, 8)), QAM16).table.shape == (3, 2, 4)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 8), elements=st.floats(-30, 30)), st.floats(-50, 50))
def test_rows_normalized_floored_and_shift_invariant(logits, shift):
    pmf = pmf_from_logits(logits, QAM16)
    np.testing.assert_allclose(pmf.table.sum(-1), 1.0, atol=1e-9)
    assert pmf.table.min() >= PROB_FLOOR * (1 - 1e-9)
    shifted = pmf_from_logits(logits + shift, QAM16)
    np.testing.assert_allclose(shifted.table, pmf.table, atol=1e-12)


def test_sequence_probability_examples():
    pmf = pmf_from_probs([0.7, 0.2], BPSK)
    assert sequence_probability(pmf, [0, 1]) == pytest.approx(0.56)
    det = pmf_from_probs([[1.0, 0.0]], BPSK)
    assert sequence_probability(det, [0]) == 1.0
    qam = pmf_from_probs([[0.6, 0.4, 0.9, 0.1]], QAM4)
    idx = list(QAM4.points).index(-1 + 1j)
    assert sequence_probability(qam, [idx]) == pytest.approx(0.06)


def test_sequence_probability_errors():
    pmf = pmf_from_probs([0.7, 0.2], BPSK)
    with pytest.raises(IndexError):
        sequence_probability(pmf, [0, 2])
    with pytest.raises(ValueError):
        sequence_probability(pmf, [0])


def test_joint_symbol_pmf_examples():
    np.testing.assert_allclose(joint_symbol_pmf(pmf_from_probs([[.5, .5, .5, .5]], QAM4), 0),
                               [0.25] * 4)
    onehot = joint_symbol_pmf(pmf_from_probs([[1, 0, 0, 1]], QAM4), 0)
    assert QAM4.points[np.argmax(onehot)] == -1 + 1j
    assert onehot.max() == 1.0
    np.testing.assert_allclose(joint_symbol_pmf(pmf_from_probs([[.6, .4, .9, .1]], QAM4), 0),
                               [0.54, 0.06, 0.36, 0.04], rtol=1e-14)
    with pytest.raises(ValueError):
        joint_symbol_pmf(pmf_from_probs([0.5], BPSK), 0)


def _joint_by_enumeration(pi, pq, c):
    """Probability of each point found by scanning the (I level, Q level) grid."""
    out = np.zeros(c.order)
    for r, a in enumerate(c.iq_levels):
        for s, b in enumerate(c.iq_levels):
            m = [k for k, p in enumerate(c.points) if p == complex(a, b)][0]
            out[m] += pi[r] * pq[s]
    return out


@pytest.mark.parametrize("c", [QAM4, QAM16], ids=["4qam", "16qam"])
def test_product_form_matches_enumeration(rng, c):
    for _ in range(10):
        pmf = pmf_from_logits(rng.standard_normal((2, c.categories)) * 2, c)
        for i in range(2):
            np.testing.assert_allclose(joint_symbol_pmf(pmf, i),
                                       _joint_by_enumeration(pmf.probs_i[i], pmf.probs_q[i], c),
                                       atol=1e-15)
        for z in itertools.product(range(c.order), repeat=2):
            direct = np.prod([joint_symbol_pmf(pmf, i)[z[i]] for i in range(2)])
            assert abs(sequence_probability(pmf, z) - direct) < 1e-12


@pytest.mark.parametrize("c,n", [(BPSK, 3), (QAM4, 3), (QAM16, 2)], ids=["bpsk", "4qam", "16qam"])
def test_sequence_probabilities_sum_to_one(rng, c, n):
    pmf = pmf_from_logits(rng.standard_normal((n, c.categories)), c)
    total = sum(sequence_probability(pmf, z) for z in itertools.product(range(c.order), repeat=n))
    assert total == pytest.approx(1.0, abs=1e-9)
    z = [0] * n
    assert sequence_log_probability(pmf, z) == pytest.approx(math.log(sequence_probability(pmf, z)))


def test_marginal_accessors_guard_scheme():
    with pytest.raises(AttributeError):
        pmf_from_probs([0.5], BPSK).probs_i
    with pytest.raises(AttributeError):
        pmf_from_probs([[.5, .5, .5, .5]], QAM4).probs
