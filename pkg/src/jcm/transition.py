"""Per-position categorical transition probabilities of the encoder-modulator.

Positions are conditionally independent, and for rectangular QAM the I and
Q amplitudes are independent as well, so a length-n sequence needs only
``n * 2 * sqrt(M)`` numbers instead of a table over all ``M**n`` sequences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, Scheme

PROB_FLOOR = 1e-12


def floor_renormalize(p: np.ndarray, floor: float = PROB_FLOOR) -> np.ndarray:
    p = np.maximum(p, floor)
    return p / p.sum(axis=-1, keepdims=True)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    x = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class TransitionPMF:
    """Categorical distributions for every position of one sequence.

    ``table`` has shape (n, groups, side): one group for BPSK (probabilities
    of +1 and -1) and two for QAM (I then Q amplitudes, ordered like
    ``Constellation.iq_levels``).
    """

    constellation: Constellation
    table: np.ndarray

    @property
    def scheme(self) -> Scheme:
        return self.constellation.scheme

    @property
    def n(self) -> int:
        return self.table.shape[0]

    @property
    def probs(self) -> np.ndarray:
        if self.scheme is not Scheme.BPSK:
            raise AttributeError("probs is only defined for BPSK; use probs_i/probs_q")
        return self.table[:, 0, :]

    @property
    def probs_i(self) -> np.ndarray:
        return self._axis(0)

    @property
    def probs_q(self) -> np.ndarray:
        return self._axis(1)

    def _axis(self, g: int) -> np.ndarray:
        if self.scheme is not Scheme.QAM:
            raise AttributeError("I/Q marginals are only defined for QAM")
        return self.table[:, g, :]

    def symbol_table(self) -> np.ndarray:
        """(n, M) probabilities of each constellation point per position."""
        if self.scheme is Scheme.BPSK:
            return self.table[:, 0, :].copy()
        return np.einsum("nr,ns->nrs", self.table[:, 0], self.table[:, 1]).reshape(self.n, -1)


def pmf_from_logits(logits, c: Constellation) -> TransitionPMF:
    """Row softmax of encoder logits, floored at ``PROB_FLOOR`` and renormalized.

    ``logits`` has shape (n, c.categories); for QAM the first sqrt(M)
    columns of each row are the I logits and the rest the Q logits.
    """
    z = np.asarray(logits, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    if z.shape[-1] != c.categories:
        raise ValueError(f"expected {c.categories} logits per position, got {z.shape[-1]}")
    table = floor_renormalize(softmax(z.reshape(z.shape[0], c.groups, c.side)))
    return TransitionPMF(c, table)


def pmf_from_probs(probs, c: Constellation) -> TransitionPMF:
    """Wrap explicit probabilities; BPSK accepts the probability of +1 per position."""
    p = np.asarray(probs, dtype=float)
    if c.scheme is Scheme.BPSK and p.ndim == 1:
        p = np.stack([p, 1.0 - p], axis=-1)
    table = p.reshape(p.shape[0], c.groups, c.side)
    if np.any(table < 0) or not np.allclose(table.sum(-1), 1.0, atol=1e-9):
        raise ValueError("rows must be probability vectors")
    return TransitionPMF(c, table)


def _split_indices(pmf: TransitionPMF, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.int64)
    if z.shape != (pmf.n,):
        raise ValueError(f"expected {pmf.n} symbol indices, got shape {z.shape}")
    if np.any(z < 0) or np.any(z >= pmf.constellation.order):
        raise IndexError("symbol index out of range")
    if pmf.scheme is Scheme.BPSK:
        return z[:, None]
    side = pmf.constellation.side
    return np.stack([z // side, z % side], axis=-1)


def sequence_probability(pmf: TransitionPMF, z) -> float:
    """Probability of the symbol-index sequence ``z`` under the product model."""
    idx = _split_indices(pmf, z)
    rows = np.arange(pmf.n)[:, None]
    groups = np.arange(pmf.table.shape[1])[None, :]
    return float(np.prod(pmf.table[rows, groups, idx]))


def sequence_log_probability(pmf: TransitionPMF, z) -> float:
    idx = _split_indices(pmf, z)
    rows = np.arange(pmf.n)[:, None]
    groups = np.arange(pmf.table.shape[1])[None, :]
    return float(np.sum(np.log(pmf.table[rows, groups, idx])))


def joint_symbol_pmf(pmf: TransitionPMF, position: int) -> np.ndarray:
    """Length-M distribution of one QAM position as the I/Q outer product."""
    if pmf.scheme is not Scheme.QAM:
        raise ValueError("joint_symbol_pmf requires a QAM transition model")
    return np.outer(pmf.table[position, 0], pmf.table[position, 1]).reshape(-1)
