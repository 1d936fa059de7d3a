"""Comparison systems sharing the encoder/decoder shells of the learned modulator.

* ``analog``: encoder outputs sent as continuous I/Q amplitudes.
* ``uniform``: the trained analog system with each normalized amplitude
  uniformly quantized onto the constellation grid before transmission.
* ``nn``: as ``uniform`` with a learned scalar quantizer/dequantizer.
* ``hardsoft``: nearest-symbol forward pass with a softmax-weighted symbol
  average on the backward pass, trained end to end.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import autodiff as ad
from .channel import ChannelConfig, awgn_transmit
from .constellation import Constellation, Scheme, nearest_symbol, normalize_power

QUANT_RANGE = (-1.0, 1.0)


class BaselineKind(str, Enum):
    ANALOG = "analog"
    UNIFORM = "uniform"
    LEARNED = "nn"
    HARDSOFT = "hardsoft"


def pairs_to_complex(out) -> np.ndarray:
    """Consecutive real pairs (I, Q) of the last axis as complex values."""
    out = np.asarray(out, dtype=float)
    if out.shape[-1] % 2:
        raise ValueError("need an even number of encoder outputs")
    return out[..., 0::2] + 1j * out[..., 1::2]


def analog_transmit(encoder_output, cfg: ChannelConfig, seed=None) -> np.ndarray:
    """Normalize the unconstrained encoder output and send it through the AWGN channel."""
    z = normalize_power(pairs_to_complex(encoder_output), cfg.power)
    return awgn_transmit(z, cfg, seed)


# -- uniform quantizer -----------------------------------------------------

def uniform_quantize(value, levels: int, lo: float = QUANT_RANGE[0], hi: float = QUANT_RANGE[1]):
    """Bin index of ``value`` among ``levels`` equal bins on [lo, hi]; out-of-range values clip."""
    v = np.clip(np.asarray(value, dtype=float), lo, hi)
    step = (hi - lo) / levels
    idx = np.clip(np.floor((v - lo) / step), 0, levels - 1).astype(np.int64)
    return int(idx) if idx.ndim == 0 else idx


def dequantize(index, levels: int, lo: float = QUANT_RANGE[0], hi: float = QUANT_RANGE[1]):
    step = (hi - lo) / levels
    out = lo + (np.asarray(index, dtype=float) + 0.5) * step
    return float(out) if out.ndim == 0 else out


# -- learned quantizer -----------------------------------------------------

@dataclass
class LearnedQuantizer:
    """Scalar quantizer/dequantizer pair, each a single linear layer.

    The dequantizer maps a one-hot level code to its value (the codebook).
    The quantizer scores level j with ``2 c_j v - c_j^2`` and takes the
    argmax, which is the nearest codebook entry; its weights are tied to the
    codebook.
    """

    levels: np.ndarray

    def quantize(self, value) -> np.ndarray:
        v = np.asarray(value, dtype=float)
        scores = 2.0 * self.levels * v[..., None] - self.levels ** 2
        return np.argmax(scores, axis=-1)

    def dequantize(self, index) -> np.ndarray:
        return self.levels[np.asarray(index)]

    def rank(self, index) -> np.ndarray:
        """Position of each selected level in ascending order."""
        order = np.argsort(np.argsort(self.levels))
        return order[np.asarray(index)]

    def mse(self, corpus) -> float:
        v = np.asarray(corpus, dtype=float).reshape(-1)
        return float(np.mean((v - self.dequantize(self.quantize(v))) ** 2))


def learned_quantizer_train(corpus, levels: int, steps: int = 400, lr: float = 0.01,
                            seed: int = 0) -> LearnedQuantizer:
    """Fit the codebook by Adam on the reconstruction MSE of hard assignments."""
    v = np.asarray(corpus, dtype=float).reshape(-1)
    if v.size < levels or np.ptp(v) == 0:
        raise ValueError("degenerate corpus: need spread-out values to place levels")
    # quantiles give an ordered, data-aware starting codebook
    init = np.quantile(v, (np.arange(levels) + 0.5) / levels)
    init = init + 1e-9 * np.arange(levels)
    q = LearnedQuantizer(init.copy())
    store = ad.ParamStore()
    store.add("deq.W", init[:, None])
    for _ in range(steps):
        q.levels = store.params["deq.W"][:, 0]
        onehot = np.eye(levels)[q.quantize(v)]
        tape = ad.Tape()
        recon = tape.const(onehot) @ tape.param(store, "deq.W")
        loss = ad.square(recon.reshape(-1) - v).mean()
        ad.backward(tape, loss)
        ad.adam_step(store, lr)
    return LearnedQuantizer(store.params["deq.W"][:, 0].copy())


# -- hard/soft quantizer ---------------------------------------------------

def hard_soft_quantize(value, c: Constellation, temperature: float = 1.0):
    """Nearest symbol (forward) and softmax(-|v - c_m|^2 / T)-weighted symbol mean (backward)."""
    v = np.asarray(value, dtype=np.complex128)
    hard = c.points[nearest_symbol(v, c)]
    d2 = np.abs(v[..., None] - c.points) ** 2
    a = -d2 / temperature
    w = np.exp(a - a.max(axis=-1, keepdims=True))
    w /= w.sum(axis=-1, keepdims=True)
    return hard, w @ c.points


# -- evaluation-time transmitters for the quantized baselines --------------

def _axes(z: np.ndarray, c: Constellation):
    if c.scheme is Scheme.BPSK:
        return [z.real]
    return [z.real, z.imag]


def _assemble(c: Constellation, ranks: list[np.ndarray], power: float):
    if c.scheme is Scheme.BPSK:
        idx = np.where(ranks[0] == 1, 0, 1)  # +1 is index 0
    else:
        idx = c.index_from_iq(ranks[0], ranks[1])
    return normalize_power(c.points[idx], power), idx


def uniform_transmitter(c: Constellation, power: float = 1.0):
    """Quantize each normalized amplitude to ``side`` uniform bins on [-1, 1].

    The per-axis grid has ``side**groups == M`` cells, so every channel use
    carries log2(M) bits and lands exactly on a constellation point.
    """
    def transmit(z):
        ranks = [uniform_quantize(a, c.side) for a in _axes(z, c)]
        return _assemble(c, ranks, power)
    return transmit


def learned_transmitter(c: Constellation, quantizer: LearnedQuantizer, power: float = 1.0):
    def transmit(z):
        ranks = [quantizer.rank(quantizer.quantize(a)) for a in _axes(z, c)]
        return _assemble(c, ranks, power)
    return transmit


def quantizer_corpus(z: np.ndarray, c: Constellation) -> np.ndarray:
    return np.concatenate([a.reshape(-1) for a in _axes(z, c)])
