"""Gumbel-Max symbol sampling with a Gumbel-Softmax backward surrogate.

The forward pass draws the hard symbol ``argmax(log q + tau)``; the
backward pass differentiates ``c^T softmax((log q + tau) / rho)`` computed
from the same noise realization ``tau``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .constellation import Constellation, Scheme
from .transition import PROB_FLOOR, TransitionPMF

UNIFORM_CLAMP = 1e-12
DEFAULT_TEMPERATURE = 1.5


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gumbel(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.uniform(size=shape)
    u = np.clip(u, UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP)
    return -np.log(-np.log(u))


@dataclass(frozen=True)
class GumbelNoise:
    values: np.ndarray
    seed: object = None


@dataclass(frozen=True)
class RelaxedSymbols:
    """Hard symbol indices (forward) and relaxed simplex rows (backward).

    ``soft`` has shape (n, groups, side); ``surrogate`` is the relaxed
    complex sequence ``c^T v`` built from it.
    """

    hard: np.ndarray
    soft: np.ndarray
    surrogate: np.ndarray
    temperature: float


def sample_gumbel(n: int, categories: int, seed=None) -> GumbelNoise:
    if n < 1 or categories < 1:
        raise ValueError("n and categories must be positive")
    return GumbelNoise(gumbel(as_rng(seed), (n, categories)), seed)


def gumbel_max_sample(q, tau) -> int:
    """Index maximizing ``tau_m + log q_m``; ties go to the lowest index."""
    q = np.asarray(q, dtype=float)
    logq = np.log(np.maximum(q, PROB_FLOOR))
    return int(kernels.gumbel_argmax(logq[None, :], np.asarray(tau, dtype=float)[None, :])[0])


def gumbel_softmax_relax(q, tau, rho: float) -> np.ndarray:
    if rho <= 0:
        raise ValueError("temperature must be positive")
    q = np.asarray(q, dtype=float)
    logq = np.log(np.maximum(q, PROB_FLOOR))
    return kernels.relaxed_softmax(logq[None, :], np.asarray(tau, dtype=float)[None, :], rho)[0]


def _combine(c: Constellation, amps: np.ndarray) -> np.ndarray:
    if c.scheme is Scheme.BPSK:
        return amps[..., 0] + 0j
    return amps[..., 0] + 1j * amps[..., 1]


def st_modulate(pmf: TransitionPMF, noise, rho: float, c: Constellation):
    """Hard symbol sequence plus its relaxed surrogate from one noise draw.

    Returns
    -------
    z : ndarray of complex
        Forward symbols ``c[hard]`` (not yet power normalized).
    relaxed : RelaxedSymbols
    """
    tau = noise.values if isinstance(noise, GumbelNoise) else np.asarray(noise, dtype=float)
    table = pmf.table
    n, g, side = table.shape
    if tau.shape != (n, g * side):
        raise ValueError(f"noise shape {tau.shape} does not match ({n}, {g * side})")
    logq = np.log(np.maximum(table, PROB_FLOOR)).reshape(n * g, side)
    tau2 = tau.reshape(n * g, side)
    idx = kernels.gumbel_argmax(logq, tau2).reshape(n, g)
    soft = kernels.relaxed_softmax(logq, tau2, rho).reshape(n, g, side)
    levels = c.axis_levels
    surrogate = _combine(c, soft @ levels)
    if c.scheme is Scheme.BPSK:
        hard = idx[:, 0]
    else:
        hard = c.index_from_iq(idx[:, 0], idx[:, 1])
    return c.points[hard].copy(), RelaxedSymbols(hard, soft, surrogate, float(rho))


def modulate_tensor(logits: ad.Tensor, tau: np.ndarray, rho: float, c: Constellation,
                    hard: bool = True):
    """Differentiable symbol generation for a batch.

    Parameters
    ----------
    logits : Tensor
        Shape (B, n * c.categories).
    tau : ndarray
        Frozen Gumbel noise, shape (B, n, c.groups, c.side).
    hard : bool
        Straight-through pairing when True; the purely relaxed sequence when
        False (used for finite-difference checks, where the hard path is
        piecewise constant).

    Returns
    -------
    iq : Tensor
        Real/imaginary parts, shape (B, n, 2).
    indices : ndarray of int
        Hard symbol index per position, shape (B, n).
    """
    B = logits.shape[0]
    n = tau.shape[1]
    side = c.side
    t = logits.reshape((B, n, c.groups, side))
    q = ad.floor_renorm(ad.softmax(t), PROB_FLOOR)
    logq = ad.log(q)
    v = ad.softmax((logq + tau) * (1.0 / rho))
    amps = v @ logits.tape.const(c.axis_levels[:, None])  # (B, n, groups, 1)
    amps = amps.reshape((B, n, c.groups))
    flat_logq = logq.data.reshape(-1, side)
    idx = kernels.gumbel_argmax(flat_logq, tau.reshape(-1, side)).reshape(B, n, c.groups)
    if hard:
        amps = ad.straight_through(amps, c.axis_levels[idx])
    if c.scheme is Scheme.BPSK:
        iq = ad.concat([amps, logits.tape.const(np.zeros((B, n, 1)))], axis=-1)
        indices = idx[..., 0]
    else:
        iq = amps
        indices = c.index_from_iq(idx[..., 0], idx[..., 1])
    return iq, indices
