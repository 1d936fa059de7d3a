"""Brute-force ground truth for systems small enough to enumerate.

A :class:`ToySystem` has a finite source alphabet, an explicit transition
model per source value and at most 4096 candidate symbol sequences, so
posteriors, mutual information and expected losses can be computed by
summing over everything. These routines back the bound and gradient
checks; nothing here is used for training.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import kernels
from .constellation import Constellation, normalize_power
from .gumbel import as_rng, gumbel, modulate_tensor
from .transition import TransitionPMF, softmax


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass
class ToySystem:
    """Finite source, explicit per-source transition model, AWGN channel.

    Parameters
    ----------
    xs : (J, k) source values; repeated rows denote the same x.
    labels : (J,) semantic labels in 0 .. L-1.
    prior : (J,) probabilities of each support point.
    pmfs : one TransitionPMF per support point.
    sigma2 : channel noise variance.
    normalize : scale each candidate sequence to average power ``power``.
    """

    xs: np.ndarray
    labels: np.ndarray
    prior: np.ndarray
    pmfs: list
    constellation: Constellation
    sigma2: float
    normalize: bool = True
    power: float = 1.0

    def __post_init__(self):
        self.xs = np.atleast_2d(np.asarray(self.xs, dtype=float))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.prior = np.asarray(self.prior, dtype=float)
        J = len(self.prior)
        if not (len(self.xs) == len(self.labels) == len(self.pmfs) == J):
            raise ValueError("support arrays disagree in length")
        if J > 16:
            raise ValueError("support limited to 16 points")
        if abs(self.prior.sum() - 1.0) > 1e-12 or np.any(self.prior < 0):
            raise ValueError("prior must be a probability vector")
        n = self.pmfs[0].n
        if any(p.n != n for p in self.pmfs):
            raise ValueError("all transition models need the same length")
        if self.constellation.order ** n > 4096:
            raise ValueError("too many candidate sequences to enumerate")
        _, self.x_ids = np.unique(self.xs, axis=0, return_inverse=True)
        self.x_ids = self.x_ids.reshape(-1)
        self.num_x = int(self.x_ids.max()) + 1
        self.num_labels = int(self.labels.max()) + 1
        self.index_seqs = np.array(list(itertools.product(range(self.constellation.order),
                                                          repeat=n)), dtype=np.int64)
        seqs = self.constellation.points[self.index_seqs]
        self.seqs = normalize_power(seqs, self.power) if self.normalize else seqs
        tables = np.stack([p.symbol_table() for p in self.pmfs])  # (J, n, M)
        positions = np.arange(n)[None, :]
        self.seq_probs = np.stack([np.prod(t[positions, self.index_seqs], axis=1) for t in tables])
        with np.errstate(divide="ignore"):
            self.log_seq_probs = np.log(self.seq_probs)

    @property
    def n(self) -> int:
        return self.index_seqs.shape[1]

    def label_prior(self) -> np.ndarray:
        return np.bincount(self.labels, weights=self.prior, minlength=self.num_labels)

    def x_prior(self) -> np.ndarray:
        return np.bincount(self.x_ids, weights=self.prior, minlength=self.num_x)

    def source_posterior(self, zhat) -> np.ndarray:
        """(D, J) posterior over support points given received sequences."""
        z = np.atleast_2d(np.asarray(zhat, dtype=np.complex128))
        logev = kernels.gaussian_log_evidence(z.real, z.imag, self.seqs.real, self.seqs.imag,
                                              self.log_seq_probs, self.sigma2)
        with np.errstate(divide="ignore"):
            a = logev + np.log(self.prior)[None, :]
        return np.exp(a - _logsumexp(a, axis=1)[:, None])

    def sample(self, num: int, seed=None):
        """Draw (support index, sequence index, received sequence) triples."""
        rng = as_rng(seed)
        j = rng.choice(len(self.prior), size=num, p=self.prior)
        u = rng.uniform(size=num)
        cdf = np.cumsum(self.seq_probs[j], axis=1)
        s = np.minimum((u[:, None] > cdf).sum(axis=1), cdf.shape[1] - 1)
        noise = rng.standard_normal((num, self.n, 2)) * np.sqrt(self.sigma2 / 2.0)
        zhat = self.seqs[s] + noise[..., 0] + 1j * noise[..., 1]
        return j, s, zhat


def _group(post: np.ndarray, ids: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros((post.shape[0], size))
    for j, g in enumerate(ids):
        out[:, g] += post[:, j]
    return out


def exact_posterior(sys: ToySystem, zhat):
    """Bayes posteriors ``p(s | zhat)`` and ``p(x | zhat)``.

    Returns arrays of shape (D, L) and (D, X) where X counts distinct source
    values; a single sequence gives D = 1.
    """
    post = sys.source_posterior(zhat)
    return _group(post, sys.labels, sys.num_labels), _group(post, sys.x_ids, sys.num_x)


Decoder = Callable[[np.ndarray], tuple]


def bayes_decoder(sys: ToySystem) -> Decoder:
    return lambda zhat: exact_posterior(sys, zhat)


@dataclass
class Estimate:
    value: float
    se: float
    samples: np.ndarray

    def __iter__(self):
        yield self.value
        yield self.se


def _estimate(samples: np.ndarray) -> Estimate:
    return Estimate(float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(len(samples))),
                    samples)


@dataclass
class MutualInformation:
    label: Estimate
    source: Estimate

    def objective(self, lam: float) -> Estimate:
        return _estimate(self.label.samples + lam * self.source.samples)


def mc_mutual_information(sys: ToySystem, num_draws: int, seed=None) -> MutualInformation:
    """Monte Carlo I(S; Zhat) and I(X; Zhat) in nats with exact inner posteriors."""
    j, _, zhat = sys.sample(num_draws, seed)
    ps, px = exact_posterior(sys, zhat)
    rows = np.arange(num_draws)
    s, x = sys.labels[j], sys.x_ids[j]
    i_s = np.log(ps[rows, s]) - np.log(sys.label_prior()[s])
    i_x = np.log(px[rows, x]) - np.log(sys.x_prior()[x])
    return MutualInformation(_estimate(i_s), _estimate(i_x))


def vilb_exact(sys: ToySystem, decoder: Decoder, lam: float, num_draws: int,
               seed=None) -> Estimate:
    """Monte Carlo lower bound ``E[log q(s|zhat) + lam log q(x|zhat)] + H(S) + lam H(X)``."""
    j, _, zhat = sys.sample(num_draws, seed)
    qs, qx = decoder(zhat)
    rows = np.arange(num_draws)
    with np.errstate(divide="ignore"):
        terms = (np.log(qs[rows, sys.labels[j]]) + lam * np.log(qx[rows, sys.x_ids[j]]))
    const = entropy(sys.label_prior()) + lam * entropy(sys.x_prior())
    return _estimate(terms + const)


# -- decoders for bound checks ---------------------------------------------

def _normalize(p):
    return p / p.sum(axis=1, keepdims=True)


def prior_decoder(sys: ToySystem) -> Decoder:
    ps, px = sys.label_prior(), sys.x_prior()
    return lambda zhat: (np.tile(ps, (len(np.atleast_2d(zhat)), 1)),
                         np.tile(px, (len(np.atleast_2d(zhat)), 1)))


def perturbed_decoders(sys: ToySystem) -> dict[str, Decoder]:
    """Five deliberately suboptimal decoders derived from the Bayes posterior."""
    exact = bayes_decoder(sys)
    ps0, px0 = sys.label_prior(), sys.x_prior()

    def mix_uniform(zhat):
        ps, px = exact(zhat)
        return 0.5 * ps + 0.5 / ps.shape[1], 0.5 * px + 0.5 / px.shape[1]

    def sharpen(zhat):
        ps, px = exact(zhat)
        return _normalize(ps ** 3), _normalize(px ** 3)

    def flatten(zhat):
        ps, px = exact(zhat)
        return _normalize(np.sqrt(ps)), _normalize(np.sqrt(px))

    def mix_prior(zhat):
        ps, px = exact(zhat)
        return 0.5 * ps + 0.5 * ps0, 0.5 * px + 0.5 * px0

    def mix_shifted(zhat):
        ps, px = exact(zhat)
        return (0.7 * ps + 0.3 * np.roll(ps, 1, axis=1),
                0.7 * px + 0.3 * np.roll(px, 1, axis=1))

    return {"mix_uniform": mix_uniform, "sharpen": sharpen, "flatten": flatten,
            "mix_prior": mix_prior, "mix_shifted": mix_shifted}


# -- score-function oracle -------------------------------------------------

def _tables(logits: np.ndarray, c: Constellation) -> np.ndarray:
    """Softmax per categorical group; no flooring so the oracle stays exact."""
    logits = np.asarray(logits, dtype=float)
    return softmax(logits.reshape(logits.shape[0], c.groups, c.side))


def _group_indices(c: Constellation, index_seqs: np.ndarray) -> np.ndarray:
    if c.groups == 1:
        return index_seqs[..., None]
    return np.stack([index_seqs // c.side, index_seqs % c.side], axis=-1)


def enumerate_sequences(n: int, c: Constellation):
    idx = np.array(list(itertools.product(range(c.order), repeat=n)), dtype=np.int64)
    return idx, c.points[idx]


def sequence_probs(logits, c: Constellation, index_seqs: np.ndarray) -> np.ndarray:
    q = _tables(logits, c)
    gi = _group_indices(c, index_seqs)  # (S, n, G)
    n, G = q.shape[0], q.shape[1]
    picked = q[np.arange(n)[None, :, None], np.arange(G)[None, None, :], gi]
    return np.prod(picked.reshape(len(index_seqs), -1), axis=1)


def expected_loss(logits, h: Callable[[np.ndarray], np.ndarray], c: Constellation) -> float:
    """``sum_z p(z | logits) h(z)`` over every symbol sequence; ``h`` maps (S, n) complex to (S,)."""
    logits = np.asarray(logits, dtype=float)
    idx, seqs = enumerate_sequences(logits.shape[0], c)
    return float(np.dot(sequence_probs(logits, c, idx), h(seqs)))


def _score(logits, c: Constellation, index_seqs: np.ndarray) -> np.ndarray:
    """d log p(z) / d logits for each sequence, shape (S, n, categories)."""
    q = _tables(logits, c)
    gi = _group_indices(c, index_seqs)
    onehot = np.zeros((len(index_seqs),) + q.shape)
    S, n, G = gi.shape
    onehot[np.arange(S)[:, None, None], np.arange(n)[None, :, None],
           np.arange(G)[None, None, :], gi] = 1.0
    return (onehot - q[None]).reshape(S, n, -1)


def score_function_grad_exact(logits, h, c: Constellation) -> np.ndarray:
    """``sum_z p(z) h(z) grad log p(z)`` by full enumeration."""
    logits = np.asarray(logits, dtype=float)
    idx, seqs = enumerate_sequences(logits.shape[0], c)
    w = sequence_probs(logits, c, idx) * h(seqs)
    return np.tensordot(w, _score(logits, c, idx), axes=1)


def score_function_grad_mc(logits, h, c: Constellation, num_draws: int, seed=None):
    """Monte Carlo score-function gradient with per-coordinate standard errors."""
    logits = np.asarray(logits, dtype=float)
    rng = as_rng(seed)
    q = _tables(logits, c)
    n, G, side = q.shape
    cdf = np.cumsum(q, axis=-1)
    u = rng.uniform(size=(num_draws, n, G, 1))
    gi = np.minimum((u > cdf[None]).sum(-1), side - 1)
    idx = gi[..., 0] if G == 1 else c.index_from_iq(gi[..., 0], gi[..., 1])
    samples = h(c.points[idx])[:, None, None] * _score(logits, c, idx)
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(num_draws)
    return mean, se


def finite_difference_grad(f: Callable[[np.ndarray], float], logits, step: float = 1e-4):
    logits = np.array(logits, dtype=float)
    grad = np.zeros_like(logits)
    for i in np.ndindex(logits.shape):
        old = logits[i]
        logits[i] = old + step
        up = f(logits)
        logits[i] = old - step
        down = f(logits)
        logits[i] = old
        grad[i] = (up - down) / (2 * step)
    return grad


def pathwise_grad(logits, h_tensor: Callable[[ad.Tensor], ad.Tensor], c: Constellation,
                  rho: float, num_draws: int, seed=None) -> np.ndarray:
    """Gumbel-Softmax relaxed gradient of ``E[h]`` averaged over noise draws.

    ``h_tensor`` maps an (B, n, 2) tensor of I/Q amplitudes to a (B,) tensor.
    """
    logits = np.asarray(logits, dtype=float)
    n = logits.shape[0]
    rng = as_rng(seed)
    store = ad.ParamStore()
    store.add("logits", np.tile(logits.reshape(1, -1), (num_draws, 1)))
    tape = ad.Tape()
    t = tape.param(store, "logits")
    tau = gumbel(rng, (num_draws, n, c.groups, c.side))
    iq, _ = modulate_tensor(t, tau, rho, c, hard=False)
    loss = h_tensor(iq).mean()
    ad.backward(tape, loss)
    return store.grads["logits"].sum(axis=0).reshape(logits.shape)
