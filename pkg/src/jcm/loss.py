"""Training objective: classification cross-entropy plus weighted reconstruction error.

Training minimizes ``CE + lam * MSE``, the negative of the empirical lower
bound on ``I(S; Zhat) + lam * I(X; Zhat)`` with its additive constant
``H(S) + lam * H(X)`` dropped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .transition import PROB_FLOOR

# Trade-off weights for n = 128 channel uses, keyed by SNR in dB.
LAMBDA_TABLE = {
    "bpsk": {18: 70.0, 12: 70.0, 6: 70.0, 0: 30.0, -6: 20.0, -12: 2.0, -18: 0.5},
    "qam": {18: 270.0, 12: 250.0, 6: 250.0, 0: 30.0, -6: 20.0, -12: 2.0, -18: 0.5},
}


def default_lambda(scheme: str, snr_db: float) -> float:
    table = LAMBDA_TABLE[str(scheme).lower()]
    key = int(round(snr_db))
    if key != snr_db or key not in table:
        raise KeyError(f"no tabulated lambda for {scheme} at {snr_db} dB; set lambda explicitly")
    return table[key]


@dataclass(frozen=True)
class LossConfig:
    lam: float
    num_classes: int

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be finite and non-negative, got {self.lam}")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")


def _labels(labels, batch: int, num_classes: int) -> np.ndarray:
    s = np.asarray(labels, dtype=np.int64).reshape(-1)
    if s.shape[0] != batch:
        raise ValueError("label count does not match the batch")
    if np.any(s < 0) or np.any(s >= num_classes):
        raise ValueError("label out of range")
    return s


def cross_entropy(posteriors, labels) -> float:
    """Mean of ``-log posterior[label]`` with posteriors floored at 1e-12."""
    p = np.atleast_2d(np.asarray(posteriors, dtype=float))
    s = _labels(labels, p.shape[0], p.shape[1])
    return float(-np.mean(np.log(np.maximum(p[np.arange(p.shape[0]), s], PROB_FLOOR))))


def mse(x, x_hat) -> float:
    """Per-sample squared error ``||x - x_hat||^2``, averaged over the batch."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=float))
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    return float(np.mean(np.sum((x - x_hat) ** 2, axis=1)))


def vilb_batch_loss(posteriors, labels, x, x_hat, cfg: LossConfig) -> float:
    return cross_entropy(posteriors, labels) + cfg.lam * mse(x, x_hat)


# -- differentiable forms --------------------------------------------------

def cross_entropy_tensor(logits: ad.Tensor, labels) -> ad.Tensor:
    logp = ad.log_softmax(logits)
    s = _labels(labels, logits.shape[0], logits.shape[1])
    return -ad.getitem(logp, (np.arange(logits.shape[0]), s)).mean()


def mse_tensor(x, x_hat: ad.Tensor) -> ad.Tensor:
    diff = x_hat - np.asarray(x, dtype=float)
    return ad.square(diff).sum(axis=1).mean()


def vilb_tensor(class_logits: ad.Tensor, labels, x, x_hat: ad.Tensor,
                cfg: LossConfig) -> ad.Tensor:
    loss = cross_entropy_tensor(class_logits, labels)
    if cfg.lam:
        loss = loss + mse_tensor(x, x_hat) * cfg.lam
    return loss
