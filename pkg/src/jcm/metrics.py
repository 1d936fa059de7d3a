"""Accuracy, PSNR and probabilistic-shaping diagnostics."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .constellation import Constellation
from .transition import PROB_FLOOR

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def psnr(mse_per_element: float, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / MSE)`` with MSE averaged over every source element."""
    if mse_per_element <= 0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse_per_element)


def accuracy(posteriors, labels) -> float:
    p = np.asarray(posteriors)
    return float(np.mean(np.argmax(p, axis=-1) == np.asarray(labels)))


def empirical_constellation_pmf(indices, order: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise ValueError("empty symbol stream")
    if np.any(idx < 0) or np.any(idx >= order):
        raise ValueError("symbol index out of range")
    return np.bincount(idx, minlength=order) / idx.size


def kl_divergence(p, q) -> float:
    """``sum p log(p / q)`` with ``0 log 0 = 0`` and q floored at 1e-12."""
    p = np.asarray(p, dtype=float)
    q = np.maximum(np.asarray(q, dtype=float), PROB_FLOOR)
    mask = p > 0
    return float(max(np.sum(p[mask] * np.log(p[mask] / q[mask])), 0.0))


def maxwell_boltzmann(c: Constellation, nu: float) -> np.ndarray:
    e = np.abs(c.points) ** 2
    w = np.exp(-nu * (e - e.min()))
    return w / w.sum()


def golden_section_min(f, lo: float, hi: float, tol: float = 1e-6) -> float:
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    # the interval ends are candidates too: the optimum may sit on the bound
    return min((lo, x, hi), key=f)


def maxwell_boltzmann_fit(c: Constellation, pmf, nu_max: float = 50.0, tol: float = 1e-6):
    """Fit ``p_m ∝ exp(-nu |c_m|^2)``, ``nu >= 0``, minimizing KL(pmf || fit).

    Returns
    -------
    nu : float
    fitted : ndarray
    kl : float
    """
    pmf = np.asarray(pmf, dtype=float)
    nu = golden_section_min(lambda v: kl_divergence(pmf, maxwell_boltzmann(c, v)), 0.0, nu_max, tol)
    fitted = maxwell_boltzmann(c, nu)
    return nu, fitted, kl_divergence(pmf, fitted)


@dataclass
class ShapingReport:
    snr_db: float
    pmf: list
    kl_uniform: float
    nu: float
    kl_mb: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "ShapingReport":
        return cls(**json.loads(text))


def shaping_report(c: Constellation, indices, snr_db: float) -> ShapingReport:
    pmf = empirical_constellation_pmf(indices, c.order)
    uniform = np.full(c.order, 1.0 / c.order)
    nu, _, kl_mb = maxwell_boltzmann_fit(c, pmf)
    return ShapingReport(float(snr_db), [float(p) for p in pmf], kl_divergence(pmf, uniform),
                         float(nu), float(kl_mb))
