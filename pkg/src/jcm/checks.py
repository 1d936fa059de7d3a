"""Property suites behind the ``gradcheck``, ``oraclecheck``, ``sample-dist`` and ``shaping`` commands.

Each suite returns a list of :class:`Check`; a suite passes when all of them do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from . import oracle as orc
from . import pipeline as pl
from .constellation import make_bpsk, make_rect_qam
from .gumbel import as_rng, gumbel
from .metrics import ShapingReport
from .transition import pmf_from_logits


@dataclass
class Check:
    name: str
    value: float
    bound: float
    relation: str  # "<", ">" or "<="
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.value:.6g} {self.relation} {self.bound:.6g}"


def _check(name, value, relation, bound) -> Check:
    ops = {"<": value < bound, "<=": value <= bound, ">": value > bound, ">=": value >= bound}
    return Check(name, float(value), float(bound), relation, bool(ops[relation]))


# -- sampling --------------------------------------------------------------

def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def sampling_checks(order: int = 16, draws: int = 100_000, num_pmfs: int = 20, seed=0,
                    tol: float = 0.01) -> list[Check]:
    """Empirical Gumbel-max frequencies against random Dirichlet(1) PMFs."""
    rng = as_rng(seed)
    out = []
    for i in range(num_pmfs):
        q = rng.dirichlet(np.ones(order))
        logq = np.broadcast_to(np.log(q), (draws, order))
        idx = kernels.gumbel_argmax(logq, gumbel(rng, (draws, order)))
        emp = np.bincount(idx, minlength=order) / draws
        out.append(_check(f"pmf {i} total variation", total_variation(emp, q), "<", tol))
    return out


# -- end-to-end gradients --------------------------------------------------

GRADCHECK_CASES = (
    ("jcm", "bpsk", 2, 6),
    ("jcm", "qam", 4, 4),
    ("jcm", "qam", 16, 2),
    ("analog", "qam", 4, 4),
)


def gradient_report(method: str, scheme: str, order: int, n: int, seed=0,
                    step: float = 1e-4, tol: float = 1e-4) -> ad.GradCheckReport:
    """Backprop against central differences through the whole pipeline.

    Gumbel and channel noise are drawn once and frozen. The categorical
    modulator is checked on its relaxed path: the straight-through forward
    value is piecewise constant in the logits, so finite differences of it
    carry no information.
    """
    cfg = pl.SystemConfig(method, scheme, order, n, k=4, num_classes=3, snr_db=6.0, lam=2.0,
                          enc_hidden=(6,), sem_hidden=(6,), src_hidden=(6,))
    model = pl.build_model(cfg, seed)
    rng = np.random.default_rng([seed, 3])
    batch = 5
    x = rng.uniform(size=(batch, cfg.k))
    labels = rng.integers(0, cfg.num_classes, size=batch)
    tau, eps = pl.draw_noise(model, rng, batch)

    def loss_fn(store):
        model.store = store
        return pl.loss_tensor(model, x, labels, tau, eps, hard=False)

    return ad.gradcheck(loss_fn, model.store, h=step, tol=tol)


def gradient_checks(seed=0, tol: float = 1e-4, min_fraction: float = 0.99) -> list[Check]:
    out = []
    for method, scheme, order, n in GRADCHECK_CASES:
        rep = gradient_report(method, scheme, order, n, seed, tol=tol)
        label = f"{method} {scheme}{order} n={n} ({rep.rel_err.size} params)"
        out.append(_check(f"{label} fraction within {tol:g}", rep.pass_fraction, ">=",
                          min_fraction))
        out.append(_check(f"{label} max relative error", rep.max_rel_err, "<", tol))
    return out


# -- lower-bound oracle ----------------------------------------------------

def toy_systems(seed=0) -> list[orc.ToySystem]:
    """Three small systems: BPSK n=2, 4QAM n=1 and 4QAM n=2, each with shared x values."""
    rng = np.random.default_rng([seed, 4])

    def build(c, n, support, num_labels, snr_db):
        xs = rng.integers(0, 3, size=(support, 2)).astype(float)
        xs[: support // 2 * 2: 2] = xs[1: support // 2 * 2: 2]  # repeated x values
        labels = np.arange(support) % num_labels
        prior = rng.dirichlet(np.full(support, 2.0))
        pmfs = [pmf_from_logits(2.0 * rng.standard_normal((n, c.categories)), c)
                for _ in range(support)]
        return orc.ToySystem(xs, labels, prior, pmfs, c, 10 ** (-snr_db / 10))

    return [build(make_bpsk(), 2, 6, 3, 3.0),
            build(make_rect_qam(4), 1, 4, 2, 0.0),
            build(make_rect_qam(4), 2, 8, 4, 6.0)]


def bound_checks(seed=0, lam: float = 0.5, draws: int = 40_000, sigmas: float = 3.0) -> list[Check]:
    """Exact-posterior bound against MI, and strict gaps for perturbed decoders.

    MI and the bound come from independent draws. Perturbed decoders share
    draws with the exact decoder and are compared through the paired gap.
    """
    out = []
    for i, sys in enumerate(toy_systems(seed)):
        mi = orc.mc_mutual_information(sys, draws, seed=[seed, i, 0]).objective(lam)
        exact = orc.vilb_exact(sys, orc.bayes_decoder(sys), lam, draws, seed=[seed, i, 1])
        z = abs(exact.value - mi.value) / math.hypot(exact.se, mi.se)
        out.append(_check(f"system {i}: |bound - MI| in standard errors", z, "<", sigmas))
        for name, dec in orc.perturbed_decoders(sys).items():
            pert = orc.vilb_exact(sys, dec, lam, draws, seed=[seed, i, 1])
            gap = exact.samples - pert.samples
            se = gap.std(ddof=1) / math.sqrt(len(gap))
            out.append(_check(f"system {i}: {name} gap in standard errors",
                              gap.mean() / se, ">", sigmas))
    return out


def score_function_check(seed=0, tol: float = 1e-6) -> Check:
    """Enumerated score-function gradient against differences of the exact expected loss."""
    rng = np.random.default_rng([seed, 5])
    c = make_bpsk()
    logits = rng.standard_normal((2, c.categories))
    target = rng.standard_normal(2)

    def h(seqs):
        return np.sum(np.abs(seqs.real - target) ** 2, axis=1) + np.cos(seqs.real[:, 0])

    g = orc.score_function_grad_exact(logits, h, c)
    fd = orc.finite_difference_grad(lambda l: orc.expected_loss(l, h, c), logits, 1e-4)
    err = ad.relative_error(g, fd).max()
    return _check("score-function vs finite differences (max relative)", err, "<", tol)


def oracle_checks(seed=0) -> list[Check]:
    return bound_checks(seed) + [score_function_check(seed)]


# -- shaping ---------------------------------------------------------------

def shaping_checks(reports: dict[float, ShapingReport], min_nu: float = 0.05) -> list[Check]:
    """Fit quality at every SNR; at the lowest SNR a non-trivial fit that exceeds the highest-SNR fit."""
    out = []
    for snr in sorted(reports):
        r = reports[snr]
        out.append(_check(f"{snr:g} dB: KL to fitted Maxwell-Boltzmann vs KL to uniform",
                          r.kl_mb, "<=", r.kl_uniform))
    if len(reports) >= 2:
        lo, hi = reports[min(reports)], reports[max(reports)]
        out.append(_check(f"{lo.snr_db:g} dB: KL to fit strictly below KL to uniform",
                          lo.kl_mb, "<", lo.kl_uniform))
        out.append(_check(f"{lo.snr_db:g} dB: fitted nu", lo.nu, ">", min_nu))
        out.append(_check(f"{hi.snr_db:g} dB fitted nu vs {lo.snr_db:g} dB", hi.nu, "<", lo.nu))
    return out
