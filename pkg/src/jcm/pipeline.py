"""End-to-end system: encoder, symbol generation, AWGN channel, two decoders.

The same shell serves the learned categorical modulator (``"jcm"``) and the
continuous-output baselines (``"analog"``, ``"hardsoft"``); the quantized
baselines reuse a trained analog system and only change what is sent over
the channel at evaluation time (see :mod:`jcm.baselines`).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .channel import ChannelConfig, check_power
from .constellation import Constellation, make_constellation, nearest_symbol
from .datagen import Dataset
from .gumbel import DEFAULT_TEMPERATURE, gumbel, modulate_tensor
from .loss import LossConfig, vilb_tensor
from .metrics import psnr
from .transition import PROB_FLOOR, floor_renormalize, softmax

log = logging.getLogger(__name__)

TRAINED_METHODS = ("jcm", "analog", "hardsoft")


@dataclass(frozen=True)
class SystemConfig:
    method: str
    scheme: str
    order: int
    n: int
    k: int
    num_classes: int
    snr_db: float
    lam: float
    rho: float = DEFAULT_TEMPERATURE
    power: float = 1.0
    enc_hidden: tuple = (64,)
    sem_hidden: tuple = (64,)
    src_hidden: tuple = (64,)
    batch_size: int = 32
    lr0: float = 5e-4
    lr_min: float = 1e-6
    lr_horizon: float | None = None
    update: str = "joint"
    samples_per_step: int = 1
    normalization: str = "sequence"
    hardsoft_temperature: float = 1.0

    def __post_init__(self):
        if self.method not in TRAINED_METHODS:
            raise ValueError(f"unknown trainable method {self.method!r}")
        if self.update not in ("joint", "alternate"):
            raise ValueError(f"update must be joint or alternate, got {self.update!r}")
        if self.normalization not in ("sequence", "batch"):
            raise ValueError(f"normalization must be sequence or batch, got {self.normalization!r}")
        if self.n < 1 or self.k < 1 or self.batch_size < 1 or self.samples_per_step < 1:
            raise ValueError("n, k, batch_size and samples_per_step must be positive")
        if self.rho <= 0:
            raise ValueError("temperature must be positive")

    @property
    def rate(self) -> float:
        return rate(self.n, self.k)


def rate(n: int, k: int) -> float:
    """Channel uses per source dimension."""
    return n / k


class TrainingDiverged(FloatingPointError):
    """Raised on a non-finite loss; carries the parameters from the last finished epoch."""

    def __init__(self, message: str, last_good: ad.ParamStore, epoch: int):
        super().__init__(message)
        self.last_good = last_good
        self.epoch = epoch


@dataclass
class JCMModel:
    cfg: SystemConfig
    constellation: Constellation
    channel: ChannelConfig
    loss_cfg: LossConfig
    encoder: ad.MLPSpec
    semantic: ad.MLPSpec
    source: ad.MLPSpec
    store: ad.ParamStore

    @property
    def n(self) -> int:
        return self.cfg.n

    def encoder_names(self):
        return self.store.names("enc.")

    def decoder_names(self):
        return self.store.names("sem.") + self.store.names("src.")


def encoder_width(cfg: SystemConfig, c: Constellation) -> int:
    if cfg.method == "jcm":
        return cfg.n * c.categories
    return cfg.n * c.groups


def build_model(cfg: SystemConfig, seed: int = 0) -> JCMModel:
    c = make_constellation(cfg.scheme, cfg.order)
    enc = ad.MLPSpec((cfg.k, *cfg.enc_hidden, encoder_width(cfg, c)),
                     head="logits" if cfg.method == "jcm" else "linear")
    sem = ad.MLPSpec((2 * cfg.n, *cfg.sem_hidden, cfg.num_classes), head="logits")
    src = ad.MLPSpec((2 * cfg.n, *cfg.src_hidden, cfg.k), head="linear")
    store = ad.ParamStore()
    rng = np.random.default_rng([seed, 0])
    ad.init_mlp(store, enc, "enc.", rng)
    ad.init_mlp(store, sem, "sem.", rng)
    ad.init_mlp(store, src, "src.", rng)
    return JCMModel(cfg, c, ChannelConfig(cfg.snr_db, cfg.power), LossConfig(cfg.lam, cfg.num_classes),
                    enc, sem, src, store)


# -- forward stages --------------------------------------------------------

def gumbel_shape(model: JCMModel, batch: int) -> tuple:
    c = model.constellation
    return (batch, model.n, c.groups, c.side)


def normalize_tensor(iq: ad.Tensor, n: int, power: float, mode: str) -> ad.Tensor:
    """Scale I/Q amplitudes (B, n, 2) so the average power per channel use is ``power``."""
    if mode == "sequence":
        energy = ad.square(iq).sum(axis=(1, 2), keepdims=True)
        count = n
    else:
        energy = ad.square(iq).sum(keepdims=True).reshape((1, 1, 1))
        count = n * iq.shape[0]
    return iq * ad.sqrt((count * power) / energy)


def _hardsoft_tensor(out: ad.Tensor, model: JCMModel, hard: bool):
    """Nearest-symbol forward, softmax-weighted symbol average backward."""
    c = model.constellation
    B = out.shape[0]
    tape = out.tape
    v = out.reshape((B, model.n, c.groups))
    if c.groups == 1:
        v = ad.concat([v, tape.const(np.zeros((B, model.n, 1)))], axis=-1)
    v = normalize_tensor(v, model.n, c.mean_energy(), "sequence")
    pts = np.stack([c.points.real, c.points.imag], axis=-1)  # (M, 2)
    d2 = (ad.square(v[..., 0:1] - pts[:, 0]) + ad.square(v[..., 1:2] - pts[:, 1]))
    w = ad.softmax(d2 * (-1.0 / model.cfg.hardsoft_temperature))
    soft = w @ tape.const(pts)
    vals = v.data[..., 0] + 1j * v.data[..., 1]
    idx = nearest_symbol(vals, c)
    if not hard:
        return soft, idx
    return ad.straight_through(soft, pts[idx]), idx


def encode_stage(model: JCMModel, tape: ad.Tape, x, tau: np.ndarray | None, hard: bool = True):
    """Encoder and modulator up to the power-normalized channel input.

    Returns
    -------
    iq : Tensor, shape (B, n, 2)
    indices : ndarray of int or None
        Transmitted constellation indices (None for the analog method).
    out : Tensor
        Raw encoder output (logits for the categorical modulator).
    """
    cfg = model.cfg
    out, _ = ad.mlp_forward(model.store, model.encoder, np.asarray(x, dtype=float), tape, "enc.")
    B = out.shape[0]
    indices = None
    if cfg.method == "jcm":
        iq, indices = modulate_tensor(out, tau, cfg.rho, model.constellation, hard)
    elif cfg.method == "hardsoft":
        iq, indices = _hardsoft_tensor(out, model, hard)
    else:
        iq = out.reshape((B, cfg.n, model.constellation.groups))
        if model.constellation.groups == 1:
            iq = ad.concat([iq, tape.const(np.zeros((B, cfg.n, 1)))], axis=-1)
    return normalize_tensor(iq, cfg.n, cfg.power, cfg.normalization), indices, out


def received_reals(zhat: ad.Tensor) -> ad.Tensor:
    """(B, n, 2) I/Q amplitudes to the decoder layout [I_1..I_n, Q_1..Q_n]."""
    B, n, _ = zhat.shape
    return ad.transpose(zhat, (0, 2, 1)).reshape((B, 2 * n))


def decode_stage(model: JCMModel, tape: ad.Tape, zr: ad.Tensor):
    class_logits, _ = ad.mlp_forward(model.store, model.semantic, zr, tape, "sem.")
    x_hat, _ = ad.mlp_forward(model.store, model.source, zr, tape, "src.")
    return class_logits, x_hat


def channel_noise(rng: np.random.Generator, shape, sigma2: float) -> np.ndarray:
    """Real/imaginary noise components, each with variance sigma2 / 2."""
    return rng.standard_normal(shape) * math.sqrt(sigma2 / 2.0)


def loss_tensor(model: JCMModel, x, labels, tau, eps, hard: bool = True, tape=None):
    """Full differentiable pipeline with frozen Gumbel noise ``tau`` and channel noise ``eps``."""
    tape = ad.Tape() if tape is None else tape
    iq, _, _ = encode_stage(model, tape, x, tau, hard)
    zr = received_reals(iq + eps)
    class_logits, x_hat = decode_stage(model, tape, zr)
    return vilb_tensor(class_logits, labels, x, x_hat, model.loss_cfg), tape


def draw_noise(model: JCMModel, rng: np.random.Generator, batch: int):
    tau = gumbel(rng, gumbel_shape(model, batch)) if model.cfg.method == "jcm" else None
    eps = channel_noise(rng, (batch, model.n, 2), model.channel.sigma2)
    return tau, eps


# -- public per-stage API --------------------------------------------------

def encode_modulate(model: JCMModel, x, seed=None):
    """Transition tables, power-normalized hard sequences and symbol indices for a batch.

    Returns
    -------
    tables : ndarray, shape (B, n, groups, side)
    z : ndarray of complex, shape (B, n)
    indices : ndarray of int, shape (B, n)
    """
    if model.cfg.method != "jcm":
        raise ValueError("encode_modulate applies to the categorical modulator only")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rng = np.random.default_rng(seed)
    tau = gumbel(rng, gumbel_shape(model, len(x)))
    iq, indices, out = encode_stage(model, ad.Tape(), x, tau, hard=True)
    c = model.constellation
    t = softmax(out.data.reshape(len(x), model.n, c.groups, c.side))
    t = floor_renormalize(t)
    z = iq.data[..., 0] + 1j * iq.data[..., 1]
    return t, z, indices


def decode(model: JCMModel, zhat):
    """Class posteriors and reconstructions from received sequences only.

    ``zhat`` is either complex with shape (B, n) or real with shape (B, 2n).
    """
    zhat = np.asarray(zhat)
    if np.iscomplexobj(zhat):
        zhat = np.concatenate([zhat.real, zhat.imag], axis=-1)
    zhat = np.atleast_2d(zhat).astype(float)
    if zhat.shape[-1] != 2 * model.n:
        raise ValueError(f"expected {2 * model.n} received reals, got {zhat.shape[-1]}")
    tape = ad.Tape()
    class_logits, x_hat = decode_stage(model, tape, tape.const(zhat))
    logits = class_logits.data
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    return p / p.sum(axis=1, keepdims=True), x_hat.data


# -- evaluation ------------------------------------------------------------

@dataclass
class EvalResult:
    accuracy: float
    psnr_db: float
    mse: float
    loss: float
    indices: np.ndarray | None = None


Transmitter = Callable[[np.ndarray], tuple]


def evaluate(model: JCMModel, ds: Dataset, num_noise_draws: int = 1, seed: int = 0,
             transform: Transmitter | None = None, batch: int = 1024) -> EvalResult:
    """Accuracy and PSNR with hard symbols, averaged over channel draws.

    ``transform`` maps the normalized channel input (B, n) complex to the
    sequence actually sent and its constellation indices; the quantized
    baselines plug in here.
    """
    x_all = ds.x.astype(float)
    correct = 0.0
    sq = 0.0
    loss = 0.0
    streams = []
    N = len(ds)
    for d in range(num_noise_draws):
        rng = np.random.default_rng([seed, 2, d])
        for start in range(0, N, batch):
            x = x_all[start:start + batch]
            s = ds.labels[start:start + batch]
            tau, eps = draw_noise(model, rng, len(x))
            tape = ad.Tape()
            iq, idx, _ = encode_stage(model, tape, x, tau, hard=True)
            z = iq.data[..., 0] + 1j * iq.data[..., 1]
            if transform is not None:
                z, idx = transform(z)
            if model.cfg.normalization == "sequence":
                check_power(z, model.cfg.power)
            zhat = z + eps[..., 0] + 1j * eps[..., 1]
            post, x_hat = decode(model, zhat)
            correct += np.sum(np.argmax(post, axis=1) == s)
            sq += np.sum((x - x_hat) ** 2)
            loss += np.sum(-np.log(np.maximum(post[np.arange(len(s)), s], PROB_FLOOR))
                           + model.cfg.lam * np.sum((x - x_hat) ** 2, axis=1))
            if idx is not None:
                streams.append(np.asarray(idx).reshape(-1))
    total = N * num_noise_draws
    mse_el = sq / (total * ds.k)
    return EvalResult(float(correct / total), psnr(mse_el), float(mse_el), float(loss / total),
                      np.concatenate(streams) if streams else None)


# -- training --------------------------------------------------------------

@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_acc: float
    val_psnr: float


LOG_COLUMNS = ("epoch", "lr", "train_loss", "val_acc", "val_psnr")


def write_epoch_log(rows: list[EpochLog], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for r in rows:
            w.writerow([r.epoch, repr(r.lr), repr(r.train_loss), repr(r.val_acc), repr(r.val_psnr)])


def _step(model: JCMModel, x, labels, tau, eps, lr: float) -> float:
    store = model.store
    if model.cfg.update == "joint":
        loss, tape = loss_tensor(model, x, labels, tau, eps)
        ad.backward(tape, loss)
        if not math.isfinite(float(loss.data)):
            return float(loss.data)
        ad.adam_step(store, lr)
        return float(loss.data)
    # decoders first under the fixed transmitter, then the transmitter
    for names in (model.decoder_names(), model.encoder_names()):
        loss, tape = loss_tensor(model, x, labels, tau, eps)
        ad.backward(tape, loss)
        if not math.isfinite(float(loss.data)):
            return float(loss.data)
        store.zero_grad([k for k in store.params if k not in names])
        ad.adam_step(store, lr, names)
    return float(loss.data)


def train(model: JCMModel, train_ds: Dataset, epochs: int, seed: int = 0,
          val_ds: Dataset | None = None, log_path=None) -> list[EpochLog]:
    """Minibatch Adam on all three networks with a cosine learning-rate schedule.

    Deterministic given ``seed``. Raises :class:`TrainingDiverged` on a
    non-finite loss.
    """
    cfg = model.cfg
    horizon = cfg.lr_horizon if cfg.lr_horizon else max(epochs, 1)
    rng = np.random.default_rng([seed, 1])
    x_all = train_ds.x.astype(float)
    labels_all = train_ds.labels
    logs: list[EpochLog] = []
    last_good = model.store.copy()
    reps = cfg.samples_per_step
    for epoch in range(epochs):
        lr = ad.cosine_lr(epoch, cfg.lr0, cfg.lr_min, horizon)
        order = rng.permutation(len(train_ds))
        total, count = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x = np.repeat(x_all[idx], reps, axis=0)
            s = np.repeat(labels_all[idx], reps)
            tau, eps = draw_noise(model, rng, len(x))
            try:
                loss = _step(model, x, s, tau, eps, lr)
            except ad.NonFiniteGradient:
                loss = math.nan
            if not math.isfinite(loss):
                model.store = last_good
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1}", last_good, epoch)
            total += loss * len(idx)
            count += len(idx)
        if val_ds is not None:
            ev = evaluate(model, val_ds, 1, seed=seed + 7919 * (epoch + 1))
            acc, p = ev.accuracy, ev.psnr_db
        else:
            acc, p = float("nan"), float("nan")
        logs.append(EpochLog(epoch + 1, lr, total / max(count, 1), acc, p))
        log.debug("epoch %d lr %.3g loss %.4f acc %.3f psnr %.2f", epoch + 1, lr,
                  logs[-1].train_loss, acc, p)
        last_good = model.store.copy()
    if log_path is not None:
        write_epoch_log(logs, log_path)
    return logs
