"""Flat ``key = value`` experiment files.

Blank lines and ``#`` comments are ignored; list values are comma separated.
Every key is validated before anything runs, and errors name the offending key.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .loss import default_lambda

METHODS = ("jcm", "analog", "uniform", "nn", "hardsoft")
SEED_ENV = "JCM_SEED"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str = "qam"
    order: int = 4
    n: int = 16
    snr_db: tuple = (12.0,)
    lam: tuple = ()  # empty: tabulated default per SNR
    rho: float = 1.5
    epochs: int = 100
    batch_size: int = 32
    lr0: float = 5e-4
    lr_min: float = 1e-6
    lr_horizon: float = 0.0  # 0: the epoch count
    enc_hidden: tuple = (64,)
    sem_hidden: tuple = (64,)
    src_hidden: tuple = (64,)
    update: str = "joint"
    samples_per_step: int = 1
    normalization: str = "sequence"
    hardsoft_temperature: float = 1.0
    dataset: str = "mixture"
    k: int = 16
    num_classes: int = 4
    samples_per_class: int = 250
    spread: float = 0.05
    image_side: int = 8
    image_noise: float = 0.1
    val_fraction: float = 0.2
    seed: int = 0
    num_seeds: int = 1
    methods: tuple = ("jcm",)
    eval_draws: int = 4
    quantizer_steps: int = 400
    quantizer_lr: float = 0.01
    save_dataset: bool = False
    workers: int = 1
    output_dir: str = "results"

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.num_seeds)]

    @property
    def source_dim(self) -> int:
        return self.image_side ** 2 if self.dataset == "images" else self.k

    def lambda_for(self, snr: float) -> float:
        if not self.lam:
            return default_lambda(self.scheme, snr)
        if len(self.lam) == 1:
            return self.lam[0]
        return self.lam[list(self.snr_db).index(snr)]


# config-file key -> dataclass field, where they differ
ALIASES = {"lambda": "lam", "M": "order"}
_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_DEFAULTS = ExperimentConfig()


def _convert(key: str, raw: str, default):
    def scalar(kind, text):
        text = text.strip()
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ConfigError(key, f"expected a boolean, got {text!r}")
        try:
            value = kind(text)
        except ValueError:
            raise ConfigError(key, f"expected {kind.__name__}, got {text!r}") from None
        if kind is float and not math.isfinite(value):
            raise ConfigError(key, f"value must be finite, got {text!r}")
        return value

    if isinstance(default, tuple):
        items = [t for t in raw.split(",") if t.strip()]
        kind = str if key == "methods" else (int if key.endswith("hidden") else float)
        return tuple(scalar(kind, t) for t in items)
    return scalar(type(default), raw)


def parse_config(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        name = ALIASES.get(key, key)
        if name not in _FIELDS:
            raise ConfigError(key, "unknown key")
        values[name] = _convert(key, raw, getattr(_DEFAULTS, name))
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        values["seed"] = _convert(SEED_ENV, env, 0)
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def load_config(path) -> tuple[ExperimentConfig, Path]:
    """Parsed config plus the resolved output directory (relative to the file)."""
    path = Path(path)
    cfg = parse_config(path.read_text())
    out = Path(cfg.output_dir)
    if not out.is_absolute():
        out = path.parent / out
    return cfg, out


def validate(cfg: ExperimentConfig) -> None:
    def need(ok, key, msg):
        if not ok:
            raise ConfigError(key, msg)

    need(cfg.scheme in ("bpsk", "qam"), "scheme", "must be bpsk or qam")
    if cfg.scheme == "bpsk":
        need(cfg.order == 2, "order", "bpsk has order 2")
    else:
        side = math.isqrt(cfg.order)
        need(cfg.order >= 4 and side * side == cfg.order and side & (side - 1) == 0,
             "order", "qam order must be an even power of two")
    for key in ("n", "epochs", "batch_size", "samples_per_step", "k", "num_seeds",
                "eval_draws", "workers", "samples_per_class", "quantizer_steps"):
        need(getattr(cfg, key) >= 1, key, "must be positive")
    need(cfg.num_classes >= 2, "num_classes", "need at least two classes")
    need(len(cfg.snr_db) >= 1, "snr_db", "need at least one SNR")
    need(len(set(cfg.snr_db)) == len(cfg.snr_db), "snr_db", "duplicate SNR")
    need(cfg.rho > 0, "rho", "must be positive")
    need(cfg.lr0 > 0 and cfg.lr_min >= 0, "lr0", "learning rates must be positive")
    need(cfg.lr_horizon >= 0, "lr_horizon", "must be non-negative")
    need(cfg.hardsoft_temperature > 0, "hardsoft_temperature", "must be positive")
    need(0 < cfg.val_fraction < 1, "val_fraction", "must lie in (0, 1)")
    need(cfg.update in ("joint", "alternate"), "update", "must be joint or alternate")
    need(cfg.normalization in ("sequence", "batch"), "normalization", "must be sequence or batch")
    need(cfg.dataset in ("mixture", "images"), "dataset", "must be mixture or images")
    if cfg.dataset == "images":
        need(cfg.image_side in (8, 16), "image_side", "must be 8 or 16")
        need(cfg.num_classes <= 4, "num_classes", "at most 4 image classes")
    else:
        need(cfg.k >= 2, "k", "must be at least 2")
    need(len(cfg.methods) >= 1, "methods", "need at least one method")
    for m in cfg.methods:
        need(m in METHODS, "methods", f"unknown method {m!r}")
    need(len(set(cfg.methods)) == len(cfg.methods), "methods", "duplicate method")
    for w in cfg.enc_hidden + cfg.sem_hidden + cfg.src_hidden:
        need(w >= 1, "hidden", "layer widths must be positive")
    if cfg.lam:
        need(len(cfg.lam) in (1, len(cfg.snr_db)), "lambda",
             "give one value or one per SNR")
        need(all(v >= 0 for v in cfg.lam), "lambda", "must be non-negative")
    else:
        for snr in cfg.snr_db:
            try:
                default_lambda(cfg.scheme, snr)
            except KeyError:
                raise ConfigError("lambda", f"no tabulated value at {snr} dB; set it") from None
