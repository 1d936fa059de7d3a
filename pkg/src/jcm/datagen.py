"""Synthetic labelled sources and the JCMD dataset file format.

Labels are stored zero-based (0 .. L-1) in memory and on disk.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"JCMD"
VERSION = 1
_HEADER = struct.Struct("<4sHIIQ")

SHAPE_CLASSES = ("hbar", "vbar", "cross", "blank")


class DatasetFormatError(ValueError):
    pass


@dataclass
class Dataset:
    x: np.ndarray  # (N, k) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64
    num_classes: int
    split: str = "all"
    seed: int | None = None
    centers: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float32)
        if self.x.ndim != 2:
            self.x = self.x.reshape(len(self.labels), -1)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def k(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx, split: str) -> "Dataset":
        return Dataset(self.x[idx], self.labels[idx], self.num_classes, split, self.seed,
                       self.centers)

    def split_train_val(self, val_fraction: float = 0.2, seed: int = 0):
        """Disjoint stratified train/validation split."""
        rng = np.random.default_rng(seed)
        train, val = [], []
        for c in range(self.num_classes):
            idx = np.flatnonzero(self.labels == c)
            idx = idx[rng.permutation(len(idx))]
            cut = int(round(len(idx) * val_fraction))
            val.append(idx[:cut])
            train.append(idx[cut:])
        train = np.sort(np.concatenate(train))
        val = np.sort(np.concatenate(val))
        return self.subset(train, "train"), self.subset(val, "val")


def gen_gaussian_mixture(k: int, num_classes: int, samples_per_class: int, spread: float,
                         seed: int = 0) -> Dataset:
    """Isotropic Gaussian clusters around distinct vertices of the {0.2, 0.8}^k lattice."""
    if k < 2 or num_classes < 2:
        raise ValueError("need k >= 2 and at least two classes")
    if num_classes > 2 ** min(k, 62):
        raise ValueError("more classes than lattice vertices")
    rng = np.random.default_rng(seed)
    seen: set[bytes] = set()
    centers = []
    while len(centers) < num_classes:
        bits = rng.integers(0, 2, size=k)
        key = bits.tobytes()
        if key not in seen:
            seen.add(key)
            centers.append(0.2 + 0.6 * bits)
    centers = np.array(centers)
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    x = centers[labels] + spread * rng.standard_normal((len(labels), k))
    return Dataset(np.clip(x, 0.0, 1.0), labels, num_classes, "all", seed, centers)


def shape_template(name: str, side: int) -> np.ndarray:
    img = np.zeros((side, side))
    lo, hi = side // 2 - side // 8, side // 2 + side // 8
    if name in ("hbar", "cross"):
        img[lo:hi, :] = 1.0
    if name in ("vbar", "cross"):
        img[:, lo:hi] = 1.0
    if name not in SHAPE_CLASSES:
        raise ValueError(f"unknown shape {name!r}")
    return img.reshape(-1)


def gen_toy_images(side: int, num_classes: int, samples_per_class: int, noise: float,
                   seed: int = 0) -> Dataset:
    """Bar/cross/blank images plus uniform pixel noise in [-noise, noise], clipped to [0, 1]."""
    if side not in (8, 16):
        raise ValueError("side must be 8 or 16")
    if not 2 <= num_classes <= len(SHAPE_CLASSES):
        raise ValueError(f"num_classes must be in 2..{len(SHAPE_CLASSES)}")
    rng = np.random.default_rng(seed)
    templates = np.stack([shape_template(n, side) for n in SHAPE_CLASSES[:num_classes]])
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    x = templates[labels] + rng.uniform(-noise, noise, size=(len(labels), side * side))
    return Dataset(np.clip(x, 0.0, 1.0), labels, num_classes, "all", seed, templates)


def save_dataset(ds: Dataset, path) -> None:
    """Write a JCMD file: header, then per sample k float32 values and a u16 label."""
    record = np.dtype([("x", "<f4", (ds.k,)), ("label", "<u2")])
    rows = np.empty(len(ds), dtype=record)
    rows["x"] = ds.x
    rows["label"] = ds.labels
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, ds.k, ds.num_classes, len(ds)))
        fh.write(rows.tobytes())


def load_dataset(path) -> Dataset:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DatasetFormatError("truncated header")
    magic, version, k, num_classes, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DatasetFormatError("bad dataset magic")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version}")
    record = np.dtype([("x", "<f4", (k,)), ("label", "<u2")])
    body = data[_HEADER.size:]
    if len(body) != n * record.itemsize:
        raise DatasetFormatError(f"expected {n} records, file size disagrees")
    rows = np.frombuffer(body, dtype=record, count=n)
    x = rows["x"].astype(np.float32).reshape(n, k)
    return Dataset(x, rows["label"].astype(np.int64), num_classes, "loaded")


def nearest_center_accuracy(ds: Dataset, centers: np.ndarray) -> float:
    d = ((ds.x[:, None, :].astype(float) - centers[None]) ** 2).sum(-1)
    return float(np.mean(np.argmin(d, axis=1) == ds.labels))
