"""Constellation geometries, power normalization and nearest-symbol projection.

Channel sequences are plain ``complex128`` numpy arrays; a batch of
sequences is a 2-D array with one sequence per row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels


class Scheme(str, Enum):
    BPSK = "bpsk"
    QAM = "qam"


@dataclass(frozen=True)
class Constellation:
    """Ordered complex symbol set.

    For rectangular QAM the points are laid out in (r, s) lexicographic
    order over ``iq_levels``: index ``r * sqrt(M) + s`` holds
    ``iq_levels[r] + 1j * iq_levels[s]``.
    """

    scheme: Scheme
    order: int
    points: np.ndarray
    iq_levels: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def side(self) -> int:
        """Number of amplitude levels per axis (2 for BPSK, sqrt(M) for QAM)."""
        return 2 if self.scheme is Scheme.BPSK else int(round(math.sqrt(self.order)))

    @property
    def groups(self) -> int:
        """Independent categorical groups per channel use (1 for BPSK, I and Q for QAM)."""
        return 1 if self.scheme is Scheme.BPSK else 2

    @property
    def axis_levels(self) -> np.ndarray:
        """Real amplitudes indexed by per-group category."""
        if self.scheme is Scheme.BPSK:
            return np.array([1.0, -1.0])
        return self.iq_levels

    @property
    def categories(self) -> int:
        """Logits emitted per channel use."""
        return self.groups * self.side

    def index_from_iq(self, r: np.ndarray, s: np.ndarray) -> np.ndarray:
        return np.asarray(r) * self.side + np.asarray(s)

    def mean_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


def make_bpsk() -> Constellation:
    return Constellation(Scheme.BPSK, 2, np.array([1.0 + 0j, -1.0 + 0j]))


def make_rect_qam(order: int) -> Constellation:
    """Rectangular M-QAM with amplitudes ``(2r+1)/(sqrt(M)-1)`` on each axis."""
    order = int(order)
    side = int(round(math.sqrt(order))) if order > 0 else 0
    if order < 4 or side * side != order or side & (side - 1):
        raise ValueError(f"rectangular QAM needs M = 2^(2a) with a >= 1, got {order}")
    r = np.arange(-side // 2, side // 2)
    levels = (2 * r + 1) / (side - 1)
    points = (levels[:, None] + 1j * levels[None, :]).reshape(-1)
    return Constellation(Scheme.QAM, order, points, levels.astype(float))


def make_constellation(scheme: str | Scheme, order: int) -> Constellation:
    scheme = Scheme(str(scheme.value if isinstance(scheme, Scheme) else scheme).lower())
    if scheme is Scheme.BPSK:
        if order != 2:
            raise ValueError(f"BPSK has order 2, got {order}")
        return make_bpsk()
    return make_rect_qam(order)


def normalize_power(seq, power: float = 1.0) -> np.ndarray:
    """Scale each sequence (last axis) so that ``||z||^2 / n == power``.

    Parameters
    ----------
    seq : array_like
        Complex sequence of length n, or a batch with shape (B, n).
    power : float
        Target average power per channel use.
    """
    if power <= 0:
        raise ValueError("power must be positive")
    z = np.asarray(seq, dtype=np.complex128)
    if z.ndim == 0 or z.shape[-1] < 1:
        raise ValueError("sequence must have at least one channel use")
    energy = np.sum(np.abs(z) ** 2, axis=-1, keepdims=True)
    if np.any(energy == 0):
        raise ValueError("cannot normalize an all-zero sequence")
    n = z.shape[-1]
    return z * np.sqrt(n * power / energy)


def average_power(seq) -> np.ndarray:
    z = np.asarray(seq, dtype=np.complex128)
    return np.sum(np.abs(z) ** 2, axis=-1) / z.shape[-1]


def nearest_symbol(point, c: Constellation):
    """Index of the closest constellation point; ties go to the lowest index.

    Accepts a scalar or an array of points and returns the same shape.
    """
    p = np.asarray(point, dtype=np.complex128)
    if not np.all(np.isfinite(p)):
        raise ValueError("points must be finite")
    flat = np.ascontiguousarray(p.reshape(-1))
    idx = kernels.nearest_symbol(flat.real.copy(), flat.imag.copy(),
                                 np.ascontiguousarray(c.points.real),
                                 np.ascontiguousarray(c.points.imag))
    if p.ndim == 0:
        return int(idx[0])
    return idx.reshape(p.shape)
