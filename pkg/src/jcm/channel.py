"""Complex AWGN channel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gumbel import as_rng

POWER_RTOL = 1e-6


def snr_to_sigma2(snr_db: float, power: float = 1.0) -> float:
    if power <= 0:
        raise ValueError("power must be positive")
    return power / 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float
    power: float = 1.0

    @property
    def sigma2(self) -> float:
        return snr_to_sigma2(self.snr_db, self.power)


class PowerMismatch(ValueError):
    pass


def complex_noise(rng: np.random.Generator, shape, sigma2: float) -> np.ndarray:
    """CN(0, sigma2) samples: each real component has variance sigma2 / 2."""
    scale = np.sqrt(sigma2 / 2.0)
    parts = rng.standard_normal(tuple(shape) + (2,)) * scale
    return parts[..., 0] + 1j * parts[..., 1]


def check_power(z: np.ndarray, power: float) -> None:
    p = np.sum(np.abs(z) ** 2, axis=-1) / z.shape[-1]
    if np.any(np.abs(p - power) > POWER_RTOL * power):
        raise PowerMismatch(f"sequence power {np.max(np.abs(p - power)) + power:.6g} "
                            f"differs from {power}; normalize before transmitting")


def awgn_transmit(z, cfg: ChannelConfig, seed=None) -> np.ndarray:
    """Return ``z + eps`` with ``eps ~ CN(0, sigma2 I)``; z must already meet the power."""
    z = np.asarray(z, dtype=np.complex128)
    check_power(z, cfg.power)
    return z + complex_noise(as_rng(seed), z.shape, cfg.sigma2)


def to_real(zhat: np.ndarray) -> np.ndarray:
    """Stack I then Q: a (..., n) complex array becomes (..., 2n) reals."""
    return np.concatenate([zhat.real, zhat.imag], axis=-1)
