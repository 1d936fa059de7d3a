"""Pure-numpy implementations of the hot kernels.

Signatures mirror the compiled ``_kernels`` extension exactly; both are
checked against each other in the test suite.
"""
import numpy as np


def nearest_symbol(re, im, cre, cim):
    d = (re[:, None] - cre[None, :]) ** 2 + (im[:, None] - cim[None, :]) ** 2
    return np.argmin(d, axis=1).astype(np.int64)


def gumbel_argmax(logq, tau):
    return np.argmax(logq + tau, axis=1).astype(np.int64)


def relaxed_softmax(logq, tau, rho):
    y = (logq + tau) / rho
    y = y - y.max(axis=1, keepdims=True)
    e = np.exp(y)
    return e / e.sum(axis=1, keepdims=True)


def gaussian_log_evidence(zr, zi, sr, si, logw, sigma2):
    n = zr.shape[1]
    d2 = ((zr[:, None, :] - sr[None, :, :]) ** 2
          + (zi[:, None, :] - si[None, :, :]) ** 2).sum(axis=2)
    loglik = -d2 / sigma2 - n * np.log(np.pi * sigma2)
    a = loglik[:, None, :] + logw[None, :, :]
    m = a.max(axis=2, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):  # rows with no support give -inf
        return m[..., 0] + np.log(np.exp(a - m).sum(axis=2))
