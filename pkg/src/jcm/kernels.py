"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementations take over. Setting ``JCM_PURE_PYTHON=1`` forces the
fallback.
"""
import os

import numpy as np

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("JCM_PURE_PYTHON") != "1":
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if _active is compiled_backend else "python"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def nearest_symbol(re, im, cre, cim):
    return _active.nearest_symbol(_f64(re), _f64(im), _f64(cre), _f64(cim))


def gumbel_argmax(logq, tau):
    return _active.gumbel_argmax(_f64(logq), _f64(tau))


def relaxed_softmax(logq, tau, rho):
    return _active.relaxed_softmax(_f64(logq), _f64(tau), float(rho))


def gaussian_log_evidence(zr, zi, sr, si, logw, sigma2):
    """log sum_s w[j, s] * CN(zhat_d; seq_s, sigma2) for every draw d and source j."""
    return _active.gaussian_log_evidence(_f64(zr), _f64(zi), _f64(sr), _f64(si), _f64(logw),
                                         float(sigma2))
