import numpy as np
import pytest

from jcm import kernels

BACKENDS = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    mod = kernels.python_backend if request.param == "python" else kernels.compiled_backend
    monkeypatch.setattr(kernels, "_active", mod)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
