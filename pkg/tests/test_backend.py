"""The compiled core and its NumPy twin must agree."""

import numpy as np
import pytest

from genphys import _backend, _core_py

compiled = pytest.importorskip("genphys._core")


@pytest.mark.parametrize("nu", [0.0, 0.3, 1.0, 4.5, 19.0])
@pytest.mark.parametrize("scaled", [False, True])
def test_kv_pair_agree(nu, scaled):
    x = np.geomspace(1e-6, 700, 97)
    a = compiled.kv_pair(nu, x, scaled)
    b = _core_py.kv_pair(nu, x, scaled)
    for u, v in zip(a, b):
        assert np.allclose(u, v, rtol=1e-13, atol=0)


@pytest.mark.parametrize("nu", [0.0, 0.5, 2.0, 7.3])
def test_jy_agree(nu):
    x = np.geomspace(1e-4, 200, 97)
    for u, v in zip(compiled.jy(nu, x), _core_py.jy(nu, x)):
        assert np.allclose(u, v, rtol=1e-12, atol=1e-300)


def test_posterior_reduce_agree():
    rng = np.random.default_rng(0)
    logq = rng.normal(size=(50, 7)) * 30
    disp = rng.normal(size=(50, 7, 2))
    aux = rng.normal(size=(50, 7))
    for u, v in zip(compiled.posterior_reduce(logq, disp, aux),
                    _core_py.posterior_reduce(logq, disp, aux)):
        assert np.allclose(u, v, rtol=1e-13, atol=1e-15)


def test_default_backend_is_compiled():
    assert _backend.NAME == "cython"
