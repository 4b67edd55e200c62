import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genphys import special
from genphys.errors import AccuracyError, DomainError

import oracles


def test_k_half_integer_example():
    assert special.bessel_k(0.5, 1.0) == pytest.approx(0.46106850445, abs=1e-10)
    assert special.bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-14)


def test_k_symmetric_in_order():
    assert special.bessel_k(-0.5, 1.0) == special.bessel_k(0.5, 1.0)


def test_k_zero_order_example():
    assert special.bessel_k(0, 1.0) == pytest.approx(0.42102443824, abs=1e-10)


def test_y_half_integer_zero():
    assert abs(special.bessel_y(0.5, math.pi / 2)) < 1e-15


def test_y_first_zero():
    z = special.y_first_zero(0.0)
    assert z == pytest.approx(0.89357697, abs=1e-8)
    assert abs(special.bessel_y(0, z)) < 1e-14


@pytest.mark.parametrize("x, expected", [(1, 1.0), (0.5, math.sqrt(math.pi)), (4, 6.0)])
def test_gamma_examples(x, expected):
    assert special.gamma_fn(x) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 2.3, 7.0, 19.5])
@pytest.mark.parametrize("x", [1e-6, 0.1, 1.0, 1.9, 2.1, 10.0, 45.0])
def test_k_against_series_oracle(nu, x):
    ref = oracles.oracle_special(nu, x, "K")
    got = special.bessel_k(nu, x)
    assert abs(got - ref) <= 1e-10 * max(1.0, abs(ref))


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 2.3, 7.0])
@pytest.mark.parametrize("x", [1e-4, 0.1, 1.0, 1.9, 2.1, 10.0, 30.0])
def test_jy_against_series_oracle(nu, x):
    for kind, fn in (("J", special.bessel_j), ("Y", special.bessel_y)):
        ref = oracles.oracle_special(nu, x, kind)
        assert abs(fn(nu, x) - ref) <= 1e-10 * max(1.0, abs(ref)), kind


def test_scaled_k_survives_underflow():
    x = 800.0
    assert special.bessel_k(1.0, x) == 0.0
    val = special.bessel_k(1.0, x, scaled=True)
    assert val == pytest.approx(math.sqrt(math.pi / (2 * x)) * (1 + 3 / (8 * x)), rel=1e-5)


def test_wronskian_jy():
    x = 2.0
    j, y, dj, dy, _ = special.bessel_jy(1.0, x)
    assert j * dy - y * dj == pytest.approx(2 / (math.pi * x), rel=1e-13)


def test_negative_order_reflection():
    x = 1.7
    for nu in (0.3, 1.0, 1.5):
        j = special.bessel_j(-nu, x)
        y = special.bessel_y(-nu, x)
        assert j == pytest.approx(oracles.oracle_special(-nu, x, "J"), rel=1e-12, abs=1e-14)
        assert y == pytest.approx(oracles.oracle_special(-nu, x, "Y"), rel=1e-12, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(nu=st.floats(0.0, 18.0), x=st.floats(1e-3, 50.0))
def test_k_recurrence(nu, x):
    k0, k1 = special.bessel_k_pair(nu, x)
    k2 = special.bessel_k(nu + 2, x)
    # K_{nu+2} = K_nu + 2 (nu+1)/x K_{nu+1}
    assert k2 == pytest.approx(k0 + 2 * (nu + 1) / x * k1, rel=1e-11)


@settings(max_examples=40, deadline=None)
@given(nu=st.floats(0.0, 10.0), x=st.floats(1e-3, 40.0))
def test_k_positive_and_decreasing(nu, x):
    a = special.bessel_k(nu, x)
    b = special.bessel_k(nu, x * 1.01)
    assert a > 0 and b < a


def test_array_shapes_preserved():
    x = np.linspace(0.5, 3.0, 6).reshape(2, 3)
    assert special.bessel_k(1.0, x).shape == (2, 3)
    assert isinstance(special.bessel_k(1.0, 2.0), float)


@pytest.mark.parametrize("fn", [special.bessel_k, special.bessel_y, special.bessel_j])
def test_domain_errors(fn):
    with pytest.raises(DomainError):
        fn(0.5, 0.0)
    with pytest.raises(DomainError):
        fn(0.5, -1.0)
    with pytest.raises(AccuracyError):
        fn(25.0, 1.0)


def test_gamma_domain():
    with pytest.raises(DomainError):
        special.gamma_fn(0.0)


def test_accuracy_validation():
    with pytest.raises(ValueError):
        special.SpecialFnAccuracy(abs_tol=0.0)
    with pytest.raises(ValueError):
        special.SpecialFnAccuracy(arg_range=(2.0, 1.0))
