"""Self-checks of the reference implementations in ``oracles.py``."""

import math

import numpy as np
import pytest

from genphys.pde_catalog import PdeSpec

import oracles


def test_budget_rejects_nonpositive_tolerance():
    with pytest.raises(ValueError):
        oracles.OracleBudget(tolerance=0.0)


@pytest.mark.parametrize("x", [0.3, 1.0, 2.5])
def test_special_half_integer_closed_forms(x):
    k_half = math.sqrt(math.pi / (2 * x)) * math.exp(-x)
    y_half = -math.sqrt(2 / (math.pi * x)) * math.cos(x)
    assert oracles.oracle_special(0.5, x, "K") == pytest.approx(k_half, rel=1e-14)
    assert oracles.oracle_special(0.5, x, "Y") == pytest.approx(y_half, rel=1e-14, abs=1e-16)


def test_special_wronskian_integer_order():
    x = 2.0
    i0, i1 = oracles.oracle_special(0, x, "I"), oracles.oracle_special(1, x, "I")
    k0, k1 = oracles.oracle_special(0, x, "K"), oracles.oracle_special(1, x, "K")
    # I_nu K_{nu+1} + I_{nu+1} K_nu = 1/x
    assert i0 * k1 + i1 * k0 == pytest.approx(1 / x, rel=1e-14)


def test_special_unknown_kind():
    with pytest.raises(ValueError):
        oracles.oracle_special(0.3, 1.0, "Z")


def test_greens_diffusion_matches_gaussian_and_grid():
    pde = PdeSpec("diffusion", 2)
    exact = math.exp(-0.25) / (4 * math.pi)
    quad = oracles.oracle_greens(pde, 2, 1.0, 1.0)
    grid = oracles.hankel_inverse_grid(lambda k: np.exp(-k * k), 2, 1.0, kmax=12.0)
    assert quad == pytest.approx(exact, rel=1e-8)
    assert grid == pytest.approx(quad, rel=1e-8)


def test_greens_poisson_origin_normalization():
    pde = PdeSpec("poisson", 3)
    assert oracles.oracle_greens(pde, 3, 0.0, 1.0) == pytest.approx(1 / (2 * math.pi ** 2), rel=1e-8)


def test_greens_node_budget_is_converged():
    pde = PdeSpec("screened_poisson", 2, m=1.0)
    a = oracles.oracle_greens(pde, 2, 1.5, 0.7, budget=oracles.OracleBudget(max_nodes=200))
    b = oracles.oracle_greens(pde, 2, 1.5, 0.7, budget=oracles.OracleBudget(max_nodes=400))
    assert a == pytest.approx(b, rel=1e-10)


def test_transform_rejects_kind_without_transform():
    with pytest.raises(ValueError):
        oracles.potential_transform(PdeSpec("ideal_wave", 2), 1.0)


def test_ode_linear_field_exact_solution():
    x0 = np.array([0.7, -1.3])
    got = oracles.oracle_ode(lambda x, t: x, x0, 1.0, 0.01, 100, spacing="uniform")
    assert np.allclose(got, x0 * math.exp(-(1 - 0.01)), atol=1e-6)


def test_ode_zero_field_is_identity():
    x0 = np.array([2.0])
    assert np.array_equal(oracles.oracle_ode(lambda x, t: 0 * x, x0, 5.0, 0.1, 10), x0)


def test_ode_halving_steps_quarters_error():
    x0 = np.array([1.0])
    exact = math.exp(-(1 - 0.01))
    errs = [abs(oracles.oracle_ode(lambda x, t: x, x0, 1.0, 0.01, s, "uniform", density=1)[0] - exact)
            for s in (10, 20)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_oracle_times_endpoints():
    ts = oracles.oracle_times(10.0, 0.1, 7)
    assert ts[0] == 10.0 and ts[-1] == 0.1 and np.all(np.diff(ts) < 0)
