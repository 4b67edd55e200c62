import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genphys import kernels
from genphys.density_flow import (DeltaMixture, density_and_flux, field,
                                  fields, grid_density, posterior, default_T)
from genphys.errors import DomainError, SingularityError, UnderflowError
from genphys.metrics import ResidualGrid, flow_residual
from genphys.pde_catalog import PdeSpec


def test_diffusion_single_delta_velocity():
    fs = field(PdeSpec("diffusion"), DeltaMixture([0.0]), 1.0, 0.5)
    assert fs.v[0] == pytest.approx(1.0)
    assert fs.r_term == 0.0


def test_poisson_single_delta_velocity():
    for n in (2, 3):
        data = DeltaMixture(np.zeros((1, n)))
        x = np.zeros(n)
        x[0] = 2.0
        assert field(PdeSpec("poisson", n), data, x, 1.0).v[0] == pytest.approx(2.0)


@pytest.mark.parametrize("spec", [
    dict(kind="diffusion"), dict(kind="screened_poisson", m=1.0),
    dict(kind="helmholtz", k0=0.2),
])
def test_symmetric_pair_zero_velocity(spec):
    pde = PdeSpec(**spec)
    data = DeltaMixture([-1.0, 1.0])
    assert abs(field(pde, data, 0.0, 0.5).v[0]) < 1e-15
    assert np.allclose(posterior(pde, data, 0.0, 0.5), [0.5, 0.5])


def test_screened_poisson_r_vanishes_with_m():
    data = DeltaMixture([0.0])
    r = field(PdeSpec("screened_poisson", m=1e-8), data, 0.5, 1.0).r_term
    assert abs(r) < 1e-14


def test_posterior_concentrates():
    data = DeltaMixture([-1.0, 1.0], [0.3, 0.7])
    w = posterior(PdeSpec("diffusion"), data, 1.0, 0.01)
    assert w[0] == pytest.approx(0.0, abs=1e-6) and w[1] == pytest.approx(1.0, abs=1e-6)
    assert posterior(PdeSpec("diffusion"), DeltaMixture([3.0]), 0.0, 1.0).tolist() == [1.0]


def test_log_domain_far_data():
    data = DeltaMixture([-1.0, 1.0])
    fb = fields(PdeSpec("diffusion"), data, np.array([[60.0]]), 1e-3)
    assert np.isfinite(fb.log_p[0]) and fb.p[0] == 0.0
    assert fb.v[0, 0] == pytest.approx((60.0 - 1.0) / 2e-3)


def test_score_equivalence():
    """For diffusion -v is the gradient of log p."""
    data = DeltaMixture([-1.0, 0.5, 2.0], [0.2, 0.5, 0.3])
    pde = PdeSpec("diffusion")
    x, t, h = np.array([0.3]), 0.8, 1e-5
    lp = lambda z: fields(pde, data, np.array([[z]]), t).log_p[0]
    num = (lp(x[0] + h) - lp(x[0] - h)) / (2 * h)
    assert -field(pde, data, x, t).v[0] == pytest.approx(num, rel=1e-7)


@pytest.mark.parametrize("spec", [dict(kind="diffusion"), dict(kind="poisson", dim_n=2)])
def test_density_normalized(spec):
    pde = PdeSpec(**spec)
    n = pde.dim_n
    data = DeltaMixture(np.array([[0.0] * n, [1.0] + [0.0] * (n - 1)]))
    if n == 1:
        x = np.linspace(-40, 40, 40001)
        p = fields(pde, data, x[:, None], 1.0).p
        assert np.trapezoid(p, x) == pytest.approx(1.0, abs=1e-6)
    else:
        # radial mass of a single Poisson kernel in 2D: p ~ rho^-3 tail
        r = np.linspace(0, 4000, 400001)
        p = fields(pde, DeltaMixture(np.zeros((1, 2))), np.column_stack([r, 0 * r]), 1.0).p
        assert np.trapezoid(2 * np.pi * r * p, r) == pytest.approx(1.0, abs=1e-3)


def test_screened_poisson_mass_decreases():
    pde = PdeSpec("screened_poisson", m=1.0)
    data = DeltaMixture([0.0])
    x = np.linspace(-60, 60, 60001)[:, None]
    masses = [np.trapezoid(fields(pde, data, x, t).p, x[:, 0]) for t in (0.5, 1.0, 2.0)]
    assert masses[0] > masses[1] > masses[2]


def test_ideal_wave_density_positive_inside_cone():
    pde = PdeSpec("ideal_wave", 2)
    data = DeltaMixture([[0.0, 0.0]])
    xs = np.column_stack([np.linspace(0.0, 0.9, 50), np.zeros(50)])
    p, _, _ = density_and_flux(pde, data, xs, 1.0)
    assert np.all(p > 0)


def test_ideal_wave_grid_density_negative_at_front():
    pde = PdeSpec("ideal_wave", 2)
    data = DeltaMixture([[0.0, 0.0]])
    xs = np.column_stack([np.linspace(0.0, 2.0, 201), np.zeros(201)])
    p = grid_density(pde, data, xs, 1.0, 0.05)
    neg = xs[p < 0, 0]
    assert neg.size > 0 and np.all(np.abs(neg - 1.0) <= 0.05)


def test_schroedinger_node_raises():
    pde = PdeSpec("schroedinger", 1)
    data = DeltaMixture([-1.0, 1.0])
    with pytest.raises(SingularityError):
        # the two phases differ by pi at x = pi t
        fields(pde, data, np.array([[np.pi / 4]]), 0.25)
    fb = fields(pde, data, np.array([[np.pi / 4]]), 0.25, on_singular="nan")
    assert np.isnan(fb.v[0, 0])


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        fields(PdeSpec("diffusion", 2), DeltaMixture([0.0]), [[0.0]], 1.0)


def test_delta_mixture_validation():
    with pytest.raises(DomainError):
        DeltaMixture([])
    with pytest.raises(DomainError):
        DeltaMixture([0.0, 1.0], [1.0, -1.0])
    d = DeltaMixture.from_pairs([(-1.0, 1), (1.0, 3)])
    assert d.weights.tolist() == [0.25, 0.75] and d.diameter() == 2.0


def test_default_T():
    data = DeltaMixture([-1.0, 1.0])
    assert default_T(PdeSpec("diffusion"), data) == 400.0
    assert default_T(PdeSpec("poisson", 2), DeltaMixture([[0, 0], [2, 0]])) == 200.0


@pytest.mark.parametrize("spec", [
    dict(kind="diffusion", dim_n=1), dict(kind="poisson", dim_n=2),
    dict(kind="screened_poisson", dim_n=2, m=1.0), dict(kind="helmholtz", dim_n=2, k0=0.2),
    dict(kind="dissipative_wave", dim_n=2, eps=0.5),
])
def test_continuity_residual_small(spec):
    pde = PdeSpec(**spec)
    n = pde.dim_n
    data = DeltaMixture(np.array([[-0.5] + [0.0] * (n - 1), [0.5] + [0.1] * (n - 1)]), [0.4, 0.6])
    pts = np.array([[0.2] + [0.3] * (n - 1), [3.0] + [-0.4] * (n - 1)])
    times = np.array([0.7, 1.3]) if pde.kind.value != "dissipative_wave" else np.array([4.5])
    assert flow_residual(pde, data, ResidualGrid(pts, times)) < 1e-6


def test_screened_poisson_needs_r_term():
    pde = PdeSpec("screened_poisson", 2, m=1.0)
    data = DeltaMixture([[0.0, 0.0], [1.0, 0.0]])
    grid = ResidualGrid(np.array([[0.3, 0.2], [1.5, -0.5]]), np.array([0.8]))
    assert flow_residual(pde, data, grid, include_r=False) > 0.1


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-3, 3), t=st.floats(0.05, 3.0), w=st.floats(0.05, 0.95))
def test_posterior_sums_to_one(x, t, w):
    data = DeltaMixture([-1.0, 1.0], [w, 1 - w])
    post = posterior(PdeSpec("diffusion"), data, x, t)
    assert post.sum() == pytest.approx(1.0) and np.all(post >= 0)
