import math

import numpy as np
import pytest

from genphys import metrics
from genphys.density_flow import DeltaMixture
from genphys.errors import DomainError, SingularityError, UnsupportedKindError
from genphys.pde_catalog import PdeSpec
from genphys.sampler import Ensemble


def test_bhattacharyya_identical():
    for pde in (PdeSpec("diffusion"), PdeSpec("poisson", 2), PdeSpec("screened_poisson", 2, m=1.0)):
        x = np.zeros(pde.dim_n)
        assert metrics.overlap_bhattacharyya(pde, x, x, 2.0).value == pytest.approx(1.0, abs=1e-6)


def test_bhattacharyya_closed_form_point():
    pde = PdeSpec("diffusion")
    T = 0.5
    d = math.sqrt(16 * T)
    got = metrics.overlap_bhattacharyya(pde, [0.0], [d], T).value
    assert got == pytest.approx(math.exp(-1), abs=1e-6)
    assert metrics.overlap_closed_form(pde, [0.0], [d], T).value == pytest.approx(math.exp(-1))


def test_bhattacharyya_unsupported():
    with pytest.raises(UnsupportedKindError):
        metrics.overlap_bhattacharyya(PdeSpec("ideal_wave", 2), [0, 0], [1, 0], 1.0)


def test_kspace_diffusion_examples():
    pde = PdeSpec("diffusion")
    assert metrics.overlap_kspace(pde, [0.0], [0.0], 3.0).value == pytest.approx(1.0)
    vals = [metrics.overlap_kspace(pde, [0.0], [1.0], T).value for T in (1, 10, 100)]
    assert vals[0] < vals[1] < vals[2] and vals[2] > 0.99
    assert vals[0] == pytest.approx(math.exp(-1 / 8), abs=2e-3)


def test_kspace_ideal_wave_stays_small():
    pde = PdeSpec("ideal_wave", 1)
    for T in (1.0, 1e2, 1e4):
        assert metrics.overlap_kspace(pde, [0.0], [1.0], T).value < 0.9


def test_kspace_rejects_bad_input():
    with pytest.raises(DomainError):
        metrics.overlap_kspace(PdeSpec("diffusion"), [0.0], [1.0], 0.0)
    with pytest.raises(DomainError):
        metrics.overlap_kspace(PdeSpec("diffusion", 2), [0.0], [1.0], 1.0)


def test_flow_residual_crossing_zero_raises():
    pde = PdeSpec("diffusion")
    grid = metrics.ResidualGrid(np.array([[0.3]]), np.array([1e-4]), h=1e-3)
    with pytest.raises(SingularityError):
        metrics.flow_residual(pde, DeltaMixture([0.0]), grid)


def test_flow_residual_richardson_helps():
    pde = PdeSpec("poisson", 2)
    data = DeltaMixture([[0.0, 0.0], [1.0, 0.5]])
    pts = np.array([[0.4, 0.2]])
    plain = metrics.flow_residual(pde, data, metrics.ResidualGrid(pts, np.array([0.5]), h=1e-2, richardson=False))
    rich = metrics.flow_residual(pde, data, metrics.ResidualGrid(pts, np.array([0.5]), h=1e-2))
    assert rich < plain / 100


@pytest.mark.parametrize("spec, x, t", [
    (dict(kind="diffusion", dim_n=2), [0.4, -0.3], 0.7),
    (dict(kind="poisson", dim_n=3), [0.4, -0.3, 1.0], 0.7),
    (dict(kind="helmholtz", dim_n=2, k0=0.3), [0.5, 0.2], 0.6),
    (dict(kind="ideal_wave", dim_n=2), [0.3, 0.1], 1.0),
])
def test_kernel_residual_small(spec, x, t):
    assert metrics.kernel_residual(PdeSpec(**spec), x, t) < 1e-6


def test_sample_distance_exact_samples():
    rng = np.random.default_rng(0)
    n = 100000
    ens = Ensemble(rng.standard_normal(n), np.zeros(n), 1.0, 0)
    dens = lambda x: np.exp(-0.5 * x[:, 0] ** 2)
    w1, l1 = metrics.sample_distance(ens, dens, bounds=(-6, 6))
    assert w1 < 0.01 and l1 < 0.05


def test_sample_distance_single_particle():
    ens = Ensemble(np.array([0.0]), np.zeros(1), 1.0, 0)
    dens = lambda x: np.exp(-0.5 * x[:, 0] ** 2)
    w1, _ = metrics.sample_distance(ens, dens, bounds=(-8, 8), sub=200)
    assert w1 == pytest.approx(math.sqrt(2 / math.pi), rel=1e-4)


def test_ks_test_requires_equal_weights():
    ens = Ensemble(np.array([0.0, 1.0]), np.array([0.0, 1.0]), 1.0, 0)
    with pytest.raises(DomainError):
        metrics.ks_test(ens, lambda x: np.exp(-x[:, 0] ** 2), (-5, 5))
