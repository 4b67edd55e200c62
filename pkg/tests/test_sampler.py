import math

import numpy as np
import pytest

from genphys import sampler
from genphys.density_flow import DeltaMixture, fields
from genphys.errors import DomainError, PopulationError, UnsupportedKindError
from genphys.pde_catalog import PdeSpec
from genphys.sampler import Ensemble, Schedule


def test_prior_diffusion_variance():
    ens = sampler.sample_prior(PdeSpec("diffusion"), DeltaMixture([0.0]), 10.0, 200000, seed=1)
    assert np.var(ens.x[:, 0]) == pytest.approx(20.0, rel=0.02)
    assert np.all(ens.log_w == 0)


def test_prior_poisson_median():
    ens = sampler.sample_prior(PdeSpec("poisson", 1), DeltaMixture([0.0]), 5.0, 200000, seed=2)
    assert np.median(np.abs(ens.x[:, 0])) == pytest.approx(5.0, rel=0.02)


def test_prior_two_dim_radius():
    ens = sampler.sample_prior(PdeSpec("diffusion", 2), DeltaMixture([[1.0, -1.0]]), 2.0, 100000, seed=3)
    r2 = ((ens.x - [1.0, -1.0]) ** 2).sum(1)
    assert r2.mean() == pytest.approx(2 * 2 * 2.0, rel=0.02)


def test_prior_empty_and_deterministic():
    pde, data = PdeSpec("diffusion"), DeltaMixture([-1.0, 1.0])
    assert sampler.sample_prior(pde, data, 4.0, 0, seed=0).n == 0
    a = sampler.sample_prior(pde, data, 4.0, 10000, seed=7)
    b = sampler.sample_prior(pde, data, 4.0, 10000, seed=7)
    c = sampler.sample_prior(pde, data, 4.0, 10000, seed=8)
    assert np.array_equal(a.x, b.x) and not np.array_equal(a.x, c.x)


def test_prior_unsupported_kind():
    with pytest.raises(UnsupportedKindError):
        sampler.sample_prior(PdeSpec("ideal_wave", 2), DeltaMixture([[0.0, 0.0]]), 1.0, 10, seed=0)


def test_prior_shift_independence():
    """Priors from data shifted by a small amount become indistinguishable."""
    pde = PdeSpec("diffusion")
    base = DeltaMixture([-1.0, 1.0])
    dists = []
    for T in (10.0, 100.0, 1000.0):
        a = np.sort(sampler.sample_prior(pde, base, T, 50000, seed=0).x[:, 0]) / math.sqrt(2 * T)
        b = np.sort(sampler.sample_prior(pde, base.shifted([0.5]), T, 50000, seed=0).x[:, 0]) / math.sqrt(2 * T)
        dists.append(np.mean(np.abs(a - b)))
    assert dists[0] > dists[1] > dists[2]


def test_zero_steps_unchanged():
    pde, data = PdeSpec("diffusion"), DeltaMixture([-1.0, 1.0])
    ens = sampler.sample_prior(pde, data, 4.0, 100, seed=0)
    out = sampler.integrate_backward(pde, data, ens, Schedule(4.0, 0.1, 0))
    assert np.array_equal(out.x, ens.x) and out.t == 4.0


def test_time_mismatch():
    pde, data = PdeSpec("diffusion"), DeltaMixture([0.0])
    ens = sampler.sample_prior(pde, data, 4.0, 10, seed=0)
    with pytest.raises(DomainError):
        sampler.integrate_backward(pde, data, ens, Schedule(5.0, 0.1, 10))


def test_schedule_times():
    ts = Schedule(100.0, 0.01, 4).times()
    assert np.allclose(ts, [100, 10, 1, 0.1, 0.01])
    with pytest.raises(DomainError):
        Schedule(1.0, 2.0)


def test_branching_zero_ratio_keeps_weights():
    ens = Ensemble(np.linspace(-1, 1, 50), np.full(50, 0.1), 1.0, 0)
    out = sampler.branching_step(ens, lambda x, t: np.zeros(x.shape[0]), 0.1, seed=0)
    assert np.array_equal(out.x, ens.x) and np.array_equal(out.log_w, ens.log_w)


def test_branching_constant_ratio_preserves_total_weight():
    n = 20000
    ens = Ensemble(np.zeros(n), np.zeros(n), 1.0, 0)
    out = sampler.branching_step(ens, lambda x, t: np.full(x.shape[0], -2.0), 0.3, seed=4)
    total = out.weights().sum()
    assert total == pytest.approx(n * math.exp(0.6), rel=0.02)


def test_branching_population_error():
    ens = Ensemble(np.zeros(100), np.zeros(100), 1.0, 0)
    with pytest.raises(PopulationError):
        sampler.branching_step(ens, lambda x, t: np.full(x.shape[0], 100.0), 1.0, seed=0)


def test_thread_count_independence():
    pde, data = PdeSpec("screened_poisson", 1, m=1.0), DeltaMixture([-1.0, 1.0], [0.3, 0.7])
    ens = sampler.sample_prior(pde, data, 1.0, 6000, seed=5)
    sched = Schedule(1.0, 0.3, 20)
    a = sampler.integrate_backward(pde, data, ens, sched, threads=1)
    b = sampler.integrate_backward(pde, data, ens, sched, threads=3)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.log_w, b.log_w)


def test_sign_against_screened_poisson_density():
    """The weighted histogram tracks p(., t_min); flipping the sign does not."""
    from genphys import metrics
    pde, data = PdeSpec("screened_poisson", 1, m=1.0), DeltaMixture([-1.0, 1.0], [0.3, 0.7])
    sched = Schedule(1.0, 0.3, 100)
    ens = sampler.integrate_backward(pde, data, sampler.sample_prior(pde, data, 1.0, 40000, seed=0), sched)
    dens = lambda x: fields(pde, data, x, 0.3).p
    _, l1 = metrics.sample_distance(ens, dens, bounds=(-4, 4), bins=50)
    assert sampler.SIGN == -1.0
    assert l1 < 0.05


def test_mode_fractions_and_csv(tmp_path):
    pde, data = PdeSpec("diffusion"), DeltaMixture([-1.0, 1.0], [0.3, 0.7])
    ens = Ensemble(np.array([-1.1, -0.9, 0.8, 1.2]), np.zeros(4), 0.01, 0)
    assert sampler.mode_fractions(pde, data, ens).tolist() == [0.5, 0.5]
    path = tmp_path / "s.csv"
    sampler.write_csv(ens, path, {"seed": 0})
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=0" and lines[1] == "x1,weight,log_weight"
    back = np.loadtxt(path, delimiter=",", skiprows=2)
    assert np.array_equal(back[:, 0], ens.x[:, 0])
