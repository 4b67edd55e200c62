"""Linear PDEs as generative samplers.

Closed-form Green's functions give a density p, a velocity v and a
birth/death rate R for each catalog PDE; a backward ODE with branching
walkers turns them into a sampler, and the dispersion relation says which
PDEs smooth data the way a generative model needs.
"""

from .density_flow import DeltaMixture, field, fields, posterior
from .dispersion import DispersionReport, Verdict, classify, dispersion_branches
from .errors import GenPhysError
from .kernels import greens, greens_fourier, greens_quadrature
from .pde_catalog import Kind, PdeSpec, matching_for
from .sampler import Ensemble, Schedule, integrate_backward, sample_prior

__version__ = "0.1.0"

__all__ = [
    "DeltaMixture", "field", "fields", "posterior",
    "DispersionReport", "Verdict", "classify", "dispersion_branches",
    "GenPhysError",
    "greens", "greens_fourier", "greens_quadrature",
    "Kind", "PdeSpec", "matching_for",
    "Ensemble", "Schedule", "integrate_backward", "sample_prior",
]
