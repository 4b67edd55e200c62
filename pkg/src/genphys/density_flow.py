"""Exact (p, v, R) for a weighted mixture of point sources.

For diffusion, Poisson, screened Poisson and Helmholtz the velocity is a
posterior expectation of the displacement to the sources,

    v(x, t) = E[(x - x_i)] / c,    posterior ~ w_i p_i(x, t),

with c = 2t for diffusion and c = t otherwise. These are evaluated in the
log domain (log-sum-exp over sources) so they survive t -> t_min when the
data are far apart. The remaining kinds (waves, Schroedinger) are summed
directly and then matched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend, kernels
from .errors import (ClipViolationError, DomainError, SingularityError,
                     UnderflowError, UnsupportedKindError)
from .kernels import WAVEFRONT_TOL
from .pde_catalog import Kind, PdeSpec, matching_for

__all__ = [
    "DeltaMixture",
    "FieldSample",
    "FieldBatch",
    "POSTERIOR_KINDS",
    "DENOM_FLOOR",
    "NODE_FLOOR",
    "field",
    "fields",
    "posterior",
    "posteriors",
    "potential",
    "density_and_flux",
    "grid_density",
    "default_T",
    "check_helmholtz_clip",
]

POSTERIOR_KINDS = frozenset({Kind.DIFFUSION, Kind.POISSON, Kind.SCREENED_POISSON, Kind.HELMHOLTZ})
DENOM_FLOOR = 1e-300
NODE_FLOOR = 1e-30


class DeltaMixture:
    """Weighted point masses in R^N; weights are normalized on construction.

    Parameters
    ----------
    locations : array_like, shape (K, N) or (K,) for N = 1
    weights : array_like, shape (K,), optional
        Positive; defaults to equal weights.
    """

    def __init__(self, locations, weights=None):
        loc = np.asarray(locations, dtype=np.float64)
        if loc.ndim == 1:
            loc = loc[:, None]
        if loc.ndim != 2 or loc.shape[0] == 0:
            raise DomainError("need at least one source location")
        if not np.all(np.isfinite(loc)):
            raise DomainError("source locations must be finite")
        if weights is None:
            w = np.ones(loc.shape[0])
        else:
            w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != loc.shape[0]:
            raise DomainError("one weight per location is required")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be positive and finite")
        self.points = loc
        self.points.setflags(write=False)
        self.weights = w / w.sum()
        self.weights.setflags(write=False)
        self.log_weights = np.log(self.weights)

    @classmethod
    def from_pairs(cls, pairs):
        """From ``[(location, weight), ...]``; a scalar location means N = 1."""
        locs = [np.atleast_1d(np.asarray(p[0], dtype=np.float64)) for p in pairs]
        if len({l.shape for l in locs}) > 1:
            raise DomainError("all locations must have the same dimension")
        return cls(np.vstack(locs) if locs else np.empty((0, 1)), [p[1] for p in pairs])

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def diameter(self) -> float:
        if len(self) < 2:
            return 0.0
        d = self.points[:, None, :] - self.points[None, :, :]
        return float(np.sqrt((d * d).sum(-1)).max())

    def shifted(self, delta) -> "DeltaMixture":
        return DeltaMixture(self.points + np.asarray(delta, dtype=np.float64), self.weights)

    def __repr__(self):
        return f"DeltaMixture(K={len(self)}, N={self.dim})"


@dataclass(frozen=True)
class FieldSample:
    """(p, v, R) at one space-time point."""

    p: float
    v: np.ndarray
    r_term: float


@dataclass(frozen=True)
class FieldBatch:
    """Fields at M points and a common time.

    ``phi`` is complex for Schroedinger. ``ratio`` is R/p (0 when R = 0).
    For the posterior kinds ``log_p`` is exact even where ``p`` underflows.
    """

    phi: np.ndarray
    p: np.ndarray
    v: np.ndarray
    r_term: np.ndarray
    ratio: np.ndarray
    log_p: np.ndarray


def _points(data: DeltaMixture, x):
    """Coerce to shape (M, N). A 1-D array is M points when N = 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if data.dim == 1 else x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != data.dim:
        raise DomainError(f"points of shape {x.shape} do not match data dimension {data.dim}")
    return x


def _check_pde(pde: PdeSpec, data: DeltaMixture):
    if pde.dim_n != data.dim:
        raise DomainError(f"PDE dimension {pde.dim_n} does not match data dimension {data.dim}")


def check_helmholtz_clip(pde: PdeSpec, r_max, t):
    """Raise :class:`ClipViolationError` unless ``k0 sqrt(t^2 + r_max^2) <= r_c``."""
    rho_c = kernels.helmholtz_clip_rho(pde)
    rho = math.sqrt(float(t) ** 2 + float(r_max) ** 2)
    if rho > rho_c * (1.0 + 1e-12):
        raise ClipViolationError(
            f"k0*rho = {pde.k0 * rho:.6g} exceeds the first zero of Y, {pde.k0 * rho_c:.6g}"
            f" (t={float(t):.6g}, r={float(r_max):.6g})")


def _displacements(data, x):
    disp = x[:, None, :] - data.points[None, :, :]
    return disp, np.sqrt((disp * disp).sum(-1))


def _posterior_parts(pde, data, x, t):
    disp, r = _displacements(data, x)
    if pde.kind is Kind.HELMHOLTZ:
        check_helmholtz_clip(pde, r.max(), t)
    logp, aux = kernels.log_p_and_ratio(pde, r, t)
    logq = data.log_weights[None, :] + logp
    aux = np.where(np.isfinite(logq), aux, 0.0)
    return logq, disp, aux


def _direct_sums(pde, data, x, t, on_singular):
    disp, r = _displacements(data, x)
    bad = np.zeros(x.shape[0], dtype=bool)
    if pde.kind in (Kind.IDEAL_WAVE, Kind.DISSIPATIVE_WAVE):
        near = np.abs(r - t) < WAVEFRONT_TOL
        if near.any():
            if on_singular == "raise":
                i, j = np.argwhere(near)[0]
                raise SingularityError("evaluation on the wave front",
                                       point=int(i), source=int(j), t=float(t))
            bad = near.any(axis=1)
            r = np.where(near, t + 1.0, r)
    ev = kernels.greens(pde, r, np.full_like(r, t))
    w = data.weights[None, :]
    phi = (w * ev.g).sum(1)
    phi_t = (w * ev.g_t).sum(1)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[..., None] > 0, disp / np.where(r > 0, r, 1.0)[..., None], 0.0)
    grad = (w[..., None] * ev.grad_r[..., None] * unit).sum(1)
    return phi, phi_t, grad, bad


def _matched(pde, phi, phi_t, grad):
    mt = matching_for(pde)
    if mt.modulus:
        p = (phi * np.conj(phi)).real
        flux = 2.0 * np.imag(np.conj(phi)[:, None] * grad)
    else:
        p = mt.p_t * phi_t + mt.p_0 * phi
        flux = mt.flux * grad
    return mt, p, flux


def fields(pde: PdeSpec, data: DeltaMixture, x, t, on_singular="raise") -> FieldBatch:
    """Evaluate (phi, p, v, R) at many points and one time.

    Parameters
    ----------
    x : array_like, shape (M, N)
    t : float
    on_singular : {"raise", "nan"}
        What to do where v is undefined (vanishing denominator, wave front,
        Schroedinger node): raise :class:`SingularityError` or return NaN.
    """
    _check_pde(pde, data)
    t = float(t)
    if not t > 0:
        raise DomainError("time must be positive")
    x = _points(data, x)
    m = x.shape[0]
    if pde.kind in POSTERIOR_KINDS:
        logq, disp, aux = _posterior_parts(pde, data, x, t)
        log_p, mean_disp, mean_aux = _backend.posterior_reduce(logq, disp, aux)
        if np.any(~np.isfinite(log_p)):
            i = int(np.flatnonzero(~np.isfinite(log_p))[0])
            raise UnderflowError("every source kernel underflows", point=i, t=t)
        p = np.exp(log_p)
        v = mean_disp / kernels.velocity_divisor(pde, t)
        mt = matching_for(pde)
        ratio = mt.r_0 * mean_aux
        return FieldBatch(phi=p * mean_aux, p=p, v=v, r_term=ratio * p,
                          ratio=ratio, log_p=log_p)

    if pde.kind not in (Kind.IDEAL_WAVE, Kind.DISSIPATIVE_WAVE, Kind.SCHROEDINGER):
        raise UnsupportedKindError(f"no closed-form field for {pde.kind.value}")
    phi, phi_t, grad, bad = _direct_sums(pde, data, x, t, on_singular)
    mt, p, flux = _matched(pde, phi, phi_t, grad)
    floor = NODE_FLOOR if mt.modulus else DENOM_FLOOR
    sing = (np.abs(p) < floor) | bad
    if sing.any() and on_singular == "raise":
        i = int(np.flatnonzero(sing)[0])
        what = "node of the wave function" if mt.modulus else "vanishing density denominator"
        raise SingularityError(what, point=i, x=x[i].tolist(), t=t)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = flux / p[:, None]
    v[sing] = np.nan
    p = np.where(bad, np.nan, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_p = np.log(p)
    zeros = np.zeros(m)
    return FieldBatch(phi=np.where(bad, np.nan, phi), p=p, v=v, r_term=zeros,
                      ratio=zeros.copy(), log_p=log_p)


def field(pde: PdeSpec, data: DeltaMixture, x, t) -> FieldSample:
    """(p, v, R) at a single point ``x`` (shape (N,) or scalar for N = 1)."""
    xx = np.asarray(x, dtype=np.float64).reshape(1, -1)
    fb = fields(pde, data, xx, t)
    return FieldSample(p=float(fb.p[0]), v=fb.v[0].copy(), r_term=float(fb.r_term[0]))


def posterior(pde: PdeSpec, data: DeltaMixture, x, t) -> np.ndarray:
    """Posterior weights over the sources at (x, t).

    Proportional to ``w_i p_i(x, t)`` for the posterior kinds (this is the
    weighting that makes v an exact posterior mean; for diffusion p_i = G_i)
    and to ``w_i |G_i|`` for the rest.

    Raises
    ------
    UnderflowError
        If every term underflows even in the log domain.
    """
    xx = np.asarray(x, dtype=np.float64).reshape(1, -1)
    try:
        return posteriors(pde, data, xx, t)[0]
    except UnderflowError as exc:
        raise UnderflowError(exc.args[0], x=xx[0].tolist(), t=float(t)) from None


def posteriors(pde: PdeSpec, data: DeltaMixture, x, t) -> np.ndarray:
    """Posterior weights for many points at once, shape (M, K)."""
    _check_pde(pde, data)
    x = _points(data, x)
    t = float(t)
    if pde.kind in POSTERIOR_KINDS:
        logq = _posterior_parts(pde, data, x, t)[0]
    else:
        _, r = _displacements(data, x)
        g = np.abs(kernels.greens(pde, r, np.full_like(r, t)).g)
        with np.errstate(divide="ignore"):
            logq = data.log_weights[None, :] + np.log(g)
    top = logq.max(axis=1)
    if np.any(~np.isfinite(top)):
        i = int(np.flatnonzero(~np.isfinite(top))[0])
        raise UnderflowError("every source kernel underflows", point=i, t=t)
    w = np.exp(logq - top[:, None])
    return w / w.sum(axis=1, keepdims=True)


def potential(pde: PdeSpec, data: DeltaMixture, x, t):
    """phi, phi_t and grad(phi) summed directly over sources (no matching)."""
    _check_pde(pde, data)
    x = _points(data, x)
    return _direct_sums(pde, data, x, float(t), "raise")[:3]


def density_and_flux(pde: PdeSpec, data: DeltaMixture, x, t):
    """p, the flux p v and R at (M, N) points, without dividing by p.

    This is what the continuity equation constrains; it stays defined where
    p vanishes (outside a wave's light cone).
    """
    _check_pde(pde, data)
    x = _points(data, x)
    t = float(t)
    if pde.kind in POSTERIOR_KINDS:
        fb = fields(pde, data, x, t)
        return fb.p, fb.p[:, None] * fb.v, fb.r_term
    phi, phi_t, grad, _ = _direct_sums(pde, data, x, t, "raise")
    _, p, flux = _matched(pde, phi, phi_t, grad)
    return p, flux, np.zeros_like(p)


def grid_density(pde: PdeSpec, data: DeltaMixture, x, t, dt):
    """p from a finite time difference of phi, as seen by a grid of step ``dt``.

    ``p = p_t * (phi(t + dt/2) - phi(t - dt/2)) / dt + p_0 * phi(t)`` for the
    phi-matched kinds. Where phi jumps (the ideal-wave front) this captures
    the singular part of p that a pointwise derivative misses.
    """
    _check_pde(pde, data)
    mt = matching_for(pde)
    if mt.modulus:
        raise UnsupportedKindError("grid density is defined for real potentials")
    x = _points(data, x)
    t = float(t)
    dt = float(dt)
    if not 0 < dt < 2 * t:
        raise DomainError("need 0 < dt < 2 t")

    def phi_at(tt):
        _, r = _displacements(data, x)
        # A point exactly on a front is nudged; a grid cannot resolve it anyway.
        r = np.where(np.abs(r - tt) < WAVEFRONT_TOL, tt + 2 * WAVEFRONT_TOL, r)
        g = kernels.greens(pde, r, np.full_like(r, tt)).g
        return (data.weights[None, :] * g).sum(1)

    return mt.p_t * (phi_at(t + dt / 2) - phi_at(t - dt / 2)) / dt + mt.p_0 * phi_at(t)


def default_T(pde: PdeSpec, data: DeltaMixture) -> float:
    """Terminal time at which the prior is effectively data independent.

    100 * diameter^2 for diffusion and 100 * diameter otherwise (the spread
    of a Poisson-like kernel grows linearly in t). A single source has
    diameter 0; the unit length is used instead.
    """
    d = data.diameter() or 1.0
    if pde.kind is Kind.DIFFUSION:
        return 100.0 * d * d
    return 100.0 * d
