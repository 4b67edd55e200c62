"""Verification instruments.

* prior-overlap measures: the Bhattacharyya coefficient of two single-source
  densities (x space) and the normalized inner product in k space;
* finite-difference residuals of the continuity equation and of the PDE
  applied to a Green's function;
* distances between a weighted ensemble and a reference density.

The two overlaps are different quantities and are kept apart. In the
kernel convention used throughout (diffusion variance 2T) the diffusion
Bhattacharyya coefficient is ``exp(-|d|^2 / 16 T)`` while the k-space
overlap is ``exp(-|d|^2 / 8 T)``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import dispersion, kernels
from .density_flow import DeltaMixture, density_and_flux
from .errors import (DomainError, GridTooCoarseError, SingularityError,
                     UnsupportedKindError)
from .pde_catalog import Kind, PdeSpec, operator_coeffs
from .sampler import Ensemble

__all__ = [
    "OverlapMethod",
    "OverlapResult",
    "GridParams",
    "KGrid",
    "ResidualGrid",
    "overlap_closed_form",
    "overlap_bhattacharyya",
    "overlap_kspace",
    "flow_residual",
    "kernel_residual",
    "sample_distance",
    "ks_test",
]

_WAVE_KINDS = (Kind.IDEAL_WAVE, Kind.DISSIPATIVE_WAVE)
_OVERLAP_KINDS = (Kind.DIFFUSION, Kind.POISSON, Kind.SCREENED_POISSON)


class OverlapMethod(str, enum.Enum):
    X_SPACE = "XSpaceQuadrature"
    K_SPACE = "KSpaceQuadrature"
    CLOSED_FORM = "ClosedForm"


@dataclass(frozen=True)
class OverlapResult:
    value: float
    method: OverlapMethod
    nodes: int = 0


@dataclass(frozen=True)
class GridParams:
    """x-space quadrature settings for :func:`overlap_bhattacharyya`.

    Each axis is mapped as ``x = c + s tan(theta)`` with c the midpoint of
    the two sources and ``s = half_width / 10`` (default half width
    ``10 * spread + |d|``), so heavy power-law tails are integrated rather
    than cut off. Gauss-Legendre in theta with ``nodes`` per axis; the
    result is recomputed with twice the nodes and must agree to ``tol``.
    """

    nodes: int = 512
    half_width: float | None = None
    tol: float = 1e-6

    def __post_init__(self):
        if self.nodes < 8:
            raise DomainError("need at least 8 nodes per axis")
        if self.half_width is not None and not self.half_width > 0:
            raise DomainError("half_width must be positive")


@dataclass(frozen=True)
class KGrid:
    """Radial k quadrature: Gauss-Legendre on ``[0, k_top]``.

    ``k_top`` is where the weight ``exp(2 Im omega t)`` drops below
    ``tail``, capped at ``k_max``.
    """

    k_max: float = 50.0
    nodes: int = 4096
    tol: float = 1e-6
    tail: float = 1e-18


@dataclass(frozen=True)
class ResidualGrid:
    """Points for :func:`flow_residual`.

    ``points`` is (M, N); ``times`` is (K,); the residual is evaluated on
    every (point, time) pair with finite-difference step ``h``.
    """

    points: np.ndarray
    times: np.ndarray
    h: float = 1e-3
    richardson: bool = True
    floor: float = 1e-300


def _spread(pde: PdeSpec, T: float) -> float:
    return math.sqrt(2.0 * T) if pde.kind is Kind.DIFFUSION else T


def _pair(x1, x2):
    x1 = np.atleast_1d(np.asarray(x1, dtype=np.float64))
    x2 = np.atleast_1d(np.asarray(x2, dtype=np.float64))
    if x1.shape != x2.shape or x1.ndim != 1:
        raise DomainError("x1 and x2 must be points of the same dimension")
    return x1, x2


def overlap_closed_form(pde: PdeSpec, x1, x2, T: float) -> OverlapResult:
    """Diffusion Bhattacharyya coefficient, ``exp(-|d|^2 / 16 T)``.

    Two Gaussians of variance ``s^2`` have coefficient
    ``exp(-|d|^2 / 8 s^2)``; here ``s^2 = 2T``.
    """
    if pde.kind is not Kind.DIFFUSION:
        raise UnsupportedKindError("the closed-form overlap exists for diffusion only")
    x1, x2 = _pair(x1, x2)
    d2 = float(np.sum((x1 - x2) ** 2))
    return OverlapResult(math.exp(-d2 / (16.0 * float(T))), OverlapMethod.CLOSED_FORM)


def _bhatt(pde, x1, x2, T, nodes, s):
    n = x1.size
    g, w = kernels.gauss_legendre(nodes)
    theta = 0.5 * math.pi * g
    wt = 0.5 * math.pi * w
    c = 0.5 * (x1 + x2)
    axes = [c[i] + s * np.tan(theta) for i in range(n)]
    jac = s / np.cos(theta) ** 2
    if n == 1:
        pts = axes[0][:, None]
        wts = wt * jac
    else:
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        wts = np.outer(wt * jac, wt * jac).ravel()
    r1 = np.linalg.norm(pts - x1, axis=1)
    r2 = np.linalg.norm(pts - x2, axis=1)
    l1 = kernels.log_p_kernel(pde, r1, T)
    l2 = kernels.log_p_kernel(pde, r2, T)
    top = max(l1.max(), l2.max())
    cross = np.sum(wts * np.exp(0.5 * (l1 + l2) - top))
    m1 = np.sum(wts * np.exp(l1 - top))
    m2 = np.sum(wts * np.exp(l2 - top))
    return float(cross / math.sqrt(m1 * m2))


def overlap_bhattacharyya(pde: PdeSpec, x1, x2, T: float,
                          grid: GridParams = GridParams()) -> OverlapResult:
    """``integral sqrt(p(x, T; x1) p(x, T; x2)) dx`` by quadrature (N <= 2).

    Kernels whose mass decays with T (screened Poisson) are normalized
    first; the divisor is the geometric mean of the two masses.

    Raises
    ------
    UnsupportedKindError
        Kinds whose p is not a density on all of space (waves, Helmholtz,
        Schroedinger).
    GridTooCoarseError
        Doubling the nodes moves the value by more than ``grid.tol``.
    """
    if pde.kind not in _OVERLAP_KINDS:
        raise UnsupportedKindError(f"{pde.kind.value} has no whole-space density to overlap")
    x1, x2 = _pair(x1, x2)
    if x1.size != pde.dim_n:
        raise DomainError("point dimension differs from the PDE dimension")
    if x1.size > 2:
        raise DomainError("x-space overlap quadrature supports N <= 2")
    T = float(T)
    if not T > 0:
        raise DomainError("T must be positive")
    half = grid.half_width
    if half is None:
        half = 10.0 * _spread(pde, T) + float(np.linalg.norm(x1 - x2))
    s = half / 10.0
    coarse = _bhatt(pde, x1, x2, T, grid.nodes, s)
    fine = _bhatt(pde, x1, x2, T, 2 * grid.nodes, s)
    if abs(fine - coarse) > grid.tol:
        raise GridTooCoarseError(
            f"overlap changed by {abs(fine - coarse):.3g} under refinement (tol {grid.tol:g})")
    return OverlapResult(fine, OverlapMethod.X_SPACE, 2 * grid.nodes)


def _branch_for_overlap(pde: PdeSpec) -> int:
    rep = dispersion.classify(pde)
    if rep.witness_branch is not None:
        return rep.witness_branch
    # No witness: take the branch that never grows the most.
    return int(np.argmin(rep.branches.imag.max(axis=0)))


@functools.lru_cache(maxsize=64)
def _im_omega(pde: PdeSpec, branch: int, k_top: float, nodes: int):
    g, w = kernels.gauss_legendre(nodes)
    k = 0.5 * k_top * (g + 1.0)
    im = dispersion.branches_at(pde, np.append(k, 0.0))[:, branch].imag
    return k, 0.5 * k_top * w, im[:-1] - im[-1]


def _k_top(pde, branch, T, kg: KGrid):
    ks = np.linspace(0.0, kg.k_max, 2049)
    im = dispersion.branches_at(pde, ks)[:, branch].imag
    ks = ks[1:]
    logw = 2.0 * (im[1:] - im[0]) * T
    below = np.flatnonzero(logw < math.log(kg.tail))
    return float(ks[below[0]]) if below.size else kg.k_max


def _kspace(pde, d, T, branch, k_top, nodes):
    n = pde.dim_n
    k, wk, dim = _im_omega(pde, branch, k_top, nodes)
    weight = wk * np.exp(2.0 * dim * T) * k ** (n - 1)
    ang = kernels._angular(n, k * d) / kernels._angular(n, np.zeros(1))[0]
    return float(np.sum(weight * ang) / np.sum(weight))


def overlap_kspace(pde: PdeSpec, x1, x2, T: float, kgrid: KGrid = KGrid()) -> OverlapResult:
    """Normalized k-space overlap ``<cos(k.d)>`` under ``|p(k,T)|^2``.

    The weight is ``exp(2 (Im omega(k) - Im omega(0)) T)`` for the witness
    branch (or, without a witness, the branch whose Im omega stays
    lowest), times the radial measure ``k^(N-1)``. Dividing by the same
    integral without the cosine is the symmetric normalization: both
    self-overlaps are equal to it.
    """
    x1, x2 = _pair(x1, x2)
    if x1.size != pde.dim_n:
        raise DomainError("point dimension differs from the PDE dimension")
    T = float(T)
    if not T > 0:
        raise DomainError("T must be positive")
    d = float(np.linalg.norm(x1 - x2))
    branch = _branch_for_overlap(pde)
    k_top = _k_top(pde, branch, T, kgrid)
    coarse = _kspace(pde, d, T, branch, k_top, kgrid.nodes)
    fine = _kspace(pde, d, T, branch, k_top, 2 * kgrid.nodes)
    if abs(fine - coarse) > kgrid.tol:
        raise GridTooCoarseError(
            f"k-space overlap changed by {abs(fine - coarse):.3g} under refinement")
    return OverlapResult(fine, OverlapMethod.K_SPACE, 2 * kgrid.nodes)


def _richardson(fn, h, richardson):
    d1 = fn(h)
    if not richardson:
        return d1
    d2 = fn(0.5 * h)
    return (4.0 * d2 - d1) / 3.0


def _check_stencil(pde, data, pts, t, h):
    if t - 2.0 * h <= 0:
        raise SingularityError("finite-difference stencil reaches t <= 0", t=float(t))
    if pde.kind in _WAVE_KINDS:
        reach = 2.0 * h * (1.0 + math.sqrt(pde.dim_n))
        r = np.linalg.norm(pts[:, None, :] - data.points[None, :, :], axis=2)
        near = np.abs(r - t) <= reach
        if near.any():
            i = int(np.flatnonzero(near.any(axis=1))[0])
            raise SingularityError("residual stencil crosses a wave front",
                                   point=i, t=float(t))


def flow_residual(pde: PdeSpec, data: DeltaMixture, grid: ResidualGrid,
                  include_r: bool = True) -> float:
    """Max scaled residual of ``dp/dt + div(p v) - R`` over the grid.

    Derivatives are central differences of p and of the flux ``p v``,
    Richardson-extrapolated from steps h and h/2 unless
    ``grid.richardson`` is off (then the error is O(h^2)). Each residual
    is divided by ``|p_t| + |div(p v)| + |R| + |p|/t`` at that point, the
    last term keeping the scale honest where p_t happens to cross zero.
    Points where the scale is 0 (outside a light cone) count as 0.

    ``include_r=False`` drops R, which shows the birth/death term is needed.
    """
    pts = np.atleast_2d(np.asarray(grid.points, dtype=np.float64))
    if pde.dim_n == 1 and pts.shape[0] == 1 and pts.shape[1] != 1:
        pts = pts.T
    n = pde.dim_n
    h = float(grid.h)
    worst = 0.0
    for t in np.atleast_1d(np.asarray(grid.times, dtype=np.float64)):
        t = float(t)
        _check_stencil(pde, data, pts, t, h)

        def p_t(step):
            return (density_and_flux(pde, data, pts, t + step)[0]
                    - density_and_flux(pde, data, pts, t - step)[0]) / (2.0 * step)

        def div(step):
            acc = np.zeros(pts.shape[0])
            for j in range(n):
                e = np.zeros(n)
                e[j] = step
                fp = density_and_flux(pde, data, pts + e, t)[1][:, j]
                fm = density_and_flux(pde, data, pts - e, t)[1][:, j]
                acc = acc + (fp - fm) / (2.0 * step)
            return acc

        dpt = _richardson(p_t, h, grid.richardson)
        dv = _richardson(div, h, grid.richardson)
        p0, _, r0 = density_and_flux(pde, data, pts, t)
        r = r0 if include_r else 0.0
        res = np.abs(dpt + dv - r)
        scale = np.abs(dpt) + np.abs(dv) + np.abs(r0) + np.abs(p0) / t
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(scale > grid.floor, res / np.maximum(scale, grid.floor),
                           np.where(res > grid.floor, np.inf, 0.0))
        worst = max(worst, float(np.max(rel)))
    return worst


def kernel_residual(pde: PdeSpec, x, t: float, h: float | None = None) -> float:
    """Relative residual of the PDE applied to G(|x|, t), source at 0.

    Second-order central differences in t and along each axis, Richardson
    extrapolated. The result is ``|L G|`` over the sum of the magnitudes of
    the individual terms of ``L G``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    n = pde.dim_n
    if x.size != n:
        raise DomainError("point dimension differs from the PDE dimension")
    t = float(t)
    r = float(np.linalg.norm(x))
    if h is None:
        scale = t if r == 0 else min(t, r)
        if pde.kind in _WAVE_KINDS:
            scale = min(scale, abs(t - r))
        h = 1e-2 * scale
    c_tt, c_t, c_lap, c_0 = operator_coeffs(pde)

    def g(xx, tt):
        return kernels.greens(pde, float(np.linalg.norm(xx)), tt).g

    def terms(step):
        g0 = g(x, t)
        gp, gm = g(x, t + step), g(x, t - step)
        g_tt = (gp - 2.0 * g0 + gm) / step ** 2
        g_t = (gp - gm) / (2.0 * step)
        lap = 0.0
        for j in range(n):
            e = np.zeros(n)
            e[j] = step
            lap = lap + (g(x + e, t) - 2.0 * g0 + g(x - e, t)) / step ** 2
        return np.array([c_tt * g_tt, c_t * g_t, c_lap * lap, c_0 * g0])

    parts = (4.0 * terms(0.5 * h) - terms(h)) / 3.0
    total = abs(parts.sum())
    size = float(np.sum(np.abs(parts)))
    return total / size if size > 0 else total


def _grid_masses(density, edges_1d, sub):
    """Bin masses of a 1D or 2D density over a box, normalized over the box."""
    n = len(edges_1d)
    fine = []
    for e in edges_1d:
        pieces = [np.linspace(a, b, sub + 1)[:-1] for a, b in zip(e[:-1], e[1:])]
        fine.append(np.append(np.concatenate(pieces), e[-1]))
    if n == 1:
        xs = fine[0]
        p = np.asarray(density(xs[:, None]), dtype=np.float64).reshape(-1)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(xs))])
        mass = np.diff(cum[::sub])
    else:
        xx, yy = np.meshgrid(fine[0], fine[1], indexing="ij")
        p = np.asarray(density(np.column_stack([xx.ravel(), yy.ravel()])),
                       dtype=np.float64).reshape(xx.shape)
        cell = 0.25 * (p[1:, 1:] + p[:-1, 1:] + p[1:, :-1] + p[:-1, :-1])
        cell = cell * np.diff(fine[0])[:, None] * np.diff(fine[1])[None, :]
        nb0, nb1 = len(edges_1d[0]) - 1, len(edges_1d[1]) - 1
        mass = cell.reshape(nb0, sub, nb1, sub).sum(axis=(1, 3))
    total = mass.sum()
    if not total > 0:
        raise DomainError("reference density has no mass on the box")
    return mass / total


def sample_distance(samples: Ensemble, density, bounds=None, bins: int = 100,
                    sub: int = 40):
    """``(wasserstein1, l1_hist)`` between a weighted ensemble and a density.

    Parameters
    ----------
    samples : Ensemble
        Positions and (log) weights; weights are normalized here.
    density : callable
        Vectorized ``p(x)`` for an (M, N) array; it need not be normalized.
        It is normalized over the box.
    bounds : (lo, hi) or sequence of them, optional
        The box, one pair per axis. Defaults to the sample range padded by
        one weighted standard deviation.
    bins : int
        Histogram bins per axis for the L1 distance.
    sub : int
        Reference integration points per bin and axis.

    ``wasserstein1`` is computed for N = 1 only (NaN otherwise) as the
    integral of ``|F_samples - F|`` over the box. ``l1_hist`` is the sum of
    absolute differences of bin masses; sample weight outside the box
    counts as error.
    """
    if samples.n == 0:
        raise DomainError("empty ensemble")
    x = samples.x
    w = samples.normalized_weights()
    n = x.shape[1]
    if n > 2:
        raise DomainError("sample_distance supports N <= 2")
    if bounds is None:
        mean = np.sum(w[:, None] * x, axis=0)
        sd = np.sqrt(np.sum(w[:, None] * (x - mean) ** 2, axis=0))
        pad = np.where(sd > 0, sd, 1.0)
        bounds = [(float(x[:, j].min() - pad[j]), float(x[:, j].max() + pad[j]))
                  for j in range(n)]
    elif np.ndim(bounds) == 1:
        bounds = [tuple(bounds)] * n
    edges = [np.linspace(lo, hi, bins + 1) for lo, hi in bounds]
    ref = _grid_masses(density, edges, sub if n == 1 else min(sub, 8))
    hist = np.histogramdd(x, bins=edges, weights=w)[0]
    l1 = float(np.abs(hist - ref).sum() + max(0.0, 1.0 - hist.sum()))

    if n != 1:
        return math.nan, l1
    lo, hi = bounds[0]
    grid = np.linspace(lo, hi, bins * sub + 1)
    p = np.asarray(density(grid[:, None]), dtype=np.float64).reshape(-1)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    order = np.argsort(x[:, 0], kind="stable")
    xs = x[order, 0]
    cw = np.cumsum(w[order])
    idx = np.searchsorted(xs, grid, side="right")
    emp = np.where(idx > 0, cw[np.maximum(idx - 1, 0)], 0.0)
    diff = np.abs(emp - cdf)
    w1 = float(np.sum(0.5 * (diff[1:] + diff[:-1]) * np.diff(grid)))
    return w1, l1


def ks_test(samples: Ensemble, density, bounds, nodes: int = 200001):
    """Kolmogorov-Smirnov test of unweighted 1D samples against a density.

    The reference CDF is the trapezoid integral of ``density`` on
    ``nodes`` points over ``bounds``, interpolated linearly.

    Returns the ``scipy.stats.kstest`` result.
    """
    if samples.n == 0:
        raise DomainError("empty ensemble")
    if samples.dim != 1:
        raise DomainError("KS test needs one-dimensional samples")
    lw = samples.log_w
    if np.ptp(lw) > 1e-12:
        raise DomainError("KS test needs equally weighted samples")
    lo, hi = bounds
    grid = np.linspace(lo, hi, nodes)
    p = np.asarray(density(grid[:, None]), dtype=np.float64).reshape(-1)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return stats.kstest(samples.x[:, 0], lambda z: np.interp(z, grid, cdf))
