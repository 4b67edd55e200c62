"""Green's functions of the catalog PDEs.

Conventions
-----------
``r = |x - x'|`` is the distance to the source and ``rho = sqrt(t^2 + r^2)``.
Kernels for which t plays the role of an extra space dimension (Poisson,
screened Poisson, Helmholtz) are normalized so that ``p = -G_t`` carries
unit mass per source; this is twice the textbook full-space Green's
function and makes the ``m -> 0`` and ``k0 -> 0`` limits reproduce the
Poisson kernel exactly. Velocity fields do not depend on this constant.

The 2D wave kernels carry the physical ``1/(2 pi)`` factor.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import special
from .errors import (ConvergenceError, DomainError, SingularityError,
                     UnsupportedKindError)
from .pde_catalog import Kind, PdeSpec

__all__ = [
    "KernelEval",
    "QuadratureParams",
    "WAVEFRONT_TOL",
    "greens",
    "greens_fourier",
    "greens_quadrature",
    "phi_hat",
    "log_p_kernel",
    "log_p_and_ratio",
    "g_over_p",
    "velocity_divisor",
    "helmholtz_clip_rho",
    "poisson_p_constant",
    "gauss_legendre",
]

WAVEFRONT_TOL = 1e-9
_RHO_KINDS = (Kind.POISSON, Kind.SCREENED_POISSON, Kind.HELMHOLTZ)


@dataclass(frozen=True)
class KernelEval:
    """G, dG/dt and dG/dr at a set of (r, t) points.

    The full spatial gradient is ``grad_r * (x - x') / r``.
    """

    g: np.ndarray | float | complex
    g_t: np.ndarray | float | complex
    grad_r: np.ndarray | float | complex


@dataclass(frozen=True)
class QuadratureParams:
    """Settings for the radial inverse Fourier transform.

    Gauss-Legendre on ``[0, k_max]``; the node count starts at ``nodes`` and
    doubles until two successive results agree to ``tol`` (relative to the
    larger of the result and ``abs_floor``). ``tail`` fixes k_max: the
    integrand envelope beyond it is below ``tail`` times its peak.
    """

    nodes: int = 64
    tol: float = 1e-10
    max_nodes: int = 1 << 17
    tail: float = 1e-12
    abs_floor: float = 1e-300

    def __post_init__(self):
        if self.nodes < 64:
            raise DomainError("quadrature needs at least 64 nodes")
        if not self.tol > 0 or not 0 < self.tail < 1:
            raise DomainError("tol must be positive and tail in (0, 1)")


def _rt(r, t):
    r = np.asarray(r, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(~(t > 0)):
        raise DomainError("time must be positive")
    if np.any(~(r >= 0)):
        raise DomainError("distance must be non-negative")
    scalar = r.ndim == 0 and t.ndim == 0
    r, t = np.broadcast_arrays(r, t)
    return r.astype(np.float64), t.astype(np.float64), scalar


def _out(ev: KernelEval, scalar: bool) -> KernelEval:
    if not scalar:
        return ev
    conv = complex if np.iscomplexobj(ev.g) else float
    return KernelEval(conv(ev.g), conv(ev.g_t), conv(ev.grad_r))


def poisson_p_constant(n: int) -> float:
    """``Gamma((N+1)/2) / pi^((N+1)/2)``, the constant of the unit-mass Poisson p."""
    return math.gamma((n + 1) / 2.0) / math.pi ** ((n + 1) / 2.0)


def _sp_const(nu):
    return (2.0 * math.pi) ** (-nu) / math.pi


def _helm_const(nu):
    return 0.5 * (2.0 * math.pi) ** (-nu)


def helmholtz_clip_rho(pde: PdeSpec) -> float:
    """Largest admissible ``rho = sqrt(t^2 + r^2)``: r_c / k0."""
    if pde.kind is not Kind.HELMHOLTZ:
        raise UnsupportedKindError("clip radius is defined for Helmholtz only")
    return special.y_first_zero((pde.dim_n - 1) / 2.0) / pde.k0


def _check_front(r, t):
    near = np.abs(r - t) < WAVEFRONT_TOL
    if np.any(near):
        i = int(np.flatnonzero(near.ravel())[0])
        raise SingularityError("evaluation on the wave front",
                               r=float(r.ravel()[i]), t=float(t.ravel()[i]))


def greens(pde: PdeSpec, r, t) -> KernelEval:
    """Closed-form Green's function with its t and r derivatives.

    Parameters
    ----------
    pde : PdeSpec
    r : float or array
        Distance(s) to the source, ``r >= 0``.
    t : float or array
        Time(s), ``t > 0``. Broadcast against ``r``.

    Raises
    ------
    UnsupportedKindError
        Kinds without a closed form, or a (kind, N) pair not covered (wave
        kernels exist for N = 2, and N = 1 for the ideal wave).
    SingularityError
        Wave kinds evaluated within ``WAVEFRONT_TOL`` of ``r = t``.
    """
    r, t, scalar = _rt(r, t)
    n = pde.dim_n
    kind = pde.kind
    nu = (n - 1) / 2.0

    if kind is Kind.DIFFUSION:
        g = (4.0 * np.pi * t) ** (-n / 2.0) * np.exp(-r * r / (4.0 * t))
        g_t = g * (-n / (2.0 * t) + r * r / (4.0 * t * t))
        gr = -g * r / (2.0 * t)
        return _out(KernelEval(g, g_t, gr), scalar)

    if kind in _RHO_KINDS:
        rho = np.sqrt(t * t + r * r)
        if kind is Kind.POISSON:
            d = poisson_p_constant(n)
            if n == 1:
                g = -np.log(rho) / np.pi
            else:
                g = d / (n - 1) * rho ** (1 - n)
            dg = -d * rho ** (-n)
        elif kind is Kind.SCREENED_POISSON:
            m = pde.m
            c = _sp_const(nu)
            k0v, k1v = special.bessel_k_pair(nu, m * rho.ravel())
            k0v = k0v.reshape(rho.shape)
            k1v = k1v.reshape(rho.shape)
            g = c * m ** nu * rho ** (-nu) * k0v
            dg = -c * m ** (nu + 1) * rho ** (-nu) * k1v
        else:
            k0 = pde.k0
            c = _helm_const(nu)
            _, y, _, _, y1 = special.bessel_jy(nu, k0 * rho.ravel())
            y = y.reshape(rho.shape)
            y1 = y1.reshape(rho.shape)
            g = -c * k0 ** nu * rho ** (-nu) * y
            dg = c * k0 ** (nu + 1) * rho ** (-nu) * y1
        return _out(KernelEval(g, dg * t / rho, dg * r / rho), scalar)

    if kind is Kind.IDEAL_WAVE:
        if n == 1:
            _check_front(r, t)
            inside = (r < t).astype(np.float64)
            zero = np.zeros_like(r)
            return _out(KernelEval(0.5 * inside, zero, zero.copy()), scalar)
        if n != 2:
            raise UnsupportedKindError(
                f"ideal wave kernel is evaluated for N = 1, 2 only (got N = {n})")
        _check_front(r, t)
        inside = r < t
        s = np.sqrt(np.where(inside, t * t - r * r, 1.0))
        c = 1.0 / (2.0 * np.pi)
        g = np.where(inside, c / s, 0.0)
        g_t = np.where(inside, -c * t / s ** 3, 0.0)
        gr = np.where(inside, c * r / s ** 3, 0.0)
        return _out(KernelEval(g, g_t, gr), scalar)

    if kind is Kind.DISSIPATIVE_WAVE:
        if n != 2:
            raise UnsupportedKindError(
                f"dissipative wave kernel is evaluated for N = 2 only (got N = {n})")
        _check_front(r, t)
        eps = pde.eps
        inside = r < t
        s = np.sqrt(np.where(inside, t * t - r * r, 1.0))
        c = 1.0 / (2.0 * np.pi)
        damp = np.exp(-eps * t)
        ch = np.cosh(eps * s)
        sh = np.sinh(eps * s)
        w = ch / s
        dw = eps * sh / s - ch / (s * s)
        g = np.where(inside, c * damp * w, 0.0)
        g_t = np.where(inside, c * damp * (-eps * w + dw * t / s), 0.0)
        gr = np.where(inside, c * damp * dw * (-r / s), 0.0)
        return _out(KernelEval(g, g_t, gr), scalar)

    if kind is Kind.SCHROEDINGER:
        g = (4.0j * np.pi * t) ** (-n / 2.0) * np.exp(1j * r * r / (4.0 * t))
        g_t = g * (-n / (2.0 * t) - 1j * r * r / (4.0 * t * t))
        gr = g * 1j * r / (2.0 * t)
        return _out(KernelEval(g, g_t, gr), scalar)

    raise UnsupportedKindError(f"{kind.value} has no closed-form Green's function")


def greens_fourier(pde: PdeSpec, k, t):
    """Fourier-time factor of the kernel as tabulated for each PDE.

    For the smooth kinds this is ``exp(-i omega t)`` on the decaying branch
    and equals the transform of the unit-mass density ``p``.
    """
    k = np.asarray(k, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(~(t > 0)):
        raise DomainError("time must be positive")
    if np.any(~(k >= 0)):
        raise DomainError("wavenumber must be non-negative")
    kind = pde.kind
    if kind is Kind.DIFFUSION:
        out = np.exp(-k * k * t) + 0j
    elif kind is Kind.POISSON:
        out = np.exp(-k * t) + 0j
    elif kind is Kind.SCREENED_POISSON:
        out = np.exp(-np.sqrt(k * k + pde.m ** 2) * t) + 0j
    elif kind is Kind.HELMHOLTZ:
        k0 = pde.k0
        below = k <= k0
        osc = np.exp(-1j * np.sqrt(np.where(below, k0 * k0 - k * k, 0.0)) * t)
        dec = np.exp(-np.sqrt(np.where(below, 0.0, k * k - k0 * k0)) * t) + 0j
        out = np.where(below, osc, dec)
    elif kind is Kind.IDEAL_WAVE:
        out = np.exp(-1j * k * t)
    elif kind is Kind.DISSIPATIVE_WAVE:
        eps = pde.eps
        above = k > eps
        osc = np.exp(-eps * t + 1j * np.sqrt(np.where(above, k * k - eps * eps, 0.0)) * t)
        dec = np.exp(-(eps + np.sqrt(np.where(above, 0.0, eps * eps - k * k))) * t) + 0j
        out = np.where(above, osc, dec)
    elif kind is Kind.SCHROEDINGER:
        out = np.exp(1j * k * k * t)
    elif kind is Kind.MIXED_DIFFUSION_POISSON:
        out = np.exp(-_mixed_rate(pde, k) * t) + 0j
    else:
        raise UnsupportedKindError(f"{kind.value} has no tabulated kernel transform")
    return complex(out) if out.ndim == 0 else out


def _mixed_rate(pde, k):
    """Decay rate lambda(k) = (sqrt(b^2 + 4 a k^2) - b) / (2 a), cancellation-free."""
    a, b = pde.a, pde.b
    root = np.sqrt(b * b + 4.0 * a * k * k)
    return 2.0 * k * k / (root + b) if b > 0 else k / np.sqrt(a)


def phi_hat(pde: PdeSpec, k, t):
    """Spatial Fourier transform of the unit-mass potential G itself.

    Equal to the density transform divided by the rate that links them
    (``p_hat = -G_hat_t`` for Poisson-like kinds).
    """
    k = np.asarray(k, dtype=np.float64)
    kind = pde.kind
    if kind is Kind.DIFFUSION:
        return np.exp(-k * k * t)
    if kind is Kind.POISSON:
        with np.errstate(divide="ignore"):
            return np.exp(-k * t) / k
    if kind is Kind.SCREENED_POISSON:
        mu = np.sqrt(k * k + pde.m ** 2)
        return np.exp(-mu * t) / mu
    if kind is Kind.MIXED_DIFFUSION_POISSON:
        a, b = pde.a, pde.b
        root = np.sqrt(b * b + 4.0 * a * k * k)
        with np.errstate(divide="ignore"):
            return 2.0 / (b + root) * np.exp(-_mixed_rate(pde, k) * t)
    raise UnsupportedKindError(f"no quadrature kernel for {kind.value}")


def _angular(n, z):
    """``2 pi^(N/2) * 0F1~(N/2; -z^2/4)`` via ``(z/2)^(1-N/2) J_{N/2-1}(z)``."""
    out = np.full(z.shape, 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0))
    pos = z > 0
    if np.any(pos):
        zp = z[pos]
        order = n / 2.0 - 1.0
        out[pos] = 2.0 * math.pi ** (n / 2.0) * (zp / 2.0) ** (-order) * special.bessel_j(order, zp)
    return out


_PANEL = 32


@functools.lru_cache(maxsize=32)
def gauss_legendre(nodes: int):
    """Nodes and weights on [-1, 1], cached and read-only.

    Up to 128 nodes this is the plain rule. Beyond that it is a composite
    rule of 32-point panels, which avoids the cost of very high order
    rules while converging just as well for the smooth integrands here.
    """
    nodes = int(nodes)
    if nodes <= 128:
        x, w = np.polynomial.legendre.leggauss(nodes)
    else:
        panels = -(-nodes // _PANEL)
        xp, wp = np.polynomial.legendre.leggauss(_PANEL)
        left = np.linspace(-1.0, 1.0, panels + 1)[:-1]
        half = 1.0 / panels
        x = (left[:, None] + half * (xp[None, :] + 1.0)).ravel()
        w = np.tile(half * wp, panels)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _k_max(pde, t, tail):
    n = pde.dim_n
    ks = np.logspace(-8, 8, 3201)
    env = np.abs(ks ** (n - 1) * phi_hat(pde, ks, t))
    peak = env.max()
    above = np.nonzero(env >= tail * peak)[0]
    return ks[min(above[-1] + 1, ks.size - 1)]


def greens_quadrature(pde: PdeSpec, r: float, t: float,
                      quad: QuadratureParams = QuadratureParams()) -> float:
    """Numeric G(r, t) by radial inverse Fourier transform.

    ``G(r) = (2 pi)^-N  int_0^kmax k^(N-1) G_hat(k, t) 2 pi^(N/2) 0F1~(N/2; -(k r)^2/4) dk``

    Works for diffusion, Poisson, screened Poisson and the mixed
    diffusion-Poisson kernel, which has no closed form.

    Raises
    ------
    UnsupportedKindError
        Other kinds, or N = 1 with a pure-Poisson kernel whose transform is
        not integrable at k = 0.
    ConvergenceError
        If doubling the nodes up to ``quad.max_nodes`` never settles.
    """
    r = float(r)
    t = float(t)
    if not t > 0 or not r >= 0:
        raise DomainError("need r >= 0 and t > 0")
    n = pde.dim_n
    kind = pde.kind
    if kind not in (Kind.DIFFUSION, Kind.POISSON, Kind.SCREENED_POISSON,
                    Kind.MIXED_DIFFUSION_POISSON):
        raise UnsupportedKindError(f"no quadrature kernel for {kind.value}")
    if n == 1 and (kind is Kind.POISSON or (kind is Kind.MIXED_DIFFUSION_POISSON and pde.b == 0)):
        raise UnsupportedKindError(
            "the 1D Poisson potential is logarithmic; its transform is not integrable")
    kmax = _k_max(pde, t, quad.tail)
    scale = (2.0 * math.pi) ** (-n)

    def integrate(nodes):
        xg, wg = gauss_legendre(nodes)
        k = 0.5 * kmax * (xg + 1.0)
        w = 0.5 * kmax * wg
        f = k ** (n - 1) * phi_hat(pde, k, t) * _angular(n, k * r)
        return scale * float(np.dot(w, f))

    nodes = quad.nodes
    prev = integrate(nodes)
    while nodes < quad.max_nodes:
        nodes *= 2
        cur = integrate(nodes)
        if abs(cur - prev) <= quad.tol * max(abs(cur), quad.abs_floor):
            return cur
        prev = cur
    raise ConvergenceError(
        f"radial quadrature not converged at {nodes} nodes (last change {abs(cur - prev):.3g})")


def velocity_divisor(pde: PdeSpec, t):
    """c in ``v = E_post[x - x'] / c`` for kinds whose velocity is a posterior mean."""
    if pde.kind is Kind.DIFFUSION:
        return 2.0 * t
    if pde.kind in _RHO_KINDS:
        return t
    raise UnsupportedKindError(f"{pde.kind.value} velocity is not a posterior mean")


def log_p_and_ratio(pde: PdeSpec, r, t):
    """``(log p, G/p)`` for one source, sharing a single Bessel evaluation.

    The log density stays finite where the kernel itself underflows (log
    domain with exponentially scaled K). ``G/p`` is the per-source factor
    in ``R/p`` and in ``phi = p E[G/p]``.
    """
    r = np.asarray(r, dtype=np.float64)
    t = float(t)
    n = pde.dim_n
    nu = (n - 1) / 2.0
    kind = pde.kind
    if kind is Kind.DIFFUSION:
        return -0.5 * n * math.log(4.0 * math.pi * t) - r * r / (4.0 * t), np.ones_like(r)
    rho2 = t * t + r * r
    if kind is Kind.POISSON:
        logp = math.log(poisson_p_constant(n) * t) - 0.5 * (n + 1) * np.log(rho2)
        if n == 1:
            return logp, -0.5 * rho2 * np.log(rho2) / t
        return logp, rho2 / ((n - 1) * t)
    rho = np.sqrt(rho2)
    if kind is Kind.SCREENED_POISSON:
        m = pde.m
        z = m * rho
        k0s, k1s = special.bessel_k_pair(nu, z.ravel(), scaled=True)
        k0s = k0s.reshape(z.shape)
        k1s = k1s.reshape(z.shape)
        logp = (math.log(_sp_const(nu) * m ** (nu + 1) * t)
                - (nu + 1) * np.log(rho) + np.log(k1s) - z)
        return logp, rho * k0s / (m * t * k1s)
    if kind is Kind.HELMHOLTZ:
        k0 = pde.k0
        z = k0 * rho
        _, y, _, _, y1 = special.bessel_jy(nu, z.ravel())
        y = y.reshape(z.shape)
        y1 = y1.reshape(z.shape)
        with np.errstate(invalid="ignore", divide="ignore"):
            logp = (math.log(_helm_const(nu) * k0 ** (nu + 1) * t)
                    - (nu + 1) * np.log(rho) + np.log(-y1))
        return logp, rho * y / (k0 * t * y1)
    raise UnsupportedKindError(f"{kind.value} has no log-domain density kernel")


def log_p_kernel(pde: PdeSpec, r, t):
    """log of the single-source density p(r, t) for the posterior-mean kinds."""
    return log_p_and_ratio(pde, r, t)[0]


def g_over_p(pde: PdeSpec, r, t):
    """G / p for one source (see :func:`log_p_and_ratio`)."""
    return log_p_and_ratio(pde, r, t)[1]
