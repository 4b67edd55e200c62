"""Backward sampling: prior draw, Heun integration of dx/dt = v, branching.

Random streams are keyed by ``(seed, stage, index)`` through NumPy's
``SeedSequence``: prior draws use one stream per fixed-size particle chunk
and every branching step uses its own stream. The results therefore do
not depend on how many worker threads evaluate the fields.

Backward weight rule
--------------------
Forward in time a walker's weight obeys ``d log w / dt = R / p``.
Integrating from T down to t_min reverses this, so with a positive step
``dt`` the update is ``log w += SIGN * (R/p) * dt`` with ``SIGN = -1``.
The screened-Poisson histogram test pins this sign against the analytic
density.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .density_flow import POSTERIOR_KINDS, DeltaMixture, fields, posteriors
from .errors import (ClipViolationError, DomainError, PopulationError,
                     SingularityError, UnsupportedKindError)
from .pde_catalog import Kind, PdeSpec, matching_for

__all__ = [
    "SIGN",
    "CHUNK",
    "Ensemble",
    "Schedule",
    "sample_prior",
    "integrate_backward",
    "branching_step",
    "radial_table",
    "mode_fractions",
    "thread_count",
    "write_csv",
]

SIGN = -1.0
CHUNK = 4096
PRIOR_NODES = 4096

_STAGE_PRIOR = 0
_STAGE_BRANCH = 1


@dataclass
class Ensemble:
    """Weighted particles at a common time.

    ``n_ref`` is the population size that min/max population limits refer
    to (the initial count).
    """

    x: np.ndarray
    log_w: np.ndarray
    t: float
    rng_seed: int
    n_ref: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim == 1:
            self.x = self.x.reshape(-1, 1)
        self.log_w = np.asarray(self.log_w, dtype=np.float64).reshape(-1)
        if self.x.shape[0] != self.log_w.shape[0]:
            raise DomainError("one log weight per particle is required")
        if not np.all(np.isfinite(self.log_w)):
            raise DomainError("log weights must be finite")
        if not self.n_ref:
            self.n_ref = self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def weights(self) -> np.ndarray:
        """Linear weights (not normalized)."""
        return np.exp(self.log_w)

    def normalized_weights(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(0)
        w = np.exp(self.log_w - self.log_w.max())
        return w / w.sum()

    def copy(self) -> "Ensemble":
        return Ensemble(self.x.copy(), self.log_w.copy(), self.t, self.rng_seed, self.n_ref)


@dataclass(frozen=True)
class Schedule:
    """Time grid from T down to t_min."""

    T: float
    t_min: float = 1e-3
    steps: int = 200
    spacing: str = "geometric"

    def __post_init__(self):
        if not (self.T > self.t_min > 0):
            raise DomainError("schedule needs T > t_min > 0")
        if int(self.steps) != self.steps or self.steps < 0:
            raise DomainError("steps must be a non-negative integer")
        if self.spacing not in ("geometric", "uniform"):
            raise DomainError(f"unknown spacing {self.spacing!r}")

    def times(self) -> np.ndarray:
        """Decreasing times, ``steps + 1`` of them (just T when steps = 0)."""
        k = np.arange(self.steps + 1) / max(self.steps, 1)
        if self.steps == 0:
            return np.array([self.T])
        if self.spacing == "geometric":
            out = self.T * (self.t_min / self.T) ** k
        else:
            out = self.T + (self.t_min - self.T) * k
        out[-1] = self.t_min
        return out

    def refined(self, factor: int) -> "Schedule":
        return replace(self, steps=self.steps * factor)


def thread_count() -> int:
    """Worker threads allowed by ``GENPHYS_THREADS`` (default 1)."""
    raw = os.environ.get("GENPHYS_THREADS", "1")
    try:
        val = int(raw)
    except ValueError:
        raise DomainError(f"GENPHYS_THREADS must be an integer, got {raw!r}") from None
    return max(1, val)


def _spread(pde: PdeSpec, T: float) -> float:
    return math.sqrt(2.0 * T) if pde.kind is Kind.DIFFUSION else T


def radial_table(pde: PdeSpec, T: float, nodes: int = PRIOR_NODES, r_max: float | None = None):
    """Tabulated CDF of the radius of one source's kernel at time T.

    The radius density ``r^(N-1) p(r, T)`` is tabulated on ``nodes`` points
    uniform in ``u = r / (r + s)`` with s the kernel spread, which maps the
    half line to [0, 1) and keeps power-law tails bounded in u.

    Returns
    -------
    u : ndarray
        Nodes in u.
    cdf : ndarray
        Normalized cumulative distribution at the nodes.
    s : float
        The spread used in the map.
    """
    s = _spread(pde, T)
    u_top = 1.0 if r_max is None else r_max / (r_max + s)
    u = np.linspace(0.0, u_top, nodes)
    inner = u[:-1] if u_top == 1.0 else u
    r = s * inner / (1.0 - inner)
    n = pde.dim_n
    logp = kernels.log_p_kernel(pde, r, T)
    with np.errstate(divide="ignore"):
        log_jac = math.log(s) - 2.0 * np.log1p(-inner)
        log_rad = (n - 1) * np.log(r) if n > 1 else np.zeros_like(r)
    logf = logp + log_jac + log_rad
    logf = np.where(np.isfinite(logf), logf, -np.inf)
    f = np.exp(logf - logf.max())
    if u_top == 1.0:
        f = np.append(f, 0.0)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(u))])
    cdf /= cdf[-1]
    return u, cdf, s


def _directions(rng, m, n):
    if n == 1:
        return np.where(rng.random(m) < 0.5, -1.0, 1.0)[:, None]
    g = rng.standard_normal((m, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_prior(pde: PdeSpec, data: DeltaMixture, T: float, n: int, seed: int,
                 nodes: int = PRIOR_NODES) -> Ensemble:
    """Draw n particles from p(x, T) = sum_i w_i p_i(x, T).

    A source is picked by weight, then a radius by inverse CDF of the
    tabulated radial law and a uniform direction.

    Raises
    ------
    UnsupportedKindError
        Kinds without a valid density kernel (ideal and dissipative waves,
        Schroedinger, dispersion-only kinds).
    ClipViolationError
        Helmholtz with ``k0 * T`` beyond the clip radius.
    """
    if pde.kind not in POSTERIOR_KINDS:
        raise UnsupportedKindError(f"{pde.kind.value} has no valid prior density to sample")
    if pde.dim_n != data.dim:
        raise DomainError("PDE and data dimensions differ")
    n = int(n)
    if n < 0:
        raise DomainError("particle count must be non-negative")
    T = float(T)
    r_max = None
    if pde.kind is Kind.HELMHOLTZ:
        rho_c = kernels.helmholtz_clip_rho(pde)
        if T >= rho_c:
            raise ClipViolationError(f"T = {T:g} is outside the Helmholtz clip rho_c = {rho_c:g}")
        r_max = math.sqrt(rho_c * rho_c - T * T) - data.diameter()
        if r_max <= 0:
            raise ClipViolationError("data diameter leaves no admissible prior support")
    d = data.dim
    if n == 0:
        return Ensemble(np.empty((0, d)), np.empty(0), T, seed, 0)
    u, cdf, s = radial_table(pde, T, nodes, r_max)
    xs = np.empty((n, d))
    for c, start in enumerate(range(0, n, CHUNK)):
        m = min(CHUNK, n - start)
        rng = np.random.default_rng([seed, _STAGE_PRIOR, c])
        src = rng.choice(len(data), size=m, p=data.weights)
        uu = np.interp(rng.random(m), cdf, u)
        rr = s * uu / (1.0 - uu)
        xs[start:start + m] = data.points[src] + rr[:, None] * _directions(rng, m, d)
    return Ensemble(xs, np.zeros(n), T, seed, n)


def _eval(pde, data, x, t, pool):
    """Fields over particle chunks, optionally on a thread pool."""
    chunks = [(a, min(a + CHUNK, x.shape[0])) for a in range(0, x.shape[0], CHUNK)]

    def run(span):
        a, b = span
        try:
            return fields(pde, data, x[a:b], t)
        except SingularityError as exc:
            where = dict(exc.where)
            if "point" in where:
                where["particle"] = a + int(where.pop("point"))
            where["t"] = float(t)
            raise type(exc)(exc.args[0], **where) from exc

    parts = list(pool.map(run, chunks)) if pool is not None else [run(c) for c in chunks]
    if not parts:
        return np.zeros((0, x.shape[1])), np.zeros(0)
    return (np.concatenate([p.v for p in parts]), np.concatenate([p.ratio for p in parts]))


def _resample(x, log_w, extra, rng, n_ref, min_pop, max_pop, t):
    """Split heavy walkers, roulette light ones. ``extra`` arrays follow x."""
    w = np.exp(log_w)
    copies = np.ones(w.shape[0], dtype=np.int64)
    new_lw = log_w.copy()
    heavy = w > 2.0
    if heavy.any():
        halvings = np.ceil(np.log2(w[heavy] / 2.0)).astype(np.int64)
        copies[heavy] = 2 ** halvings
        new_lw[heavy] = log_w[heavy] - halvings * math.log(2.0)
    light = w < 0.5
    if light.any():
        alive = rng.random(int(light.sum())) < w[light]
        copies[light] = alive.astype(np.int64)
        new_lw[light] = 0.0
    total = int(copies.sum())
    if total > max_pop or total < min_pop:
        raise PopulationError(
            "population left the allowed band", population=total, n_ref=n_ref,
            min_pop=min_pop, max_pop=max_pop, t=float(t))
    idx = np.repeat(np.arange(w.shape[0]), copies)
    return x[idx], new_lw[idx], [e[idx] for e in extra]


def _limits(n_ref, min_pop, max_pop):
    lo = n_ref / 4.0 if min_pop is None else min_pop
    hi = 4.0 * n_ref if max_pop is None else max_pop
    return lo, hi


def branching_step(ens: Ensemble, ratio_fn, dt: float, seed: int, step: int = 0,
                   min_pop=None, max_pop=None) -> Ensemble:
    """Apply one birth/death update of length ``dt > 0`` (backward time).

    ``log_w += SIGN * ratio_fn(x, t) * dt``; then walkers heavier than 2
    are split by repeated halving and walkers lighter than 1/2 survive with
    probability equal to their weight (weight reset to 1).

    Raises
    ------
    PopulationError
        If the population leaves ``[n_ref/4, 4 n_ref]``.
    """
    if not dt > 0:
        raise DomainError("branching step needs dt > 0")
    ratio = np.asarray(ratio_fn(ens.x, ens.t), dtype=np.float64).reshape(-1)
    if ratio.shape[0] != ens.n or not np.all(np.isfinite(ratio)):
        raise DomainError("ratio_fn must return one finite value per particle")
    log_w = ens.log_w + SIGN * ratio * dt
    rng = np.random.default_rng([seed, _STAGE_BRANCH, step])
    lo, hi = _limits(ens.n_ref, min_pop, max_pop)
    x, lw, _ = _resample(ens.x, log_w, [], rng, ens.n_ref, lo, hi, ens.t)
    return Ensemble(x, lw, ens.t, ens.rng_seed, ens.n_ref)


def integrate_backward(pde: PdeSpec, data: DeltaMixture, ens: Ensemble, sched: Schedule,
                       branching: bool = True, threads: int | None = None,
                       min_pop=None, max_pop=None) -> Ensemble:
    """Carry an ensemble from ``sched.T`` down to ``sched.t_min``.

    Each step is a Heun (explicit trapezoid) update of dx/dt = v. When the
    matching has R != 0 and ``branching`` is on, the step also applies the
    birth/death update with the trapezoid average of R/p over the step.
    Before that, R/p is shifted by its weighted mean: a constant shift
    rescales every weight equally, so it only keeps the population near
    its starting size.

    Raises
    ------
    SingularityError
        With the offending particle index and time attached.
    PopulationError
        See :func:`branching_step`.
    """
    if not math.isclose(ens.t, sched.T, rel_tol=1e-12):
        raise DomainError(f"ensemble time {ens.t} differs from schedule T {sched.T}")
    times = sched.times()
    if sched.steps == 0 or ens.n == 0:
        return ens.copy()
    use_branch = branching and matching_for(pde).has_birth_death
    lo, hi = _limits(ens.n_ref, min_pop, max_pop)
    nthreads = thread_count() if threads is None else max(1, int(threads))
    pool = ThreadPoolExecutor(nthreads) if nthreads > 1 else None
    try:
        x = ens.x.copy()
        log_w = ens.log_w.copy()
        v0, q0 = _eval(pde, data, x, times[0], pool)
        for k in range(sched.steps):
            t0, t1 = times[k], times[k + 1]
            h = t1 - t0
            x_pred = x + h * v0
            v1, _ = _eval(pde, data, x_pred, t1, pool)
            x = x + 0.5 * h * (v0 + v1)
            v0, q1 = _eval(pde, data, x, t1, pool)
            if use_branch:
                q = 0.5 * (q0 + q1)
                w = np.exp(log_w - log_w.max())
                q = q - np.dot(w, q) / w.sum()
                log_w = log_w + SIGN * q * (-h)
                rng = np.random.default_rng([ens.rng_seed, _STAGE_BRANCH, k])
                x, log_w, (v0, q1) = _resample(x, log_w, [v0, q1], rng, ens.n_ref, lo, hi, t1)
            q0 = q1
    finally:
        if pool is not None:
            pool.shutdown()
    return Ensemble(x, log_w, float(times[-1]), ens.rng_seed, ens.n_ref)


def mode_fractions(pde: PdeSpec, data: DeltaMixture, ens: Ensemble) -> np.ndarray:
    """Weighted fraction of particles whose posterior mode is each source.

    Snapping is used only for this summary, never for emitted samples.
    """
    if ens.n == 0:
        return np.zeros(len(data))
    w = ens.normalized_weights()
    modes = np.empty(ens.n, dtype=np.int64)
    for a in range(0, ens.n, CHUNK):
        modes[a:a + CHUNK] = np.argmax(posteriors(pde, data, ens.x[a:a + CHUNK], ens.t), axis=1)
    return np.bincount(modes, weights=w, minlength=len(data))


def write_csv(ens: Ensemble, path, meta: dict | None = None) -> None:
    """One row per particle: ``x1..xN, weight, log_weight``.

    ``meta`` (pde label, T, t_min, steps, seed, ...) goes first as ``#``
    comment lines so the file still loads with ``numpy.loadtxt`` or
    ``pandas.read_csv(comment="#")``. Floats use 17 significant digits,
    which round-trips every double exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(ens.dim)] + ["weight", "log_weight"])
        weights = ens.weights()
        for i in range(ens.n):
            w.writerow([format(c, ".17g") for c in ens.x[i]]
                       + [format(weights[i], ".17g"), format(ens.log_w[i], ".17g")])
