"""Dispersion relations and the s-generativity classification.

Plugging ``exp(i k.x - i omega t)`` into a catalog PDE turns it into a
polynomial in omega (the symbol). A PDE is s-generative when one branch
omega(k) is purely imaginary and decays strictly faster than the k = 0
mode for every k > 0.

Branch labels are kept continuous in k by construction: quadratics use the
principal square root in the textbook formula, the cubic is ordered by
argument starting from -i. Each root is then polished by Newton steps on
the symbol, which also removes the cancellation in ``b - sqrt(b^2 + ...)``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .pde_catalog import Kind, PdeSpec, operator_coeffs, symbol, symbol_degree

__all__ = [
    "Verdict",
    "FailingInterval",
    "DispersionReport",
    "default_k_grid",
    "dispersion_branches",
    "branches_at",
    "classify",
    "write_branches_csv",
    "symbol_residual",
]

STRICT_TOL = 1e-12
_IMAG_TOL = 1e-12
_BISECT_ITERS = 200


class Verdict(str, enum.Enum):
    S_GENERATIVE = "SGenerative"
    CONDITIONAL = "ConditionallySGenerative"
    NOT_S_GENERATIVE = "NotSGenerative"


@dataclass(frozen=True)
class FailingInterval:
    """k-range where the best branch violates the criterion.

    ``hi`` is ``inf`` when the failure continues past the grid.
    """

    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = True

    def __str__(self):
        left = "[" if self.lo_closed else "("
        right = "]" if (self.hi_closed and math.isfinite(self.hi)) else ")"
        return f"{left}{self.lo:.12g}, {self.hi:.12g}{right}"

    def contains(self, k: float) -> bool:
        above = k >= self.lo if self.lo_closed else k > self.lo
        below = k <= self.hi if self.hi_closed else k < self.hi
        return above and below


@dataclass(frozen=True)
class DispersionReport:
    pde: PdeSpec
    k_grid: np.ndarray
    branches: np.ndarray          # shape (len(k_grid), n_branches), complex
    omega0: np.ndarray            # branches at k = 0
    verdict: Verdict
    witness_branch: int | None
    failing_interval: FailingInterval | None = None

    @property
    def n_branches(self) -> int:
        return self.branches.shape[1]

    def summary(self) -> str:
        lines = [
            f"pde: {self.pde.label()}",
            f"verdict: {self.verdict.value}",
            f"branches: {self.n_branches}",
            f"witness_branch: {'none' if self.witness_branch is None else self.witness_branch}",
        ]
        if self.failing_interval is not None:
            lines.append(f"failing_k_interval: {self.failing_interval}")
        lines.append(f"k_grid: {self.k_grid[0]:g} .. {self.k_grid[-1]:g} ({self.k_grid.size} points)")
        return "\n".join(lines)


def default_k_grid(k_min=1e-3, k_max=1e3, points=200) -> np.ndarray:
    return np.logspace(math.log10(k_min), math.log10(k_max), points)


def _poly(pde: PdeSpec, k):
    """Coefficients of the symbol in omega, highest degree first.

    ``k`` may be an array; constant coefficients are then broadcast.
    """
    c_tt, c_t, c_lap, c_0 = operator_coeffs(pde)
    k = np.asarray(k, dtype=np.float64)
    const = c_lap * (-k * k) + c_0
    if pde.kind is Kind.FRACTIONAL_DIFFUSION:
        const = const + k ** (2.0 * pde.beta)
    elif pde.kind is Kind.BIHARMONIC:
        const = const + k ** 4
    # c_t * (-i omega) contributes -i c_t to the linear coefficient.
    lin = -1j * c_t
    if pde.kind is Kind.THIRD_ORDER_DIFFUSION:
        # (-i omega)^3 = i omega^3
        return [1j, -c_tt, lin, const]
    if c_tt != 0:
        return [-c_tt, lin, const]
    return [lin, const]


def _dsymbol(coeffs, omega):
    d = len(coeffs) - 1
    return sum(c * (d - j) * omega ** (d - j - 1) for j, c in enumerate(coeffs[:-1]))


def _polish(pde, k, coeffs, omega, steps=3):
    for _ in range(steps):
        f = symbol(pde, omega, k)
        df = _dsymbol(coeffs, omega)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where((df != 0) & (f != 0), f / np.where(df != 0, df, 1.0), 0.0)
        step = np.where(np.isfinite(step), step, 0.0)
        omega = omega - step
    return omega


def _raw_roots(coeffs, k):
    """Roots in branch order, shape (len(k), degree)."""
    size = k.shape[0]
    if len(coeffs) == 2:
        a, b = coeffs
        return (-np.broadcast_to(b, (size,)) / a)[:, None].astype(complex)
    if len(coeffs) == 3:
        a, b, c = (np.broadcast_to(np.asarray(v, dtype=complex), (size,)) for v in coeffs)
        s = np.sqrt(b * b - 4.0 * a * c)
        return np.column_stack([(-b + s) / (2.0 * a), (-b - s) / (2.0 * a)])
    out = np.empty((size, len(coeffs) - 1), dtype=complex)
    for i in range(size):
        row = [complex(np.broadcast_to(v, (size,))[i]) for v in coeffs]
        roots = np.roots(row)
        if roots.size < out.shape[1]:
            roots = np.concatenate([roots, np.zeros(out.shape[1] - roots.size)])
        # Order by argument, starting at -i and turning counter-clockwise.
        key = np.mod(np.angle(roots) + 0.5 * np.pi + 1e-6, 2.0 * np.pi)
        out[i] = roots[np.argsort(key, kind="stable")]
    return out


def branches_at(pde: PdeSpec, k) -> np.ndarray:
    """All branches on an array of wavenumbers, shape ``(len(k), n_branches)``.

    ``k = 0`` is allowed here (it gives the reference omega(0)); roots at
    zero wavenumber are returned unpolished since they may be repeated.
    """
    k = np.atleast_1d(np.asarray(k, dtype=np.float64))
    coeffs = _poly(pde, k)
    roots = _raw_roots(coeffs, k)
    polished = _polish(pde, k[:, None], [np.asarray(c)[..., None] if np.ndim(c) else c
                                         for c in coeffs], roots)
    # Adding 0.0 turns signed zeros into plain zeros for tidy output.
    return np.where((k == 0)[:, None], roots, polished) + 0.0


def _branches(pde: PdeSpec, k: float) -> np.ndarray:
    return branches_at(pde, [k])[0]


def dispersion_branches(pde: PdeSpec, k: float) -> list[complex]:
    """All roots omega of the symbol at wavenumber k > 0, in branch order.

    >>> dispersion_branches(PdeSpec("diffusion"), 2.0)
    [-4j]
    """
    k = float(k)
    if not k > 0:
        raise DomainError("wavenumber must be positive")
    return [complex(w) for w in _branches(pde, k)]


def _bad(pde, k, branch, im0):
    """True where the branch breaks the criterion at k."""
    w = _branches(pde, k)[branch]
    strict = w.imag < im0 - STRICT_TOL * (1.0 + abs(im0))
    imag = abs(w.real) <= _IMAG_TOL * (1.0 + abs(w))
    return not (strict and imag)


def _edge(pde, branch, im0, k_good, k_bad):
    """Bisect in log k between a good and a bad wavenumber."""
    a, b = math.log(k_good), math.log(k_bad)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        if _bad(pde, math.exp(mid), branch, im0):
            b = mid
        else:
            a = mid
    return math.exp(a), math.exp(b)


def classify(pde: PdeSpec, k_grid=None) -> DispersionReport:
    """s-generativity verdict from the dispersion branches.

    For each branch, the bad set is where ``Im omega(k) < Im omega(0)``
    fails (with a ``1e-12 (1 + |omega(0)|)`` margin) or where omega has a
    real part, so the mode oscillates instead of decaying. The branch with
    the smallest bad set is the witness.

    * empty bad set: ``SGenerative``;
    * every branch fails the strict inequality at every grid k:
      ``NotSGenerative``;
    * otherwise ``ConditionallySGenerative`` with the witness's bad set,
      whose ends are refined by bisection; an end touching the grid edge
      is extended to 0 or infinity.
    """
    ks = default_k_grid() if k_grid is None else np.asarray(k_grid, dtype=np.float64)
    table = branches_at(pde, ks)
    omega0 = _branches(pde, 0.0)
    im0 = omega0.imag
    scale = STRICT_TOL * (1.0 + np.abs(omega0))
    strict = table.imag < (im0 - scale)[None, :]
    imag = np.abs(table.real) <= _IMAG_TOL * (1.0 + np.abs(table))
    bad = ~(strict & imag)

    counts = bad.sum(axis=0)
    best = int(np.argmin(counts))
    if counts[best] == 0:
        return DispersionReport(pde, ks, table, omega0, Verdict.S_GENERATIVE, best)
    if not strict.any():
        return DispersionReport(pde, ks, table, omega0, Verdict.NOT_S_GENERATIVE, None)

    # Prefer, among equally bad branches, one that passes the strict test somewhere.
    order = sorted(range(table.shape[1]), key=lambda j: (counts[j], -int(strict[:, j].sum())))
    best = order[0]
    idx = np.flatnonzero(bad[:, best])
    i0, i1 = int(idx[0]), int(idx[-1])
    if i0 == 0:
        lo, lo_closed = 0.0, False
    else:
        # The bad set starts just above the last good k.
        lo, _ = _edge(pde, best, float(im0[best]), float(ks[i0 - 1]), float(ks[i0]))
        lo_closed = False
    if i1 == ks.size - 1:
        hi, hi_closed = math.inf, False
    else:
        hi, _ = _edge(pde, best, float(im0[best]), float(ks[i1 + 1]), float(ks[i1]))
        hi_closed = True
    interval = FailingInterval(lo, hi, lo_closed, hi_closed)
    return DispersionReport(pde, ks, table, omega0, Verdict.CONDITIONAL, best, interval)


def write_branches_csv(report: DispersionReport, path) -> None:
    """One row per (k, branch): ``k, branch, re_omega, im_omega``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "branch", "re_omega", "im_omega"])
        for k, row in zip(report.k_grid, report.branches):
            for j, om in enumerate(row):
                w.writerow([f"{k:.17g}", j, f"{om.real:.17g}", f"{om.imag:.17g}"])


def symbol_residual(pde: PdeSpec, k: float, omega: complex) -> float:
    """``|symbol| / (1 + |omega|^degree)``, the branch validity measure."""
    return abs(symbol(pde, omega, k)) / (1.0 + abs(omega) ** symbol_degree(pde))
