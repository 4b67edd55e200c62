"""The fixed catalog of linear PDEs and how each maps to a density flow.

A PDE is described by the coefficients of its operator

    L phi = c_tt phi_tt + c_t phi_t + c_lap lap(phi) + c_0 phi  (+ fractional term)

and by a *matching*: which combination of phi gives the density p, the flux
p v and the birth/death rate R, so that dp/dt + div(p v) - R = 0 is the PDE
itself. Every other module consumes these two descriptions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields

from .errors import ConfigError, UnsupportedKindError

__all__ = [
    "Kind",
    "PdeSpec",
    "FieldMatching",
    "matching_for",
    "operator_coeffs",
    "symbol",
    "symbol_degree",
    "CLOSED_FORM_KINDS",
    "DISPERSION_ONLY_KINDS",
]


class Kind(str, enum.Enum):
    """PDE identities. Values are the names used in JSON configs."""

    DIFFUSION = "diffusion"
    POISSON = "poisson"
    IDEAL_WAVE = "ideal_wave"
    DISSIPATIVE_WAVE = "dissipative_wave"
    HELMHOLTZ = "helmholtz"
    SCREENED_POISSON = "screened_poisson"
    SCHROEDINGER = "schroedinger"
    MIXED_DIFFUSION_POISSON = "mixed_diffusion_poisson"
    FRACTIONAL_DIFFUSION = "fractional_diffusion"
    THIRD_ORDER_DIFFUSION = "third_order_diffusion"
    BIHARMONIC = "biharmonic"


CLOSED_FORM_KINDS = frozenset({
    Kind.DIFFUSION, Kind.POISSON, Kind.IDEAL_WAVE, Kind.DISSIPATIVE_WAVE,
    Kind.HELMHOLTZ, Kind.SCREENED_POISSON, Kind.SCHROEDINGER,
})
DISPERSION_ONLY_KINDS = frozenset({
    Kind.MIXED_DIFFUSION_POISSON, Kind.FRACTIONAL_DIFFUSION,
    Kind.THIRD_ORDER_DIFFUSION, Kind.BIHARMONIC,
})

# Parameters each kind requires; anything else must stay unset.
_PARAMS = {
    Kind.DISSIPATIVE_WAVE: ("eps",),
    Kind.HELMHOLTZ: ("k0",),
    Kind.SCREENED_POISSON: ("m",),
    Kind.MIXED_DIFFUSION_POISSON: ("a", "b"),
    Kind.FRACTIONAL_DIFFUSION: ("beta",),
}

_ALIASES = {
    "dim": "dim_n", "n": "dim_n", "N": "dim_n",
    "epsilon": "eps", "k_0": "k0",
}


@dataclass(frozen=True)
class PdeSpec:
    """A PDE identity plus its parameters and spatial dimension.

    Parameters are positive where they appear; the one exception is the
    mixed diffusion-Poisson ``b``, which may be 0 so the pure-Poisson end
    of the interpolation is reachable.
    """

    kind: Kind
    dim_n: int = 1
    eps: float | None = None
    k0: float | None = None
    m: float | None = None
    a: float | None = None
    b: float | None = None
    beta: float | None = None

    def __post_init__(self):
        try:
            kind = Kind(self.kind)
        except ValueError:
            raise ConfigError(f"unknown PDE kind {self.kind!r}", key="kind") from None
        object.__setattr__(self, "kind", kind)
        if isinstance(self.dim_n, bool) or int(self.dim_n) != self.dim_n or self.dim_n < 1:
            raise ConfigError(f"dimension must be a positive integer, got {self.dim_n!r}",
                              key="dim")
        object.__setattr__(self, "dim_n", int(self.dim_n))
        wanted = _PARAMS.get(kind, ())
        for name in ("eps", "k0", "m", "a", "b", "beta"):
            value = getattr(self, name)
            if name not in wanted:
                if value is not None:
                    raise ConfigError(f"parameter not used by {kind.value}", key=name)
                continue
            if value is None:
                raise ConfigError(f"{kind.value} needs parameter {name}", key=name)
            value = float(value)
            if not math.isfinite(value):
                raise ConfigError("parameter must be finite", key=name)
            floor_ok = value >= 0 if (kind is Kind.MIXED_DIFFUSION_POISSON and name == "b") else value > 0
            if not floor_ok:
                raise ConfigError(f"parameter must be positive, got {value}", key=name)
            object.__setattr__(self, name, value)

    @classmethod
    def from_dict(cls, data: dict) -> "PdeSpec":
        """Build from a config mapping such as ``{"kind": "helmholtz", "k0": 0.5, "dim": 2}``.

        Unknown keys raise :class:`ConfigError` naming the key.
        """
        if not isinstance(data, dict):
            raise ConfigError("pde section must be an object", key="pde")
        allowed = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = _ALIASES.get(key, key)
            if name not in allowed:
                raise ConfigError("unknown key", key=f"pde.{key}")
            kwargs[name] = value
        if "kind" not in kwargs:
            raise ConfigError("missing PDE kind", key="pde.kind")
        return cls(**kwargs)

    def params(self) -> dict:
        """Set parameters only, e.g. ``{"m": 1.0}``."""
        return {k: getattr(self, k) for k in _PARAMS.get(self.kind, ())}

    def label(self) -> str:
        extra = ",".join(f"{k}={v:g}" for k, v in self.params().items())
        return f"{self.kind.value}(N={self.dim_n}{',' + extra if extra else ''})"

    def with_dim(self, dim_n: int) -> "PdeSpec":
        return PdeSpec(self.kind, dim_n, self.eps, self.k0, self.m, self.a, self.b, self.beta)


@dataclass(frozen=True)
class FieldMatching:
    """How (p, v, R) follow from phi.

    For real fields: ``p = p_t * phi_t + p_0 * phi``, ``p v = flux * grad(phi)``
    and ``R = r_0 * phi``. For the Schroedinger row ``modulus`` is set and
    ``p = |phi|^2``, ``p v = 2 Im(conj(phi) grad(phi))``.
    """

    p_t: float = 0.0
    p_0: float = 0.0
    flux: float = 0.0
    r_0: float = 0.0
    modulus: bool = False
    notes: str = field(default="", compare=False)

    @property
    def has_birth_death(self) -> bool:
        return self.r_0 != 0.0

    @staticmethod
    def _lin(ct, c0, t_sym="phi_t", z_sym="phi"):
        parts = []
        for c, s in ((ct, t_sym), (c0, z_sym)):
            if c == 0:
                continue
            mag = abs(c)
            term = s if mag == 1 else f"{mag:g}*{s}"
            parts.append(("-" if c < 0 else "+") + " " + term)
        if not parts:
            return "0"
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else "-" + text[2:]

    @property
    def p_rule(self) -> str:
        if self.modulus:
            return "|phi|^2"
        return self._lin(self.p_t, self.p_0)

    @property
    def v_rule(self) -> str:
        if self.modulus:
            return "2 Im grad(log phi)"
        if self.p_t == 0 and self.p_0 == 1 and self.flux == -1:
            return "-grad(log phi)"
        # v = flux*grad(phi)/p; fold the sign into the denominator.
        den = self._lin(self.flux * self.p_t, self.flux * self.p_0)
        return f"grad(phi)/({den})"

    @property
    def r_rule(self) -> str:
        if self.r_0 == 0:
            return "0"
        return self._lin(0.0, self.r_0)


def matching_for(pde: PdeSpec) -> FieldMatching:
    """The (p, v, R) recipe for a PDE.

    Raises
    ------
    UnsupportedKindError
        For the dispersion-only kinds (fractional, third-order, biharmonic).
    """
    k = pde.kind
    if k is Kind.DIFFUSION:
        return FieldMatching(p_0=1.0, flux=-1.0)
    if k is Kind.POISSON:
        return FieldMatching(p_t=-1.0, flux=-1.0)
    if k is Kind.IDEAL_WAVE:
        return FieldMatching(p_t=-1.0, flux=1.0)
    if k is Kind.DISSIPATIVE_WAVE:
        return FieldMatching(p_t=-1.0, p_0=-2.0 * pde.eps, flux=1.0)
    if k is Kind.HELMHOLTZ:
        return FieldMatching(p_t=-1.0, flux=-1.0, r_0=pde.k0 ** 2)
    if k is Kind.SCREENED_POISSON:
        return FieldMatching(p_t=-1.0, flux=-1.0, r_0=-pde.m ** 2)
    if k is Kind.SCHROEDINGER:
        return FieldMatching(modulus=True)
    if k is Kind.MIXED_DIFFUSION_POISSON:
        return FieldMatching(p_t=-pde.a, p_0=pde.b, flux=-1.0)
    raise UnsupportedKindError(
        f"{k.value} has a dispersion relation but no density-flow matching"
    )


def operator_coeffs(pde: PdeSpec):
    """``(c_tt, c_t, c_lap, c_0)`` of the operator; complex for Schroedinger.

    The fractional and biharmonic spatial terms are not second order and are
    handled by :func:`symbol` only.
    """
    k = pde.kind
    table = {
        Kind.DIFFUSION: (0.0, 1.0, -1.0, 0.0),
        Kind.POISSON: (1.0, 0.0, 1.0, 0.0),
        Kind.IDEAL_WAVE: (1.0, 0.0, -1.0, 0.0),
        Kind.SCHROEDINGER: (0.0, 1j, 1.0, 0.0),
        Kind.THIRD_ORDER_DIFFUSION: (0.0, 0.0, -1.0, 0.0),
    }
    if k in table:
        return table[k]
    if k is Kind.DISSIPATIVE_WAVE:
        return (1.0, 2.0 * pde.eps, -1.0, 0.0)
    if k is Kind.HELMHOLTZ:
        return (1.0, 0.0, 1.0, pde.k0 ** 2)
    if k is Kind.SCREENED_POISSON:
        return (1.0, 0.0, 1.0, -pde.m ** 2)
    if k is Kind.MIXED_DIFFUSION_POISSON:
        return (pde.a, -pde.b, 1.0, 0.0)
    if k in (Kind.FRACTIONAL_DIFFUSION, Kind.BIHARMONIC):
        return (0.0, 1.0, 0.0, 0.0)
    raise UnsupportedKindError(k.value)  # pragma: no cover


def symbol(pde: PdeSpec, omega, k):
    """Characteristic symbol: the PDE applied to exp(i k.x - i omega t), divided out.

    A root in omega of this expression is a branch of the dispersion relation.
    """
    c_tt, c_t, c_lap, c_0 = operator_coeffs(pde)
    val = c_tt * (-omega * omega) + c_t * (-1j * omega) + c_lap * (-k * k) + c_0
    if pde.kind is Kind.THIRD_ORDER_DIFFUSION:
        val = val + (-1j * omega) ** 3
    elif pde.kind is Kind.FRACTIONAL_DIFFUSION:
        val = val + k ** (2.0 * pde.beta)
    elif pde.kind is Kind.BIHARMONIC:
        val = val + k ** 4
    return val


def symbol_degree(pde: PdeSpec) -> int:
    """Polynomial degree of the symbol in omega."""
    if pde.kind is Kind.THIRD_ORDER_DIFFUSION:
        return 3
    c_tt, c_t, _, _ = operator_coeffs(pde)
    return 2 if c_tt != 0 else 1
