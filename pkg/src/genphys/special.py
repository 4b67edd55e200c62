"""Real-order Bessel functions and Gamma for the closed-form kernels.

The heavy lifting lives in the compiled core (or its NumPy twin, see
``_backend``). This module validates arguments, handles negative orders by
reflection and scalar/array shapes, and adds a few conveniences the kernels
need: exponentially scaled K, the ν and ν+1 pair in one call, and the
first positive zero of Y_ν (the Helmholtz clipping radius).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _backend
from .errors import AccuracyError, DomainError

__all__ = [
    "SpecialFnAccuracy",
    "DEFAULT_ACCURACY",
    "bessel_k",
    "bessel_k_pair",
    "bessel_y",
    "bessel_j",
    "bessel_jy",
    "gamma_fn",
    "y_first_zero",
    "backend_name",
]


@dataclass(frozen=True)
class SpecialFnAccuracy:
    """Accuracy envelope of the special functions.

    The argument range is the band over which the accuracy claim is
    tested; larger arguments are still evaluated (continued fractions do
    not lose accuracy there) but are not covered by the claim.
    """

    abs_tol: float = 1e-10
    max_order: float = 20.0
    arg_range: tuple[float, float] = (1e-8, 50.0)

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        lo, hi = self.arg_range
        if not (0 < lo < hi):
            raise ValueError("arg_range must satisfy 0 < lo < hi")
        if not self.max_order >= 0:
            raise ValueError("max_order must be non-negative")


DEFAULT_ACCURACY = SpecialFnAccuracy()


def backend_name() -> str:
    """``'cython'`` or ``'python'``."""
    return _backend.NAME


def _prepare(nu, x, acc: SpecialFnAccuracy):
    nu = float(nu)
    if not math.isfinite(nu):
        raise DomainError(f"order must be finite, got {nu}")
    if abs(nu) > acc.max_order:
        raise AccuracyError(
            f"order {nu} exceeds the supported maximum {acc.max_order}"
        )
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and not np.all(arr > 0):
        raise DomainError("Bessel argument must be strictly positive")
    if arr.size and not np.all(np.isfinite(arr)):
        raise DomainError("Bessel argument must be finite")
    return nu, arr, arr.reshape(-1)


def _shape(values, arr):
    out = values.reshape(arr.shape)
    return float(out) if arr.ndim == 0 else out


def bessel_k_pair(nu, x, scaled=False, acc=DEFAULT_ACCURACY):
    """Return ``(K_nu(x), K_{nu+1}(x))`` for ``nu >= 0``.

    With ``scaled=True`` both values are multiplied by ``exp(x)``, which
    keeps them representable for arguments where K itself underflows.
    """
    nu, arr, flat = _prepare(nu, x, acc)
    if nu < 0:
        raise DomainError("bessel_k_pair needs a non-negative order")
    k0, k1 = _backend.kv_pair(nu, flat, bool(scaled))
    return _shape(k0, arr), _shape(k1, arr)


def bessel_k(nu, x, scaled=False, acc=DEFAULT_ACCURACY):
    """Modified Bessel function of the second kind, K_nu(x).

    Parameters
    ----------
    nu : float
        Real order, ``|nu| <= acc.max_order``. ``K_{-nu} = K_nu``.
    x : float or array_like
        Strictly positive argument(s).
    scaled : bool
        Return ``exp(x) K_nu(x)`` instead.

    Raises
    ------
    DomainError
        If any ``x <= 0``.
    AccuracyError
        If the order is out of range.
    """
    nu, arr, flat = _prepare(nu, x, acc)
    k0, _ = _backend.kv_pair(abs(nu), flat, bool(scaled))
    return _shape(k0, arr)


def bessel_jy(nu, x, acc=DEFAULT_ACCURACY):
    """Return ``(J_nu, Y_nu, J'_nu, Y'_nu, Y_{nu+1})`` for ``nu >= 0``."""
    nu, arr, flat = _prepare(nu, x, acc)
    if nu < 0:
        raise DomainError("bessel_jy needs a non-negative order")
    return tuple(_shape(v, arr) for v in _backend.jy(nu, flat))


def _reflect(nu, flat):
    """J and Y at order ``nu`` (any sign) from the non-negative order."""
    a = abs(nu)
    j, y = _backend.jy(a, flat)[:2]
    if nu >= 0:
        return j, y
    # Exact zeros of sin/cos at integer and half-integer orders.
    if a == int(a):
        c, s = (1.0 if int(a) % 2 == 0 else -1.0), 0.0
    elif 2 * a == int(2 * a):
        c, s = 0.0, (1.0 if int(a - 0.5) % 2 == 0 else -1.0)
    else:
        c, s = math.cos(math.pi * a), math.sin(math.pi * a)
    return c * j - s * y, c * y + s * j


def bessel_y(nu, x, acc=DEFAULT_ACCURACY):
    """Bessel function of the second kind, Y_nu(x) (real order, x > 0).

    Negative orders use ``Y_{-nu} = cos(nu pi) Y_nu + sin(nu pi) J_nu``.
    """
    nu, arr, flat = _prepare(nu, x, acc)
    return _shape(_reflect(nu, flat)[1], arr)


def bessel_j(nu, x, acc=DEFAULT_ACCURACY):
    """Bessel function of the first kind, J_nu(x) (real order, x > 0).

    Negative orders use ``J_{-nu} = cos(nu pi) J_nu - sin(nu pi) Y_nu``.
    """
    nu, arr, flat = _prepare(nu, x, acc)
    return _shape(_reflect(nu, flat)[0], arr)


def gamma_fn(x):
    """Gamma function for ``x > 0``.

    Thin guard over :func:`math.gamma`, which is correctly rounded to a few
    ulps on the positive axis.
    """
    x = float(x)
    if not x > 0:
        raise DomainError(f"gamma_fn needs x > 0, got {x}")
    return math.gamma(x)


_ZERO_CACHE: dict[float, float] = {}


def y_first_zero(nu):
    """First positive zero of Y_nu for ``nu >= 0``.

    Located by a sign-change scan followed by Brent's method. Y_nu tends to
    minus infinity at the origin, so the first sign change is the zero.
    """
    nu = float(nu)
    if nu < 0:
        raise DomainError("y_first_zero needs nu >= 0")
    if nu in _ZERO_CACHE:
        return _ZERO_CACHE[nu]
    grid = np.linspace(1e-3, nu + 3.0 * nu ** (1.0 / 3.0) + 3.0, 2000)
    vals = bessel_y(nu, grid)
    idx = np.nonzero((vals[:-1] < 0) & (vals[1:] >= 0))[0]
    if idx.size == 0:  # pragma: no cover - the bracket always holds for nu <= 20
        raise DomainError(f"no zero of Y_{nu} found in the scan range")
    i = int(idx[0])
    root = brentq(lambda z: bessel_y(nu, z), grid[i], grid[i + 1],
                  xtol=1e-15, rtol=1e-15)
    _ZERO_CACHE[nu] = root
    return root
