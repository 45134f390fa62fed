"""Scalar special functions behind the homogeneous-field Green function.

Log-gamma and digamma are thin guarded wrappers over :mod:`scipy.special`.
The Tricomi function ``U(a, 1; x)`` is evaluated here:

* ``a > 0``: integral representation
  ``Gamma(a) U(a,1;x) = int_0^inf exp(-s) s^(a-1) (x+s)^(-a) ds``,
  integrated on a logarithmic scale with composite Gauss-Legendre panels and
  a closed-form small-``s`` tail.
* ``-1 < a < 0`` and ``x <= SERIES_MAX_X``: the logarithmic power series.
* otherwise: downward three-term recurrence in ``a`` started from two
  integral-representation values.

Internally everything is computed as the product ``Gamma(a) U(a,1;x)``, which
stays finite where ``Gamma`` alone would overflow; :func:`tricomi_u_b1`
divides the factor back out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "EULER_GAMMA",
    "PoleError",
    "NonConvergenceError",
    "SpecialFunctionAccuracy",
    "ln_gamma",
    "gamma_sign",
    "digamma",
    "gamma_times_u_b1",
    "tricomi_u_b1",
]

EULER_GAMMA = float(np.euler_gamma)

# a ∈ (-1, 0): the log series loses < 1e-12 relative up to this x.
SERIES_MAX_X = 8.0

_GAMMA_POLE_RADIUS = 1e-12
_U_POLE_RADIUS = 1e-10
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


class PoleError(ValueError):
    """Argument sits on (or within the guard radius of) a pole."""


class NonConvergenceError(ArithmeticError):
    """A series or quadrature did not reach the requested accuracy."""


@dataclass(frozen=True)
class SpecialFunctionAccuracy:
    """Accuracy controls for the special-function evaluators."""

    target_rel_error: float = 1e-10
    max_series_terms: int = 500

    def __post_init__(self):
        if not 0.0 < self.target_rel_error <= 1e-4:
            raise ValueError(f"target_rel_error must lie in (0, 1e-4], got {self.target_rel_error}")
        if self.max_series_terms < 50:
            raise ValueError(f"max_series_terms must be >= 50, got {self.max_series_terms}")


DEFAULT_ACCURACY = SpecialFunctionAccuracy()


def _near_nonpositive_integer(x: float, radius: float) -> bool:
    return x <= radius and abs(x - round(x)) < radius


def _check_gamma_arg(x: float) -> None:
    if _near_nonpositive_integer(x, _GAMMA_POLE_RADIUS):
        raise PoleError(f"argument {x!r} is a pole of Gamma/digamma")


def ln_gamma(x: float) -> float:
    """Return ``ln|Gamma(x)|``; the sign of ``Gamma(x)`` is given by :func:`gamma_sign`."""
    x = float(x)
    _check_gamma_arg(x)
    return float(special.gammaln(x))


def gamma_sign(x: float) -> int:
    """Sign of ``Gamma(x)`` (+1 for ``x > 0``, alternating between poles otherwise)."""
    x = float(x)
    _check_gamma_arg(x)
    return int(special.gammasgn(x))


def digamma(x: float) -> float:
    """Digamma function ``psi(x) = d/dx ln Gamma(x)``."""
    x = float(x)
    _check_gamma_arg(x)
    return float(special.digamma(x))


def _check_u_args(a: float, x: np.ndarray) -> None:
    if _near_nonpositive_integer(a, _U_POLE_RADIUS):
        raise PoleError(f"a = {a!r} is within {_U_POLE_RADIUS} of a non-positive integer")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError("x must be finite and strictly positive")


def _gu_integral(a: float, x: np.ndarray) -> np.ndarray:
    # s = e^u.  Below s = w_cut the factor exp(-s) (1 + s/x)^(-a) is replaced by
    # its first-order expansion and integrated exactly; the dropped term is
    # O(w_cut / min(x, 1)) relative to the tail, i.e. ~1e-12.
    w_cut = 1e-6 * min(1.0, float(x.min()))
    u_lo = math.log(w_cut)
    u_hi = math.log(45.0 + 2.0 * a)
    n_panels = max(8, int(math.ceil(u_hi - u_lo)))
    edges = np.linspace(u_lo, u_hi, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    u = (mid[:, None] + half[:, None] * _GL_NODES).ravel()
    w = (half[:, None] * _GL_WEIGHTS).ravel()
    s = np.exp(u)
    log_integrand = a * u - s - a * np.log(x[:, None] + s)
    main = np.exp(log_integrand) @ w
    ratio = (w_cut / x) ** a
    tail = ratio * (1.0 / a - (1.0 + a / x) * w_cut / (a + 1.0))
    return main + tail


def _gu_series(a: float, x: np.ndarray, accuracy: SpecialFunctionAccuracy) -> np.ndarray:
    # Gamma(a) U(a,1;x) = -sum_k (a)_k x^k / (k!)^2 [ln x + psi(a+k) - 2 psi(1+k)]
    log_x = np.log(x)
    total = np.zeros_like(x)
    coef = np.ones_like(x)
    psi_ak = float(special.digamma(a))
    psi_1k = -EULER_GAMMA
    for k in range(accuracy.max_series_terms):
        term = coef * (log_x + psi_ak - 2.0 * psi_1k)
        total += term
        if k > abs(a) + 1 and np.all(np.abs(term) <= 1e-3 * accuracy.target_rel_error * np.abs(total)):
            return -total
        coef = coef * x * (a + k) / (k + 1) ** 2
        psi_ak += 1.0 / (a + k)
        psi_1k += 1.0 / (k + 1)
    raise NonConvergenceError(
        f"log series for U({a}, 1; x) did not converge in {accuracy.max_series_terms} terms"
    )


def _gu_recurrence(a: float, x: np.ndarray) -> np.ndarray:
    # V(a) = Gamma(a) U(a,1;x) obeys (a-1) V(a-1) = -(1-2a-x) V(a) - a V(a+1);
    # the downward direction is the stable one for U.
    steps = int(math.floor(-a)) + 1
    b = a + steps
    v_upper = _gu_integral(b + 1.0, x)
    v = _gu_integral(b, x)
    for i in range(steps):
        cur = b - i
        v, v_upper = -((1.0 - 2.0 * cur - x) * v + cur * v_upper) / (cur - 1.0), v
    return v


def gamma_times_u_b1(a: float, x, accuracy: SpecialFunctionAccuracy | None = None):
    """Return ``Gamma(a) * U(a, 1; x)``, vectorised over ``x``.

    This product is what the Green function needs; it has simple poles at
    ``a = 0, -1, -2, ...`` but no overflow elsewhere.

    Parameters
    ----------
    a : float
        First parameter, not within 1e-10 of a non-positive integer.
    x : float or array_like
        Strictly positive argument(s).
    accuracy : SpecialFunctionAccuracy, optional
        Series controls.

    Returns
    -------
    float or numpy.ndarray
        Same shape as ``x``.
    """
    accuracy = accuracy or DEFAULT_ACCURACY
    a = float(a)
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_flat = np.atleast_1d(x_arr).ravel()
    _check_u_args(a, x_flat)
    if a > 0.0:
        out = _gu_integral(a, x_flat)
    elif a > -1.0:
        out = np.empty_like(x_flat)
        small = x_flat <= SERIES_MAX_X
        if small.any():
            out[small] = _gu_series(a, x_flat[small], accuracy)
        if (~small).any():
            out[~small] = _gu_recurrence(a, x_flat[~small])
    else:
        out = _gu_recurrence(a, x_flat)
    if not np.all(np.isfinite(out)):
        raise NonConvergenceError(f"non-finite Gamma(a) U(a,1;x) at a={a}")
    return float(out[0]) if scalar else out.reshape(x_arr.shape)


def tricomi_u_b1(a: float, x, accuracy: SpecialFunctionAccuracy | None = None):
    """Tricomi confluent hypergeometric function ``U(a, 1; x)`` for real ``a`` and ``x > 0``.

    Examples
    --------
    >>> round(tricomi_u_b1(1.0, 1.0), 9)   # e * E1(1)
    0.596347362
    """
    gu = gamma_times_u_b1(a, x, accuracy)
    # 1/Gamma(a) in log space keeps large |a| from overflowing.
    inv_gamma = special.gammasgn(a) * math.exp(-float(special.gammaln(a)))
    return gu * inv_gamma
