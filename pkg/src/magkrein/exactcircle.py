"""Reference spectrum for an attractive potential spread uniformly over a circle.

For the normalised uniform measure on the circle of radius ``R`` the kernel
operator with kernel ``G0`` is a convolution in the polar angle, so its
eigenfunctions are ``exp(i l theta)`` with eigenvalues

    c_l(z) = (1/2pi) int_0^2pi K(theta) exp(i l theta) dtheta,
    K(theta) = G0(p(0), p(theta); z),   p(theta) = R (cos theta, sin theta).

``l`` is the angular momentum of the resulting bound state.  An energy ``z``
is an eigenvalue exactly when ``alpha = c_l(z)`` for some ``l``.

``K`` has a logarithmic singularity at ``theta = 0``.  The known part
``-ln(2R|sin(theta/2)|) / 2pi`` is subtracted, the bounded remainder is
integrated with the periodic trapezoidal rule, and the closed-form Fourier
coefficients of the log term are added back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .green import MagneticSystem, SpectralWindow, green0_arrays, xi_homogeneous, COINCIDENT_RADIUS, CoincidentPointsError
from .pointop import EigenvalueRecord, coupling_alpha_for_circle, find_branch_roots

__all__ = [
    "AliasingError",
    "CircleMeasureProblem",
    "ModeCoefficient",
    "circle_kernel",
    "log_kernel_coefficient",
    "subtracted_fourier_coefficients",
    "mode_coefficients",
    "fourier_mode_coefficient",
    "exact_circle_eigenvalues",
]

DEFAULT_EXACT_GRID_POINTS = 200


class AliasingError(ValueError):
    """Requested angular momentum too large for the quadrature order."""


@dataclass(frozen=True)
class CircleMeasureProblem:
    sys: MagneticSystem
    R: float
    gamma: float
    quadrature_order: int = 2048
    alpha: float = field(init=False)

    def __post_init__(self):
        if not (self.R > 0.0 and self.gamma > 0.0):
            raise ValueError("R and gamma must be positive")
        q = self.quadrature_order
        if q < 256 or q & (q - 1):
            raise ValueError(f"quadrature_order must be a power of two >= 256, got {q}")
        object.__setattr__(self, "alpha", coupling_alpha_for_circle(self.R, self.gamma))

    @property
    def max_mode(self) -> int:
        return self.quadrature_order // 8


@dataclass(frozen=True)
class ModeCoefficient:
    l: int
    z: float
    c_l: float


def _kernel_values(theta: np.ndarray, R: float, sys: MagneticSystem, z: float, delta=None) -> np.ndarray:
    # |x-y|^2 = 2R^2 (1 - cos theta), x1 y2 - x2 y1 = R^2 sin theta
    return green0_arrays(R, 0.0, R * np.cos(theta), R * np.sin(theta), sys, z, delta=delta)


def circle_kernel(theta: float, prob: CircleMeasureProblem, z: float) -> complex:
    """``G0(p(0), p(theta); z)`` for two points on the circle."""
    theta = float(theta)
    if min(theta, 2.0 * math.pi - theta) < 1e-9 or not 0.0 < theta < 2.0 * math.pi:
        raise CoincidentPointsError(f"theta = {theta!r} puts both points at the same site")
    return complex(_kernel_values(np.array(theta), prob.R, prob.sys, z))


def log_kernel_coefficient(l: int, R: float) -> float:
    """Fourier coefficient of ``-ln(2R|sin(theta/2)|) / 2pi``."""
    if l == 0:
        return -math.log(R) / (2.0 * math.pi)
    return 1.0 / (4.0 * math.pi * abs(l))


def subtracted_fourier_coefficients(
    kernel: Callable[[np.ndarray], np.ndarray],
    diagonal_limit: complex,
    R: float,
    ls: Iterable[int],
    order: int,
) -> np.ndarray:
    """Fourier coefficients ``(1/2pi) int kernel(theta) e^{i l theta}`` of a log-singular kernel.

    ``kernel`` must behave like ``-ln(2R|sin(theta/2)|)/2pi + diagonal_limit``
    near ``theta = 0``; it is called once on the open grid ``2 pi j / order``,
    ``j = 1 .. order-1``.
    """
    ls = np.asarray(list(ls), dtype=int)
    if np.any(np.abs(ls) > order // 8):
        raise AliasingError(f"|l| must be <= {order // 8} for quadrature order {order}")
    theta = 2.0 * np.pi * np.arange(1, order) / order
    smooth = np.empty(order, dtype=complex)
    smooth[0] = diagonal_limit
    smooth[1:] = kernel(theta) + np.log(2.0 * R * np.abs(np.sin(0.5 * theta))) / (2.0 * np.pi)
    # (1/Q) sum_j s_j e^{2 pi i j l / Q} = ifft(s)[l]
    trap = np.fft.ifft(smooth)[ls % order]
    return trap + np.array([log_kernel_coefficient(int(l), R) for l in ls])


def mode_coefficients(prob: CircleMeasureProblem, z: float, ls: Iterable[int], *, delta=None) -> np.ndarray:
    """Real coefficients ``c_l(z)`` for every ``l`` in ``ls`` from one kernel sweep."""
    q = prob.quadrature_order
    half = q // 2

    def kernel(theta):
        # K(2pi - theta) = conj K(theta)
        out = np.empty(len(theta), dtype=complex)
        out[:half] = _kernel_values(theta[:half], prob.R, prob.sys, z, delta)
        out[half:] = np.conj(out[: half - 1][::-1])
        return out

    coeffs = subtracted_fourier_coefficients(kernel, xi_homogeneous(prob.sys, z, delta=delta), prob.R, ls, q)
    scale = max(1.0, float(np.abs(coeffs).max()))
    if np.abs(coeffs.imag).max() > 1e-9 * scale:
        raise ArithmeticError("circle mode coefficients came out complex; kernel is not Hermitian")
    return coeffs.real


def fourier_mode_coefficient(l: int, prob: CircleMeasureProblem, z: float) -> ModeCoefficient:
    """Angular-momentum-``l`` eigenvalue of the circle kernel operator at energy ``z``."""
    if abs(l) > prob.max_mode:
        raise AliasingError(f"|l| = {abs(l)} exceeds quadrature_order/8 = {prob.max_mode}")
    return ModeCoefficient(int(l), float(z), float(mode_coefficients(prob, z, [l])[0]))


def exact_circle_eigenvalues(
    prob: CircleMeasureProblem,
    window: SpectralWindow,
    l_range: int = 8,
    tol: float | None = None,
    grid_points: int = DEFAULT_EXACT_GRID_POINTS,
) -> list[EigenvalueRecord]:
    """Roots of ``alpha - c_l(z)`` in ``window`` for ``|l| <= l_range``.

    Each ``c_l`` increases strictly with ``z`` inside a gap, so a uniform grid
    brackets every root; brackets are refined by bisection to ``tol``.
    """
    if l_range < 1:
        raise ValueError("l_range must be >= 1")
    if l_range > prob.max_mode:
        raise AliasingError(f"l_range {l_range} exceeds quadrature_order/8 = {prob.max_mode}")
    sys = prob.sys
    tol = 1e-8 * sys.abs_b if tol is None else tol
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    window.validate(sys)
    delta = window.margin(sys)
    ls = list(range(-l_range, l_range + 1))

    def evaluate(z):
        return prob.alpha - mode_coefficients(prob, z, ls, delta=delta)

    roots = find_branch_roots(evaluate, window, grid_points, tol, ls)
    return [
        EigenvalueRecord(z=z, branch=l, n_points=0, bracket=br, residual=res, angular_momentum=l)
        for z, l, br, res in roots
    ]
