"""Free Green function of a charged particle in a homogeneous magnetic field.

Symmetric gauge ``A(x) = (-B x2 / 2, B x1 / 2)``; the operator is
``(-i grad - A)^2`` on the plane with Landau levels ``|B| (2m + 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import EULER_GAMMA, digamma, gamma_times_u_b1

__all__ = [
    "COINCIDENT_RADIUS",
    "CoincidentPointsError",
    "WindowError",
    "MagneticSystem",
    "PlanePoint",
    "SpectralWindow",
    "default_windows",
    "phase_factor",
    "green0",
    "green0_arrays",
    "xi_homogeneous",
]

COINCIDENT_RADIUS = 1e-12
DEFAULT_DELTA_FRACTION = 1e-3


class CoincidentPointsError(ValueError):
    """``green0`` was asked for the singular diagonal; use :func:`xi_homogeneous`."""


class WindowError(ValueError):
    """Spectral parameter too close to a Landau level, or a malformed window."""


@dataclass(frozen=True)
class MagneticSystem:
    """Homogeneous magnetic field of strength ``B`` (either sign, nonzero)."""

    B: float

    def __post_init__(self):
        if not math.isfinite(self.B) or self.B == 0.0:
            raise ValueError(f"field strength must be finite and nonzero, got {self.B!r}")

    @property
    def abs_b(self) -> float:
        return abs(self.B)

    def landau_level(self, m: int) -> float:
        if m < 0:
            raise ValueError("Landau index must be >= 0")
        return self.abs_b * (2 * m + 1)

    def default_delta(self) -> float:
        return DEFAULT_DELTA_FRACTION * self.abs_b

    def nearest_level_distance(self, z: float) -> float:
        """Distance from ``z`` to the closest Landau level."""
        m = max(0, round((z / self.abs_b - 1.0) / 2.0))
        return abs(z - self.landau_level(m))

    def hypergeometric_a(self, z: float) -> float:
        """First Tricomi parameter ``(|B| - z) / (2|B|)`` at energy ``z``."""
        return (self.abs_b - z) / (2.0 * self.abs_b)

    def check_energy(self, z: float, delta: float | None = None) -> None:
        delta = self.default_delta() if delta is None else delta
        if not math.isfinite(z):
            raise WindowError(f"energy must be finite, got {z!r}")
        # Relative slack so window endpoints built as level ± delta pass.
        if self.nearest_level_distance(z) < delta * (1.0 - 1e-9):
            raise WindowError(f"z = {z!r} lies within {delta:g} of a Landau level of |B| = {self.abs_b:g}")


@dataclass(frozen=True)
class PlanePoint:
    x1: float
    x2: float

    def __post_init__(self):
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise ValueError("plane coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2])


@dataclass(frozen=True)
class SpectralWindow:
    """Closed energy interval inside one spectral gap.

    ``delta=None`` means the default margin ``1e-3 |B|`` of whichever
    :class:`MagneticSystem` the window is used with.
    """

    z_lo: float
    z_hi: float
    delta: float | None = None

    def __post_init__(self):
        if not self.z_lo < self.z_hi:
            raise WindowError(f"empty window [{self.z_lo}, {self.z_hi}]")
        if self.delta is not None and not self.delta > 0.0:
            raise WindowError("window margin delta must be positive")

    def margin(self, sys: MagneticSystem) -> float:
        return sys.default_delta() if self.delta is None else self.delta

    def gap_index(self, sys: MagneticSystem) -> int:
        """Number of Landau levels below the window (0 = below the lowest level)."""
        return max(0, math.floor((self.z_lo / sys.abs_b + 1.0) / 2.0))

    def gap_width(self, sys: MagneticSystem) -> float:
        return 2.0 * sys.abs_b

    def validate(self, sys: MagneticSystem) -> None:
        """Raise :class:`WindowError` unless the window sits inside one gap with its margin."""
        delta = self.margin(sys)
        m = self.gap_index(sys)
        upper = sys.landau_level(m)
        lower = sys.landau_level(m - 1) if m > 0 else -math.inf
        slack = 1e-9 * delta
        if self.z_lo < lower + delta - slack or self.z_hi > upper - delta + slack:
            raise WindowError(
                f"window [{self.z_lo}, {self.z_hi}] is not inside a gap with margin {delta:g} "
                f"(Landau levels {lower}, {upper})"
            )

    def contains(self, z: float) -> bool:
        return self.z_lo <= z <= self.z_hi


def default_windows(sys: MagneticSystem, n_gaps: int = 3, depth: float = 3.0) -> list[SpectralWindow]:
    """Below the lowest Landau level (down to ``-depth |B|``) and the next ``n_gaps - 1`` gaps."""
    b = sys.abs_b
    delta = sys.default_delta()
    windows = [SpectralWindow(-depth * b, b - delta, delta)]
    for m in range(1, n_gaps):
        windows.append(SpectralWindow(sys.landau_level(m - 1) + delta, sys.landau_level(m) - delta, delta))
    return windows


def _phase(x1, x2, y1, y2, sys: MagneticSystem):
    cross = x1 * y2 - x2 * y1
    dist2 = (x1 - y1) ** 2 + (x2 - y2) ** 2
    return np.exp(-0.5j * sys.B * cross - 0.25 * sys.abs_b * dist2)


def phase_factor(x: PlanePoint, y: PlanePoint, sys: MagneticSystem) -> complex:
    """``exp[-(iB/2)(x1 y2 - x2 y1) - (|B|/4)|x - y|^2]``."""
    return complex(_phase(x.x1, x.x2, y.x1, y.x2, sys))


def green0_arrays(x1, x2, y1, y2, sys: MagneticSystem, z: float, *, delta: float | None = None) -> np.ndarray:
    """Vectorised Green function over broadcastable coordinate arrays.

    All pairs must be non-coincident.  ``z`` is a single real energy so the
    Tricomi evaluation is shared by every pair.
    """
    sys.check_energy(z, delta)
    x1, x2, y1, y2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, y1, y2)))
    dist2 = (x1 - y1) ** 2 + (x2 - y2) ** 2
    if np.any(dist2 < COINCIDENT_RADIUS**2):
        raise CoincidentPointsError("green0 is singular at coincident points; use xi_homogeneous")
    a = sys.hypergeometric_a(z)
    gu = gamma_times_u_b1(a, 0.5 * sys.abs_b * dist2)
    return _phase(x1, x2, y1, y2, sys) * gu / (4.0 * math.pi)


def green0(x: PlanePoint, y: PlanePoint, sys: MagneticSystem, z: float, *, delta: float | None = None) -> complex:
    """Green function ``G0(x, y; z)`` of the homogeneous-field operator.

    ``(1/4pi) Phi_B(x, y) Gamma(a) U(a, 1; |B| |x-y|^2 / 2)`` with
    ``a = (|B| - z) / (2|B|)``.

    Parameters
    ----------
    x, y : PlanePoint
        Distinct points (``|x - y| >= 1e-12``).
    sys : MagneticSystem
    z : float
        Real energy at least ``delta`` away from every Landau level.
    delta : float, optional
        Landau-level exclusion margin, default ``1e-3 |B|``.

    Raises
    ------
    CoincidentPointsError, WindowError
    """
    return complex(green0_arrays(x.x1, x.x2, y.x1, y.x2, sys, z, delta=delta))


def xi_homogeneous(sys: MagneticSystem, z: float, *, delta: float | None = None) -> float:
    """Regularised diagonal ``lim [G0(x, y; z) + ln|x - y| / 2pi]``; independent of position."""
    sys.check_energy(z, delta)
    a = sys.hypergeometric_a(z)
    return -(digamma(a) + 2.0 * EULER_GAMMA + math.log(sys.abs_b / 2.0)) / (4.0 * math.pi)
