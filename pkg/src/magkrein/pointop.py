"""Point-potential operator: Krein matrix assembly and eigenvalue search.

An eigenvalue ``z`` of the point-potential Hamiltonian is a real energy where
the Hermitian matrix

    Lambda[y, y]  = |Y| alpha - xi(z)
    Lambda[y, y'] = -G0(y, y'; z)          (y != y')

is singular.  Eigenvalues are located as zero crossings of the eigenvalue
branches of ``Lambda(z)``.  For sites equidistant on a circle ``Lambda`` is
circulant and its branches are labelled by the discrete Fourier mode ``k``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .green import MagneticSystem, PlanePoint, SpectralWindow, green0_arrays, xi_homogeneous

__all__ = [
    "CircleMeta",
    "PointConfiguration",
    "KreinMatrix",
    "EigenvalueRecord",
    "SymmetryError",
    "CoarseGridWarning",
    "equidistant_circle_points",
    "coupling_alpha_for_circle",
    "assemble_lambda",
    "circulant_eigenvalues",
    "branch_values",
    "scan_gap_for_eigenvalues",
    "schur_holmgren_bound",
    "mode_to_angular_momentum",
]

log = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 400
MIN_SITE_SEPARATION = 1e-9
DENSE_BRANCH = -1


class SymmetryError(ValueError):
    """A row handed to the circulant solver is not Hermitian-circulant."""


class CoarseGridWarning(UserWarning):
    """A branch seems to touch zero between grid points without a sign change."""


@dataclass(frozen=True)
class CircleMeta:
    radius: float
    equidistant: bool = True


@dataclass(frozen=True, eq=False)
class PointConfiguration:
    """Potential sites plus the normalised coupling ``alpha``.

    Each site carries the point coupling ``|Y| * alpha``.
    """

    sites: np.ndarray
    alpha: float | None = None
    circle: CircleMeta | None = None

    def __post_init__(self):
        sites = np.array(self.sites, dtype=float).reshape(-1, 2)
        if len(sites) < 1:
            raise ValueError("need at least one site")
        if not np.all(np.isfinite(sites)):
            raise ValueError("site coordinates must be finite")
        if len(sites) > 1:
            d = np.hypot(*(sites[:, None, :] - sites[None, :, :]).transpose(2, 0, 1))
            d[np.diag_indices_from(d)] = np.inf
            if d.min() <= MIN_SITE_SEPARATION:
                raise ValueError("sites must be pairwise distinct")
        if self.alpha is not None and not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        sites.setflags(write=False)
        object.__setattr__(self, "sites", sites)

    @classmethod
    def from_points(cls, points: Sequence[PlanePoint], alpha: float | None = None) -> "PointConfiguration":
        return cls(np.array([[p.x1, p.x2] for p in points]), alpha)

    @property
    def n_points(self) -> int:
        return len(self.sites)

    @property
    def is_equidistant_circle(self) -> bool:
        return self.circle is not None and self.circle.equidistant

    def points(self) -> list[PlanePoint]:
        return [PlanePoint(float(a), float(b)) for a, b in self.sites]

    def with_alpha(self, alpha: float) -> "PointConfiguration":
        return replace(self, alpha=alpha)

    def _require_alpha(self) -> float:
        if self.alpha is None:
            raise ValueError("configuration has no coupling alpha; use with_alpha()")
        return self.alpha


@dataclass(frozen=True, eq=False)
class KreinMatrix:
    z: float
    entries: np.ndarray
    is_circulant: bool = False
    first_row: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Branch values: Fourier-ordered when circulant, ascending otherwise."""
        if self.is_circulant:
            return circulant_eigenvalues(self.first_row)
        return np.linalg.eigvalsh(self.entries)


@dataclass(frozen=True)
class EigenvalueRecord:
    """One located eigenvalue.

    ``branch`` is the circulant mode ``k``, the angular momentum ``l`` for
    exact-circle records, or ``-1`` for dense-path results.
    """

    z: float
    branch: int
    n_points: int
    bracket: tuple[float, float]
    residual: float
    angular_momentum: int | None = field(default=None)


def equidistant_circle_points(R: float, N: int) -> PointConfiguration:
    """``N`` sites at angles ``2 pi j / N`` on the radius-``R`` circle about the origin."""
    if not R > 0.0:
        raise ValueError("radius must be positive")
    if N < 1:
        raise ValueError("need N >= 1")
    theta = 2.0 * np.pi * np.arange(N) / N
    sites = np.column_stack([R * np.cos(theta), R * np.sin(theta)])
    return PointConfiguration(sites, None, CircleMeta(float(R), True))


def coupling_alpha_for_circle(R: float, gamma: float, N: int | None = None) -> float:
    """Normalised coupling ``1 / (2 pi R gamma)`` for a circle of strength ``gamma``.

    ``N`` is accepted for symmetry with the per-site value ``N * alpha`` but
    does not enter.
    """
    if not (R > 0.0 and gamma > 0.0):
        raise ValueError("R and gamma must be positive")
    return 1.0 / (2.0 * math.pi * R * gamma)


def mode_to_angular_momentum(k: int, n: int) -> int:
    """Map circulant mode ``k`` in ``[0, n)`` to the signed label in ``(-n/2, n/2]``."""
    return k if k <= n // 2 else k - n


def _circulant_first_row(conf: PointConfiguration, sys: MagneticSystem, z: float, delta) -> np.ndarray:
    n = conf.n_points
    alpha = conf._require_alpha()
    row = np.empty(n, dtype=complex)
    row[0] = n * alpha - xi_homogeneous(sys, z, delta=delta)
    if n > 1:
        # G0(y0, y_{n-j}) = conj G0(y0, y_j): only half the row needs the Green function.
        half = n // 2
        js = np.arange(1, half + 1)
        x0, y0 = conf.sites[0]
        g = green0_arrays(x0, y0, conf.sites[js, 0], conf.sites[js, 1], sys, z, delta=delta)
        row[1 : half + 1] = -g
        rest = np.arange(half + 1, n)
        row[rest] = np.conj(row[n - rest])
    return row


def _dense_entries(conf: PointConfiguration, sys: MagneticSystem, z: float, delta) -> np.ndarray:
    n = conf.n_points
    alpha = conf._require_alpha()
    entries = np.empty((n, n), dtype=complex)
    entries[np.diag_indices(n)] = n * alpha - xi_homogeneous(sys, z, delta=delta)
    iu, ju = np.triu_indices(n, k=1)
    if len(iu):
        s = conf.sites
        g = green0_arrays(s[iu, 0], s[iu, 1], s[ju, 0], s[ju, 1], sys, z, delta=delta)
        entries[iu, ju] = -g
        entries[ju, iu] = -np.conj(g)
    return entries


def _expand_circulant(first_row: np.ndarray) -> np.ndarray:
    n = len(first_row)
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return first_row[idx]


def assemble_lambda(
    conf: PointConfiguration,
    sys: MagneticSystem,
    z: float,
    *,
    delta: float | None = None,
    dense: bool = False,
) -> KreinMatrix:
    """Assemble the Krein matrix at real energy ``z``.

    Equidistant circle configurations take the circulant path (one Green
    function row); ``dense=True`` forces full pairwise assembly.
    """
    z = float(z)
    if conf.is_equidistant_circle and not dense:
        row = _circulant_first_row(conf, sys, z, delta)
        return KreinMatrix(z, _expand_circulant(row), True, row)
    return KreinMatrix(z, _dense_entries(conf, sys, z, delta), False, None)


def circulant_eigenvalues(first_row, hermitian: bool = True) -> np.ndarray:
    """Eigenvalues ``lambda_k = sum_j c_j exp(2 pi i j k / N)`` of a circulant matrix.

    The matrix has entries ``C[j, k] = first_row[(k - j) mod N]``; the
    eigenvector of mode ``k`` is ``exp(2 pi i j k / N)``.  With
    ``hermitian=True`` the row must satisfy ``c_j = conj(c_{N-j})`` and real
    eigenvalues are returned, ordered by ``k``.

    Raises
    ------
    SymmetryError
        Hermitian requested but the row is not Hermitian-circulant.
    """
    row = np.asarray(first_row, dtype=complex)
    n = len(row)
    scale = max(1.0, float(np.abs(row).max()))
    if hermitian:
        mirrored = np.conj(row[(-np.arange(n)) % n])
        if np.abs(row - mirrored).max() > 1e-10 * scale:
            raise SymmetryError("first row is not Hermitian-circulant")
    lam = n * np.fft.ifft(row)
    if not hermitian:
        return lam
    if np.abs(lam.imag).max() > 1e-9 * max(1.0, float(np.abs(lam).max())):
        raise SymmetryError("circulant eigenvalues have a non-negligible imaginary part")
    return lam.real.copy()


def branch_values(conf: PointConfiguration, sys: MagneticSystem, z: float, *, delta=None, dense=False) -> np.ndarray:
    """Eigenvalue branches of ``Lambda(z)``: by mode ``k`` (circulant) or ascending (dense)."""
    if conf.is_equidistant_circle and not dense:
        return circulant_eigenvalues(_circulant_first_row(conf, sys, float(z), delta))
    return np.linalg.eigvalsh(_dense_entries(conf, sys, float(z), delta))


def _bisect(f: Callable[[float], float], lo: float, hi: float, f_lo: float, tol: float) -> tuple[float, float]:
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid, mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return lo, hi


def find_branch_roots(
    evaluate: Callable[[float], np.ndarray],
    window: SpectralWindow,
    grid_points: int,
    tol: float,
    labels: Sequence[int] | None = None,
) -> list[tuple[float, int, tuple[float, float], float]]:
    """Grid scan + bisection on every column of ``evaluate(z)``.

    Returns ``(z, column, bracket, |value|)`` tuples sorted by ``(z, column)``.
    Shared by the point-potential and exact-circle solvers.
    """
    zs = np.linspace(window.z_lo, window.z_hi, grid_points)
    table = np.array([evaluate(z) for z in zs])
    signs = np.sign(table)
    found = []
    for col in range(table.shape[1]):
        s = signs[:, col]
        f = table[:, col]
        _warn_if_touching(f, s, col, zs)
        for i in np.nonzero(s == 0.0)[0]:
            found.append((float(zs[i]), col, (float(zs[i]), float(zs[i])), 0.0))
        for i in np.nonzero(s[:-1] * s[1:] < 0.0)[0]:
            lo, hi = _bisect(lambda z: evaluate(z)[col], float(zs[i]), float(zs[i + 1]), float(f[i]), tol)
            z_root = 0.5 * (lo + hi)
            found.append((z_root, col, (lo, hi), float(abs(evaluate(z_root)[col]))))
    if labels is not None:
        found = [(z, labels[c], br, r) for z, c, br, r in found]
    found.sort(key=lambda t: (t[0], t[1]))
    return found


def _warn_if_touching(f: np.ndarray, s: np.ndarray, col: int, zs: np.ndarray) -> None:
    # Two roots inside one cell leave no sign change; the symptom is an
    # interior extremum pointing toward zero that is small against the local
    # variation of the branch.
    if len(f) < 3:
        return
    inner = slice(1, -1)
    toward_zero = (np.abs(f[inner]) < np.abs(f[:-2])) & (np.abs(f[inner]) < np.abs(f[2:]))
    same_sign = (s[:-2] == s[inner]) & (s[2:] == s[inner])
    variation = np.maximum(np.abs(f[2:] - f[inner]), np.abs(f[:-2] - f[inner]))
    suspicious = toward_zero & same_sign & (np.abs(f[inner]) < variation)
    if suspicious.any():
        i = int(np.nonzero(suspicious)[0][0]) + 1
        warnings.warn(
            f"branch {col} nearly touches zero near z={zs[i]:.6g}; grid may be too coarse",
            CoarseGridWarning,
            stacklevel=3,
        )


def scan_gap_for_eigenvalues(
    conf: PointConfiguration,
    sys: MagneticSystem,
    window: SpectralWindow,
    grid_points: int = DEFAULT_GRID_POINTS,
    tol: float | None = None,
    *,
    dense: bool = False,
) -> list[EigenvalueRecord]:
    """Locate eigenvalues of the point-potential operator inside ``window``.

    Parameters
    ----------
    conf : PointConfiguration
        Sites with coupling set.
    sys : MagneticSystem
    window : SpectralWindow
        Must lie inside one spectral gap.
    grid_points : int
        Uniform grid size (>= 16).
    tol : float, optional
        Final bracket width, default ``1e-8 |B|``.
    dense : bool
        Use the dense Hermitian eigensolver even for circle configurations.

    Returns
    -------
    list of EigenvalueRecord
        Sorted by energy, ties broken by branch label.
    """
    if grid_points < 16:
        raise ValueError("grid_points must be >= 16")
    tol = 1e-8 * sys.abs_b if tol is None else tol
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    window.validate(sys)
    delta = window.margin(sys)
    n = conf.n_points
    circulant = conf.is_equidistant_circle and not dense

    def evaluate(z):
        return branch_values(conf, sys, z, delta=delta, dense=dense)

    if window.gap_index(sys) == 0:
        lowest = evaluate(window.z_lo)
        if np.any(lowest < 0.0):
            log.warning("branch already negative at z_lo=%g: eigenvalues may lie below the window", window.z_lo)

    labels = list(range(n)) if circulant else [DENSE_BRANCH] * n
    roots = find_branch_roots(evaluate, window, grid_points, tol, labels)
    return [
        EigenvalueRecord(
            z=z,
            branch=label,
            n_points=n,
            bracket=br,
            residual=res,
            angular_momentum=mode_to_angular_momentum(label, n) if circulant else None,
        )
        for z, label, br, res in roots
    ]


def schur_holmgren_bound(conf: PointConfiguration, sys: MagneticSystem, z: float, *, delta=None) -> float:
    """Row-sum bound ``max_x sum_{y != x} |G0(x, y; z)| / |Y|`` on the off-diagonal part."""
    n = conf.n_points
    if n == 1:
        return 0.0
    if conf.is_equidistant_circle:
        s = conf.sites
        g = green0_arrays(s[0, 0], s[0, 1], s[1:, 0], s[1:, 1], sys, z, delta=delta)
        return float(np.abs(g).sum()) / n
    iu, ju = np.triu_indices(n, k=1)
    s = conf.sites
    mod = np.abs(green0_arrays(s[iu, 0], s[iu, 1], s[ju, 0], s[ju, 1], sys, z, delta=delta))
    rows = np.zeros(n)
    np.add.at(rows, iu, mod)
    np.add.at(rows, ju, mod)
    return float(rows.max()) / n
