"""Convergence study: point-potential eigenvalues versus the exact circle spectrum.

For every window the exact spectrum is computed once; for every ``N`` in the
sweep the circulant solver finds the approximate eigenvalues, each is paired
with an exact one, and ``|z_N - z*| ~ c N^(-a)`` is fitted per exact
eigenvalue.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .exactcircle import CircleMeasureProblem, exact_circle_eigenvalues
from .green import MagneticSystem, SpectralWindow, WindowError, default_windows
from .pointop import (
    DEFAULT_GRID_POINTS,
    EigenvalueRecord,
    coupling_alpha_for_circle,
    equidistant_circle_points,
    scan_gap_for_eigenvalues,
    schur_holmgren_bound,
)

__all__ = [
    "ConfigError",
    "StudyConfig",
    "MatchedEigenvalue",
    "RateFit",
    "WindowResult",
    "DiagnosticRow",
    "ConvergenceReport",
    "FIGURE_COLUMNS",
    "DIAGNOSTIC_COLUMNS",
    "run_convergence_study",
    "fit_rate",
    "emit_figure_data",
    "diagnostics",
    "write_report",
]

log = logging.getLogger(__name__)

FIGURE_COLUMNS = ("N", "eigenvalue_rank", "z_approx", "z_exact", "abs_error")
DIAGNOSTIC_COLUMNS = ("N", "z_probe", "alpha", "schur_holmgren", "margin", "hypothesis2_holds")
FIT_NOISE_FACTOR = 10.0


class ConfigError(ValueError):
    """Invalid study configuration."""


@dataclass
class StudyConfig:
    B: float = 1.0
    R: float = 2.0
    gamma: float = 1.0
    n_list: tuple[int, ...] = (20, 40, 80, 160, 320)
    windows: tuple[SpectralWindow, ...] | None = None
    tol: float | None = None
    l_range: int = 8
    output_dir: Path = Path("magkrein_out")
    grid_points: int = DEFAULT_GRID_POINTS
    quadrature_order: int = 2048
    z_probe: float | None = None
    threads: int = 1

    def __post_init__(self):
        try:
            self.system = MagneticSystem(float(self.B))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not (self.R > 0 and self.gamma > 0):
            raise ConfigError("R and gamma must be positive")
        self.n_list = tuple(int(n) for n in self.n_list)
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ConfigError("n_list must hold positive integers")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigError("n_list must be strictly increasing")
        if self.windows is None:
            self.windows = tuple(default_windows(self.system))
        self.windows = tuple(self.windows)
        if not self.windows:
            raise ConfigError("at least one window is required")
        for w in self.windows:
            try:
                w.validate(self.system)
            except WindowError as exc:
                raise ConfigError(str(exc)) from exc
        if self.tol is None:
            self.tol = 1e-8 * self.system.abs_b
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.l_range < 1:
            raise ConfigError("l_range must be >= 1")
        if self.grid_points < 16:
            raise ConfigError("grid_points must be >= 16")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        self.output_dir = Path(self.output_dir)

    @property
    def alpha(self) -> float:
        return coupling_alpha_for_circle(self.R, self.gamma)

    def probe_energy(self) -> float:
        """``z_probe`` if set, else ``-2|B|`` when a window holds it, else the first window's midpoint."""
        if self.z_probe is not None:
            return float(self.z_probe)
        candidate = -2.0 * self.system.abs_b
        if any(w.contains(candidate) for w in self.windows):
            return candidate
        w = self.windows[0]
        return 0.5 * (w.z_lo + w.z_hi)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StudyConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        data = dict(data)
        try:
            if "windows" in data and data["windows"] is not None:
                data["windows"] = tuple(_window_from_json(w) for w in data["windows"])
            if "n_list" in data:
                data["n_list"] = tuple(data["n_list"])
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "StudyConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return {
            "B": self.B,
            "R": self.R,
            "gamma": self.gamma,
            "n_list": list(self.n_list),
            "windows": [_window_to_json(w) for w in self.windows],
            "tol": self.tol,
            "l_range": self.l_range,
            "grid_points": self.grid_points,
            "quadrature_order": self.quadrature_order,
            "z_probe": self.probe_energy(),
        }


def _window_from_json(obj) -> SpectralWindow:
    if isinstance(obj, dict):
        return SpectralWindow(float(obj["z_lo"]), float(obj["z_hi"]), obj.get("delta"))
    lo, hi, *rest = obj
    return SpectralWindow(float(lo), float(hi), float(rest[0]) if rest else None)


def _window_to_json(w: SpectralWindow) -> dict[str, Any]:
    return {"z_lo": w.z_lo, "z_hi": w.z_hi, "delta": w.delta}


@dataclass
class MatchedEigenvalue:
    record: EigenvalueRecord
    z_exact: float | None
    exact_l: int | None
    matched_by: str  # "label", "nearest" or "none"

    @property
    def abs_error(self) -> float | None:
        return None if self.z_exact is None else abs(self.record.z - self.z_exact)


@dataclass
class RateFit:
    l: int
    z_exact: float
    ns: list[int]
    errors: list[float]
    c: float | None = None
    a: float | None = None
    residual: float | None = None
    note: str = ""


@dataclass
class WindowResult:
    window: SpectralWindow
    exact: list[EigenvalueRecord]
    approx: dict[int, list[MatchedEigenvalue]]
    fits: list[RateFit]


@dataclass
class DiagnosticRow:
    N: int
    z_probe: float
    alpha: float
    schur_holmgren: float
    margin: float
    hypothesis2_holds: bool


@dataclass
class ConvergenceReport:
    config: dict[str, Any]
    windows: list[WindowResult]
    diagnostics: list[DiagnosticRow]
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready form; wall-clock timings are left out so reruns compare equal."""
        return {
            "config": self.config,
            "windows": [
                {
                    "window": _window_to_json(w.window),
                    "exact": [asdict(r) for r in w.exact],
                    "approx": {
                        str(n): [
                            {
                                **asdict(m.record),
                                "z_exact": m.z_exact,
                                "exact_l": m.exact_l,
                                "matched_by": m.matched_by,
                                "abs_error": m.abs_error,
                            }
                            for m in ms
                        ]
                        for n, ms in w.approx.items()
                    },
                    "fits": [asdict(f) for f in w.fits],
                }
                for w in self.windows
            ],
            "diagnostics": [asdict(d) for d in self.diagnostics],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ConvergenceReport":
        def record(d):
            return EigenvalueRecord(
                z=d["z"],
                branch=d["branch"],
                n_points=d["n_points"],
                bracket=tuple(d["bracket"]),
                residual=d["residual"],
                angular_momentum=d.get("angular_momentum"),
            )

        windows = []
        for w in data["windows"]:
            approx = {
                int(n): [MatchedEigenvalue(record(m), m["z_exact"], m["exact_l"], m["matched_by"]) for m in ms]
                for n, ms in w["approx"].items()
            }
            windows.append(
                WindowResult(
                    _window_from_json(w["window"]),
                    [record(r) for r in w["exact"]],
                    approx,
                    [RateFit(**f) for f in w["fits"]],
                )
            )
        return cls(data["config"], windows, [DiagnosticRow(**d) for d in data["diagnostics"]])


def _match(approx: Sequence[EigenvalueRecord], exact: Sequence[EigenvalueRecord], half_gap: float) -> list[MatchedEigenvalue]:
    by_label = {r.angular_momentum: r for r in exact}
    out = []
    for rec in approx:
        partner = by_label.get(rec.angular_momentum)
        if partner is not None:
            out.append(MatchedEigenvalue(rec, partner.z, partner.angular_momentum, "label"))
            continue
        nearest = min(exact, key=lambda e: (abs(e.z - rec.z), e.branch), default=None)
        if nearest is not None and abs(nearest.z - rec.z) <= half_gap:
            out.append(MatchedEigenvalue(rec, nearest.z, nearest.angular_momentum, "nearest"))
        else:
            log.warning("N=%d: eigenvalue %.10g (mode %s) has no exact partner", rec.n_points, rec.z, rec.branch)
            out.append(MatchedEigenvalue(rec, None, None, "none"))
    return out


def fit_rate(ns: Sequence[int], errors: Sequence[float], floor: float) -> tuple[float, float, float] | None:
    """Least-squares fit of ``ln err = ln c - a ln N``; points with ``err < floor`` are dropped.

    Returns ``(c, a, rms_residual)`` or ``None`` with fewer than three usable points.
    """
    pts = [(n, e) for n, e in zip(ns, errors) if e >= floor]
    if len(pts) < 3:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(math.exp(intercept)), float(-slope), rms


def _fits_for_window(exact, approx: dict[int, list[MatchedEigenvalue]], floor: float) -> list[RateFit]:
    fits = []
    for ex in exact:
        ns, errs = [], []
        for n, matches in approx.items():
            cands = [m for m in matches if m.z_exact == ex.z]
            if not cands:
                continue
            labelled = [m for m in cands if m.matched_by == "label"]
            best = labelled[0] if labelled else min(cands, key=lambda m: m.abs_error)
            ns.append(n)
            errs.append(best.abs_error)
        fit = RateFit(ex.angular_momentum, ex.z, ns, errs)
        res = fit_rate(ns, errs, floor)
        if res is None:
            fit.note = "fewer than 3 points above the tolerance floor"
        else:
            fit.c, fit.a, fit.residual = res
        fits.append(fit)
    return fits


def diagnostics(config: StudyConfig, z_probe: float | None = None) -> list[DiagnosticRow]:
    """Schur-Holmgren bound against ``alpha`` for every ``N`` of the sweep."""
    z = config.probe_energy() if z_probe is None else float(z_probe)
    if not any(w.contains(z) for w in config.windows):
        log.warning("z_probe=%g lies outside every configured window", z)
    alpha = config.alpha
    rows = []
    for n in config.n_list:
        conf = equidistant_circle_points(config.R, n).with_alpha(alpha)
        bound = schur_holmgren_bound(conf, config.system, z)
        holds = bound < alpha
        if not holds:
            log.warning("N=%d: Schur-Holmgren bound %.6g >= alpha %.6g; invertibility not guaranteed", n, bound, alpha)
        rows.append(DiagnosticRow(n, z, alpha, bound, alpha - bound, bool(holds)))
    return rows


def run_convergence_study(config: StudyConfig, write: bool = True) -> ConvergenceReport:
    """Run the N-sweep for every window, pair and fit, and optionally write the outputs."""
    sys = config.system
    alpha = config.alpha
    prob = CircleMeasureProblem(sys, config.R, config.gamma, config.quadrature_order)
    timings: dict[str, float] = {}

    def exact_job(k):
        t0 = time.perf_counter()
        recs = exact_circle_eigenvalues(prob, config.windows[k], config.l_range, config.tol)
        timings[f"exact_w{k}"] = time.perf_counter() - t0
        return recs

    def approx_job(job):
        k, n = job
        t0 = time.perf_counter()
        conf = equidistant_circle_points(config.R, n).with_alpha(alpha)
        recs = scan_gap_for_eigenvalues(conf, sys, config.windows[k], config.grid_points, config.tol)
        timings[f"scan_w{k}_N{n}"] = time.perf_counter() - t0
        return recs

    jobs = [(k, n) for k in range(len(config.windows)) for n in config.n_list]
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        exact_all = list(pool.map(exact_job, range(len(config.windows))))
        approx_all = dict(zip(jobs, pool.map(approx_job, jobs)))

    half_gap = 0.5 * 2.0 * sys.abs_b
    floor = FIT_NOISE_FACTOR * config.tol
    windows = []
    for k, w in enumerate(config.windows):
        approx = {n: _match(approx_all[(k, n)], exact_all[k], half_gap) for n in config.n_list}
        windows.append(WindowResult(w, exact_all[k], approx, _fits_for_window(exact_all[k], approx, floor)))

    t0 = time.perf_counter()
    diag = diagnostics(config)
    timings["diagnostics"] = time.perf_counter() - t0
    report = ConvergenceReport(config.to_dict(), windows, diag, dict(sorted(timings.items())))
    if write:
        write_report(report, config.output_dir)
    return report


def emit_figure_data(report: ConvergenceReport, window_index: int) -> str:
    """CSV text with one row per approximate eigenvalue of one window."""
    if not 0 <= window_index < len(report.windows):
        raise IndexError(f"window_index {window_index} out of range")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIGURE_COLUMNS)
    for n, matches in sorted(report.windows[window_index].approx.items()):
        for rank, m in enumerate(sorted(matches, key=lambda m: (m.record.z, m.record.branch))):
            writer.writerow([n, rank, _num(m.record.z), _num(m.z_exact), _num(m.abs_error)])
    return buf.getvalue()


def diagnostics_csv(rows: Sequence[DiagnosticRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DIAGNOSTIC_COLUMNS)
    for r in rows:
        writer.writerow([r.N, _num(r.z_probe), _num(r.alpha), _num(r.schur_holmgren), _num(r.margin), int(r.hypothesis2_holds)])
    return buf.getvalue()


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: ConvergenceReport, output_dir: str | os.PathLike) -> list[Path]:
    """Write ``report.json``, ``figure_w<k>.csv``, ``diagnostics.csv`` and ``timings.json``."""
    out = Path(output_dir)
    written = []
    path = out / "report.json"
    _atomic_write(path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    written.append(path)
    for k in range(len(report.windows)):
        path = out / f"figure_w{k}.csv"
        _atomic_write(path, emit_figure_data(report, k))
        written.append(path)
    path = out / "diagnostics.csv"
    _atomic_write(path, diagnostics_csv(report.diagnostics))
    written.append(path)
    path = out / "timings.json"
    _atomic_write(path, json.dumps(report.timings, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def load_report(path: str | os.PathLike) -> ConvergenceReport:
    with open(path, encoding="utf-8") as fh:
        return ConvergenceReport.from_dict(json.load(fh))
