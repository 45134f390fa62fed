import csv
import io
import json
import math

import pytest

from magkrein.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main
from magkrein.green import SpectralWindow
from magkrein.study import (
    DIAGNOSTIC_COLUMNS,
    FIGURE_COLUMNS,
    ConfigError,
    ConvergenceReport,
    StudyConfig,
    diagnostics,
    emit_figure_data,
    fit_rate,
    load_report,
    run_convergence_study,
)

LOW_WINDOW = SpectralWindow(-3.0, 0.999, 1e-3)


def small_config(tmp_path, **kw):
    base = dict(
        n_list=(10, 20, 40),
        windows=(LOW_WINDOW,),
        l_range=4,
        grid_points=100,
        quadrature_order=512,
        output_dir=tmp_path / "out",
    )
    base.update(kw)
    return StudyConfig(**base)


@pytest.fixture(scope="module")
def small_report(tmp_path_factory):
    cfg = small_config(tmp_path_factory.mktemp("study"))
    return cfg, run_convergence_study(cfg)


@pytest.mark.parametrize(
    "kw",
    [
        {"B": 0.0},
        {"R": -1.0},
        {"gamma": 0.0},
        {"n_list": ()},
        {"n_list": (20, 10)},
        {"n_list": (0, 10)},
        {"windows": ()},
        {"windows": (SpectralWindow(0.5, 1.2),)},
        {"tol": 0.0},
        {"l_range": 0},
        {"grid_points": 4},
        {"threads": 0},
    ],
)
def test_config_rejects_invalid_values(kw):
    with pytest.raises(ConfigError):
        StudyConfig(**kw)


def test_config_defaults():
    cfg = StudyConfig()
    assert cfg.alpha == pytest.approx(1 / (4 * math.pi))
    assert cfg.tol == 1e-8
    assert len(cfg.windows) == 3
    assert cfg.probe_energy() == -2.0
    assert StudyConfig(windows=(SpectralWindow(1.5, 2.5),)).probe_energy() == 2.0


def test_config_json_roundtrip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"gamma": 3.0, "n_list": [10, 20], "windows": [[1.001, 2.999]]}))
    cfg = StudyConfig.from_json(path)
    assert cfg.gamma == 3.0 and cfg.n_list == (10, 20) and cfg.windows[0].z_hi == 2.999
    again = StudyConfig.from_dict({k: v for k, v in cfg.to_dict().items() if k != "z_probe"})
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("text", ["[1, 2]", "{not json", '{"colour": 1}', '{"n_list": "abc"}'])
def test_config_json_errors(tmp_path, text):
    path = tmp_path / "cfg.json"
    path.write_text(text)
    with pytest.raises(ConfigError):
        StudyConfig.from_json(path)


def test_fit_rate_recovers_power_law():
    ns = [20, 40, 80, 160]
    c, a, rms = fit_rate(ns, [3.0 * n**-0.75 for n in ns], floor=1e-12)
    assert c == pytest.approx(3.0) and a == pytest.approx(0.75) and rms < 1e-12
    assert fit_rate(ns, [1e-3, 1e-4, 1e-13, 1e-14], floor=1e-10) is None


def test_report_contents(small_report):
    cfg, report = small_report
    (w,) = report.windows
    assert sorted(w.approx) == [10, 20, 40]
    assert w.exact[0].angular_momentum == 2
    for matches in w.approx.values():
        for m in matches:
            assert m.record.n_points in cfg.n_list
            assert m.matched_by in {"label", "nearest", "none"}
    # lowest exact eigenvalue: error shrinks with N and a rate is fitted
    lowest = next(f for f in w.fits if f.l == w.exact[0].angular_momentum)
    assert all(b < a for a, b in zip(lowest.errors, lowest.errors[1:]))
    assert lowest.a is not None and lowest.a > 0
    assert [d.N for d in report.diagnostics] == [10, 20, 40]


def test_outputs_on_disk(small_report):
    cfg, report = small_report
    out = cfg.output_dir
    for name in ("report.json", "figure_w0.csv", "diagnostics.csv", "timings.json"):
        assert (out / name).is_file()
    rows = list(csv.reader(io.StringIO((out / "figure_w0.csv").read_text())))
    assert tuple(rows[0]) == FIGURE_COLUMNS
    assert tuple(next(csv.reader(io.StringIO((out / "diagnostics.csv").read_text())))) == DIAGNOSTIC_COLUMNS
    loaded = load_report(out / "report.json")
    assert json.dumps(loaded.to_dict(), indent=2, sort_keys=True) + "\n" == (out / "report.json").read_text()
    assert emit_figure_data(loaded, 0) == emit_figure_data(report, 0)


def test_figure_csv_ranks_and_errors(small_report):
    _, report = small_report
    rows = list(csv.DictReader(io.StringIO(emit_figure_data(report, 0))))
    assert rows
    for n in (10, 20, 40):
        mine = [r for r in rows if int(r["N"]) == n]
        assert [int(r["eigenvalue_rank"]) for r in mine] == list(range(len(mine)))
        zs = [float(r["z_approx"]) for r in mine]
        assert zs == sorted(zs)
        for r in mine:
            if r["z_exact"]:
                assert float(r["abs_error"]) == pytest.approx(abs(float(r["z_approx"]) - float(r["z_exact"])))
    with pytest.raises(IndexError):
        emit_figure_data(report, 5)


def test_figure_csv_header_only_when_empty():
    report = ConvergenceReport({}, [], [])
    report.windows.append(
        type("W", (), {"approx": {}})()  # minimal stand-in with no eigenvalues
    )
    assert emit_figure_data(report, 0) == ",".join(FIGURE_COLUMNS) + "\n"


def test_weak_coupling_gives_empty_figure(tmp_path):
    cfg = small_config(tmp_path, gamma=1e-6, n_list=(10, 20))
    report = run_convergence_study(cfg, write=False)
    assert emit_figure_data(report, 0) == ",".join(FIGURE_COLUMNS) + "\n"


def test_diagnostics_rows(tmp_path):
    rows = diagnostics(small_config(tmp_path, n_list=(1, 20, 80)))
    assert rows[0].schur_holmgren == 0.0 and rows[0].margin == pytest.approx(rows[0].alpha)
    assert rows[0].hypothesis2_holds
    for r in rows:
        assert r.margin == pytest.approx(r.alpha - r.schur_holmgren)
        assert r.hypothesis2_holds == (r.schur_holmgren < r.alpha)
    strong = diagnostics(small_config(tmp_path, gamma=50.0, n_list=(80,)))
    assert not strong[0].hypothesis2_holds


def cli_args(tmp_path, *extra):
    return [*extra, "--output", str(tmp_path / "cli"), "--n-list", "10,20,40", "--window=-3,0.999"]


def test_cli_study_and_figure(tmp_path, capsys):
    assert main(["study", *cli_args(tmp_path)]) == EXIT_OK
    assert "report.json" in capsys.readouterr().out
    before = (tmp_path / "cli" / "figure_w0.csv").read_bytes()
    (tmp_path / "cli" / "figure_w0.csv").unlink()
    assert main(["figure", "--output", str(tmp_path / "cli"), "--index", "0"]) == EXIT_OK
    assert (tmp_path / "cli" / "figure_w0.csv").read_bytes() == before
    assert main(["figure", "--output", str(tmp_path / "cli"), "--index", "3"]) == EXIT_CONFIG


def test_cli_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["--n-list", "10,20", "--window=-3,0.999"]
    assert main(["study", "--output", str(a), "--threads", "1", *common]) == EXIT_OK
    assert main(["study", "--output", str(b), "--threads", "3", *common]) == EXIT_OK
    for name in ("report.json", "figure_w0.csv", "diagnostics.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_cli_diag(tmp_path, capsys):
    assert main(["diag", *cli_args(tmp_path), "--z-probe", "-2"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == ",".join(DIAGNOSTIC_COLUMNS) and len(out) == 4


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"R": -1}')
    assert main(["study", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["study", "--output", str(tmp_path), "--n-list", "20,10"]) == EXIT_CONFIG
    # z_probe on a Landau level is a numerical failure
    assert main(["diag", *cli_args(tmp_path), "--z-probe", "1.0"]) == EXIT_NUMERICAL
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["diag", "--output", str(blocker / "sub"), "--n-list", "4", "--window=-3,0.999"]) == EXIT_IO
    assert main(["figure", "--output", str(tmp_path / "missing")]) == EXIT_IO
    with pytest.raises(SystemExit):
        main(["study", "--window", "nonsense"])


@pytest.fixture(scope="module")
def full_low_window_reports(tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    return {
        g: run_convergence_study(StudyConfig(gamma=g, windows=(LOW_WINDOW,), threads=4, output_dir=out), write=False)
        for g in (1.0, 3.0)
    }


@pytest.mark.slow
def test_lowest_eigenvalue_rate_and_coupling_dependence(full_low_window_reports):
    fits = {}
    for g, report in full_low_window_reports.items():
        w = report.windows[0]
        lowest = min(w.exact, key=lambda r: r.z)
        fits[g] = next(f for f in w.fits if f.z_exact == lowest.z)
    assert fits[1.0].l == fits[3.0].l == 2
    assert 0.3 <= fits[1.0].a <= 0.7
    assert fits[3.0].c > fits[1.0].c


@pytest.mark.slow
def test_errors_decrease_down_each_column(full_low_window_reports):
    w = full_low_window_reports[1.0].windows[0]
    for fit in w.fits:
        if len(fit.errors) < 3:
            continue
        tail = fit.errors[1:]
        assert all(b < a for a, b in zip(tail, tail[1:])), (fit.l, fit.errors)
