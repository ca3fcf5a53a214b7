import csv
import json
import subprocess
import sys

import pytest

from gaussbec import cli, runs
from gaussbec.config import ConfigError, RunConfig, emit_config, parse_config
from gaussbec.spin import KrylovConvergenceError

SYM = {"N_a": 400, "N_b": 400, "Omega_a": 50.0, "Omega_b": 50.0, "kappa_a": 1.0, "kappa_b": 1.0, "kappa": 0.5}


def write(tmp_path, name="run.json", **fields):
    cfg = {"params": dict(SYM), **fields}
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_rows(path):
    lines = [ln for ln in open(path, newline="").read().split("\r\n") if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_stability_report(tmp_path, capsys):
    assert cli.main(["stability", "--config", write(tmp_path)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["kappa_c"] == pytest.approx(1.125)
    assert rep["kappa_e"] == pytest.approx(1.0)
    assert rep["stable"] and rep["status"] == "ok"
    assert rep["mu_1"] == pytest.approx(1.0)


def test_stability_decoupled_note(tmp_path, capsys):
    cfg = write(tmp_path, params={**SYM, "kappa": 0.0})
    assert cli.main(["stability", "--config", cfg]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["degenerate"] and rep["mu_1"] is None and "note" in rep


def test_timeseries_is_deterministic(tmp_path):
    cfg = write(tmp_path, t_max=0.2)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["timeseries", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["timeseries", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_rows(a)
    assert list(rows[0]) == list(runs.TIMESERIES_COLUMNS)
    times = [float(r["t"]) for r in rows]
    assert times == sorted(times) and times[0] == 0.0
    assert b"nan" not in a.read_bytes().lower()


def test_timeseries_zero_window(tmp_path):
    out = tmp_path / "o.csv"
    assert cli.main(["timeseries", "--config", write(tmp_path, t_max=0), "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 1 and float(rows[0]["xi"]) == 1.0
    cfg = write(tmp_path, t_max=0, initial={"kind": "thermal", "nbar_a": 0.5, "nbar_b": 0.5})
    assert cli.main(["timeseries", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(out)
    assert float(rows[0]["xi"]) == 2.0 and float(rows[0]["eof"]) == 0.0


def test_asymmetric_thermal_has_empty_eof(tmp_path):
    out = tmp_path / "o.csv"
    cfg = write(tmp_path, t_max=0.05, initial={"kind": "thermal", "nbar_a": 0.5, "nbar_b": 0.0})
    assert cli.main(["timeseries", "--config", cfg, "--out", str(out)]) == 0
    assert all(r["eof"] == "" for r in read_rows(out)[1:])


def test_both_backends_tagged(tmp_path):
    params = {"N_a": 8, "N_b": 8, "Omega_a": 50.0, "Omega_b": 50.0, "kappa_a": 50.0, "kappa_b": 50.0, "kappa": 25.0}
    out = tmp_path / "o.csv"
    cfg = write(tmp_path, params=params, t_max=0.01, dt=0.002, backend="both")
    assert cli.main(["timeseries", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(out)
    assert [r["backend"] for r in rows] == ["hpt"] * 6 + ["exact"] * 6
    assert rows[6]["f_a"] == "0" and rows[0]["f_a"] == ""


def test_json_output(tmp_path):
    out = tmp_path / "o.json"
    assert cli.main(["timeseries", "--config", write(tmp_path, t_max=0.02), "--out", str(out), "--format", "json"]) == 0
    doc = json.loads(out.read_text())
    assert doc["columns"] == list(runs.TIMESERIES_COLUMNS)
    assert doc["header"]["kappa_c"] == pytest.approx(1.125)
    assert doc["rows"][0]["f_a"] is None


def test_unstable_exit_and_no_partial_output(tmp_path):
    out = tmp_path / "o.csv"
    cfg = write(tmp_path, params={**SYM, "kappa": 1.2})
    assert cli.main(["timeseries", "--config", cfg, "--out", str(out)]) == 3
    assert list(tmp_path.iterdir()) == [tmp_path / "run.json"]


def test_existing_output_untouched_on_failure(tmp_path):
    out = tmp_path / "o.csv"
    out.write_text("previous")
    cfg = write(tmp_path, params={**SYM, "kappa": 1.2})
    assert cli.main(["timeseries", "--config", cfg, "--out", str(out)]) == 3
    assert out.read_text() == "previous"


def test_numerical_failure_exit(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise KrylovConvergenceError("did not converge", 3e-7)

    monkeypatch.setattr(runs, "exact_rows", boom)
    cfg = write(tmp_path, backend="exact", t_max=0.01)
    assert cli.main(["timeseries", "--config", cfg, "--out", str(tmp_path / "o.csv")]) == 4
    assert not (tmp_path / "o.csv").exists()


@pytest.mark.parametrize(
    "fields",
    [
        {"bogus": 1},
        {"t_max": -1},
        {"dt": 0},
        {"initial": {"kind": "thermal", "nbar_a": -0.5, "nbar_b": 0}},
        {"backend": "exact", "initial": {"kind": "thermal", "nbar_a": 0.5, "nbar_b": 0.5}},
        {"kappa_grid": []},
        {"params": {**SYM, "N_a": 0}},
        {"params": {**SYM, "extra": 1}},
    ],
)
def test_config_errors(tmp_path, fields):
    assert cli.main(["timeseries", "--config", write(tmp_path, **fields)]) == 2


def test_missing_config_and_bad_arguments(tmp_path):
    assert cli.main(["timeseries", "--config", str(tmp_path / "none.json")]) == 2
    assert cli.main(["explode", "--config", "x"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["stability", "--config", str(bad)]) == 2


def test_config_round_trip():
    cfg = parse_config(json.dumps({
        "params": SYM,
        "initial": {"kind": "thermal", "nbar_a": 0.5, "nbar_b": 0.25},
        "t_max": 2.0,
        "dt": 0.01,
        "kappa_grid": [0.1, 0.2],
        "output": {"path": "x.csv", "format": "json"},
        "jobs": 3,
    }))
    assert parse_config(emit_config(cfg)) == cfg
    assert parse_config(emit_config(RunConfig.model_validate({"params": SYM}))) == RunConfig.model_validate({"params": SYM})
    with pytest.raises(ConfigError):
        parse_config("[]")


def test_sweep_decoupled_point(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--config", write(tmp_path, kappa_grid=[0.0], t_max=0.2), "--out", str(out)]) == 0
    text = out.read_text()
    assert "# kappa_c=1.125" in text and "not the maximum of xi" in text
    row = read_rows(out)[0]
    assert float(row["min_xi"]) == pytest.approx(1.0, abs=1e-12)
    assert float(row["eof_at_min"]) == 0.0


def test_sweep_flags_unstable_points(tmp_path):
    out = tmp_path / "s.csv"
    cfg = write(tmp_path, kappa_grid=[0.5, 1.2], t_max=0.1)
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0]["stable"] == "true" and float(rows[0]["min_xi"]) < 1
    assert rows[1] == {**rows[1], "stable": "false", "min_xi": "", "eof_at_min": "", "above_kappa_e": "true"}


def test_sweep_all_unstable(tmp_path):
    assert cli.main(["sweep", "--config", write(tmp_path, kappa_grid=[1.2, -2.0])]) == 3


def test_sweep_parallel_matches_serial(tmp_path):
    cfg = write(tmp_path, kappa_grid=[0.9, 0.1, 0.5, 1.0], t_max=0.1)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["sweep", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["sweep", "--config", cfg, "--out", str(b), "--jobs", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert [float(r["kappa"]) for r in read_rows(a)] == [0.9, 0.1, 0.5, 1.0]


def test_sweep_long_time_window(tmp_path):
    out = tmp_path / "s.json"
    cfg = write(tmp_path, kappa_grid=[0.5, 1.0], sweep_window="long_time")
    assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--format", "json"]) == 0
    doc = json.loads(out.read_text())
    assert doc["header"]["window"] == "long_time" and doc["header"]["t_max"] is None
    xi = [r["min_xi"] for r in doc["rows"]]
    assert xi[0] > xi[1] and all(r["t_at_min"] is None for r in doc["rows"])


def test_console_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gaussbec.cli", "stability", "--config", write(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and "kappa_c" in proc.stdout
