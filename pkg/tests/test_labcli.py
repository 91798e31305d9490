import csv
import json
import math

import numpy as np
import pytest

from limitperiodic.labcli import emit_plot, run, validate_config, verify_manifest
from limitperiodic.labcli.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from limitperiodic.labcli.config import KINDS, OUT_ENV, apply_overrides

MINIMAL = "[run]\nkind = bands\n"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_minimal_config_parses():
    cfg, errors = validate_config(MINIMAL)
    assert errors == []
    assert cfg.kind == "bands" and cfg.members == ((0.0,),)


def test_zero_step_is_one_named_violation():
    cfg, errors = validate_config(MINIMAL + "[grid]\nstep = 0\n")
    assert cfg is None
    assert len(errors) == 1 and errors[0].startswith("grid.step")


def test_unknown_kind_lists_allowed_kinds():
    _, errors = validate_config("[run]\nkind = spectra\n")
    assert len(errors) == 1
    assert all(k in errors[0] for k in KINDS)


def test_violations_are_exhaustive():
    text = "[run]\nkind = iterate\n[grid]\nstep = -1\nlambdas = 0\n[iterate]\ndepth = 0\nbogus = 1\n"
    cfg, errors = validate_config(text)
    assert cfg is None
    fields = {e.split(":")[0] for e in errors}
    assert {"grid.step", "grid.lambdas", "iterate.depth", "iterate.bogus"} <= fields


def test_syntax_error_is_returned_not_raised():
    cfg, errors = validate_config("kind = bands\n")
    assert cfg is None and errors[0].startswith("syntax")


def test_settings_section_is_checked():
    cfg, errors = validate_config(MINIMAL + "[settings]\nr_min = 6\nenergy_step = 0.002\n")
    assert cfg.settings == {"r_min": 6, "energy_step": 0.002}
    _, errors = validate_config(MINIMAL + "[settings]\nwhatever = 1\n")
    assert errors == ["settings.whatever: unknown setting"]


def test_overrides_rewrite_config():
    text = apply_overrides(MINIMAL, ["grid.step=0.5", "potential.members=1,2"])
    cfg, errors = validate_config(text)
    assert not errors and cfg.step == 0.5 and cfg.members == ((1.0, 2.0),)
    with pytest.raises(ValueError):
        apply_overrides(MINIMAL, ["nodot=1"])


def test_potential_file(tmp_path):
    (tmp_path / "v.txt").write_text("2\n1.0 -1.0\n")
    cfg, errors = validate_config(MINIMAL + "[potential]\nfile = v.txt\n", base_dir=str(tmp_path))
    assert not errors and cfg.members == ((1.0, -1.0),)


def test_bands_run_on_free_potential(tmp_path):
    cfg, _ = validate_config(MINIMAL)
    man = run(cfg, tmp_path)
    assert man.passed
    rows = read_csv(tmp_path / "bands.csv")
    assert len(rows) == 1
    assert float(rows[0]["lo"]) == pytest.approx(-2) and float(rows[0]["hi"]) == pytest.approx(2)
    assert verify_manifest(tmp_path) == []


def test_lyapunov_curve_free(tmp_path):
    cfg, _ = validate_config("[run]\nkind = lyapunov-curve\n[grid]\ne_min=-4\ne_max=4\nstep=0.01\n")
    run(cfg, tmp_path)
    rows = read_csv(tmp_path / "lyapunov.csv")
    assert len(rows) == 801
    E = np.array([float(r["E"]) for r in rows])
    L = np.array([float(r["lyapunov"]) for r in rows])
    a = np.maximum(np.abs(E), 2)
    assert np.max(np.abs(L - np.log((a + np.sqrt(a * a - 4)) / 2))) < 1e-6
    plot = read_csv(tmp_path / "lyapunov_plot.csv")
    flat = [float(r["y"]) for r in plot if abs(float(r["x"])) <= 2]
    assert max(flat) == 0.0
    assert (tmp_path / "lyapunov_plot.svg").read_text().count("<polyline") == 1


def test_manifest_detects_tampering(tmp_path):
    cfg, _ = validate_config(MINIMAL)
    run(cfg, tmp_path)
    (tmp_path / "bands.csv").write_text("changed\n")
    assert verify_manifest(tmp_path) == ["bands.csv"]


def test_emit_plot_single_series(tmp_path):
    svg, sib = emit_plot({"s": ([0.0, 1.0], [1.0, 2.0])}, tmp_path / "p.svg", "x", "y")
    text = svg.read_text()
    assert text.count("<polyline") == 1
    assert sib.name == "p.csv"
    assert read_csv(sib) == [{"series": "s", "x": "0.0", "y": "1.0"}, {"series": "s", "x": "1.0", "y": "2.0"}]
    with pytest.raises(ValueError):
        emit_plot({}, tmp_path / "q.svg")
    with pytest.raises(OSError) as info:
        emit_plot({"s": ([0.0], [1.0])}, tmp_path / "missing" / "q.svg")
    assert "missing" in str(info.value)


def test_emit_plot_is_deterministic(tmp_path):
    series = {"a": ([0, 1, 2], [3, 1, 2]), "b": ([0, 2], [0, 0])}
    p1, _ = emit_plot(series, tmp_path / "a.svg")
    p2, _ = emit_plot(series, tmp_path / "b.svg")
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().count("<polyline") == 2


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(MINIMAL)
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "envout"))
    assert main(["bands", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "envout" / "manifest.json").exists()
    assert main(["bands", "--config", str(cfg), "--override", "grid.step=0"]) == EXIT_CONFIG
    assert "grid.step" in capsys.readouterr().err
    assert main(["bands", "--config", str(tmp_path / "nope.ini")]) == EXIT_CONFIG
    # a ball too small for any start family: certificate failure, manifest still written
    out = tmp_path / "fail"
    code = main(["start", "--out", str(out), "--override", "start.radius=1e-6", "--override", "start.levels=1"])
    assert code == EXIT_FAIL
    man = json.loads((out / "manifest.json").read_text())
    assert man["passed"] is False


def test_cli_threads_do_not_change_outputs(tmp_path):
    args = ["meas-bounds", "--override", "potential.members=1,-1,0.5,0;2,0,-2,1", "--override", "grid.lambdas=0.5 1 3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "3"]) == EXIT_OK
    assert (tmp_path / "a" / "meas_bounds.csv").read_bytes() == (tmp_path / "b" / "meas_bounds.csv").read_bytes()


def test_numerical_errors_become_manifest_entries(tmp_path):
    # level 5 has period 32, which needs r = 8, not 4
    cfg, errors = validate_config(
        "[run]\nkind = induction\n[potential]\nmembers = 3,-1; -2.5,0.5\n[induction]\nr = 4\nlevel = 5\n"
    )
    assert not errors
    man = run(cfg, tmp_path)
    assert not man.passed
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["errors"][0]["type"] == "ParameterError"
    assert data["files"] == []


def test_induction_run(tmp_path):
    cfg, errors = validate_config(
        "[run]\nkind = induction\n[potential]\nmembers = 3,-1; -2.5,0.5\n[induction]\nr = 4\n"
    )
    assert not errors
    man = run(cfg, tmp_path)
    assert man.passed
    rows = read_csv(tmp_path / "census_lambda1.csv")
    assert len(rows) == 16
    assert math.isfinite(float(rows[0]["angle_1"]))
