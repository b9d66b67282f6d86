import json

import pytest

from apslog import cli
from apslog.suites import REPRO_CONFIG


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_predict_log_start(capsys):
    code, out, _ = run(capsys, "predict", "G[0,-1,-2]", "--n", "2")
    assert code == 0
    assert json.loads(out)["template"]["log_start"] == -3


def test_predict_psdo_grade(capsys):
    code, out, _ = run(capsys, "predict", "T[0,0,-1] ∘ K[0,0,-1]", "--n", "4")
    g = json.loads(out)["grade"]
    assert code == 0 and g["kind"] == "psdo_boundary" and (g["m"], g["d"], g["s"]) == (0, 0, -1)


def test_predict_grading_error(capsys):
    code, _, err = run(capsys, "predict", "T ∘ T")
    assert code == 3 and "composition table" in err


def test_predict_parse_error(capsys):
    code, _, err = run(capsys, "predict", "T[0,")
    assert code == 2 and "column 5" in err


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "predict")[0] == 2
    assert run(capsys, "verify", "nosuch")[0] == 2


def test_logs_command(tmp_path, capsys):
    f = tmp_path / "terms.json"
    f.write_text(json.dumps({"n": 3, "terms": [{"kind": "a", "l": 0, "m": 0, "j": 2}]}))
    code, out, _ = run(capsys, "logs", str(f), "--depth", "2")
    rep = json.loads(out)
    assert code == 0 and rep["powers"] == [] and rep["entries"]
    f.write_text("[{\"kind\": \"q\", \"l\": 0, \"j\": 0}]")
    assert run(capsys, "logs", str(f), "--n", "2")[0] == 2


def test_zeta_eta_commands(tmp_path, capsys):
    f = tmp_path / "circle.json"
    f.write_text(json.dumps({"kind": "circle", "params": {"alpha": 0.0, "N": 10}}))
    code, out, _ = run(capsys, "zeta", str(f), "--s", "1")
    assert code == 0 and json.loads(out)["value"][0] == pytest.approx(3.289868133696453)
    code, out, _ = run(capsys, "eta", str(f), "--s", "1/2")
    assert code == 0 and json.loads(out)["value"] == [0.0, 0.0]
    assert run(capsys, "zeta", str(tmp_path / "missing.json"), "--s", "1")[0] == 2


@pytest.fixture
def repro_cfg(tmp_path):
    f = tmp_path / "model.json"
    f.write_text(json.dumps(REPRO_CONFIG))
    return f


def test_expand_writes_csv_manifest_plot(repro_cfg, tmp_path, capsys):
    out = tmp_path / "run"
    code, stdout, _ = run(capsys, "expand", str(repro_cfg), "--deterministic", "--out", str(out), "--plot")
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    digest = cli.manifest_digest(manifest)
    lines = (out / "expansion.csv").read_text().splitlines()
    assert lines[0] == f"# manifest: {digest}"
    assert lines[1] == "exponent,has_log,coefficient,sigma,locality,zero_at_tau"
    assert manifest["outputs"] == ["expansion.csv", "expansion.png"]
    assert (out / "expansion.png").stat().st_size > 1000
    # n = 1: every log row is predicted zero and fitted zero
    logs = [ln.split(",") for ln in lines[2:] if ln.split(",")[1] == "1"]
    assert logs and all(row[4] == "zero" and row[5] == "1" for row in logs)
    assert json.loads(stdout)["max_relative_log"] < 1e-6


def test_expand_defaults_materialised(repro_cfg, tmp_path, capsys):
    out = tmp_path / "run"
    run(capsys, "expand", str(repro_cfg), "--out", str(out), "--samples", "50")
    resolved = json.loads((out / "manifest.json").read_text())["resolved"]
    assert set(cli.RUN_DEFAULTS) <= set(resolved)
    assert resolved["samples"] == 50 and resolved["seed"] == REPRO_CONFIG["run"]["seed"]


def test_expand_bad_window_exits_4(repro_cfg, tmp_path, capsys):
    code, _, err = run(capsys, "expand", str(repro_cfg), "--window", "1e4", "1.0001e4", "--out", str(tmp_path / "x"))
    assert code == 4 and "condition" in err
    code, _, err = run(capsys, "expand", str(repro_cfg), "--window", "10", "1", "--out", str(tmp_path / "x"))
    assert code == 4


def test_expand_bad_inputs_exit_2(repro_cfg, tmp_path, capsys):
    out = str(tmp_path / "x")
    assert run(capsys, "expand", str(repro_cfg), "--perturb", "0:zz", "--out", out)[0] == 2
    assert run(capsys, "expand", str(repro_cfg), "--F", "zz", "--out", out)[0] == 2
    assert run(capsys, "expand", str(repro_cfg), "--samples", "10", "--out", out)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**REPRO_CONFIG, "run": {"nonsense": 1}}))
    assert run(capsys, "expand", str(bad), "--out", out)[0] == 2


def test_parallel_samples_match_sequential(repro_cfg, tmp_path, capsys):
    run(capsys, "expand", str(repro_cfg), "--deterministic", "--out", str(tmp_path / "a"))
    run(capsys, "expand", str(repro_cfg), "--jobs", "2", "--out", str(tmp_path / "b"))
    a = (tmp_path / "a" / "expansion.csv").read_text().splitlines()[1:]
    b = (tmp_path / "b" / "expansion.csv").read_text().splitlines()[1:]
    assert a == b


def test_verify_fast_suite(capsys):
    code, out, _ = run(capsys, "verify", "grading")
    assert code == 0 and json.loads(out)["passed"]
