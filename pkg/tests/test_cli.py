import json

import pytest

from allee_release.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_steady_states(capsys):
    code, out, _ = run(capsys, "steady-states")
    assert code == EXIT_OK
    assert json.loads(out)["Kb"] == pytest.approx(33.327, abs=1e-3)


def test_eta_several(capsys):
    code, out, _ = run(capsys, "eta", "--tau", "3", "7")
    vals = [v["eta"] for v in json.loads(out)["values"]]
    assert code == EXIT_OK and 54 < vals[0] < 66 and 270 < vals[1] < 330


def test_usage_errors(capsys):
    assert run(capsys, "nonsense")[0] == EXIT_USAGE
    assert run(capsys, "simulate", "--tau", "0")[0] == EXIT_USAGE
    assert run(capsys, "simulate", "--tau", "abc")[0] == EXIT_USAGE
    assert run(capsys)[0] == EXIT_USAGE


def test_bad_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[params]\nK7 = 1\n")
    code, _, err = run(capsys, "steady-states", "--config", str(cfg))
    assert code == EXIT_USAGE and "params.K7" in err
    assert run(capsys, "steady-states", "--config", str(tmp_path / "nope.toml"))[0] == EXIT_IO


def test_io_error(capsys):
    assert run(capsys, "eta-max", "--out", "/proc/no/such/dir")[0] == EXIT_IO


def test_simulate_writes_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--tau", "7", "--u", "300", "--horizon", "21", "--out", str(tmp_path), "--quiet")
    assert code == EXIT_OK and out == ""
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,s1,s2,tag,u_applied"
    doc = json.loads((tmp_path / "simulate.json").read_text())
    assert doc["provenance"]["dt"] == 0.01 and len(doc["provenance"]["config_hash"]) == 64


def test_config_file_and_overrides(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('dt = 0.02\n[stability_check]\ntau = 7\nu = 100\n')
    code, out, _ = run(capsys, "stability-check", "--config", str(cfg), "--u", "300")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["u"] == 300.0 and doc["verdict"] == "holds"


def test_outputs_are_deterministic(capsys, tmp_path):
    for d in ("a", "b"):
        assert run(capsys, "optimize", "--tau", "30", "--T", "70", "--n-starts", "1", "--seed", "3",
                   "--out", str(tmp_path / d), "--quiet")[0] == EXIT_OK
    for name in ("optimize.json", "trajectory.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_min_single_release(capsys):
    code, out, _ = run(capsys, "min-single-release", "--tau", "30", "--T", "70", "--u-max", "2000")
    assert code == EXIT_OK and json.loads(out)["u_min"] == pytest.approx(811.99, abs=0.05)


def test_sweep_and_reproduce_thresholds(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "--tau", "7", "14", "--u", "80", "--T", "60", "--out", str(tmp_path))
    assert code == EXIT_OK and json.loads(out)["n_records"] == 2
    assert (tmp_path / "sweep.csv").read_text().count("\n") == 3
    code, out, _ = run(capsys, "reproduce", "thresholds", "--out", str(tmp_path / "r"))
    assert code == EXIT_OK and json.loads(out)["passed"]
    assert (tmp_path / "r" / "report_thresholds.json").exists()
