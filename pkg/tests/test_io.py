import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from allee_release.errors import IoError, ParseError, SchemaViolation
from allee_release.io import (
    RunConfig,
    config_hash,
    parse_config,
    provenance,
    read_trajectory_csv,
    write_result_json,
    write_trajectory_csv,
)
from allee_release.model import TABLE1, steady_states
from allee_release.periodic import eta_max
from allee_release.simulate import ReleaseSchedule, Trajectory, simulate


def test_empty_params_gives_defaults():
    cfg = parse_config("[params]\n", scenario="steady_states")
    assert cfg.params == TABLE1
    assert cfg.seed == 20240611 and cfg.dt == 0.01


def test_partial_params_and_scenario_table():
    cfg = parse_config('scenario = "optimize"\nseed = 5\n[params]\nK0 = 25\n[optimize]\ntau = 14\nT = 100\n')
    assert cfg.params.K0 == 25.0 and cfg.params.K1 == 374.0
    assert cfg.settings["tau"] == 14.0 and cfg.settings["T"] == 100.0
    assert cfg.settings["C"] == 1 / 200 and cfg.settings["N"] is None
    assert cfg.seed == 5


def test_cli_scenario_overrides_document():
    cfg = parse_config('scenario = "optimize"\n', scenario="eta")
    assert cfg.scenario == "eta"


@pytest.mark.parametrize(
    "text,field",
    [
        ("[simulate]\ntau = 0\n", "simulate.tau"),
        ("[params]\nK9 = 3\n", "params.K9"),
        ("colour = 1\n", "colour"),
        ("[optimize]\nwidth = 1\n", "optimize.width"),
        ("[optimize]\nN = 1.5\n", "optimize.N"),
        ("[simulate]\nic = [1, 2, 3]\n", "simulate.ic"),
        ("seed = -1\n", "seed"),
        ("[reproduce]\ntarget = \"fig9\"\n", "reproduce.target"),
        ("[eta_max]\nlo = 5\n", "eta_max"),
    ],
)
def test_schema_violations(text, field):
    with pytest.raises(SchemaViolation) as exc:
        parse_config(text, scenario="simulate")
    assert exc.value.field == field


def test_missing_scenario():
    with pytest.raises(SchemaViolation) as exc:
        parse_config("")
    assert exc.value.field == "scenario"


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        parse_config('seed = 1\n[params\nK0 = 3\n', scenario="eta")
    assert exc.value.line == 2


def test_csv_impulse_rows(params, tmp_path):
    traj = simulate(params, ReleaseSchedule((7.0), (300.0,), include_t0=False), (374.0, 0.0), 8.0, stride=1000)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,s1,s2,tag,u_applied"
    pre = [ln for ln in lines if ",pre_impulse," in ln]
    post = [ln for ln in lines if ",post_impulse," in ln]
    assert len(pre) == len(post) == 1
    assert pre[0].startswith("7,") and pre[0].endswith(",pre_impulse,0")
    assert post[0].startswith("7,") and post[0].endswith(",post_impulse,300")
    assert lines.index(post[0]) == lines.index(pre[0]) + 1


def test_csv_empty_trajectory(tmp_path):
    empty = Trajectory(np.empty(0), np.empty(0), np.empty(0), np.empty(0, np.int8), np.empty(0), None, 0.01)
    path = tmp_path / "e.csv"
    write_trajectory_csv(empty, path)
    assert path.read_text() == "t,s1,s2,tag,u_applied\n"
    assert len(read_trajectory_csv(path)) == 0


def test_csv_round_trip_simulation(params, tmp_path):
    traj = simulate(params, ReleaseSchedule.constant(7.0, 300.0, 30.0), (374.0, 0.0), 30.0, stride=37)
    path = tmp_path / "t.csv"
    write_trajectory_csv(traj, path)
    back = read_trajectory_csv(path)
    for name in ("t", "s1", "s2", "tag", "u_applied"):
        np.testing.assert_array_equal(getattr(back, name), getattr(traj, name))


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(vals=st.lists(st.tuples(finite, finite, finite, st.integers(0, 2), finite), max_size=20))
def test_csv_round_trip_any_finite(tmp_path_factory, vals):
    cols = list(zip(*vals)) if vals else [()] * 5
    traj = Trajectory(
        np.array(cols[0], float), np.array(cols[1], float), np.array(cols[2], float),
        np.array(cols[3], np.int8), np.array(cols[4], float), None, 0.01,
    )
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    write_trajectory_csv(traj, path)
    back = read_trajectory_csv(path)
    for name in ("t", "s1", "s2", "tag", "u_applied"):
        a, b = getattr(back, name), getattr(traj, name)
        assert a.tobytes() == b.tobytes() or np.array_equal(a, b)


def test_read_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ParseError):
        read_trajectory_csv(path)
    with pytest.raises(IoError):
        read_trajectory_csv(tmp_path / "missing.csv")


def test_json_eta_max(params, tmp_path):
    path = tmp_path / "eta.json"
    write_result_json(eta_max(params), path, provenance(seed=1, dt=0.01))
    doc = json.loads(path.read_text())
    assert {"tau_max", "eta_max", "domain", "provenance"} <= set(doc)
    assert doc["eta_max"] == eta_max(params).eta_max  # full precision
    assert set(doc["provenance"]) == {"config_hash", "seed", "dt", "versions"}


def test_json_steady_states(params, tmp_path):
    path = tmp_path / "ss.json"
    write_result_json(steady_states(params), path)
    doc = json.loads(path.read_text())
    assert doc["Kb"] == pytest.approx(33.33, abs=0.01)
    assert doc["Kstar"] == pytest.approx(413.2, abs=0.05)
    assert doc["saddle"] == pytest.approx([40.94, 259.06], abs=0.01)


def test_json_write_error(params):
    with pytest.raises(IoError):
        write_result_json({"a": 1}, "/proc/definitely/not/here.json")


def test_config_hash_is_stable():
    a = parse_config("[optimize]\ntau = 7\n", scenario="optimize")
    b = parse_config("[optimize]\ntau = 7.0\n", scenario="optimize")
    c = parse_config("[optimize]\ntau = 14\n", scenario="optimize")
    assert config_hash(a) == config_hash(b) != config_hash(c)
    assert len(config_hash(RunConfig())) == 64


def test_reruns_are_byte_identical(params, tmp_path):
    cfg = parse_config("", scenario="eta_max")
    for name in ("a.json", "b.json"):
        write_result_json(eta_max(params), tmp_path / name, provenance(cfg))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert not math.isnan(json.loads((tmp_path / "a.json").read_text())["eta_max"])
