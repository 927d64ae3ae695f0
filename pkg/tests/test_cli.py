from __future__ import annotations

import json

import pytest

from tiltpush.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_UNSTABLE, main, parse_grid, summary_table
from tiltpush.config import (
    apply_overrides,
    case1_template,
    case2_template,
    config_from_dict,
    config_to_dict,
    dump_config,
    hover_template,
    parse_config,
)
from tiltpush.simulator import TELEMETRY_FIELDS, ConfigError, run_scenario

import scenario_runs


@pytest.fixture
def hover_file(tmp_path):
    path = tmp_path / "hover.toml"
    path.write_text(dump_config(hover_template(0.4)), encoding="utf-8")
    return path


def test_validate_ok(hover_file, capsys):
    assert main(["validate", str(hover_file)]) == EXIT_OK
    assert "ok" in capsys.readouterr().out


@pytest.mark.parametrize(
    "text, fragment",
    [("[vehicle]\nl_max = 0.5\n", "l_max"), ("[vehicle\n", "line 1"), ("[sim]\ndurration = 1\n", "sim.duration")],
)
def test_validate_config_errors(tmp_path, capsys, text, fragment):
    path = tmp_path / "bad.toml"
    path.write_text(text, encoding="utf-8")
    assert main(["validate", str(path)]) == EXIT_CONFIG
    assert fragment in capsys.readouterr().err


def test_missing_config_is_config_error(tmp_path):
    assert main(["validate", str(tmp_path / "nope.toml")]) == EXIT_CONFIG


def test_unknown_override(hover_file):
    assert main(["validate", str(hover_file), "--set", "vehicle.mas=3"]) == EXIT_CONFIG


def test_run_writes_artifacts(hover_file, tmp_path):
    out = tmp_path / "run"
    assert main(["run", str(hover_file), "--out", str(out), "--seed", "7"]) == EXIT_OK
    header = (out / "telemetry.csv").read_text().splitlines()[0]
    assert header.split(",") == list(TELEMETRY_FIELDS)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ok"
    saved = parse_config((out / "config.toml").read_text())
    assert saved.sim.seed == 7


def test_run_unstable_exit_code(tmp_path):
    path = tmp_path / "direct.toml"
    path.write_text(dump_config(case2_template((1.0,))), encoding="utf-8")
    assert main(["run", str(path)]) == EXIT_UNSTABLE


def test_unwritable_output(hover_file, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", str(hover_file), "--out", str(blocker / "sub")]) == EXIT_IO


def test_sweep(hover_file, tmp_path, capsys):
    out = tmp_path / "sweep"
    code = main(["sweep", str(hover_file), "--grid", "initial.l=0,0.1", "--grid", "sim.duration=0.2,0.3",
                 "--out", str(out), "--jobs", "2"])
    assert code == EXIT_OK
    rows = json.loads((out / "sweep.json").read_text())
    assert len(rows) == 4
    assert sorted(p.name for p in out.iterdir() if p.is_dir()) == [f"run_{i:03d}" for i in range(4)]
    assert all((out / r["dir"] / "telemetry.csv").exists() for r in rows)


def test_sweep_bad_grid(hover_file, tmp_path):
    assert main(["sweep", str(hover_file), "--grid", "vehicle.l_max=0.5", "--out", str(tmp_path)]) == EXIT_CONFIG
    with pytest.raises(ConfigError):
        parse_grid(["novalues="])


def test_parse_grid_keeps_array_values_whole():
    assert parse_grid(["gains.K=[15,15,15],[20, 20, 20]", "wall.k_n=500,1500"]) == [
        ("gains.K", ["[15,15,15]", "[20, 20, 20]"]),
        ("wall.k_n", ["500", "1500"]),
    ]


def test_case1_summary_rows():
    result, _ = scenario_runs.case1()
    table = summary_table(result).splitlines()
    assert [float(r.split()[0]) for r in table[1:-1]] == [0.6, 0.8, 1.0, 1.2]
    assert table[-1] == "status: ok"


def test_case2_command(tmp_path, capsys):
    out = tmp_path / "c2"
    code = main(["case2", "--out", str(out)])
    text = capsys.readouterr().out
    # staged pushes complete; the direct 1.0 m push diverges
    assert code == EXIT_UNSTABLE
    staged = json.loads((out / "staged" / "summary.json").read_text())
    direct = json.loads((out / "direct" / "summary.json").read_text())
    assert staged["status"] == "ok" and direct["status"] == "unstable"
    assert [s["delta_p"] for s in staged["segments"][1:]] == [0.4, 0.6, 0.8]
    assert "status: unstable" in text


def test_case1_plate_locked_matches_case2_ordering():
    """With the plate held at l=0, the case1 pushes load the back rotors harder."""
    locked = run_scenario(config_from_dict(apply_overrides(config_to_dict(case1_template()), ["plate.l=0"])))
    shifted, _ = scenario_runs.case1()
    for dp in (0.8, 1.0, 1.2):
        a = scenario_runs.segment_at(shifted, dp).max_back_saturation
        b = scenario_runs.segment_at(locked, dp).max_back_saturation
        assert a < b
