import csv
import json
import logging

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from qudit_odmr.cli import cli
from qudit_odmr.workflows import experiments


@pytest.fixture
def runner():
    yield CliRunner()
    # the CLI installs handlers on the runner's temporary streams
    logging.getLogger().handlers.clear()


@pytest.fixture
def invoke(runner, tmp_path):
    def _invoke(*args):
        return runner.invoke(cli, ["--out", str(tmp_path / "out"), *args])
    return _invoke


def test_beff_reports_field_and_writes_sidecar(invoke, tmp_path):
    result = invoke("--seed", "7", "beff", "--nu-probe", "11.70", "--f-r", "4.51",
                    "--theta", "19", "--f-r-err", "0.03")
    assert result.exit_code == 0, result.output
    assert "B_eff = 223.67 ± 0.93 µT" in result.output

    document = json.loads((tmp_path / "out" / "beff" / "run.json").read_text())
    assert document["run"]["seed"] == 7
    assert document["run"]["summary"]["b_eff"] == pytest.approx(223.67, abs=0.05)


def test_fringe_above_probe_fails(invoke):
    result = invoke("beff", "--nu-probe", "4.0", "--f-r", "4.51")
    assert result.exit_code == 1
    assert "MagnetometryError" in result.output


def test_beff_without_fringe_frequency_is_a_config_error(invoke):
    result = invoke("beff", "--nu-probe", "11.70")
    assert result.exit_code == 2
    assert "config:" in result.output
    assert "analysis.f_r" in result.output


def test_beff_sidecar_reproduces_the_estimate(runner, tmp_path):
    first = runner.invoke(cli, ["--out", str(tmp_path / "a"), "beff", "--nu-probe", "11.70",
                                "--f-r", "4.51", "--theta", "19", "--f-r-err", "0.03"])
    assert first.exit_code == 0, first.output
    sidecar = tmp_path / "a" / "beff" / "run.json"
    again = runner.invoke(cli, ["--config", str(sidecar), "--out", str(tmp_path / "b"), "beff"])
    assert again.exit_code == 0, again.output
    assert "B_eff = 223.67 ± 0.93 µT" in again.output
    assert (tmp_path / "a" / "beff" / "b_eff.csv").read_text() == (tmp_path / "b" / "beff" / "b_eff.csv").read_text()


def test_levels_prints_energies_and_lines(invoke):
    result = invoke("levels", "--bz", "100", "--bperp", "30")
    assert result.exit_code == 0, result.output
    assert "E(+3/2)" in result.output
    assert "nu1 (-3/2 <-> -1/2)" in result.output


def test_invalid_config_names_the_field(invoke, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"center": {"two_d": -5.0}}))
    result = invoke("--config", str(bad), "levels")
    assert result.exit_code == 2
    assert "center.two_d" in result.output


def test_missing_config_file(invoke, tmp_path):
    result = invoke("--config", str(tmp_path / "absent.yaml"), "levels")
    assert result.exit_code == 2
    assert "config:" in result.output


def test_sidecar_reproduces_the_run(runner, tmp_path):
    first = runner.invoke(cli, ["--out", str(tmp_path / "a"), "levels", "--bz", "80"])
    assert first.exit_code == 0, first.output
    sidecar = tmp_path / "a" / "levels" / "run.json"
    again = runner.invoke(cli, ["--config", str(sidecar), "--out", str(tmp_path / "b"), "levels"])
    assert again.exit_code == 0, again.output
    for name in ("levels.csv", "transitions.csv"):
        assert (tmp_path / "a" / "levels" / name).read_text() == (tmp_path / "b" / "levels" / name).read_text()


def test_csv_rows_match_header(invoke, tmp_path):
    result = invoke("selection", "--span", "1.0")
    assert result.exit_code == 0, result.output
    with open(tmp_path / "out" / "selection" / "selection_profile.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["detuning_MHz", "transferred_population"]
    assert len(rows) > 100
    assert all(len(row) == 2 for row in rows)


def test_selftest_passes(invoke):
    result = invoke("selftest")
    assert result.exit_code == 0, result.output
    assert "FAIL " not in result.output
    assert result.output.count("PASS") == 6


def test_consistency_flags_coil_change(invoke):
    result = invoke("consistency")
    assert result.exit_code == 0, result.output
    assert "row1: B_eff = 223.67" in result.output
    assert "consistent: False" in result.output


@pytest.mark.parametrize("args", [
    ("relax", "--t-stop", "50"),
    ("invert-field",),
    ("invert-field", "--lines", "21.76,32.3,14.6,nan", "--d-known", "13.4"),
])
def test_light_subcommands_succeed(invoke, args):
    result = invoke(*args)
    assert result.exit_code == 0, result.output
    assert "wrote" in result.output


def test_bad_line_list_is_a_usage_error(invoke):
    result = invoke("invert-field", "--lines", "21.7,32.3")
    assert result.exit_code == 2


def test_worker_count_leaves_csv_unchanged(runner, tmp_path):
    outputs = []
    for workers in ("1", "8"):
        out = tmp_path / f"w{workers}"
        result = runner.invoke(cli, ["--out", str(out), "--workers", workers, "holeburn",
                                     "--nu-pump", "26.8", "--span", "1.0", "--step", "0.05"])
        assert result.exit_code == 0, result.output
        outputs.append((out / "holeburn" / "lockin.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_numerical_failure_names_its_module(invoke, monkeypatch):
    def singular(levels, states=None):
        return np.linalg.inv(np.zeros((4, 4)))

    monkeypatch.setattr(experiments, "transition_table", singular)
    result = invoke("levels")
    assert result.exit_code == 1
    assert "qudit_odmr.workflows.experiments: LinAlgError" in result.output
    assert "Traceback" not in result.output
