import copy

import numpy as np
import pytest
import yaml

from opinionsteer.cli import main
from opinionsteer.errors import ScenarioError
from opinionsteer.scenario_io import (bundled_scenario_path, csv_header,
                                      parse_scenario, scenario_from_dict,
                                      scenario_to_dict, serialize_scenario,
                                      write_trajectory_csv)


@pytest.fixture(scope="module")
def fixture_data():
    with open(bundled_scenario_path()) as fh:
        return yaml.safe_load(fh)


def _write_yaml(tmp_path, data, name="scenario.yaml"):
    path = tmp_path / name
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)
    return str(path)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

class TestParse:
    def test_bundled_fixture(self, fixture_scenario):
        sc = fixture_scenario
        assert sc.n_agents == 8
        assert sc.schedule.dwell_times == [2.0, 2.0, 3.0, 1.0, 2.0]
        assert sc.schedule.rotating
        assert sc.root_set == (0, 1, 2)
        assert sc.x_target == (0.0, 0.0, 10.0, 0.0, -10.0, -10.0, 10.0, -10.0)
        assert sc.gains.gains == (0.6, 0.6, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0)
        assert sc.gains.kappa_lower == 0.6
        # Edge convention: {from: 1, to: 2, weight: 1.0} sets a_21 = 1.
        assert sc.schedule.snapshots[0].weights[(1, 0)] == 1.0

    def test_round_trip(self, fixture_scenario, tmp_path):
        path = tmp_path / "out.yaml"
        serialize_scenario(fixture_scenario, str(path))
        again = parse_scenario(str(path))
        assert again == fixture_scenario

    def test_self_loop_cites_a2(self, fixture_data, tmp_path):
        data = copy.deepcopy(fixture_data)
        data["schedule"]["graphs"][0]["edges"].append(
            {"from": 1, "to": 1, "weight": 0.5})
        with pytest.raises(ScenarioError, match="A2"):
            scenario_from_dict(data)

    def test_zero_root_gain_cites_p2(self, fixture_data):
        data = copy.deepcopy(fixture_data)
        data["gains"] = {"kappa_lower": 0.6,
                        "per_agent": [0.0, 0.6, 0.6, 0, 0, 0, 0, 0]}
        with pytest.raises(ScenarioError, match="P2"):
            scenario_from_dict(data)

    def test_missing_key_names_path(self, fixture_data):
        data = copy.deepcopy(fixture_data)
        del data["schedule"]["graphs"][2]["dwell"]
        with pytest.raises(ScenarioError, match="graphs"):
            scenario_from_dict(data)

    def test_dimension_mismatch(self, fixture_data):
        data = copy.deepcopy(fixture_data)
        data["x0"] = data["x0"][:-1]
        with pytest.raises(ScenarioError, match="x0"):
            scenario_from_dict(data)

    def test_duplicate_edge(self, fixture_data):
        data = copy.deepcopy(fixture_data)
        data["schedule"]["graphs"][0]["edges"].append(
            {"from": 1, "to": 2, "weight": 0.1})
        with pytest.raises(ScenarioError, match="duplicate"):
            scenario_from_dict(data)

    def test_set_shorthand_needs_root_set(self, fixture_data):
        data = copy.deepcopy(fixture_data)
        del data["root_set"]
        with pytest.raises(ScenarioError, match="root_set"):
            scenario_from_dict(data)

    def test_bad_rotation(self, fixture_data):
        data = copy.deepcopy(fixture_data)
        data["schedule"]["rotation"] = "shuffled"
        with pytest.raises(ScenarioError, match="rotation"):
            scenario_from_dict(data)


# ---------------------------------------------------------------------------
# CSV contract
# ---------------------------------------------------------------------------

class TestCsv:
    def test_header(self):
        assert csv_header(2) == "t,x_1,x_2,u_1,u_2,h,c,h_e,c_e"

    def test_row_count_and_stability(self, fixture_report, tmp_path):
        traj = fixture_report.closed_trajectory
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trajectory_csv(traj, str(p1))
        write_trajectory_csv(traj, str(p2))
        lines = p1.read_text().splitlines()
        assert len(lines) == len(traj.times) + 1
        assert lines[0] == csv_header(8)
        assert p1.read_bytes() == p2.read_bytes()

    def test_values_round_trip(self, fixture_report, tmp_path):
        traj = fixture_report.closed_trajectory
        path = tmp_path / "c.csv"
        write_trajectory_csv(traj, str(path))
        data = np.genfromtxt(str(path), delimiter=",", skip_header=1)
        np.testing.assert_array_equal(data[:, 0], traj.times)
        np.testing.assert_array_equal(data[:, 1:9], traj.states)
        np.testing.assert_array_equal(data[:, -1], traj.c_e)


# ---------------------------------------------------------------------------
# CLI commands and exit statuses
# ---------------------------------------------------------------------------

class TestCli:
    def test_analyze(self, tmp_path, capsys):
        rc = main(["analyze", "--scenario", bundled_scenario_path(),
                   "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "root_set {1,2,3}" in out
        assert "balance = balanced" in out
        assert (tmp_path / "rotating8_analysis.txt").exists()

    def test_simulate_closed(self, tmp_path):
        rc = main(["simulate", "--scenario", bundled_scenario_path(),
                   "--mode", "closed", "--out", str(tmp_path)])
        assert rc == 0
        csv_path = tmp_path / "rotating8_closed.csv"
        assert csv_path.exists()
        assert (tmp_path / "rotating8_closed.svg").exists()
        data = np.genfromtxt(str(csv_path), delimiter=",", skip_header=1)
        target = np.array([0, 0, 10, 0, -10, -10, 10, -10], dtype=float)
        assert np.max(np.abs(data[-1, 1:9] - target)) < 1e-2

    def test_simulate_open_with_overrides(self, tmp_path):
        rc = main(["simulate", "--scenario", bundled_scenario_path(),
                   "--mode", "open", "--horizon", "10", "--dt", "0.01",
                   "--out", str(tmp_path)])
        assert rc == 0
        data = np.genfromtxt(str(tmp_path / "rotating8_open.csv"),
                             delimiter=",", skip_header=1)
        assert data[-1, 0] == pytest.approx(10.0)
        # Open loop leaves the control columns at zero.
        assert np.all(data[:, 9:17] == 0.0)

    def test_certify_pass(self, tmp_path, capsys):
        rc = main(["certify", "--scenario", bundled_scenario_path(),
                   "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "convergence = pass" in out
        report = (tmp_path / "rotating8_report.txt").read_text()
        for section in ("[structural]", "[constants]", "[inequalities]",
                        "[verdict]"):
            assert section in report

    def test_parse_error_exit_2(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("agents: 2\n")
        rc = main(["analyze", "--scenario", str(bad), "--out", str(tmp_path)])
        assert rc == 2

    def test_missing_file_exit_2(self, tmp_path):
        rc = main(["certify", "--scenario", str(tmp_path / "nope.yaml"),
                   "--out", str(tmp_path)])
        assert rc == 2

    def test_structural_fail_exit_3(self, tmp_path):
        with open(bundled_scenario_path()) as fh:
            data = yaml.safe_load(fh)
        data["schedule"]["graphs"][0]["edges"][0]["weight"] = -1.0
        path = _write_yaml(tmp_path, data)
        rc = main(["certify", "--scenario", path, "--out", str(tmp_path)])
        assert rc == 3
        report = (tmp_path / "scenario_report.txt").read_text()
        assert "balance = unbalanced" in report

    def test_threshold_miss_exit_4(self, tmp_path):
        # Valid structure but far too little gain to land within the final
        # error threshold over the configured horizon.
        with open(bundled_scenario_path()) as fh:
            data = yaml.safe_load(fh)
        data["gains"] = {"kappa_lower": 0.01, "set": "S", "value": 0.01}
        path = _write_yaml(tmp_path, data)
        rc = main(["certify", "--scenario", path, "--out", str(tmp_path)])
        assert rc == 4

    def test_divergence_exit_5(self, tmp_path):
        data = {
            "agents": 2, "delta": 0.05, "window_T": 50.0, "horizon": 400.0,
            "dt": 1.0, "x0": [3.0, 1.0], "x_target": [0.0, 0.0],
            "root_set": [1],
            "gains": {"kappa_lower": 0.5, "per_agent": [0.5, 0.0]},
            "schedule": {"rotation": "cyclic",
                         "graphs": [{"dwell": 400.0, "edges": [
                             {"from": 1, "to": 2, "weight": -5.0}]}]},
        }
        path = _write_yaml(tmp_path, data)
        rc = main(["simulate", "--scenario", path, "--mode", "open",
                   "--out", str(tmp_path)])
        assert rc == 5
        # The finite prefix is still dumped.
        csv_path = tmp_path / "scenario_open.csv"
        body = csv_path.read_text().splitlines()
        assert len(body) > 10
