"""End-to-end command-line checks: exit codes, outputs, determinism."""

import json

import numpy as np
import pytest

from strata import GoalFunction, fixture_path, save_scenario
from strata.cli import main
from strata.scenario import load_scenario, scenario_to_dict

from test_optimizer import small_scenario


@pytest.fixture
def small_scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    save_scenario(small_scenario(seed=21, meta_iterations=3), path)
    return path


def read_json(path):
    with open(path) as handle:
        return json.load(handle)


def test_solve_writes_plan_and_exits_zero(small_scenario_file, tmp_path, capsys):
    out = tmp_path / "plan.json"
    code = main(["solve", str(small_scenario_file), "--goal", "exact",
                 "--out", str(out)])
    assert code == 0
    data = read_json(out)
    assert data["converged"] is True
    assert data["plan"]["settle_time"] > 0.0
    assert len(data["plan"]["rate_matrices"]) == 2
    assert "wall_time" not in data
    assert "scenario" in data
    printed = capsys.readouterr().out
    assert "converged" in printed


def test_solve_without_out_prints_json(small_scenario_file, capsys):
    code = main(["solve", str(small_scenario_file)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["converged"] is True


def test_solve_nonconvergence_exits_two(tmp_path):
    scenario = small_scenario(seed=22, meta_iterations=2,
                              target=np.full((3, 2), 1e4),
                              goal=GoalFunction.MINIMUM)
    path = tmp_path / "impossible.json"
    save_scenario(scenario, path)
    code = main(["solve", str(path), "--out", str(tmp_path / "plan.json")])
    assert code == 2


def test_validation_failure_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_missing_file_exits_one(tmp_path):
    assert main(["solve", str(tmp_path / "nope.json")]) == 1


def test_diversity_reports_worked_example(tmp_path, capsys):
    # a team whose fourth species is the sum of the first two
    scenario = load_scenario(fixture_path("running_example.json"))
    data = scenario_to_dict(scenario)
    mu = np.array(data["model"]["mu"], dtype=float)
    mu[:, 4] = [1.0, 0.0, 0.0, 1.0]  # pre-binarized speed indicators
    mu[3] = mu[0] + mu[1]
    data["model"]["mu"] = mu.tolist()
    data["model"]["var"] = np.zeros_like(mu).tolist()
    data["model"]["kinds"] = [{"kind": "cumulative"}] * 5
    path = tmp_path / "team.json"
    path.write_text(json.dumps(data))
    out = tmp_path / "diversity.json"
    code = main(["diversity", str(path), "--out", str(out)])
    assert code == 0
    result = read_json(out)
    assert result["eigenspecies"]["cardinality"] == 3
    assert result["eigenspecies"]["member_species"] == [0, 1, 2]
    assert result["coverspecies"]["cardinality"] == 1
    assert result["coverspecies"]["member_species"] == [3]


def test_diversity_on_bundled_fixture(capsys):
    code = main(["diversity", str(fixture_path("running_example.json"))])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["coverspecies"]["cardinality"] == 1
    assert payload["coverspecies"]["member_species"] == [3]


def test_simulate_round_trip(small_scenario_file, tmp_path):
    plan_path = tmp_path / "plan.json"
    assert main(["solve", str(small_scenario_file), "--out", str(plan_path)]) == 0
    out = tmp_path / "state.json"
    assert main(["simulate", str(plan_path), "--time", "2.5",
                 "--out", str(out)]) == 0
    state = read_json(out)
    counts = np.array(state["counts"])
    assert counts.shape == (3, 2)
    np.testing.assert_allclose(counts.sum(axis=0), [10.0, 10.0], rtol=1e-9)
    # agent-level variant conserves integer populations
    out2 = tmp_path / "agents.json"
    assert main(["simulate", str(plan_path), "--time", "2.5", "--agent-level",
                 "--seed", "5", "--out", str(out2)]) == 0
    agents = np.array(read_json(out2)["counts"])
    assert agents.sum() == 20.0
    assert np.all(agents == np.round(agents))


def test_metrics_command(small_scenario_file, tmp_path):
    plan_path = tmp_path / "plan.json"
    assert main(["solve", str(small_scenario_file), "--out", str(plan_path)]) == 0
    out = tmp_path / "metrics.json"
    assert main(["metrics", str(plan_path), str(small_scenario_file),
                 "--points", "20", "--q-samples", "3", "--seed", "1",
                 "--out", str(out)]) == 0
    series = read_json(out)["series"]
    assert len(series["times"]) == 20
    assert all(d2 <= d1 + 1e-12 for d1, d2 in
               zip(series["delta_g1_mean"], series["delta_g2_mean"]))


def test_solve_output_is_byte_identical(small_scenario_file, tmp_path):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    assert main(["solve", str(small_scenario_file), "--out", str(out1)]) == 0
    assert main(["solve", str(small_scenario_file), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_bench_outputs_are_byte_identical(tmp_path):
    args = ["bench", "--runs", "2", "--tasks", "3", "--species", "2", "--traits", "3",
            "--agents", "20", "--rate-ceiling", "0.5", "--meta-iterations", "2",
            "--q-samples", "3", "--seed", "7"]
    dir1, dir2 = tmp_path / "one", tmp_path / "two"
    main(args + ["--out-dir", str(dir1)])
    main(args + ["--out-dir", str(dir2)])
    for name in ("report.json", "curves.csv", "plots_exact.svg", "plots_minimum.svg"):
        assert (dir1 / name).read_bytes() == (dir2 / name).read_bytes(), name


def test_bench_respects_env_seed(tmp_path, monkeypatch):
    args = ["bench", "--runs", "1", "--tasks", "3", "--species", "2", "--traits", "3",
            "--agents", "10", "--rate-ceiling", "0.5", "--meta-iterations", "1",
            "--q-samples", "2", "--strategy", "random"]
    monkeypatch.setenv("STRATA_SEED", "123")
    main(args + ["--out-dir", str(tmp_path / "env")])
    monkeypatch.delenv("STRATA_SEED")
    main(args + ["--seed", "123", "--out-dir", str(tmp_path / "flag")])
    assert (tmp_path / "env" / "report.json").read_bytes() == \
        (tmp_path / "flag" / "report.json").read_bytes()


def test_write_failure_exits_three(small_scenario_file, tmp_path):
    code = main(["solve", str(small_scenario_file),
                 "--out", str(tmp_path / "missing_dir" / "plan.json")])
    assert code == 3
