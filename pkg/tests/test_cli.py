import csv
import json

import numpy as np
import pytest

from galint.cli import main
from galint.commands.common import sample_initial_state
from galint.model import chain_model, model_to_dict


def _summary(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


def _rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_simulate_equilibrium_rows_are_constant(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    code = main(["simulate", "--chain", "1", "--scheme", "trapezoidal", "--dt", "0.01", "--horizon", "0.1",
                 "--q-range", "0", "--qdot-range", "0", "--out", str(out)])
    assert code == 0
    summary = _summary(capsys)
    assert summary["command"] == "simulate" and summary["success"]
    rows = _rows(out)
    assert rows[0] == ["t", "q_1", "p_1", "energy", "iterations", "residual"]
    assert len(rows) == 12
    assert all(abs(float(r[1])) <= 1e-12 for r in rows[1:])
    assert all(abs(float(r[3]) - float(rows[1][3])) <= 1e-9 for r in rows[1:])
    assert rows[1][4] == "0"
    assert all(r[4] == "1" for r in rows[2:])


def test_simulate_to_stdout_keeps_csv_clean(capsys):
    code = main(["simulate", "--chain", "2", "--scheme", "simpson", "--dt", "0.01", "--horizon", "0.05"])
    assert code == 0
    captured = capsys.readouterr()
    lines = captured.out.strip().splitlines()
    assert lines[0].startswith("t,q_1,q_2,p_1,p_2,energy")
    assert len(lines) == 7
    assert json.loads(captured.err.strip().splitlines()[-1])["success"]


def test_simulate_from_model_file(tmp_path, capsys):
    model_path = tmp_path / "chain.json"
    model_path.write_text(json.dumps(model_to_dict(chain_model(3))), encoding="utf-8")
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--model", str(model_path), "--dt", "0.02", "--horizon", "0.1",
                 "--scheme", "lobatto:3", "--out", str(out)]) == 0
    assert len(_rows(out)[0]) == 1 + 3 + 3 + 3


@pytest.mark.parametrize("argv", [
    ["simulate", "--model", "does/not/exist.json", "--dt", "0.01", "--horizon", "1"],
    ["simulate", "--chain", "2", "--dt", "0.01"],
    ["simulate", "--chain", "2", "--dt", "-0.01", "--horizon", "1"],
    ["simulate", "--chain", "2", "--dt", "0.1", "--horizon", "0.01"],
    ["simulate", "--chain", "2", "--scheme", "lobatto:40", "--dt", "0.01", "--horizon", "0.1"],
    ["scaling", "--n", "8,x"],
    ["frobnicate"],
])
def test_usage_errors_exit_with_two(argv):
    assert main(argv) == 2


def test_malformed_model_file_is_a_usage_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{", encoding="utf-8")
    assert main(["simulate", "--model", str(path), "--dt", "0.01", "--horizon", "0.1"]) == 2


def test_unwritable_output_is_a_usage_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    assert main(["simulate", "--chain", "1", "--dt", "0.01", "--horizon", "0.02",
                 "--out", str(blocker / "sim.csv")]) == 2


def test_solver_failure_exits_with_one(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GALINT_NEWTON_MAX_ITER", "1")
    out = tmp_path / "sim.csv"
    code = main(["simulate", "--chain", "2", "--dt", "0.05", "--horizon", "0.2", "--out", str(out)])
    assert code == 1
    summary = _summary(capsys)
    assert not summary["success"] and "did not converge" in summary["error"]
    assert len(_rows(out)) == 2
    assert main(["simulate", "--chain", "2", "--dt", "0.05", "--horizon", "0.2", "--out", str(out),
                 "--allow-failures"]) == 0


def test_scaling_smoke(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GALINT_THREADS", "2")
    out = tmp_path / "scaling.csv"
    assert main(["scaling", "--n", "2,4", "--trials", "2", "--oracle-max-n", "2", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["n", "op", "median_ns"]
    ops = [(r[0], r[1]) for r in rows[1:]]
    assert ops == [("2", "evaluate_del"), ("2", "newton_direction"), ("2", "linearize"),
                   ("2", "oracle_del"), ("2", "oracle_newton_direction"),
                   ("4", "evaluate_del"), ("4", "newton_direction"), ("4", "linearize")]
    assert all(int(r[2]) > 0 for r in rows[1:])


def test_sampled_states_depend_only_on_seed():
    model = chain_model(4)
    a = sample_initial_state(model, np.random.default_rng(7))
    b = sample_initial_state(model, np.random.default_rng(7))
    assert np.array_equal(a.q, b.q) and np.array_equal(a.p, b.p)


def test_convergence_smoke(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    code = main(["convergence", "--schemes", "trapezoidal,simpson", "--dts", "0.02,0.01", "--chain", "1",
                 "--horizon", "0.2", "--benchmark-dt", "0.005", "--out", str(out)])
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["scheme", "dt", "traj_error"]
    assert [r[:2] for r in rows[1:]] == [["trapezoidal", "0.02"], ["trapezoidal", "0.01"],
                                         ["simpson", "0.02"], ["simpson", "0.01"]]
    errors = {(r[0], r[1]): float(r[2]) for r in rows[1:]}
    assert errors[("trapezoidal", "0.01")] < errors[("trapezoidal", "0.02")]


def test_convergence_rejects_incommensurate_steps():
    assert main(["convergence", "--dts", "0.013", "--benchmark-dt", "0.005", "--horizon", "0.1"]) == 2


def test_benchmark_against_itself_has_zero_error(tmp_path):
    out = tmp_path / "conv.csv"
    assert main(["convergence", "--schemes", "lobatto:3", "--dts", "0.01", "--chain", "1", "--horizon", "0.1",
                 "--benchmark-dt", "0.01", "--out", str(out)]) == 0
    assert float(_rows(out)[1][2]) == 0.0


def test_robustness_smoke(tmp_path, capsys):
    out = tmp_path / "rob.csv"
    assert main(["robustness", "--chain", "3", "--dts", "0.01,0.02", "--samples", "4", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["dt", "samples", "successes", "success_rate", "median_iterations"]
    assert len(rows) == 3
    assert all(r[1] == "4" for r in rows[1:])


def test_check_passes_on_random_trees(capsys):
    assert main(["check", "--cases", "3", "--seed", "1"]) == 0
    summary = _summary(capsys)
    assert summary["success"] and summary["data"]["failed"] == 0
    assert main(["check", "--cases", "3", "--seed", "2"]) == 0


def test_check_surfaces_invalid_model(tmp_path, capsys):
    doc = model_to_dict(chain_model(2))
    doc["bodies"][1]["inertia"][0][2] = 0.3
    path = tmp_path / "asym.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["check", "--model", str(path)]) == 1
    summary = _summary(capsys)
    assert "validation" in summary["error"]


def _first_line(path):
    with open(path, newline="", encoding="utf-8") as f:
        return f.readline().rstrip("\r\n")


def test_simulate_is_reproducible_byte_for_byte(tmp_path):
    argv = ["simulate", "--chain", "3", "--scheme", "simpson", "--dt", "0.02", "--horizon", "0.2", "--seed", "3"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv + ["--out", str(first)]) == 0
    assert main(argv + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert main(argv[:-1] + ["4", "--out", str(second)]) == 0
    assert first.read_bytes() != second.read_bytes()


def test_csv_headers_are_stable(tmp_path):
    sim, conv, rob = tmp_path / "sim.csv", tmp_path / "conv.csv", tmp_path / "rob.csv"
    assert main(["simulate", "--chain", "2", "--dt", "0.01", "--horizon", "0.02", "--out", str(sim)]) == 0
    assert main(["convergence", "--schemes", "trapezoidal", "--dts", "0.01", "--chain", "1", "--horizon", "0.02",
                 "--benchmark-dt", "0.005", "--out", str(conv)]) == 0
    assert main(["robustness", "--chain", "2", "--dts", "0.01", "--samples", "2", "--out", str(rob)]) == 0
    assert _first_line(sim) == "t,q_1,q_2,p_1,p_2,energy,iterations,residual"
    assert _first_line(conv) == "scheme,dt,traj_error"
    assert _first_line(rob) == "dt,samples,successes,success_rate,median_iterations"


def test_duplicate_body_names_fail_the_run(tmp_path, capsys):
    doc = model_to_dict(chain_model(2))
    doc["bodies"][1]["name"] = doc["bodies"][0]["name"]
    doc["bodies"][1]["parent"] = "world"
    path = tmp_path / "dup.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["simulate", "--model", str(path), "--dt", "0.01", "--horizon", "0.02",
                 "--out", str(tmp_path / "sim.csv")]) == 1
    assert "duplicate body name" in _summary(capsys)["error"]
