import logging

import pytest

from galint.settings import BUILTIN_SOLVER_DEFAULTS, load_solver_defaults, setup_logging, thread_count


@pytest.mark.parametrize("raw, expected", [(None, 1), ("4", 4), ("zero", 1), ("0", 1), ("", 1)])
def test_thread_count(monkeypatch, raw, expected):
    if raw is None:
        monkeypatch.delenv("GALINT_THREADS", raising=False)
    else:
        monkeypatch.setenv("GALINT_THREADS", raw)
    assert thread_count() == expected


def test_missing_solver_file_falls_back(tmp_path, monkeypatch, caplog):
    monkeypatch.delenv("GALINT_NEWTON_TOL", raising=False)
    monkeypatch.delenv("GALINT_NEWTON_MAX_ITER", raising=False)
    with caplog.at_level(logging.WARNING, logger="galint.settings"):
        values = load_solver_defaults(str(tmp_path / "missing.json"))
    assert values == BUILTIN_SOLVER_DEFAULTS
    assert "[CONFIG]" in caplog.text


def test_corrupt_solver_file_falls_back(tmp_path, monkeypatch):
    monkeypatch.delenv("GALINT_NEWTON_MAX_ITER", raising=False)
    path = tmp_path / "solver.json"
    path.write_text("[1, 2", encoding="utf-8")
    monkeypatch.setenv("GALINT_NEWTON_TOL", "-1")
    values = load_solver_defaults(str(path))
    assert values["tol"] == BUILTIN_SOLVER_DEFAULTS["tol"]
    assert values["max_iter"] == BUILTIN_SOLVER_DEFAULTS["max_iter"]


def test_environment_overrides_file(tmp_path, monkeypatch):
    path = tmp_path / "solver.json"
    path.write_text('{"tol": 1e-6, "max_iter": 9}', encoding="utf-8")
    monkeypatch.setenv("GALINT_NEWTON_TOL", "1e-12")
    monkeypatch.delenv("GALINT_NEWTON_MAX_ITER", raising=False)
    values = load_solver_defaults(str(path))
    assert values["tol"] == 1e-12
    assert values["max_iter"] == 9


def test_setup_logging_accepts_unknown_level():
    setup_logging("not-a-level")
    setup_logging("debug")
