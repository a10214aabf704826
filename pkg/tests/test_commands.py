"""Tests fuer die Unterbefehle train, integrate, compare und sweep."""

from __future__ import annotations

import json
import math
from collections.abc import Iterator
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from neurodyn.errors import UsageError
from neurodyn.models.config import StepControl, TrainConfig
from neurodyn.models.run_result import HistoryRow
from neurodyn.services import benchmarks, commands
from neurodyn.services.benchmarks import load_example, register_example, verify_reference
from neurodyn.services.commands import (
    TrainJob,
    budgets_for,
    cmd_compare,
    cmd_integrate,
    cmd_sweep,
    cmd_train,
    default_stride,
    epsilon_best_at,
    integrator_epsilons,
    parse_vector,
    run_jobs,
    sweep_cells,
)
from neurodyn.services.reporter import read_history_csv, read_summary


def _tiny(**overrides: object) -> TrainConfig:
    cfg = TrainConfig(max_iter=3, batch_size=8, hidden=4)
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def _row(iteration: int, best: float) -> HistoryRow:
    return HistoryRow(iteration, None, best, best, 0.0)


class TestHelpers:
    def test_parse_vector_forms(self) -> None:
        assert parse_vector("[1,2,3,4]").tolist() == [1.0, 2.0, 3.0, 4.0]
        assert parse_vector("1 2.5 -3").tolist() == [1.0, 2.5, -3.0]
        assert parse_vector(" [ -10, -15 ] ", 2).tolist() == [-10.0, -15.0]

    @pytest.mark.parametrize("text", ["", "[]", "[1,x]", "[1,nan]", "[1,inf]"])
    def test_parse_vector_rejects(self, text: str) -> None:
        with pytest.raises(UsageError):
            parse_vector(text)

    def test_parse_vector_length(self) -> None:
        with pytest.raises(UsageError):
            parse_vector("[1,2,3]", 4)

    def test_epsilon_best_at(self) -> None:
        history = [_row(0, 3.0), _row(10, 2.0), _row(20, 1.0)]
        assert epsilon_best_at(history, 0) == 3.0
        assert epsilon_best_at(history, 15) == 2.0
        assert epsilon_best_at(history, 50000) == 1.0
        assert epsilon_best_at([], 10) == math.inf

    def test_budgets(self) -> None:
        assert budgets_for(50000) == [0, 10, 100, 1000, 10000, 50000]
        assert budgets_for(7) == [0, 7]
        assert budgets_for(0) == [0]

    def test_run_jobs_rejects_zero_workers(self) -> None:
        with pytest.raises(UsageError):
            run_jobs([], 0)


class TestTrain:
    def test_writes_all_files(self, tmp_path: Path) -> None:
        summary = cmd_train(2, _tiny(), tmp_path)
        for name in ("history.csv", "checkpoint.npz", "trajectory.csv", "summary.json"):
            assert (tmp_path / name).is_file()
        rows = read_history_csv(tmp_path / "history.csv")
        assert [row["iter"] for row in rows] == [0.0, 1.0, 2.0, 3.0]
        assert summary.epsilon == min(row["epsilon"] for row in rows)
        assert len((tmp_path / "trajectory.csv").read_text().splitlines()) == 1 + commands.TRAJECTORY_SAMPLES
        assert read_summary(tmp_path / "summary.json").config["train"]["max_iter"] == 3

    def test_zero_iterations_is_baseline(self, tmp_path: Path) -> None:
        summary = cmd_train(4, _tiny(max_iter=0), tmp_path)
        rows = read_history_csv(tmp_path / "history.csv")
        assert len(rows) == 1
        assert rows[0]["loss"] is None
        assert summary.extra["best_iteration"] == 0

    def test_rerun_without_wall_clock_is_identical(self, tmp_path: Path) -> None:
        cmd_train(3, _tiny(seed=5), tmp_path / "a", wall_clock=False)
        cmd_train(3, _tiny(seed=5), tmp_path / "b", wall_clock=False)
        for name in ("history.csv", "trajectory.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        a = json.loads((tmp_path / "a" / "summary.json").read_text())
        b = json.loads((tmp_path / "b" / "summary.json").read_text())
        for doc in (a, b):
            doc.pop("wall_ms")
            doc.pop("paths")
        assert a == b

    def test_custom_initial_point(self, tmp_path: Path) -> None:
        summary = cmd_train(3, _tiny(max_iter=0), tmp_path, y0=[1.0, 2.0, 3.0, 4.0])
        assert summary.config["y0"] == [1.0, 2.0, 3.0, 4.0]
        first = (tmp_path / "trajectory.csv").read_text().splitlines()[1]
        assert first == "0.0,1.0,2.0,3.0,4.0"

    def test_wrong_initial_point_length(self, tmp_path: Path) -> None:
        with pytest.raises(UsageError):
            cmd_train(3, _tiny(), tmp_path, y0=[1.0, 2.0])


class TestIntegrate:
    def test_fixed_step_run(self, tmp_path: Path) -> None:
        summary = cmd_integrate(1, "rk4", tmp_path, step=0.01, t_final=1.0)
        assert summary.status == "completed"
        assert summary.epsilon is not None and math.isfinite(summary.epsilon)
        assert len((tmp_path / "trajectory.csv").read_text().splitlines()) == 102
        status = json.loads((tmp_path / "status.json").read_text())
        assert status["status"] == "completed"
        assert status["accepted_steps"] == 100
        assert summary.config["step"] == 0.01

    def test_failure_is_reported(self, tmp_path: Path) -> None:
        summary = cmd_integrate(1, "rk45", tmp_path, ctrl=StepControl(max_steps=3))
        assert summary.status == commands.FAIL_STATUS
        assert summary.epsilon is None
        assert summary.extra["trajectory_status"] == "step-limit"
        assert summary.extra["t_reached"] < 10.0
        assert "control" in summary.config

    def test_unknown_method(self, tmp_path: Path) -> None:
        with pytest.raises(UsageError):
            cmd_integrate(1, "leapfrog", tmp_path)

    def test_default_stride_caps_rows(self) -> None:
        assert default_stride(10.0, 1e-6) == 100
        assert default_stride(10.0, 0.0002) == 1
        assert default_stride(1.0, 0.01) == 1

    def test_fixed_step_thinned_without_stride(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(commands, "MAX_TRAJECTORY_ROWS", 10)
        summary = cmd_integrate(1, "rk4", tmp_path, step=0.01, t_final=1.0)
        assert summary.config["stride"] == 10
        assert summary.extra["accepted_steps"] == 100
        lines = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert len(lines) == 1 + 11
        assert lines[-1].startswith("1.0,")

    def test_explicit_stride_wins(self, tmp_path: Path) -> None:
        summary = cmd_integrate(1, "rk4", tmp_path, step=0.01, t_final=1.0, stride=50)
        assert summary.config["stride"] == 50
        assert len((tmp_path / "trajectory.csv").read_text().splitlines()) == 1 + 3


class TestCompare:
    def test_integrator_budgets(self) -> None:
        inst = load_example(2)
        eps = integrator_epsilons(inst, [0, 10, 100])
        assert list(eps) == [0, 10, 100]
        assert eps[0] == inst.metric().measure(inst.y0)[1]
        assert eps[100] < eps[0]

    def test_unreachable_budget_skipped(self) -> None:
        eps = integrator_epsilons(load_example(2), [0, 10], horizon=0.001)
        assert list(eps) == [0]

    def test_table_and_summary(self, tmp_path: Path) -> None:
        summary = cmd_compare(2, [0, 1], _tiny(max_iter=2, batch_size=4, hidden=3), tmp_path)
        lines = (tmp_path / "compare.csv").read_text().splitlines()
        assert lines[0] == "source,seed,budget,epsilon"
        assert len(lines) == 1 + 2 * 2 + 2
        assert lines[1].startswith("oinn,0,0,")
        assert lines[-1].startswith("integrator,,2,")
        assert (tmp_path / "seed-1" / "history.csv").is_file()
        assert set(summary.extra["oinn"]) == {"0", "2"}
        assert summary.epsilon == min(summary.extra["seed_epsilons"].values())

    def test_needs_seeds(self, tmp_path: Path) -> None:
        with pytest.raises(UsageError):
            cmd_compare(2, [], _tiny(), tmp_path)

    def test_needs_fixed_step_method(self, tmp_path: Path) -> None:
        with pytest.raises(UsageError):
            cmd_compare(2, [0], _tiny(), tmp_path, method="rk45")


class TestSweep:
    def test_stored_initial_points(self) -> None:
        cells = sweep_cells(load_example(3), "initial_point", [])
        assert [label for label, _, _ in cells] == [
            "[1.0, 2.0, 3.0, 4.0]",
            "[-10.0, -15.0, -10.0, -14.0]",
            "[20.0, 0.0, 0.0, 8.0]",
        ]

    def test_time_range_values(self) -> None:
        cells = sweep_cells(load_example(3), "time_range", ["5", "8.5"])
        assert cells == [("5.0", None, 5.0), ("8.5", None, 8.5)]

    def test_rejected_values(self) -> None:
        with pytest.raises(UsageError):
            sweep_cells(load_example(3), "learning_rate", [])
        with pytest.raises(UsageError):
            sweep_cells(load_example(1), "time_range", [])
        with pytest.raises(UsageError):
            sweep_cells(load_example(3), "initial_point", ["[1,2]"])
        with pytest.raises(UsageError):
            sweep_cells(load_example(3), "time_range", ["-1"])

    def test_cells_and_pivot(self, tmp_path: Path) -> None:
        summary = cmd_sweep(3, "time_range", ["1.0", "2.0"], _tiny(max_iter=1, batch_size=4, hidden=3), tmp_path)
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "cell,axis,value,seed,iteration,epsilon_best"
        assert len(lines) == 1 + 2 * 2
        assert lines[3].startswith("1,time_range,2.0,0,0,")
        assert read_summary(tmp_path / "cell-01" / "summary.json").extra["horizon"] == 2.0
        assert [cell["value"] for cell in summary.extra["cells"]] == ["1.0", "2.0"]


@pytest.fixture
def custom_examples(monkeypatch: pytest.MonkeyPatch) -> Iterator[None]:
    """Registriert zwei eigene Beispiele: eines mit Nummer 4, eines mit neuer Nummer 7."""
    monkeypatch.setattr(benchmarks, "_custom", {})
    register_example("half-ncp", lambda: replace(load_example(4), name="half-ncp", y0=np.full(3, 0.5)))
    register_example("seven", lambda: replace(load_example(2), id=7, name="seven", y0=np.ones(4)))
    yield
    benchmarks._load.cache_clear()


@pytest.mark.usefixtures("custom_examples")
class TestCustomExample:
    def test_train_uses_registered_instance(self, tmp_path: Path) -> None:
        summary = cmd_train("half-ncp", _tiny(max_iter=0), tmp_path)
        assert summary.example == 4
        assert summary.config["example"] == "half-ncp"
        assert summary.config["y0"] == [0.5, 0.5, 0.5]
        assert (tmp_path / "trajectory.csv").read_text().splitlines()[1] == "0.0,0.5,0.5,0.5"

    def test_integrate_example_with_new_number(self, tmp_path: Path) -> None:
        summary = cmd_integrate("seven", "rk4", tmp_path, step=0.01, t_final=0.1)
        assert summary.example == 7
        assert summary.config["example"] == "seven"
        assert (tmp_path / "trajectory.csv").read_text().splitlines()[1] == "0.0,1.0,1.0,1.0,1.0"

    def test_compare_jobs_keep_the_name(self, tmp_path: Path) -> None:
        summary = cmd_compare("half-ncp", [0], _tiny(max_iter=0), tmp_path)
        assert summary.config["example"] == "half-ncp"
        seed_summary = read_summary(tmp_path / "seed-0" / "summary.json")
        assert seed_summary.config["y0"] == [0.5, 0.5, 0.5]

    def test_workers_fall_back_without_fork(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        def no_pool(*args: object, **kwargs: object) -> None:
            raise AssertionError("custom examples must not reach worker processes")

        monkeypatch.setattr(commands.multiprocessing, "get_start_method", lambda: "spawn")
        monkeypatch.setattr(commands, "ProcessPoolExecutor", no_pool)
        jobs = [TrainJob("half-ncp", _tiny(seed=s, max_iter=0).to_dict(), str(tmp_path / str(s))) for s in (0, 1)]
        results = run_jobs(jobs, 2)
        assert [s.config["example"] for s, _ in results] == ["half-ncp", "half-ncp"]


@pytest.mark.slow
class TestAcceptance:
    @pytest.mark.parametrize("example", [1, 2, 3, 4, 5])
    def test_adaptive_integration_reaches_reference(self, tmp_path: Path, example: int) -> None:
        summary = cmd_integrate(example, "rk45", tmp_path)
        assert summary.status == "completed"
        assert np.max(np.abs(np.array(summary.best_solution) - load_example(example).reference)) <= 0.05
        assert verify_reference(load_example(example), summary.best_solution).passed

    def test_fixed_step_integration_of_quadratic_program(self, tmp_path: Path) -> None:
        summary = cmd_integrate(1, "rk4", tmp_path, step=0.0002, stride=500)
        assert np.max(np.abs(np.array(summary.best_solution) - load_example(1).reference)) <= 0.05

    def test_pseudoconvex_completes_or_fails_cleanly(self, tmp_path: Path) -> None:
        summary = cmd_integrate(6, "rk45", tmp_path)
        assert "nan" not in (tmp_path / "trajectory.csv").read_text()
        if summary.status == commands.FAIL_STATUS:
            summary = cmd_integrate(6, "rk45", tmp_path / "tight", ctrl=StepControl(rtol=1e-9, atol=1e-12, max_step=1e-3))
        assert np.max(np.abs(np.array(summary.best_solution) - load_example(6).reference)) <= 0.05

    def test_complementarity_training_best_of_three(self, tmp_path: Path) -> None:
        cfg = TrainConfig(max_iter=1000)
        best = min(cmd_train(4, replace(cfg, seed=s), tmp_path / str(s)).epsilon or math.inf for s in range(3))
        assert best <= 0.01

    @pytest.mark.parametrize(("example", "limit"), [(2, 0.05), (3, 0.05)])
    def test_training_to_ten_thousand(self, tmp_path: Path, example: int, limit: float) -> None:
        cfg = TrainConfig(max_iter=10000, cadence=10)
        best = min(cmd_train(example, replace(cfg, seed=s), tmp_path / str(s)).epsilon or math.inf for s in range(3))
        assert best <= limit

    def test_convex_nonsmooth_objective(self, tmp_path: Path) -> None:
        summary = cmd_compare(5, [0, 1, 2], TrainConfig(max_iter=10000, cadence=10), tmp_path, jobs=3)
        assert summary.epsilon is not None
        assert abs(summary.epsilon - 39.02) <= 0.1

    def test_oinn_beats_integrator_at_matched_budgets(self, tmp_path: Path) -> None:
        summary = cmd_compare(4, [0, 1, 2], TrainConfig(max_iter=1000), tmp_path, jobs=3)
        for budget in ("100", "1000"):
            assert summary.extra["oinn"][budget] < summary.extra["integrator"][budget]

    def test_parallel_jobs_match_sequential(self, tmp_path: Path) -> None:
        jobs = [
            TrainJob(2, _tiny(seed=s, max_iter=2).to_dict(), str(tmp_path / f"{mode}-{s}"), wall_clock=False)
            for mode in ("seq", "par")
            for s in (0, 1)
        ]
        sequential = run_jobs(jobs[:2], 1)
        parallel = run_jobs(jobs[2:], 2)
        for (a, _), (b, _) in zip(sequential, parallel, strict=True):
            assert a.epsilon == b.epsilon
            assert np.array_equal(a.best_solution, b.best_solution)
