"""Tests fuer die Ergebnisdateien."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from neurodyn.models.run_result import HistoryRow, RunSummary
from neurodyn.models.trajectory import Trajectory, TrajectoryStatus
from neurodyn.services.reporter import (
    HistoryCsvWriter,
    fmt,
    read_history_csv,
    read_summary,
    write_compare_csv,
    write_history_csv,
    write_status_sidecar,
    write_summary,
    write_sweep_csv,
    write_trajectory_csv,
)


def _rows() -> list[HistoryRow]:
    return [
        HistoryRow(0, None, 2.5, 2.5, 0.0),
        HistoryRow(1, 0.125, 1.5, 1.5, 3.14159),
        HistoryRow(2, 0.0625, float("inf"), 1.5, 7.0),
    ]


class TestFmt:
    def test_values(self) -> None:
        assert fmt(None) == ""
        assert fmt(3) == "3"
        assert fmt(np.int64(4)) == "4"
        assert fmt(0.1) == "0.1"
        assert fmt(float("inf")) == "inf"


class TestHistoryCsv:
    def test_header_and_empty_loss(self, tmp_path: Path) -> None:
        path = write_history_csv(tmp_path / "history.csv", _rows())
        lines = path.read_text(encoding="utf-8").split("\n")
        assert lines[0] == "iter,loss,epsilon,wall_ms"
        assert lines[1] == "0,,2.5,0.0"
        assert lines[2] == "1,0.125,1.5,3.142"
        assert lines[-1] == ""
        assert "\r" not in path.read_text(encoding="utf-8")

    def test_without_wall_clock(self, tmp_path: Path) -> None:
        path = write_history_csv(tmp_path / "history.csv", _rows(), wall_clock=False)
        assert [row["wall_ms"] for row in read_history_csv(path)] == [0.0, 0.0, 0.0]

    def test_read_back(self, tmp_path: Path) -> None:
        rows = read_history_csv(write_history_csv(tmp_path / "history.csv", _rows()))
        assert rows[0]["loss"] is None
        assert rows[2]["epsilon"] == float("inf")
        assert [row["iter"] for row in rows] == [0.0, 1.0, 2.0]

    def test_rows_visible_while_open(self, tmp_path: Path) -> None:
        path = tmp_path / "history.csv"
        with HistoryCsvWriter(path) as writer:
            writer.write(_rows()[0])
            assert len(read_history_csv(path)) == 1


class TestTrajectoryCsv:
    def test_columns(self, tmp_path: Path) -> None:
        path = write_trajectory_csv(tmp_path / "t.csv", [0.0, 0.5], np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert path.read_text(encoding="utf-8") == "t,y1,y2\n0.0,1.0,2.0\n0.5,3.0,4.0\n"


class TestSummary:
    def test_round_trip_with_infinite_epsilon(self, tmp_path: Path) -> None:
        summary = RunSummary("train", 3, 7, {"train": {"lr": 0.001}}, epsilon=float("inf"), best_solution=[1.0, 2.0])
        path = write_summary(tmp_path / "summary.json", summary)
        text = path.read_text(encoding="utf-8")
        assert text.endswith("}\n")
        assert json.loads(text)["epsilon"] == "inf"
        loaded = read_summary(path)
        assert loaded.epsilon == float("inf")
        assert loaded.config == {"train": {"lr": 0.001}}
        assert loaded.seed == 7

    def test_status_sidecar(self, tmp_path: Path) -> None:
        traj = Trajectory(
            np.array([0.0, 0.1]),
            np.zeros((2, 1)),
            status=TrajectoryStatus.STEP_UNDERFLOW,
            method="rk45",
            accepted_steps=1,
            rejected_steps=4,
        )
        data = json.loads(write_status_sidecar(tmp_path / "status.json", traj, {"t_final": 10.0}).read_text())
        assert data["status"] == "step-underflow"
        assert data["samples"] == 2
        assert data["t_end"] == 0.1
        assert data["t_final"] == 10.0


class TestTables:
    def test_compare_rows(self, tmp_path: Path) -> None:
        path = write_compare_csv(tmp_path / "compare.csv", [("oinn", 0, 10, 0.5), ("integrator", None, 10, 1.25)])
        assert path.read_text(encoding="utf-8").splitlines() == [
            "source,seed,budget,epsilon",
            "oinn,0,10,0.5",
            "integrator,,10,1.25",
        ]

    def test_sweep_values_are_quoted(self, tmp_path: Path) -> None:
        path = write_sweep_csv(tmp_path / "sweep.csv", [(0, "initial_point", "[1.0, 2.0]", 0, 100, 0.25)])
        assert path.read_text(encoding="utf-8").splitlines()[1] == '0,initial_point,"[1.0, 2.0]",0,100,0.25'
