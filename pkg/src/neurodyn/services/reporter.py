"""Ergebnisdateien: history.csv, trajectory.csv, summary.json, Vergleichs- und Sweep-Tabellen.

Alle CSV-Dateien haben feste Kopfzeilen, RFC-Quoting und LF-Zeilenenden.
Zahlen werden mit `repr` geschrieben (kuerzeste verlustfreie Darstellung).
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from types import TracebackType
from typing import IO, Any

import numpy as np

from ..models.run_result import HistoryRow, RunSummary
from ..models.trajectory import Trajectory

logger = logging.getLogger(__name__)

HISTORY_HEADER = ("iter", "loss", "epsilon", "wall_ms")
COMPARE_HEADER = ("source", "seed", "budget", "epsilon")
SWEEP_HEADER = ("cell", "axis", "value", "seed", "iteration", "epsilon_best")


def fmt(value: float | int | None) -> str:
    """Zahl fuer CSV; None wird zur leeren Zelle, inf/nan bleiben lesbar."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _writer(fh: IO[str]) -> Any:
    return csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)


class HistoryCsvWriter:
    """Schreibt history.csv zeilenweise und flusht nach jeder Zeile.

    Args:
        path: Zieldatei.
        wall_clock: False schreibt 0 in die Zeitspalte (bitgleiche Wiederholungen).
    """

    def __init__(self, path: Path, wall_clock: bool = True) -> None:
        self.path = path
        self.wall_clock = wall_clock
        self._fh: IO[str] | None = None
        self._csv: Any = None

    def __enter__(self) -> HistoryCsvWriter:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", encoding="utf-8", newline="")
        self._csv = _writer(self._fh)
        self._csv.writerow(HISTORY_HEADER)
        return self

    def write(self, row: HistoryRow) -> None:
        assert self._fh is not None
        wall_ms = row.wall_ms if self.wall_clock else 0.0
        self._csv.writerow((fmt(row.iteration), fmt(row.loss), fmt(row.epsilon), fmt(round(wall_ms, 3))))
        self._fh.flush()

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def write_history_csv(path: Path, rows: Iterable[HistoryRow], wall_clock: bool = True) -> Path:
    with HistoryCsvWriter(path, wall_clock) as writer:
        for row in rows:
            writer.write(row)
    return path


def read_history_csv(path: Path) -> list[dict[str, float | None]]:
    """Liest history.csv zurueck; leere Zellen werden zu None."""
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [{key: float(value) if value != "" else None for key, value in row.items()} for row in reader]


def write_trajectory_csv(path: Path, times: Sequence[float] | np.ndarray, states: np.ndarray) -> Path:
    """Schreibt ``t,y1..yn`` mit einer Zeile pro Stuetzstelle."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    n = states.shape[1]
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = _writer(fh)
        writer.writerow(["t", *(f"y{i + 1}" for i in range(n))])
        for t, state in zip(times, states, strict=True):
            writer.writerow([fmt(float(t)), *(fmt(float(v)) for v in state)])
    return path


def write_trajectory(path: Path, traj: Trajectory) -> Path:
    return write_trajectory_csv(path, traj.times, traj.states)


def write_json(path: Path, data: dict[str, Any]) -> Path:
    """JSON mit Einrueckung und abschliessendem LF."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    return path


def write_summary(path: Path, summary: RunSummary) -> Path:
    return write_json(path, summary.to_dict())


def read_summary(path: Path) -> RunSummary:
    return RunSummary.from_dict(json.loads(path.read_text(encoding="utf-8")))


def write_status_sidecar(path: Path, traj: Trajectory, extra: dict[str, Any] | None = None) -> Path:
    """Abschlussstatus einer Integration neben trajectory.csv."""
    data: dict[str, Any] = {
        "status": traj.status.value,
        "method": traj.method,
        "samples": len(traj),
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "evaluations": traj.evaluations,
        "step_size": traj.step_size,
        "stride": traj.stride,
        "t_end": float(traj.times[-1]) if len(traj) else None,
        "wall_ms": round(traj.wall_ms, 3),
    }
    if extra:
        data.update(extra)
    return write_json(path, data)


def write_compare_csv(path: Path, rows: Iterable[tuple[str, int | None, int, float]]) -> Path:
    """Langformat ``source,seed,budget,epsilon`` fuer OINN- und Integratorzeilen."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = _writer(fh)
        writer.writerow(COMPARE_HEADER)
        for source, seed, budget, epsilon in rows:
            writer.writerow([source, fmt(seed), fmt(budget), fmt(epsilon)])
    return path


def write_sweep_csv(path: Path, rows: Iterable[tuple[int, str, str, int, int, float]]) -> Path:
    """Pivot ueber alle Sweep-Zellen, sortiert nach Zellindex."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = _writer(fh)
        writer.writerow(SWEEP_HEADER)
        for cell, axis, value, seed, iteration, epsilon in rows:
            writer.writerow([fmt(cell), axis, value, fmt(seed), fmt(iteration), fmt(epsilon)])
    return path
