"""Ergebnisse von Trainings- und Integrationslaeufen."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .oinn_model import MlpParams, OinnModel


@dataclass(frozen=True)
class HistoryRow:
    """Eine Zeile der Trainings-Historie.

    `loss` ist bei Iteration 0 (untrainiertes Modell) leer.
    """

    iteration: int
    loss: float | None
    epsilon: float
    epsilon_best: float
    wall_ms: float


@dataclass(eq=False)
class TrainReport:
    """Epsilon-bestes Ergebnis eines Trainings samt Verlauf.

    Attributes:
        epsilon_best: Kleinstes gemessenes Epsilon.
        best_params: Parameter zum besten Epsilon.
        best_prediction: Projizierter Endpunkt zum besten Epsilon.
        best_iteration: Iteration, in der das beste Epsilon erreicht wurde.
        history: Zeilen in streng steigender Iteration.
        final_model: Modell nach der letzten Iteration.
    """

    epsilon_best: float
    best_params: MlpParams
    best_prediction: np.ndarray
    best_iteration: int
    history: list[HistoryRow]
    final_model: OinnModel

    @property
    def best_model(self) -> OinnModel:
        return self.final_model.with_params(self.best_params)


@dataclass
class RunSummary:
    """Inhalt von ``summary.json``.

    `config` enthaelt alles, was zum bitgenauen Wiederholen noetig ist.
    """

    command: str
    example: int
    seed: int | None
    config: dict[str, Any]
    status: str = "completed"
    epsilon: float | None = None
    best_solution: list[float] = field(default_factory=list)
    wall_ms: float = 0.0
    paths: dict[str, str] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "example": self.example,
            "seed": self.seed,
            "config": self.config,
            "status": self.status,
            "epsilon": _json_float(self.epsilon),
            "best_solution": [float(v) for v in self.best_solution],
            "wall_ms": round(self.wall_ms, 3),
            "paths": self.paths,
            "extra": self.extra,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> RunSummary:
        epsilon = data.get("epsilon")
        return RunSummary(
            command=data.get("command", ""),
            example=int(data.get("example", 0)),
            seed=data.get("seed"),
            config=data.get("config", {}),
            status=data.get("status", "completed"),
            epsilon=float(epsilon) if epsilon is not None else None,
            best_solution=list(data.get("best_solution", [])),
            wall_ms=float(data.get("wall_ms", 0.0)),
            paths=data.get("paths", {}),
            extra=data.get("extra", {}),
        )


def _json_float(value: float | None) -> float | str | None:
    """JSON kennt kein inf/nan; diese Werte werden als String abgelegt."""
    if value is None:
        return None
    if np.isfinite(value):
        return float(value)
    return str(float(value))
