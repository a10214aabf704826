"""Konfiguration fuer Training und Schrittweitensteuerung.

Vorrang: Kommandozeile > ``--config`` JSON > Defaults aus dieser Datei.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, TypeVar

from ..errors import UsageError


@dataclass
class TrainConfig:
    """Hyperparameter des Trainings.

    Attributes:
        lr: Lernrate von ADAM.
        batch_size: Anzahl Zeitpunkte pro Iteration.
        max_iter: Maximale Anzahl Iterationen.
        gamma: Gewichtung e^{−γt} im Loss.
        seed: Seed fuer Initialisierung und Sampling.
        cadence: Epsilon wird alle `cadence` Iterationen berechnet.
        horizon: Zeithorizont T; None uebernimmt T des Beispiels.
        alpha: Schrittweite im NPE-Residuum.
        hidden: Breite der verdeckten Schicht.
        feas_tol: Toleranz fuer die Zulaessigkeit im Zielfunktions-Epsilon.
        checkpoint_every_best: Checkpoint bei jeder Epsilon-Verbesserung schreiben.
    """

    lr: float = 0.001
    batch_size: int = 512
    max_iter: int = 50000
    gamma: float = 0.5
    seed: int = 0
    cadence: int = 1
    horizon: float | None = None
    alpha: float = 1.0
    hidden: int = 100
    feas_tol: float = 1e-6
    checkpoint_every_best: bool = True

    def validate(self) -> None:
        """Prueft die Wertebereiche.

        Raises:
            UsageError: Ein Wert liegt ausserhalb seines Bereichs.
        """
        if not self.lr > 0:
            raise UsageError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise UsageError(f"batch size must be at least 1, got {self.batch_size}")
        if self.max_iter < 0:
            raise UsageError(f"max_iter must not be negative, got {self.max_iter}")
        if not self.gamma >= 0:
            raise UsageError(f"gamma must not be negative, got {self.gamma}")
        if self.cadence < 1:
            raise UsageError(f"cadence must be at least 1, got {self.cadence}")
        if self.horizon is not None and not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise UsageError(f"horizon must be positive and finite, got {self.horizon}")
        if not self.alpha > 0:
            raise UsageError(f"alpha must be positive, got {self.alpha}")
        if self.hidden < 1:
            raise UsageError(f"hidden width must be at least 1, got {self.hidden}")
        if not self.feas_tol > 0:
            raise UsageError(f"feasibility tolerance must be positive, got {self.feas_tol}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_dict(data: dict[str, Any]) -> TrainConfig:
        """Erstellt eine Konfiguration; fehlende Schluessel bekommen Defaults.

        Raises:
            UsageError: Unbekannte Schluessel.
        """
        return _from_dict(TrainConfig, data)


@dataclass
class StepControl:
    """Steuerung der adaptiven Integratoren.

    `max_step` None bedeutet: begrenzt durch T.
    """

    rtol: float = 1e-6
    atol: float = 1e-9
    min_step: float = 1e-12
    max_step: float | None = None
    safety: float = 0.9
    max_steps: int = 2_000_000

    def validate(self) -> None:
        for name in ("rtol", "atol", "min_step", "safety"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_step is not None and not self.min_step < self.max_step:
            raise UsageError(f"min_step ({self.min_step}) must be below max_step ({self.max_step})")
        if self.max_steps < 1:
            raise UsageError(f"max_steps must be at least 1, got {self.max_steps}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_dict(data: dict[str, Any]) -> StepControl:
        return _from_dict(StepControl, data)


T = TypeVar("T")


def _from_dict(cls: type[T], data: dict[str, Any]) -> T:
    known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
    unknown = set(data) - known
    if unknown:
        raise UsageError(f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}")
    return cls(**data)


def load_config_file(path: Path) -> dict[str, Any]:
    """Liest eine Konfigurationsdatei mit den Abschnitten ``train`` und ``control``.

    Eine ``summary.json`` wird ebenfalls akzeptiert; dann gilt ihr ``config``-Block.

    Raises:
        UsageError: Datei fehlt, ist kein JSON-Objekt oder hat unbekannte Abschnitte.
    """
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must contain a JSON object")
    if isinstance(data.get("config"), dict) and "command" in data:
        data = data["config"]
    return data


def merge_train_config(document: dict[str, Any], overrides: dict[str, Any]) -> TrainConfig:
    """Baut die TrainConfig: Flags (nicht None) > Datei > Defaults."""
    cfg = TrainConfig.from_dict(dict(document.get("train", {})))
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def merge_step_control(document: dict[str, Any], overrides: dict[str, Any]) -> StepControl:
    ctrl = StepControl.from_dict(dict(document.get("control", {})))
    for key, value in overrides.items():
        if value is not None:
            setattr(ctrl, key, value)
    ctrl.validate()
    return ctrl
