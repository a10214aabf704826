"""Trajektorien eines Integrators oder eines trainierten Modells."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class TrajectoryStatus(Enum):
    """Abschlussstatus einer Integration."""

    COMPLETED = "completed"
    STEP_UNDERFLOW = "step-underflow"
    NON_FINITE_STATE = "non-finite-state"
    STEP_LIMIT = "step-limit"  # zu viele Schritte (akzeptiert + verworfen)

    @property
    def failed(self) -> bool:
        return self is not TrajectoryStatus.COMPLETED


@dataclass(eq=False)
class Trajectory:
    """Geordnete (t, y)-Stuetzstellen.

    Attributes:
        times: Streng steigende Zeiten, beginnend bei 0.
        states: Zustaende, Form ``(len(times), n)``.
        status: Abschlussstatus.
        method: Name des Verfahrens (``euler``, ``rk4``, ``rk45``, ``rk23``).
        accepted_steps: Anzahl akzeptierter Schritte (auch bei Ausduennung).
        rejected_steps: Verworfene Schritte der Schrittweitensteuerung.
        evaluations: Anzahl der Feldauswertungen.
    """

    times: np.ndarray
    states: np.ndarray
    status: TrajectoryStatus = TrajectoryStatus.COMPLETED
    method: str = ""
    accepted_steps: int = 0
    rejected_steps: int = 0
    evaluations: int = 0
    step_size: float | None = None
    stride: int = 1
    wall_ms: float = field(default=0.0)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def n(self) -> int:
        return int(self.states.shape[1])
