"""Fehlerklassen fuer neurodyn.

Alle Fehler erben von `NeurodynError`, damit die CLI sie an einer Stelle
abfangen und in Exit-Codes uebersetzen kann.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .models.trajectory import TrajectoryStatus


class NeurodynError(Exception):
    """Basisklasse aller neurodyn-Fehler."""


class ShapeError(NeurodynError, ValueError):
    """Operanden-Shapes passen nicht zur Knotenart oder Dimensionen passen nicht zusammen."""


class BindingError(NeurodynError, KeyError):
    """Eine freie Eingabe oder ein Parameter ist nicht gebunden."""

    def __str__(self) -> str:
        # KeyError setzt die Meldung sonst in Anfuehrungszeichen
        return str(self.args[0]) if self.args else ""


class DualUsageError(NeurodynError):
    """Die Dual-Richtung ist nicht eindeutig (mehr als eine skalare Eingabe)."""


class FactorizationError(NeurodynError):
    """A·Aᵀ laesst sich nicht faktorisieren (A hat keinen vollen Zeilenrang)."""


class UsageError(NeurodynError):
    """Fehlerhafte Benutzereingabe (CLI-Argumente, Vektor-Literale, Beispiel-IDs)."""


class NonFiniteLossError(NeurodynError):
    """Der Batch-Loss ist NaN oder unendlich geworden."""

    def __init__(self, iteration: int, param_norm: float) -> None:
        super().__init__(f"non-finite loss at iteration {iteration} (parameter norm {param_norm:.6g})")
        self.iteration = iteration
        self.param_norm = param_norm

    def __reduce__(self) -> tuple[type[NonFiniteLossError], tuple[int, float]]:
        return type(self), (self.iteration, self.param_norm)


class EndpointUnavailableError(NeurodynError):
    """Die Trajektorie wurde nicht bis T integriert."""

    def __init__(self, status: TrajectoryStatus) -> None:
        super().__init__(f"trajectory endpoint unavailable (status: {status.value})")
        self.status = status

    def __reduce__(self) -> tuple[type[EndpointUnavailableError], tuple[TrajectoryStatus]]:
        return type(self), (self.status,)


class CheckpointFormatError(NeurodynError, ValueError):
    """Checkpoint-Datei fehlt ein Schluessel oder hat eine unbekannte Formatversion."""


class UnsupportedProblemError(NeurodynError, ValueError):
    """Die Umformung unterstuetzt diese Problemklasse nicht (z.B. Gleichungen im KKT-System)."""
