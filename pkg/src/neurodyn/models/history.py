"""Lauf-Historie fuer neurodyn.

Speichert vergangene Laeufe samt Konfiguration in ~/.neurodyn/history.json,
damit sie wiederholt werden koennen.
"""

from __future__ import annotations

import getpass
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)


@dataclass
class HistoryEntry:
    """Einzelner Lauf in der Historie.

    Attributes:
        command: Unterbefehl (``train``, ``integrate``, ``compare``, ``sweep``).
        example: Beispielnummer.
        timestamp: Zeitstempel im ISO-Format.
        user: Benutzername zum Zeitpunkt des Laufs.
        status: Abschlussstatus (``completed``, ``step-underflow``, ...).
        epsilon: Erreichtes Epsilon oder None.
        out_dir: Verzeichnis mit den Ergebnisdateien.
        config: Konfiguration, mit der der Lauf wiederholt werden kann.
    """

    command: str
    example: int
    timestamp: str = ""
    user: str = ""
    status: str = "completed"
    epsilon: float | None = None
    out_dir: str = ""
    config: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "example": self.example,
            "timestamp": self.timestamp,
            "user": self.user,
            "status": self.status,
            "epsilon": self.epsilon if self.epsilon is None or abs(self.epsilon) != float("inf") else str(self.epsilon),
            "out_dir": self.out_dir,
            "config": self.config,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> HistoryEntry:
        epsilon = data.get("epsilon")
        return HistoryEntry(
            command=data.get("command", ""),
            example=int(data.get("example", 0)),
            timestamp=data.get("timestamp", ""),
            user=data.get("user", ""),
            status=data.get("status", "completed"),
            epsilon=float(epsilon) if epsilon is not None else None,
            out_dir=data.get("out_dir", ""),
            config=data.get("config", {}),
        )

    def display_label(self) -> str:
        """Kompaktes Label, z.B. ``19.05.2026 20:58 | train | #4 | eps=0.0031``."""
        from ..i18n import format_datetime

        parts = [format_datetime(self.timestamp), self.command, f"#{self.example}"]
        if self.status != "completed":
            parts.append(self.status)
        if self.epsilon is not None:
            parts.append(f"eps={self.epsilon:.4g}")
        return " | ".join(parts)


class History:
    """Verwaltet die Lauf-Historie in ~/.neurodyn/history.json."""

    HISTORY_DIR = Path.home() / ".neurodyn"
    HISTORY_FILE = HISTORY_DIR / "history.json"
    MAX_ENTRIES = 50

    @staticmethod
    def load() -> list[HistoryEntry]:
        """Laedt die Historie (neueste zuerst); leer bei Fehler oder fehlender Datei."""
        if not History.HISTORY_FILE.is_file():
            return []

        try:
            data = json.loads(History.HISTORY_FILE.read_text(encoding="utf-8"))
            if not isinstance(data, list):
                return []
            return [HistoryEntry.from_dict(item) for item in data]
        except (OSError, ValueError, TypeError, AttributeError) as exc:
            logger.warning("History konnte nicht geladen werden: %s", exc)
            return []

    @staticmethod
    def save(entries: list[HistoryEntry]) -> None:
        try:
            History.HISTORY_DIR.mkdir(parents=True, exist_ok=True)
            History.HISTORY_FILE.write_text(
                json.dumps([entry.to_dict() for entry in entries], indent=2, ensure_ascii=False),
                encoding="utf-8",
            )
        except OSError as exc:
            logger.warning("History konnte nicht gespeichert werden: %s", exc)

    @staticmethod
    def add(entry: HistoryEntry) -> None:
        """Stellt einen Eintrag voran und kuerzt auf MAX_ENTRIES."""
        if not entry.timestamp:
            entry.timestamp = datetime.now().strftime("%Y-%m-%dT%H:%M:%S")
        if not entry.user:
            try:
                entry.user = getpass.getuser()
            except (OSError, KeyError):
                entry.user = "unknown"

        entries = History.load()
        entries.insert(0, entry)
        History.save(entries[: History.MAX_ENTRIES])
