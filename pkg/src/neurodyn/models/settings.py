"""Persistente Einstellungen fuer neurodyn."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "NEURODYN_OUTPUT_DIR"


class Settings:
    """Persistente Einstellungen (Sprache, Ausgabeverzeichnis)."""

    SETTINGS_DIR = Path.home() / ".neurodyn"
    SETTINGS_FILE = SETTINGS_DIR / "settings.json"

    def __init__(self) -> None:
        self.language: str = "de"
        self.output_dir: str = "runs"

    def save(self) -> None:
        """Speichert die Einstellungen in eine JSON-Datei."""
        try:
            self.SETTINGS_DIR.mkdir(parents=True, exist_ok=True)
            data = {"language": self.language, "output_dir": self.output_dir}
            self.SETTINGS_FILE.write_text(json.dumps(data, indent=2), encoding="utf-8")
        except OSError as exc:
            logger.warning("Einstellungen konnten nicht gespeichert werden: %s", exc)

    @classmethod
    def load(cls) -> Settings:
        """Laedt die Einstellungen oder gibt Defaults zurueck.

        Eine kaputte Datei wird ignoriert (Warnung im Log).
        """
        settings = cls()
        if cls.SETTINGS_FILE.is_file():
            try:
                data = json.loads(cls.SETTINGS_FILE.read_text(encoding="utf-8"))
                settings.language = str(data.get("language", settings.language))
                settings.output_dir = str(data.get("output_dir", settings.output_dir))
            except (OSError, ValueError, AttributeError) as exc:
                logger.warning("Einstellungen konnten nicht geladen werden: %s", exc)
        return settings

    def resolve_output_dir(self, cli_value: str | None = None) -> Path:
        """Ausgabeverzeichnis: ``--out-dir`` > ``NEURODYN_OUTPUT_DIR`` > gespeicherter Wert."""
        if cli_value:
            return Path(cli_value)
        env = os.environ.get(OUTPUT_DIR_ENV)
        if env:
            return Path(env)
        return Path(self.output_dir)
