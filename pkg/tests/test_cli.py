"""Tests fuer die Kommandozeile (Exit-Codes, Konfiguration, Historie)."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from neurodyn.__main__ import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, run
from neurodyn.models.history import History
from neurodyn.models.settings import Settings

TINY = ["--iters", "2", "--batch", "4", "--hidden", "3", "--no-wall-clock"]


@pytest.fixture(autouse=True)
def home(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    state = tmp_path / "state"
    monkeypatch.setattr(Settings, "SETTINGS_DIR", state)
    monkeypatch.setattr(Settings, "SETTINGS_FILE", state / "settings.json")
    monkeypatch.setattr(History, "HISTORY_DIR", state)
    monkeypatch.setattr(History, "HISTORY_FILE", state / "history.json")
    return state


class TestList:
    def test_json(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert run(["list", "--json"]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert [item["id"] for item in data] == [1, 2, 3, 4, 5, 6]

    def test_table(self) -> None:
        assert run(["--lang", "en", "list"]) == EXIT_OK


class TestExitCodes:
    def test_unknown_option(self) -> None:
        assert run(["train", "--iters", "many"]) == EXIT_USAGE

    def test_unknown_example(self, tmp_path: Path) -> None:
        assert run(["train", "-e", "9", "-o", str(tmp_path / "out")]) == EXIT_USAGE

    def test_missing_example(self, tmp_path: Path) -> None:
        assert run(["train", "-o", str(tmp_path / "out")]) == EXIT_USAGE

    def test_malformed_vector(self, tmp_path: Path) -> None:
        assert run(["train", "-e", "3", "--y0", "[1,2,x,4]", "-o", str(tmp_path / "out")]) == EXIT_USAGE

    def test_empty_seed_list(self, tmp_path: Path) -> None:
        assert run(["compare", "-e", "2", "--seeds", "-o", str(tmp_path / "out")]) == EXIT_USAGE

    def test_invalid_learning_rate(self, tmp_path: Path) -> None:
        assert run(["train", "-e", "2", "--lr", "0", "-o", str(tmp_path / "out")]) == EXIT_USAGE

    def test_integration_failure(self, tmp_path: Path) -> None:
        out = tmp_path / "out"
        assert run(["integrate", "-e", "1", "-m", "rk45", "--max-steps", "3", "-o", str(out)]) == EXIT_NUMERICAL
        assert json.loads((out / "summary.json").read_text())["status"] == "Fail"


class TestRuns:
    def test_train_records_history(self, tmp_path: Path) -> None:
        out = tmp_path / "out"
        assert run(["train", "-e", "2", *TINY, "-o", str(out)]) == EXIT_OK
        assert (out / "summary.json").is_file()
        entries = History.load()
        assert entries[0].command == "train"
        assert entries[0].out_dir == str(out)
        assert run(["history"]) == EXIT_OK

    def test_rerun_from_summary_is_identical(self, tmp_path: Path) -> None:
        first, second = tmp_path / "first", tmp_path / "second"
        assert run(["train", "-e", "3", *TINY, "--seed", "4", "-o", str(first)]) == EXIT_OK
        assert run(["train", "--config", str(first / "summary.json"), "--no-wall-clock", "-o", str(second)]) == EXIT_OK
        assert (first / "history.csv").read_bytes() == (second / "history.csv").read_bytes()

    def test_rerun_keeps_disabled_wall_clock(self, tmp_path: Path) -> None:
        first, second = tmp_path / "first", tmp_path / "second"
        assert run(["train", "-e", "2", *TINY, "-o", str(first)]) == EXIT_OK
        assert json.loads((first / "summary.json").read_text())["config"]["wall_clock"] is False
        assert run(["train", "--config", str(first / "summary.json"), "-o", str(second)]) == EXIT_OK
        assert (first / "history.csv").read_bytes() == (second / "history.csv").read_bytes()

    def test_config_file_with_overrides(self, tmp_path: Path) -> None:
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"example": 4, "train": {"max_iter": 5, "batch_size": 4, "hidden": 3}}))
        out = tmp_path / "out"
        assert run(["train", "--config", str(cfg), "--iters", "1", "-o", str(out)]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        assert summary["example"] == 4
        assert summary["config"]["train"]["max_iter"] == 1

    def test_integrate_fixed_step(self, tmp_path: Path) -> None:
        out = tmp_path / "out"
        args = ["integrate", "-e", "2", "-m", "euler", "--step", "0.01", "--t-final", "0.5", "-o", str(out)]
        assert run(args) == EXIT_OK
        assert json.loads((out / "status.json").read_text())["accepted_steps"] == 50

    def test_default_output_directory(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv("NEURODYN_OUTPUT_DIR", str(tmp_path / "runs"))
        assert run(["integrate", "-e", "1", "-m", "rk4", "--step", "0.1", "--t-final", "1"]) == EXIT_OK
        created = list((tmp_path / "runs").iterdir())
        assert len(created) == 1
        assert created[0].name.startswith("integrate-ex1-")

    def test_language_is_persisted(self, home: Path) -> None:
        assert run(["--lang", "en", "history"]) == EXIT_OK
        assert Settings.load().language == "en"
