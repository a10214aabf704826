"""Implementierung der Unterbefehle train, integrate, compare und sweep.

Jeder Befehl schreibt seine Dateien in ein Ausgabeverzeichnis und liefert
eine `RunSummary`, die auch als ``summary.json`` abgelegt wird. Die
Argumentverarbeitung liegt in ``__main__``.
"""

from __future__ import annotations

import json
import logging
import math
import multiprocessing
import re
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from ..errors import NonFiniteLossError, UsageError
from ..i18n import t as tr
from ..models.config import StepControl, TrainConfig
from ..models.oinn_model import OinnModel, init_params, predict_trajectory, save_checkpoint, seeded_rng
from ..models.run_result import HistoryRow, RunSummary, TrainReport
from ..models.trajectory import Trajectory
from . import reporter
from .benchmarks import ExampleInstance, load_example, resolve_key
from .integrators import (
    ADAPTIVE_METHODS,
    FIXED_METHODS,
    fixed_step_count,
    integrate_adaptive,
    integrate_fixed,
    state_at_step,
)
from .trainer import train

logger = logging.getLogger(__name__)

DEFAULT_STEP = 0.0002
COMPARE_BUDGETS = (0, 10, 100, 1000, 10000, 50000)
SWEEP_AXES = ("initial_point", "time_range")
TRAJECTORY_SAMPLES = 101
MAX_TRAJECTORY_ROWS = 100_000
FAIL_STATUS = "Fail"

HISTORY_CSV = "history.csv"
CHECKPOINT = "checkpoint.npz"
TRAJECTORY_CSV = "trajectory.csv"
SUMMARY_JSON = "summary.json"
STATUS_JSON = "status.json"
COMPARE_CSV = "compare.csv"
SWEEP_CSV = "sweep.csv"

Log = Callable[[str], None]


# --- Hilfsfunktionen ---


def parse_vector(text: str, n: int | None = None) -> np.ndarray:
    """Liest ein Vektor-Literal wie ``[1,2,3,4]`` oder ``1 2 3 4``.

    Raises:
        UsageError: Leeres, nicht numerisches oder falsch langes Literal.
    """
    body = text.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    parts = [p for p in re.split(r"[,\s]+", body.strip()) if p]
    if not parts:
        raise UsageError(f"malformed vector literal '{text}'")
    try:
        values = np.array([float(p) for p in parts])
    except ValueError as exc:
        raise UsageError(f"malformed vector literal '{text}'") from exc
    if not np.all(np.isfinite(values)):
        raise UsageError(f"vector literal '{text}' contains non-finite values")
    if n is not None and values.shape[0] != n:
        raise UsageError(f"vector literal '{text}' has {values.shape[0]} components, expected {n}")
    return values


def parse_positive(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise UsageError(f"not a number: '{text}'") from exc
    if not (value > 0 and math.isfinite(value)):
        raise UsageError(f"value must be positive and finite, got {text}")
    return value


def epsilon_best_at(history: Sequence[HistoryRow], budget: int) -> float:
    """Bestes Epsilon, das bis einschliesslich Iteration `budget` erreicht wurde."""
    best = math.inf
    for row in history:
        if row.iteration > budget:
            break
        best = row.epsilon_best
    return best


def budgets_for(max_iter: int) -> list[int]:
    budgets = [b for b in COMPARE_BUDGETS if b <= max_iter]
    if max_iter not in budgets:
        budgets.append(max_iter)
    return budgets


def default_stride(t_final: float, h: float) -> int:
    """Kleinster Stride, mit dem die Festschritt-Trajektorie hoechstens ``MAX_TRAJECTORY_ROWS`` Schritte speichert."""
    return max(1, math.ceil(fixed_step_count(t_final, h) / MAX_TRAJECTORY_ROWS))


def _elapsed_ms(started: float) -> float:
    return (time.perf_counter() - started) * 1000.0


def _paths(out_dir: Path, *names: str) -> dict[str, str]:
    return {name: str(out_dir / name) for name in names}


# --- train ---


@dataclass(frozen=True)
class TrainJob:
    """Ein Trainingslauf als picklebarer Auftrag fuer Worker-Prozesse."""

    example: int | str
    config: dict[str, Any]
    out_dir: str
    y0: tuple[float, ...] | None = None
    wall_clock: bool = True


def run_training(
    inst: ExampleInstance,
    cfg: TrainConfig,
    out_dir: Path,
    *,
    y0: ArrayLike | None = None,
    wall_clock: bool = True,
    key: int | str | None = None,
    on_row: Callable[[HistoryRow], None] | None = None,
    log: Log | None = None,
) -> tuple[RunSummary, TrainReport]:
    """Trainiert ein Beispiel und schreibt history.csv, checkpoint.npz, trajectory.csv, summary.json.

    `key` ist der Registerschluessel fuer die Summary (Nummer oder eigener
    Name); ohne Angabe gilt ``inst.id``.

    Raises:
        NonFiniteLossError: Nach dem Schreiben einer Summary mit Status ``non-finite-loss``.
    """
    cfg.validate()
    start = inst.y0 if y0 is None else np.asarray(y0, dtype=np.float64)
    if start.shape != (inst.n,):
        raise UsageError(f"initial point has {start.shape[0]} components, example {inst.id} expects {inst.n}")
    horizon = cfg.horizon if cfg.horizon is not None else inst.horizon
    f = inst.field_for(start)
    m0 = OinnModel(init_params(inst.n, cfg.hidden, seeded_rng(cfg.seed)), start, horizon)
    metric = inst.metric(cfg.alpha, cfg.feas_tol)

    out_dir.mkdir(parents=True, exist_ok=True)
    config = {
        "example": inst.id if key is None else key,
        "y0": [float(v) for v in start],
        "train": cfg.to_dict(),
        "wall_clock": wall_clock,
    }
    paths = _paths(out_dir, HISTORY_CSV, CHECKPOINT, TRAJECTORY_CSV, SUMMARY_JSON)
    started = time.perf_counter()
    logger.info("Training Beispiel %d (seed %d, %d Iterationen) nach %s", inst.id, cfg.seed, cfg.max_iter, out_dir)

    with reporter.HistoryCsvWriter(out_dir / HISTORY_CSV, wall_clock) as writer:

        def emit(row: HistoryRow) -> None:
            writer.write(row)
            if on_row:
                on_row(row)

        try:
            report = train(
                inst.problem,
                f,
                m0,
                cfg,
                metric=metric,
                checkpoint_path=out_dir / CHECKPOINT if cfg.checkpoint_every_best else None,
                on_row=emit,
                log=log,
            )
        except NonFiniteLossError as exc:
            failed = RunSummary(
                command="train",
                example=inst.id,
                seed=cfg.seed,
                config=config,
                status="non-finite-loss",
                wall_ms=_elapsed_ms(started),
                paths=_paths(out_dir, HISTORY_CSV, SUMMARY_JSON),
                extra={"iteration": exc.iteration, "param_norm": exc.param_norm},
            )
            reporter.write_summary(out_dir / SUMMARY_JSON, failed)
            raise

    if not cfg.checkpoint_every_best:
        save_checkpoint(out_dir / CHECKPOINT, report.best_model)
    times = np.linspace(0.0, horizon, TRAJECTORY_SAMPLES)
    reporter.write_trajectory_csv(out_dir / TRAJECTORY_CSV, times, predict_trajectory(report.best_model, times))

    summary = RunSummary(
        command="train",
        example=inst.id,
        seed=cfg.seed,
        config=config,
        epsilon=report.epsilon_best,
        best_solution=[float(v) for v in report.best_prediction],
        wall_ms=_elapsed_ms(started),
        paths=paths,
        extra={
            "epsilon_kind": inst.epsilon_kind.value,
            "best_iteration": report.best_iteration,
            "horizon": horizon,
            "reference": [float(v) for v in inst.oinn_reference],
        },
    )
    reporter.write_summary(out_dir / SUMMARY_JSON, summary)
    return summary, report


def cmd_train(
    example: int | str,
    cfg: TrainConfig,
    out_dir: Path,
    *,
    y0: ArrayLike | None = None,
    wall_clock: bool = True,
    on_row: Callable[[HistoryRow], None] | None = None,
    log: Log | None = None,
) -> RunSummary:
    """Unterbefehl ``train``."""
    key = resolve_key(example)
    inst = load_example(key)
    return run_training(inst, cfg, out_dir, y0=y0, wall_clock=wall_clock, key=key, on_row=on_row, log=log)[0]


def _run_job(job: TrainJob) -> tuple[RunSummary, list[HistoryRow]]:
    inst = load_example(job.example)
    cfg = TrainConfig.from_dict(job.config)
    summary, report = run_training(
        inst, cfg, Path(job.out_dir), y0=job.y0, wall_clock=job.wall_clock, key=job.example
    )
    return summary, report.history


def run_jobs(jobs: Sequence[TrainJob], workers: int = 1) -> list[tuple[RunSummary, list[HistoryRow]]]:
    """Fuehrt Trainingsauftraege aus; das Ergebnis ist nach Auftragsindex geordnet.

    Eigene Beispiele (``register_example``) existieren nur im Elternprozess.
    Ohne ``fork`` als Startmethode laufen solche Auftraege daher sequentiell.
    """
    if workers < 1:
        raise UsageError(f"--jobs must be at least 1, got {workers}")
    if workers > 1 and any(isinstance(job.example, str) for job in jobs):
        if multiprocessing.get_start_method() != "fork":
            logger.warning("Eigenes Beispiel: Worker-Prozesse kennen es nicht, Auftraege laufen sequentiell")
            workers = 1
    if workers == 1 or len(jobs) <= 1:
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_job, jobs))


# --- integrate ---


def run_integration(
    inst: ExampleInstance,
    method: str,
    *,
    step: float | None = None,
    ctrl: StepControl | None = None,
    t_final: float | None = None,
    y0: ArrayLike | None = None,
    stride: int | None = None,
    log: Log | None = None,
) -> Trajectory:
    """Integriert ein Beispiel; ohne `stride` wird auf hoechstens ``MAX_TRAJECTORY_ROWS`` Zeilen ausgeduennt."""
    start = inst.y0 if y0 is None else np.asarray(y0, dtype=np.float64)
    horizon = t_final if t_final is not None else inst.horizon
    f = inst.field_for(start)
    if method in FIXED_METHODS:
        h = step or DEFAULT_STEP
        if stride is None:
            stride = default_stride(horizon, h)
        return integrate_fixed(f, start, horizon, h, method, stride=stride, log=log)
    if method in ADAPTIVE_METHODS:
        return integrate_adaptive(f, start, horizon, ctrl, method, log=log)
    raise UsageError(f"unknown method '{method}' (choose from {', '.join(FIXED_METHODS + ADAPTIVE_METHODS)})")


def cmd_integrate(
    example: int | str,
    method: str,
    out_dir: Path,
    *,
    step: float | None = None,
    ctrl: StepControl | None = None,
    t_final: float | None = None,
    y0: ArrayLike | None = None,
    stride: int | None = None,
    log: Log | None = None,
) -> RunSummary:
    """Unterbefehl ``integrate``: Trajektorie, Statusdatei und projizierter Endpunkt.

    Ein Abbruch (Schrittweite zu klein, Schrittlimit, nicht-endlicher Zustand)
    wird als Status ``Fail`` in der Summary vermerkt.
    """
    key = resolve_key(example)
    inst = load_example(key)
    ctrl = ctrl or StepControl()
    started = time.perf_counter()
    traj = run_integration(inst, method, step=step, ctrl=ctrl, t_final=t_final, y0=y0, stride=stride, log=log)

    out_dir.mkdir(parents=True, exist_ok=True)
    reporter.write_trajectory(out_dir / TRAJECTORY_CSV, traj)
    reporter.write_status_sidecar(out_dir / STATUS_JSON, traj)

    config: dict[str, Any] = {
        "example": key,
        "method": method,
        "t_final": t_final if t_final is not None else inst.horizon,
        "y0": [float(v) for v in (inst.y0 if y0 is None else np.asarray(y0, dtype=np.float64))],
        "stride": traj.stride,
    }
    if method in FIXED_METHODS:
        config["step"] = step or DEFAULT_STEP
    else:
        config["control"] = ctrl.to_dict()

    extra: dict[str, Any] = {
        "trajectory_status": traj.status.value,
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "evaluations": traj.evaluations,
        "epsilon_kind": inst.epsilon_kind.value,
        "reference": [float(v) for v in inst.reference],
    }
    if traj.status.failed:
        logger.warning("Integration von Beispiel %d fehlgeschlagen: %s", inst.id, traj.status.value)
        summary = RunSummary(
            command="integrate",
            example=inst.id,
            seed=None,
            config=config,
            status=FAIL_STATUS,
            wall_ms=_elapsed_ms(started),
            paths=_paths(out_dir, TRAJECTORY_CSV, STATUS_JSON, SUMMARY_JSON),
            extra={**extra, "t_reached": float(traj.times[-1])},
        )
    else:
        prediction, eps = inst.metric().measure(traj.states[-1])
        summary = RunSummary(
            command="integrate",
            example=inst.id,
            seed=None,
            config=config,
            epsilon=eps,
            best_solution=[float(v) for v in prediction],
            wall_ms=_elapsed_ms(started),
            paths=_paths(out_dir, TRAJECTORY_CSV, STATUS_JSON, SUMMARY_JSON),
            extra=extra,
        )
    reporter.write_summary(out_dir / SUMMARY_JSON, summary)
    return summary


# --- compare ---


def integrator_epsilons(
    inst: ExampleInstance,
    budgets: Sequence[int],
    *,
    step: float = DEFAULT_STEP,
    method: str = "rk4",
    horizon: float | None = None,
    log: Log | None = None,
) -> dict[int, float]:
    """Epsilon des Festschrittverfahrens nach `b` Kollokationspunkten je Budget.

    Budgets jenseits von T/h oder hinter einem Abbruch fehlen im Ergebnis.
    """
    metric = inst.metric()
    t_end = horizon if horizon is not None else inst.horizon
    reachable = [b for b in budgets if b * step <= t_end * (1.0 + 1e-12)]
    result: dict[int, float] = {}
    if not reachable:
        return result
    if max(reachable) == 0:
        return {0: metric.measure(inst.y0)[1]}
    traj = integrate_fixed(inst.vector_field, inst.y0, max(reachable) * step, step, method, log=log)
    for b in reachable:
        if b > traj.accepted_steps:
            logger.warning("Budget %d nicht erreicht (%s nach %d Schritten)", b, traj.status.value, traj.accepted_steps)
            continue
        result[b] = metric.measure(state_at_step(traj, b))[1]
    return result


def cmd_compare(
    example: int | str,
    seeds: Sequence[int],
    cfg: TrainConfig,
    out_dir: Path,
    *,
    step: float = DEFAULT_STEP,
    method: str = "rk4",
    jobs: int = 1,
    wall_clock: bool = True,
    log: Log | None = None,
) -> RunSummary:
    """Unterbefehl ``compare``: OINN (bestes von mehreren Seeds) gegen Festschrittintegration.

    Budgets sind Iterationen fuer das Training und Kollokationspunkte fuer den Integrator.

    Raises:
        UsageError: Keine Seeds angegeben oder unbekanntes Verfahren.
    """
    if not seeds:
        raise UsageError("compare needs at least one seed")
    if method not in FIXED_METHODS:
        raise UsageError(f"compare uses a fixed-step method ({', '.join(FIXED_METHODS)}), got '{method}'")
    key = resolve_key(example)
    inst = load_example(key)
    cfg.validate()
    started = time.perf_counter()
    budgets = budgets_for(cfg.max_iter)

    train_jobs = [
        TrainJob(key, replace(cfg, seed=seed).to_dict(), str(out_dir / f"seed-{seed}"), wall_clock=wall_clock)
        for seed in seeds
    ]
    results = run_jobs(train_jobs, jobs)
    numeric = integrator_epsilons(inst, budgets, step=step, method=method, horizon=cfg.horizon, log=log)

    rows: list[tuple[str, int | None, int, float]] = []
    for seed, (_, history) in zip(seeds, results, strict=True):
        rows.extend(("oinn", seed, b, epsilon_best_at(history, b)) for b in budgets)
    rows.extend(("integrator", None, b, eps) for b, eps in numeric.items())
    reporter.write_compare_csv(out_dir / COMPARE_CSV, rows)

    oinn_best = {b: min(epsilon_best_at(history, b) for _, history in results) for b in budgets}
    best_summary = min((s for s, _ in results), key=_epsilon_key)
    if log:
        for b in budgets:
            numeric_eps = numeric.get(b)
            log(
                tr(
                    "compare.row",
                    budget=b,
                    oinn=f"{oinn_best[b]:.4g}",
                    numeric="-" if numeric_eps is None else f"{numeric_eps:.4g}",
                )
            )

    summary = RunSummary(
        command="compare",
        example=inst.id,
        seed=best_summary.seed,
        config={
            "example": key,
            "seeds": list(seeds),
            "train": cfg.to_dict(),
            "wall_clock": wall_clock,
            "step": step,
            "method": method,
        },
        epsilon=best_summary.epsilon,
        best_solution=best_summary.best_solution,
        wall_ms=_elapsed_ms(started),
        paths={**_paths(out_dir, COMPARE_CSV, SUMMARY_JSON), **{f"seed-{s.seed}": str(out_dir / f"seed-{s.seed}") for s, _ in results}},
        extra={
            "epsilon_kind": inst.epsilon_kind.value,
            "oinn": {str(b): _json_number(v) for b, v in oinn_best.items()},
            "integrator": {str(b): _json_number(v) for b, v in numeric.items()},
            "seed_epsilons": {str(s.seed): _json_number(s.epsilon) for s, _ in results},
        },
    )
    reporter.write_summary(out_dir / SUMMARY_JSON, summary)
    return summary


def _epsilon_key(summary: RunSummary) -> float:
    return summary.epsilon if summary.epsilon is not None else math.inf


def _json_number(value: float | None) -> float | str | None:
    if value is None or math.isfinite(value):
        return value
    return str(value)


# --- sweep ---


def sweep_cells(inst: ExampleInstance, axis: str, values: Sequence[str]) -> list[tuple[str, np.ndarray | None, float | None]]:
    """Zerlegt die Sweep-Werte in Zellen (Anzeigewert, Startpunkt, Horizont).

    Ohne Werte werden die hinterlegten Sweep-Werte des Beispiels verwendet.

    Raises:
        UsageError: Unbekannte Achse, fehlende Werte oder fehlerhaftes Literal.
    """
    if axis not in SWEEP_AXES:
        raise UsageError(f"unknown sweep axis '{axis}' (choose from {', '.join(SWEEP_AXES)})")
    if not values:
        stored = inst.sweeps.get(axis)
        if not stored:
            raise UsageError(f"example {inst.id} has no stored values for axis '{axis}'; pass --values")
        values = [json.dumps(v) for v in stored]
    cells: list[tuple[str, np.ndarray | None, float | None]] = []
    for text in values:
        if axis == "initial_point":
            vector = parse_vector(text, inst.n)
            cells.append((json.dumps([float(v) for v in vector]), vector, None))
        else:
            horizon = parse_positive(text)
            cells.append((repr(horizon), None, horizon))
    return cells


def cmd_sweep(
    example: int | str,
    axis: str,
    values: Sequence[str],
    cfg: TrainConfig,
    out_dir: Path,
    *,
    jobs: int = 1,
    wall_clock: bool = True,
    log: Log | None = None,
) -> RunSummary:
    """Unterbefehl ``sweep``: ein Training pro Wert der Achse, plus Pivot-Tabelle."""
    key = resolve_key(example)
    inst = load_example(key)
    cfg.validate()
    cells = sweep_cells(inst, axis, values)
    started = time.perf_counter()

    sweep_jobs = [
        TrainJob(
            key,
            replace(cfg, horizon=horizon if horizon is not None else cfg.horizon).to_dict(),
            str(out_dir / f"cell-{index:02d}"),
            y0=tuple(float(v) for v in vector) if vector is not None else None,
            wall_clock=wall_clock,
        )
        for index, (_, vector, horizon) in enumerate(cells)
    ]
    results = run_jobs(sweep_jobs, jobs)

    budgets = budgets_for(cfg.max_iter)
    rows = [
        (index, axis, label, cfg.seed, b, epsilon_best_at(history, b))
        for index, ((label, _, _), (_, history)) in enumerate(zip(cells, results, strict=True))
        for b in budgets
    ]
    reporter.write_sweep_csv(out_dir / SWEEP_CSV, rows)
    if log:
        for (label, _, _), (cell_summary, _) in zip(cells, results, strict=True):
            log(tr("sweep.cell", axis=axis, value=label, epsilon=f"{cell_summary.epsilon:.4g}"))

    best_index = min(range(len(results)), key=lambda i: _epsilon_key(results[i][0]))
    best = results[best_index][0]
    summary = RunSummary(
        command="sweep",
        example=inst.id,
        seed=cfg.seed,
        config={
            "example": key,
            "axis": axis,
            "values": [label for label, _, _ in cells],
            "train": cfg.to_dict(),
            "wall_clock": wall_clock,
        },
        epsilon=best.epsilon,
        best_solution=best.best_solution,
        wall_ms=_elapsed_ms(started),
        paths={**_paths(out_dir, SWEEP_CSV, SUMMARY_JSON), **{f"cell-{i:02d}": str(out_dir / f"cell-{i:02d}") for i in range(len(cells))}},
        extra={
            "epsilon_kind": inst.epsilon_kind.value,
            "cells": [
                {"value": label, "epsilon": _json_number(s.epsilon), "best_iteration": s.extra.get("best_iteration")}
                for (label, _, _), (s, _) in zip(cells, results, strict=True)
            ],
        },
    )
    reporter.write_summary(out_dir / SUMMARY_JSON, summary)
    return summary
