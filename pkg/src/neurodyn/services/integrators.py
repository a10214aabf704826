"""Explizite Runge-Kutta-Integratoren fuer die neurodynamischen Anfangswertprobleme.

Feste Schrittweite: ``euler``, ``rk4``. Adaptiv mit eingebettetem Paar:
``rk45`` (Dormand-Prince 5(4)) und ``rk23`` (Bogacki-Shampine 3(2)).
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from ..errors import EndpointUnavailableError, UsageError
from ..i18n import t as tr
from ..models.config import StepControl
from ..models.trajectory import Trajectory, TrajectoryStatus
from ..models.vector_field import VectorField

logger = logging.getLogger(__name__)

FIXED_METHODS = ("euler", "rk4")
ADAPTIVE_METHODS = ("rk45", "rk23")


@dataclass(frozen=True)
class Tableau:
    """Butcher-Tableau; `b_low` nur bei eingebetteten Paaren."""

    c: tuple[float, ...]
    a: tuple[tuple[float, ...], ...]
    b: tuple[float, ...]
    b_low: tuple[float, ...] | None = None
    error_order: int = 0
    fsal: bool = False

    @property
    def stages(self) -> int:
        return len(self.c)


EULER = Tableau(c=(0.0,), a=(), b=(1.0,))

RK4 = Tableau(
    c=(0.0, 0.5, 0.5, 1.0),
    a=((0.5,), (0.0, 0.5), (0.0, 0.0, 1.0)),
    b=(1 / 6, 1 / 3, 1 / 3, 1 / 6),
)

DORMAND_PRINCE = Tableau(
    c=(0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0),
    a=(
        (1 / 5,),
        (3 / 40, 9 / 40),
        (44 / 45, -56 / 15, 32 / 9),
        (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
        (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
    ),
    b=(35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0),
    b_low=(5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40),
    error_order=4,
    fsal=True,
)

BOGACKI_SHAMPINE = Tableau(
    c=(0.0, 1 / 2, 3 / 4, 1.0),
    a=((1 / 2,), (0.0, 3 / 4), (2 / 9, 1 / 3, 4 / 9)),
    b=(2 / 9, 1 / 3, 4 / 9, 0.0),
    b_low=(7 / 24, 1 / 4, 1 / 3, 1 / 8),
    error_order=2,
    fsal=True,
)

_TABLEAUS = {"euler": EULER, "rk4": RK4, "rk45": DORMAND_PRINCE, "rk23": BOGACKI_SHAMPINE}

# Grenzen fuer den Schrittweitenfaktor
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


def _stages(
    f: VectorField,
    tableau: Tableau,
    t: float,
    y: np.ndarray,
    h: float,
    k1: np.ndarray,
    t_end: float | None = None,
) -> list[np.ndarray]:
    ks = [k1]
    for i in range(1, tableau.stages):
        increment = sum((coef * k for coef, k in zip(tableau.a[i - 1], ks, strict=False) if coef), np.zeros_like(y))
        t_stage = t + tableau.c[i] * h
        if t_end is not None:
            t_stage = min(t_stage, t_end)
        ks.append(np.asarray(f(t_stage, y + h * increment), dtype=np.float64))
    return ks


def _combine(y: np.ndarray, h: float, weights: tuple[float, ...], ks: list[np.ndarray]) -> np.ndarray:
    return y + h * sum((w * k for w, k in zip(weights, ks, strict=True) if w), np.zeros_like(y))


def _check_inputs(f: VectorField, y0: ArrayLike, t_final: float) -> np.ndarray:
    y = np.array(y0, dtype=np.float64)
    if y.shape != (f.n,):
        raise UsageError(f"y0 has shape {y.shape}, field '{f.name}' expects ({f.n},)")
    if not (t_final > 0 and math.isfinite(t_final)):
        raise UsageError(f"T must be positive and finite, got {t_final}")
    return y


def fixed_step_count(t_final: float, h: float) -> int:
    """Anzahl Schritte bis T; der letzte Schritt wird auf T verkuerzt."""
    ratio = t_final / h
    nearest = round(ratio)
    if nearest > 0 and abs(ratio - nearest) <= 1e-9 * ratio:
        return int(nearest)
    return max(1, math.ceil(ratio))


def integrate_fixed(
    f: VectorField,
    y0: ArrayLike,
    t_final: float,
    h: float,
    method: str = "rk4",
    *,
    stride: int = 1,
    log: Callable[[str], None] | None = None,
) -> Trajectory:
    """Klassisches Verfahren mit fester Schrittweite.

    Zeiten werden als t_k = k·h berechnet (keine aufsummierte Drift).

    Args:
        f: Vektorfeld.
        y0: Anfangspunkt.
        t_final: Endzeit T.
        h: Schrittweite (> 0).
        method: ``euler`` oder ``rk4``.
        stride: Nur jeden `stride`-ten Schritt speichern; der letzte Schritt und
            der erste Schritt ab jeder Schaltzeit werden immer gespeichert.
        log: Optionaler Callback fuer Statusmeldungen.

    Returns:
        Trajektorie; bei nicht-endlichem Zustand abgeschnitten mit Status
        ``non-finite-state``.
    """
    if method not in FIXED_METHODS:
        raise UsageError(f"unknown fixed-step method '{method}' (choose from {', '.join(FIXED_METHODS)})")
    if not h > 0:
        raise UsageError(f"step size must be positive, got {h}")
    if stride < 1:
        raise UsageError(f"stride must be at least 1, got {stride}")
    y = _check_inputs(f, y0, t_final)
    tableau = _TABLEAUS[method]
    steps = fixed_step_count(t_final, h)

    started = time.perf_counter()
    times = [0.0]
    states = [y.copy()]
    status = TrajectoryStatus.COMPLETED
    evaluations = 0
    done = 0
    last_stored = 0

    for k in range(steps):
        t_now = k * h
        t_next = t_final if k == steps - 1 else (k + 1) * h
        dt = t_next - t_now
        k1 = np.asarray(f(t_now, y), dtype=np.float64)
        ks = _stages(f, tableau, t_now, y, dt, k1)
        evaluations += tableau.stages
        y_next = _combine(y, dt, tableau.b, ks)
        if not np.all(np.isfinite(y_next)):
            status = TrajectoryStatus.NON_FINITE_STATE
            logger.warning("Nicht-endlicher Zustand bei t=%.6g (%s)", t_next, method)
            break
        y = y_next
        done = k + 1
        if done % stride == 0 or done == steps or any(t_now < s <= t_next for s in f.switch_times):
            times.append(t_next)
            states.append(y.copy())
            last_stored = done

    if last_stored != done:
        # letzten gueltigen Zustand trotz Ausduennung behalten
        times.append(done * h)
        states.append(y.copy())

    wall_ms = (time.perf_counter() - started) * 1000.0
    if log:
        log(tr("integrate.fixed_done", method=method, steps=done, status=status.value, ms=f"{wall_ms:.0f}"))
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        status=status,
        method=method,
        accepted_steps=done,
        evaluations=evaluations,
        step_size=h,
        stride=stride,
        wall_ms=wall_ms,
    )


def _error_norm(err: np.ndarray, y: np.ndarray, y_new: np.ndarray, ctrl: StepControl) -> float:
    scale = ctrl.atol + ctrl.rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean(np.square(err / scale))))


def _initial_step(
    f: VectorField,
    y0: np.ndarray,
    f0: np.ndarray,
    order: int,
    ctrl: StepControl,
) -> float:
    """Startschritt nach der Zwei-Auswertungs-Heuristik (Hairer, Noersett, Wanner)."""
    scale = ctrl.atol + ctrl.rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean(np.square(y0 / scale))))
    d1 = float(np.sqrt(np.mean(np.square(f0 / scale))))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = np.asarray(f(h0, y0 + h0 * f0), dtype=np.float64)
    d2 = float(np.sqrt(np.mean(np.square((f1 - f0) / scale)))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1)


def _step_cap(f: VectorField, t_now: float, t_final: float, ctrl: StepControl) -> float:
    """Maximaler Schritt ab t_now: max_step, T und bekannte Schaltzeiten."""
    cap = ctrl.max_step if ctrl.max_step is not None else t_final
    cap = min(cap, t_final - t_now)
    for switch in f.switch_times:
        if t_now < switch < t_final:
            # vor der Schaltzeit hoechstens T0/10 und nie darueber hinweg
            cap = min(cap, switch / 10.0, switch - t_now)
    return cap


def _next_switch(f: VectorField, t_now: float) -> float:
    return min((s for s in f.switch_times if s > t_now), default=math.inf)


def _snap(f: VectorField, t_next: float, t_final: float) -> tuple[float, bool]:
    """Rastet t auf T oder eine Schaltzeit ein, wenn es nur um Rundung daneben liegt."""
    if abs(t_final - t_next) <= 1e-12 * t_final:
        return t_final, False
    for switch in f.switch_times:
        if abs(switch - t_next) <= 1e-12 * max(1.0, abs(switch)):
            return switch, True
    return t_next, False


def integrate_adaptive(
    f: VectorField,
    y0: ArrayLike,
    t_final: float,
    ctrl: StepControl | None = None,
    method: str = "rk45",
    *,
    log: Callable[[str], None] | None = None,
) -> Trajectory:
    """Integration mit eingebetteter Fehlerschaetzung.

    Ein Schritt unter `ctrl.min_step` beendet die Integration mit
    ``step-underflow``, mehr als `ctrl.max_steps` Versuche mit ``step-limit``.

    Args:
        f: Vektorfeld.
        y0: Anfangspunkt.
        t_final: Endzeit T.
        ctrl: Toleranzen und Schrittgrenzen (Default: `StepControl()`).
        method: ``rk45`` oder ``rk23``.
        log: Optionaler Callback fuer Statusmeldungen.
    """
    if method not in ADAPTIVE_METHODS:
        raise UsageError(f"unknown adaptive method '{method}' (choose from {', '.join(ADAPTIVE_METHODS)})")
    ctrl = ctrl or StepControl()
    ctrl.validate()
    y = _check_inputs(f, y0, t_final)
    tableau = _TABLEAUS[method]
    assert tableau.b_low is not None
    exponent = 1.0 / (tableau.error_order + 1)

    started = time.perf_counter()
    t_now = 0.0
    times = [0.0]
    states = [y.copy()]
    status = TrajectoryStatus.COMPLETED
    accepted = rejected = 0

    k1 = np.asarray(f(0.0, y), dtype=np.float64)
    evaluations = 1
    if not np.all(np.isfinite(k1)):
        status = TrajectoryStatus.NON_FINITE_STATE
        h = 0.0
    else:
        h = min(_initial_step(f, y, k1, tableau.error_order, ctrl), _step_cap(f, t_now, t_final, ctrl))
        evaluations += 1

    while status is TrajectoryStatus.COMPLETED and t_now < t_final:
        if accepted + rejected >= ctrl.max_steps:
            status = TrajectoryStatus.STEP_LIMIT
            break
        h = min(h, _step_cap(f, t_now, t_final, ctrl))
        if h < ctrl.min_step:
            status = TrajectoryStatus.STEP_UNDERFLOW
            break

        ks = _stages(f, tableau, t_now, y, h, k1, t_end=min(t_now + h, _next_switch(f, t_now)))
        evaluations += tableau.stages - 1
        y_new = _combine(y, h, tableau.b, ks)
        if tableau.fsal:
            k_last = ks[-1]
        else:
            k_last = np.asarray(f(t_now + h, y_new), dtype=np.float64)
            evaluations += 1
        err = _error_norm(
            h * sum((w * k for w, k in zip(np.subtract(tableau.b, tableau.b_low), ks, strict=True) if w), np.zeros_like(y)),
            y,
            y_new,
            ctrl,
        )

        if math.isfinite(err) and err <= 1.0 and np.all(np.isfinite(y_new)):
            t_now, snapped = _snap(f, t_now + h, t_final)
            y = y_new
            if snapped:
                # rechtsseitiger Grenzwert, das Gate ist ab hier offen
                k1 = np.asarray(f(np.nextafter(t_now, math.inf), y), dtype=np.float64)
                evaluations += 1
            else:
                k1 = k_last
            if not np.all(np.isfinite(k1)):
                status = TrajectoryStatus.NON_FINITE_STATE
                break
            times.append(t_now)
            states.append(y.copy())
            accepted += 1
            factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, ctrl.safety * err**-exponent)
            h *= max(_MIN_FACTOR, factor)
        else:
            rejected += 1
            factor = ctrl.safety * err**-exponent if math.isfinite(err) and err > 0 else _MIN_FACTOR
            h *= min(1.0, max(_MIN_FACTOR, factor))

    wall_ms = (time.perf_counter() - started) * 1000.0
    if status.failed:
        logger.warning("Integration %s beendet mit Status %s bei t=%.6g", method, status.value, t_now)
    if log:
        log(
            tr(
                "integrate.adaptive_done",
                method=method,
                accepted=accepted,
                rejected=rejected,
                status=status.value,
                ms=f"{wall_ms:.0f}",
            )
        )
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        status=status,
        method=method,
        accepted_steps=accepted,
        rejected_steps=rejected,
        evaluations=evaluations,
        wall_ms=wall_ms,
    )


def endpoint(traj: Trajectory) -> np.ndarray:
    """Letzter Zustand einer vollstaendigen Trajektorie.

    Raises:
        EndpointUnavailableError: Die Integration hat T nicht erreicht.
    """
    if traj.status is not TrajectoryStatus.COMPLETED:
        raise EndpointUnavailableError(traj.status)
    return traj.states[-1].copy()


def state_at_step(traj: Trajectory, k: int) -> np.ndarray:
    """Zustand nach k festen Schritten (Anzahl Kollokationspunkte).

    Raises:
        ValueError: Schritt k wurde nicht gespeichert oder nicht erreicht.
    """
    if k < 0 or k > traj.accepted_steps:
        raise ValueError(f"step {k} outside 0..{traj.accepted_steps}")
    if k == traj.accepted_steps:
        return traj.states[-1].copy()
    if traj.step_size is None:
        raise ValueError("state_at_step needs a fixed-step trajectory")
    t_k = k * traj.step_size
    i = int(np.searchsorted(traj.times, t_k))
    if i >= len(traj) or traj.times[i] != t_k:
        raise ValueError(f"step {k} was thinned out (stride {traj.stride})")
    return traj.states[i].copy()
