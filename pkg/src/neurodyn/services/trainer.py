"""Training des OINN-Modells: Residuen-Loss, ADAM und Epsilon-Best-Schleife.

Der Loss wird als ein Ausdrucksgraph gebaut, der ∂y/∂t (Vorwaertsmodus,
gestaged) und Φ(t, y(t)) enthaelt; der Rueckwaertsmodus differenziert
durch beide hindurch.
"""

from __future__ import annotations

import functools
import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from .. import autodiff as ad
from ..autodiff import Expr, GradientSet
from ..errors import NonFiniteLossError
from ..i18n import t as tr
from ..models.config import TrainConfig
from ..models.oinn_model import PARAM_NAMES, MlpParams, OinnModel, model_forward, oinn_graph, save_checkpoint
from ..models.problems import NpeProblem, Projection, StandardCnlp
from ..models.run_result import HistoryRow, TrainReport
from ..models.vector_field import VectorField
from .reformulation import npe_residual

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

Problem = NpeProblem | StandardCnlp


# --- Loss ---


@dataclass(frozen=True, eq=False)
class LossGraph:
    """Batch-Loss als Graph: mean_i e^{−γ t_i}·‖∂y/∂t(t_i) − Φ(t_i, y(t_i))‖."""

    t: Expr
    pointwise: Expr
    loss: Expr


@functools.lru_cache(maxsize=16)
def loss_graph(f: VectorField, hidden: int, gamma: float) -> LossGraph:
    g = oinn_graph(f.n, hidden)
    velocity = ad.tangent(g.state, g.t)
    residual = velocity - f.expr(g.t, g.state)
    weight = ad.exp(-g.t * gamma)
    pointwise = weight * ad.norm(residual)
    return LossGraph(g.t, pointwise, ad.batch_mean(pointwise))


def _loss_bindings(ts: ArrayLike, m: OinnModel) -> dict[str, ArrayLike]:
    return {**m.bindings(), "t": ts}


def _batch(ts: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(ts, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("batch of time samples is empty")
    return arr


def pointwise_loss(t: float, m: OinnModel, f: VectorField, gamma: float) -> float:
    """e^{−γt}·‖∂y/∂t − Φ(t, y(t))‖₂ an einem Zeitpunkt."""
    lg = loss_graph(f, m.params.hidden, float(gamma))
    return float(ad.evaluate(lg.pointwise, _loss_bindings(float(t), m)))


def batch_loss(ts: Sequence[float] | np.ndarray, m: OinnModel, f: VectorField, gamma: float) -> float:
    """Mittelwert der punktweisen Losses ueber `ts`.

    Raises:
        ValueError: `ts` ist leer.
    """
    lg = loss_graph(f, m.params.hidden, float(gamma))
    return float(ad.evaluate(lg.loss, _loss_bindings(_batch(ts), m)))


def loss_value_and_gradient(
    ts: Sequence[float] | np.ndarray, m: OinnModel, f: VectorField, gamma: float
) -> tuple[float, GradientSet]:
    lg = loss_graph(f, m.params.hidden, float(gamma))
    return ad.value_and_grad(lg.loss, _loss_bindings(_batch(ts), m))


def loss_gradient(ts: Sequence[float] | np.ndarray, m: OinnModel, f: VectorField, gamma: float) -> GradientSet:
    """∇_w des Batch-Loss nach W1, b1, W2, b2."""
    return loss_value_and_gradient(ts, m, f, gamma)[1]


# --- ADAM ---


@dataclass(frozen=True, eq=False)
class AdamState:
    """Erstes und zweites Moment je Parameter plus Schrittzaehler."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, p: MlpParams) -> AdamState:
        arrays = p.to_dict()
        return cls(
            {k: np.zeros_like(a) for k, a in arrays.items()},
            {k: np.zeros_like(a) for k, a in arrays.items()},
        )


def adam_step(p: MlpParams, g: GradientSet, s: AdamState, lr: float) -> tuple[MlpParams, AdamState]:
    """Ein ADAM-Schritt mit Bias-Korrektur; Eingaben bleiben unveraendert."""
    step = s.step + 1
    correction1 = 1.0 - ADAM_BETA1**step
    correction2 = 1.0 - ADAM_BETA2**step
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name in PARAM_NAMES:
        grad = g[name]
        m = ADAM_BETA1 * s.m[name] + (1.0 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * s.v[name] + (1.0 - ADAM_BETA2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = getattr(p, name) - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        new_m[name] = m
        new_v[name] = v
    return MlpParams.from_dict(new_params), AdamState(new_m, new_v, step)


# --- Epsilon ---


class EpsilonKind(Enum):
    NPE_ERROR = "npe-error"
    OBJECTIVE = "objective"


def epsilon_npe(y: ArrayLike, p: NpeProblem, alpha: float = 1.0) -> float:
    """‖P_Ω(y − αG(y)) − y‖₂."""
    return float(np.linalg.norm(npe_residual(y, p, alpha)))


def epsilon_objective(y: ArrayLike, p: StandardCnlp, feas_tol: float = 1e-6) -> float:
    """f(x), wenn x zulaessig ist (bis auf `feas_tol`), sonst +inf.

    `y` darf Dual-Komponenten hinter x tragen; sie werden ignoriert.
    """
    x = np.asarray(y, dtype=np.float64)[: p.n_x]
    if not np.all(np.isfinite(x)):
        return math.inf
    if p.constraints is not None and np.any(p.constraints(x) > feas_tol):
        return math.inf
    if p.equality is not None and np.max(np.abs(p.equality.residual(x))) > feas_tol:
        return math.inf
    if p.bounds is not None and not p.bounds.contains(x, feas_tol):
        return math.inf
    return float(p.objective(x))


def epsilon_kind_of(p: Problem) -> EpsilonKind:
    return EpsilonKind.NPE_ERROR if isinstance(p, NpeProblem) else EpsilonKind.OBJECTIVE


def default_projection(p: Problem) -> Projection:
    """Box-Projektion fuer NPEs, affine Projektion fuer CNLPs mit Gleichungen."""
    if isinstance(p, NpeProblem):
        return Projection.onto_box(p.omega)
    if p.equality is not None:
        return Projection.onto_affine(p.equality)
    return Projection.identity()


@dataclass(frozen=True, eq=False)
class EpsilonMetric:
    """Projektion des Endpunkts plus Bewertung der projizierten Loesung."""

    kind: EpsilonKind
    projection: Projection
    score: Callable[[np.ndarray], float]

    def measure(self, endpoint: ArrayLike) -> tuple[np.ndarray, float]:
        prediction = self.projection(endpoint)
        return prediction, self.score(prediction)


def make_epsilon(
    p: Problem,
    projection: Projection | None = None,
    alpha: float = 1.0,
    feas_tol: float = 1e-6,
) -> EpsilonMetric:
    """Waehlt die Epsilon-Art passend zur Problemklasse."""
    proj = projection if projection is not None else default_projection(p)
    if isinstance(p, NpeProblem):
        return EpsilonMetric(EpsilonKind.NPE_ERROR, proj, lambda y: epsilon_npe(y, p, alpha))
    return EpsilonMetric(EpsilonKind.OBJECTIVE, proj, lambda y: epsilon_objective(y, p, feas_tol))


# --- Trainingsschleife ---


def sample_rng(seed: int) -> np.random.Generator:
    """Eigener Philox-Strom fuer die Zeitstichproben, getrennt von der Initialisierung."""
    return np.random.Generator(np.random.Philox(seed).jumped())


def train(
    p: Problem,
    f: VectorField,
    m0: OinnModel,
    cfg: TrainConfig,
    *,
    metric: EpsilonMetric | None = None,
    checkpoint_path: Path | None = None,
    on_row: Callable[[HistoryRow], None] | None = None,
    log: Callable[[str], None] | None = None,
) -> TrainReport:
    """Trainiert das Modell und merkt sich die Parameter mit dem kleinsten Epsilon.

    Args:
        p: Problem, bestimmt die Epsilon-Art (NPE-Fehler oder Zielfunktion).
        f: Vektorfeld des Anfangswertproblems.
        m0: Startmodell (y0, T und Initialgewichte).
        cfg: Hyperparameter; `cfg.horizon` wird hier nicht ausgewertet, T kommt aus `m0`.
        metric: Abweichende Projektion/Bewertung; Default nach Problemklasse.
        checkpoint_path: Ziel fuer Checkpoints bei jeder Verbesserung.
        on_row: Callback pro Historienzeile (inkrementelles CSV).
        log: Callback fuer uebersetzte Fortschrittsmeldungen.

    Returns:
        TrainReport mit Epsilon-bester Loesung und vollstaendiger Historie.

    Raises:
        NonFiniteLossError: Der Batch-Loss wurde NaN oder unendlich.
    """
    cfg.validate()
    metric = metric if metric is not None else make_epsilon(p, alpha=cfg.alpha, feas_tol=cfg.feas_tol)
    rng = sample_rng(cfg.seed)
    started = time.perf_counter()

    def elapsed_ms() -> float:
        return (time.perf_counter() - started) * 1000.0

    model = m0
    prediction, eps = metric.measure(model_forward(model.horizon, model))
    best = eps
    best_params = model.params
    best_prediction = prediction
    best_iteration = 0
    history: list[HistoryRow] = []

    def record(row: HistoryRow) -> None:
        history.append(row)
        if on_row:
            on_row(row)

    record(HistoryRow(0, None, eps, best, elapsed_ms()))
    if checkpoint_path is not None and cfg.checkpoint_every_best:
        save_checkpoint(checkpoint_path, model)

    adam = AdamState.zeros_like(model.params)
    report_every = max(1, cfg.max_iter // 10)

    for iteration in range(1, cfg.max_iter + 1):
        ts = rng.uniform(0.0, model.horizon, size=cfg.batch_size)
        loss, gradient = loss_value_and_gradient(ts, model, f, cfg.gamma)
        if not math.isfinite(loss):
            raise NonFiniteLossError(iteration, model.params.norm())
        params, adam = adam_step(model.params, gradient, adam, cfg.lr)
        model = model.with_params(params)

        if iteration % cfg.cadence == 0:
            prediction, eps = metric.measure(model_forward(model.horizon, model))
            if eps < best:
                best = eps
                best_params = model.params
                best_prediction = prediction
                best_iteration = iteration
                if checkpoint_path is not None and cfg.checkpoint_every_best:
                    save_checkpoint(checkpoint_path, model)
            record(HistoryRow(iteration, loss, eps, best, elapsed_ms()))

        if iteration % report_every == 0:
            logger.info("Iteration %d: loss=%.6g, epsilon_best=%.6g", iteration, loss, best)
            if log:
                log(tr("train.progress", iteration=iteration, total=cfg.max_iter, loss=f"{loss:.4g}", best=f"{best:.4g}"))

    if log:
        log(tr("train.done", best=f"{best:.6g}", iteration=best_iteration, ms=f"{elapsed_ms():.0f}"))
    return TrainReport(
        epsilon_best=best,
        best_params=best_params,
        best_prediction=best_prediction,
        best_iteration=best_iteration,
        history=history,
        final_model=model,
    )
