"""Register der sechs Benchmark-Beispiele.

Jedes Beispiel buendelt Problem, Vektorfeld, Projektion, Epsilon-Art,
Startpunkt, Horizont und die veroeffentlichten Endloesungen (zwei
Nachkommastellen, Toleranz 0.05).
"""

from __future__ import annotations

import functools
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from .. import autodiff as ad
from ..autodiff import Expr
from ..errors import UsageError
from ..models.problems import (
    AffineSet,
    BoxSet,
    NcpProblem,
    NpeProblem,
    Projection,
    StandardCnlp,
    ViProblem,
    unit_gradient,
)
from ..models.vector_field import VectorField
from .dynamics import qin2014_field, theta_expr, xia2007_field, xu2020_t0
from .reformulation import kkt_npe_of_cnlp, ncp_as_npe, vi_as_npe
from .trainer import EpsilonKind, EpsilonMetric, Problem, make_epsilon

logger = logging.getLogger(__name__)

REFERENCE_TOL = 0.05
DEFAULT_HORIZON = 10.0

# Daten des quadratischen Programms (Beispiel 1)
QP_Q = np.array([[18.0, 9.0, 13.0], [9.0, 14.0, 6.0], [13.0, 6.0, 10.0]])
QP_P = np.array([-30.0, -30.0, 15.0])
QP_C = np.array([[4.0, -5.0, -4.0], [-5.0, -2.0, -4.0]])
QP_D = np.array([-5.0, 1.0])


@dataclass(frozen=True, eq=False)
class ExampleInstance:
    """Vollstaendig verdrahtetes Benchmark-Beispiel.

    Attributes:
        id: Nummer 1..6.
        name: Kurzname (auch als CLI-Schluessel nutzbar).
        source: Problem in seiner Ursprungsform (CNLP, VI oder NCP).
        problem: Problem in der Form, die Epsilon bewertet (NPE oder CNLP).
        make_field: Baut das Vektorfeld fuer einen Startpunkt.
        projection: Projektion des Endpunkts.
        y0: Startpunkt.
        horizon: Zeithorizont T.
        reference: Endloesung der numerischen Integration.
        oinn_reference: Endloesung des trainierten Modells.
        reference_value: Veroeffentlichtes End-Epsilon bzw. Zielfunktionswert.
        provenance: Herkunft der Referenzwerte.
        sweeps: Werte fuer Hyperparameter-Sweeps (nur Beispiel 3).
    """

    id: int
    name: str
    source: Any
    problem: Problem
    make_field: Callable[[np.ndarray], VectorField]
    projection: Projection
    y0: np.ndarray
    horizon: float
    reference: np.ndarray
    oinn_reference: np.ndarray
    reference_value: float
    provenance: str
    sweeps: dict[str, list[Any]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.y0.shape[0])

    @property
    def epsilon_kind(self) -> EpsilonKind:
        return EpsilonKind.NPE_ERROR if isinstance(self.problem, NpeProblem) else EpsilonKind.OBJECTIVE

    @functools.cached_property
    def vector_field(self) -> VectorField:
        return self.make_field(self.y0)

    def field_for(self, y0: ArrayLike) -> VectorField:
        """Vektorfeld fuer einen anderen Startpunkt (nur Beispiel 6 haengt davon ab)."""
        arr = np.asarray(y0, dtype=np.float64)
        if np.array_equal(arr, self.y0):
            return self.vector_field
        return self.make_field(arr)

    def metric(self, alpha: float = 1.0, feas_tol: float = 1e-6) -> EpsilonMetric:
        return make_epsilon(self.problem, self.projection, alpha, feas_tol)

    def to_dict(self) -> dict[str, Any]:
        """Eintrag fuer die JSON-Ausgabe von ``list``."""
        return {
            "id": self.id,
            "name": self.name,
            "n": self.n,
            "epsilon_kind": self.epsilon_kind.value,
            "reference": [float(v) for v in self.reference],
        }


@dataclass(frozen=True)
class ReferenceCheck:
    """Ergebnis von `verify_reference`."""

    example: int
    epsilon: float
    target: float
    passed: bool
    prediction: list[float]


# --- Beispiel 1: quadratisches Programm ---


def _qp_problem() -> StandardCnlp:
    q, p, c, d = (ad.constant(a) for a in (QP_Q, QP_P, QP_C, QP_D))

    def f(x: Expr) -> Expr:
        return 0.5 * ad.dot(x, q @ x) + ad.dot(p, x)

    def g(x: Expr) -> Expr:
        return c @ x - d

    return StandardCnlp(f, 3, g=g, bounds=BoxSet.nonnegative(3), name="quadratic-program")


def _example1() -> ExampleInstance:
    source = _qp_problem()
    npe = kkt_npe_of_cnlp(source)
    return ExampleInstance(
        id=1,
        name="quadratic-program",
        source=source,
        problem=npe,
        make_field=lambda _y0: xia2007_field(npe),
        projection=Projection.onto_box(npe.omega),
        y0=np.zeros(5),
        horizon=DEFAULT_HORIZON,
        reference=np.array([0.82, 1.65, 0.00, 0.10, 0.00]),
        oinn_reference=np.array([0.81, 1.66, 0.00, 0.13, 0.00]),
        reference_value=0.08,
        provenance="final integration and trained-model solutions at two decimals; epsilon of the trained model",
    )


# --- Beispiel 2: konvexes glattes CNLP ---


def _example2() -> ExampleInstance:
    def f(x: Expr) -> Expr:
        x1, x2 = x[0], x[1]
        return x1 * x1 + 2.0 * x2 * x2 + 2.0 * x1 * x2 - 10.0 * x1 - 12.0 * x2

    def g(x: Expr) -> Expr:
        x1, x2 = x[0], x[1]
        return ad.concat(x1 + 3.0 * x2 - 8.0, x1 * x1 + x2 * x2 + 2.0 * x1 - 2.0 * x2 - 3.0)

    source = StandardCnlp(f, 2, g=g, bounds=BoxSet(np.zeros(2), np.full(2, 2.0)), name="convex-smooth-cnlp")
    npe = kkt_npe_of_cnlp(source)
    return ExampleInstance(
        id=2,
        name="convex-smooth-cnlp",
        source=source,
        problem=npe,
        make_field=lambda _y0: xia2007_field(npe),
        projection=Projection.onto_box(npe.omega),
        y0=np.zeros(4),
        horizon=DEFAULT_HORIZON,
        reference=np.array([1.00, 2.00, 0.00, 1.00]),
        oinn_reference=np.array([1.00, 2.00, 0.00, 1.00]),
        reference_value=0.03,
        provenance="final integration and trained-model solutions at two decimals; epsilon of the trained model",
    )


# --- Beispiel 3: Variationsungleichung ---


def _vi_map(y: Expr) -> Expr:
    y1, y2, y3, y4 = y[0], y[1], y[2], y[3]
    return ad.concat(
        y1 - 2.0 / (y1 + 0.8) + 5.0 * y2 - 13.0,
        1.2 * y1 + 7.0 * y2,
        3.0 * y3 + 8.0 * y4,
        y3 + 2.0 * y4 - 4.0 / (y4 + 2.0) - 12.0,
    )


def _example3() -> ExampleInstance:
    omega = BoxSet(np.array([1.0, -3.0, -3.0, 1.0]), np.full(4, 100.0))
    source = ViProblem(_vi_map, omega, name="variational-inequality")
    npe = vi_as_npe(source)
    return ExampleInstance(
        id=3,
        name="variational-inequality",
        source=source,
        problem=npe,
        make_field=lambda _y0: xia2007_field(npe),
        projection=Projection.onto_box(omega),
        y0=np.zeros(4),
        horizon=DEFAULT_HORIZON,
        reference=np.array([28.06, -3.00, -3.00, 7.70]),
        oinn_reference=np.array([28.07, -3.00, -3.00, 7.71]),
        reference_value=0.001,
        provenance="final integration and trained-model solutions at two decimals; NPE error of the trained model",
        sweeps={
            "initial_point": [[1.0, 2.0, 3.0, 4.0], [-10.0, -15.0, -10.0, -14.0], [20.0, 0.0, 0.0, 8.0]],
            "time_range": [5.0, 8.0, 15.0],
        },
    )


# --- Beispiel 4: nichtlineares Komplementaritaetsproblem ---


def _ncp_map(y: Expr) -> Expr:
    y1, y2, y3 = y[0], y[1], y[2]
    e = ad.exp(y1 * y1 + (y2 - 1.0) * (y2 - 1.0))
    return ad.concat(
        2.0 * y1 * e + y1 - y2 - y3 + 1.0,
        2.0 * (y2 - 1.0) * e - y1 + 2.0 * y2 + 2.0 * y3 + 3.0,
        -y1 + 2.0 * y2 + 3.0 * y3,
    )


def _example4() -> ExampleInstance:
    source = NcpProblem(_ncp_map, 3, name="nonlinear-complementarity")
    npe = ncp_as_npe(source)
    return ExampleInstance(
        id=4,
        name="nonlinear-complementarity",
        source=source,
        problem=npe,
        make_field=lambda _y0: xia2007_field(npe),
        projection=Projection.onto_box(npe.omega),
        y0=np.zeros(3),
        horizon=DEFAULT_HORIZON,
        reference=np.array([0.00, 0.17, 0.00]),
        oinn_reference=np.array([0.00, 0.17, 0.00]),
        reference_value=0.0,
        provenance="final integration and trained-model solutions at two decimals; NPE error of the trained model",
    )


# --- Beispiel 5: konvexes nichtglattes CNLP ---


def _example5() -> ExampleInstance:
    def f(x: Expr) -> Expr:
        x1, x2, x3 = x[0], x[1], x[2]
        s = x1 + x2
        return 10.0 * s * s + (x1 - 2.0) * (x1 - 2.0) + 20.0 * ad.absolute(x3 - 3.0) + ad.exp(x3)

    def g(x: Expr) -> Expr:
        x1, x2 = x[0], x[1]
        return ad.concat((x1 + 3.0) * (x1 + 3.0) + x2 - 36.0)

    equality = AffineSet(np.array([[2.0, 0.0, 5.0]]), np.array([7.0]))
    problem = StandardCnlp(f, 3, g=g, equality=equality, name="convex-nonsmooth-cnlp")
    return ExampleInstance(
        id=5,
        name="convex-nonsmooth-cnlp",
        source=problem,
        problem=problem,
        make_field=lambda _y0: qin2014_field(problem, equality_penalty="linear"),
        projection=Projection.onto_affine(equality),
        y0=np.zeros(4),
        horizon=DEFAULT_HORIZON,
        reference=np.array([-0.86, 0.86, 1.74, 0.00]),
        oinn_reference=np.array([-0.86, 0.86, 1.74, 0.00]),
        reference_value=39.020,
        provenance="final integration and trained-model solutions at two decimals; objective of the trained model",
    )


# --- Beispiel 6: pseudokonvexes nichtglattes CNLP ---


def _example6_field(p: StandardCnlp, x0: ArrayLike) -> VectorField:
    """Feld mit den ausgeschriebenen Fallunterscheidungen fuer zwei Ungleichungen.

    μ(x) = 1 genau dann, wenn g1 <= 0 und g2 <= 0; ∂B(x) summiert ∇g_i
    ueber die verletzten Ungleichungen; der Gleichungsterm ist sign(h(x))·Aᵀ.
    """
    assert p.equality is not None and p.g is not None
    t0 = xu2020_t0(p, x0)
    i_minus_u = ad.constant(np.eye(p.n_x) - p.equality.projector)
    a_row = ad.constant(p.equality.A[0])
    b = float(p.equality.b[0])
    g_map, f_map = p.g, p.f

    def build(t: Expr, y: Expr) -> Expr:
        gy = g_map(y)
        g1, g2 = gy[0], gy[1]
        s1, s2 = ad.step(g1), ad.step(g2)
        mu = (1.0 - s1) * (1.0 - s2)
        barrier = ad.scale(s1, unit_gradient(g1, y)) + ad.scale(s2, unit_gradient(g2, y))
        inner = ad.scale(mu, unit_gradient(f_map(y), y)) + barrier
        h = ad.dot(a_row, y) - b
        return -ad.scale(theta_expr(t, t0), ad.matvec(i_minus_u, inner)) - ad.scale(ad.sign(h), a_row)

    return VectorField(p.n_x, build, "xu2020", switch_times=(t0,))


def _example6() -> ExampleInstance:
    def f(x: Expr) -> Expr:
        x1, x2, x3 = x[0], x[1], x[2]
        s = x1 + x2 + x3
        return (x1 + x2 + ad.exp(ad.absolute(x2 - 1.0)) - 40.0) / (s * s + 3.0)

    def g(x: Expr) -> Expr:
        x1, x2 = x[0], x[1]
        return ad.concat(-3.0 * x1 + 2.0 * x2 - 5.0, x1 * x1 + x2 - 3.0)

    equality = AffineSet(np.array([[1.0, 2.0, 1.0]]), np.array([2.0]))
    problem = StandardCnlp(f, 3, g=g, equality=equality, name="pseudoconvex-nonsmooth-cnlp")
    return ExampleInstance(
        id=6,
        name="pseudoconvex-nonsmooth-cnlp",
        source=problem,
        problem=problem,
        make_field=lambda y0: _example6_field(problem, y0),
        projection=Projection.onto_affine(equality),
        y0=np.zeros(3),
        horizon=DEFAULT_HORIZON,
        reference=np.array([-0.41, 1.85, -1.28]),
        oinn_reference=np.array([-0.44, 1.84, -1.24]),
        reference_value=-11.992,
        provenance="final integration and trained-model solutions at two decimals; objective of the trained model",
    )


_FACTORIES: dict[int, Callable[[], ExampleInstance]] = {
    1: _example1,
    2: _example2,
    3: _example3,
    4: _example4,
    5: _example5,
    6: _example6,
}
EXAMPLE_NAMES = {
    "quadratic-program": 1,
    "convex-smooth-cnlp": 2,
    "variational-inequality": 3,
    "nonlinear-complementarity": 4,
    "convex-nonsmooth-cnlp": 5,
    "pseudoconvex-nonsmooth-cnlp": 6,
}
_custom: dict[str, Callable[[], ExampleInstance]] = {}


def register_example(name: str, factory: Callable[[], ExampleInstance]) -> None:
    """Registriert ein eigenes Beispiel unter einem Namen (fuer ``--example name``)."""
    if name in _custom:
        logger.warning("Beispiel '%s' wird ueberschrieben", name)
    _custom[name] = factory
    _load.cache_clear()


@functools.lru_cache(maxsize=None)
def _load(key: int | str) -> ExampleInstance:
    if isinstance(key, int):
        return _FACTORIES[key]()
    return _custom[key]()


def resolve_key(key: int | str) -> int | str:
    """Normalisiert eine Beispiel-Angabe: Nummer, Ziffernstring oder Name.

    Raises:
        UsageError: Unbekanntes Beispiel.
    """
    if isinstance(key, str) and key.strip().isdigit():
        key = int(key)
    if isinstance(key, int):
        if key not in _FACTORIES:
            raise UsageError(f"unknown example {key}; choose 1..{len(_FACTORIES)}")
        return key
    if key in _custom:
        return key
    if key in EXAMPLE_NAMES:
        return EXAMPLE_NAMES[key]
    raise UsageError(f"unknown example '{key}'")


def load_example(key: int | str) -> ExampleInstance:
    """Liefert ein Beispiel nach Nummer (1..6) oder registriertem Namen.

    Raises:
        UsageError: Unbekanntes Beispiel.
    """
    return _load(resolve_key(key))


def list_examples() -> list[dict[str, Any]]:
    return [load_example(i).to_dict() for i in sorted(_FACTORIES)]


def verify_reference(inst: ExampleInstance, solution: ArrayLike | None = None) -> ReferenceCheck:
    """Bewertet die Referenzloesung (oder `solution`) mit dem Epsilon des Beispiels.

    NPE-Beispiele bestehen bei Epsilon <= 0.05, Zielfunktions-Beispiele bei
    zulaessigem Punkt und |f − Referenzwert| <= 0.05.
    """
    y = inst.reference if solution is None else np.asarray(solution, dtype=np.float64)
    prediction, eps = inst.metric().measure(y)
    if inst.epsilon_kind is EpsilonKind.NPE_ERROR:
        passed = eps <= REFERENCE_TOL
    else:
        passed = math.isfinite(eps) and abs(eps - inst.reference_value) <= REFERENCE_TOL
    return ReferenceCheck(inst.id, eps, inst.reference_value, bool(passed), [float(v) for v in prediction])
