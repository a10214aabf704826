"""Problemklassen, zulaessige Mengen und Projektionen.

Abbildungen (Zielfunktion, Nebenbedingungen, G) sind Python-Builder
``Callable[[Expr], Expr]``. Dieselbe Definition liefert damit numerische
Auswertung, Vektorfeld-Aufbau und Gradienten ueber die Engine.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from .. import autodiff as ad
from ..autodiff import CompiledMap, Expr
from ..errors import FactorizationError, ShapeError

VectorMap = Callable[[Expr], Expr]
ScalarMap = Callable[[Expr], Expr]


def _vector(values: ArrayLike, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be a vector, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Kastenmenge ``{y | lower <= y <= upper}``; ±inf fuer offene Seiten."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = _vector(self.lower, "lower")
        upper = _vector(self.upper, "upper")
        if lower.shape != upper.shape:
            raise ShapeError(f"box bounds differ in length: {lower.shape} vs {upper.shape}")
        if np.any(lower > upper):
            raise ShapeError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return int(self.lower.shape[0])

    @classmethod
    def nonnegative(cls, n: int) -> BoxSet:
        return cls(np.zeros(n), np.full(n, np.inf))

    @classmethod
    def unbounded(cls, n: int) -> BoxSet:
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @classmethod
    def product(cls, *boxes: BoxSet) -> BoxSet:
        """Kartesisches Produkt, z.B. x-Schranken × Orthant fuer u."""
        return cls(np.concatenate([b.lower for b in boxes]), np.concatenate([b.upper for b in boxes]))

    def contains(self, y: ArrayLike, tol: float = 0.0) -> bool:
        arr = np.asarray(y, dtype=np.float64)
        return bool(np.all(arr >= self.lower - tol) and np.all(arr <= self.upper + tol))

    def clamp(self, y: Expr) -> Expr:
        """Projektion als Ausdruck."""
        return ad.clamp(y, self.lower, self.upper)


class AffineSet:
    """Affine Menge ``{x | A x = b}`` mit gecachter Cholesky-Zerlegung von A·Aᵀ.

    Raises:
        FactorizationError: A hat keinen vollen Zeilenrang.
    """

    def __init__(self, a: ArrayLike, b: ArrayLike) -> None:
        matrix = np.atleast_2d(np.array(a, dtype=np.float64))
        rhs = np.atleast_1d(np.array(b, dtype=np.float64))
        if matrix.ndim != 2 or rhs.shape != (matrix.shape[0],):
            raise ShapeError(f"A {matrix.shape} and b {rhs.shape} are inconsistent")
        if np.linalg.matrix_rank(matrix) < matrix.shape[0]:
            raise FactorizationError(f"A ({matrix.shape[0]}x{matrix.shape[1]}) does not have full row rank")
        gram = matrix @ matrix.T
        try:
            self._factor = scipy.linalg.cho_factor(gram)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(f"cannot factorize A·Aᵀ: {exc}") from exc
        matrix.setflags(write=False)
        rhs.setflags(write=False)
        self.A = matrix
        self.b = rhs
        self.gram = gram
        # Aᵀ(AAᵀ)⁻¹ ueber die Zerlegung, nie als explizite Inverse
        self.pseudo = scipy.linalg.cho_solve(self._factor, matrix).T

    @property
    def e(self) -> int:
        return int(self.A.shape[0])

    @property
    def j(self) -> int:
        return int(self.A.shape[1])

    def residual(self, x: ArrayLike) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=np.float64) - self.b

    def project(self, x: ArrayLike) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape != (self.j,):
            raise ShapeError(f"affine projection expects length {self.j}, got {arr.shape}")
        return arr - self.A.T @ scipy.linalg.cho_solve(self._factor, self.A @ arr - self.b)

    @cached_property
    def projector(self) -> np.ndarray:
        """U = Aᵀ(AAᵀ)⁻¹A, Projektor auf den Zeilenraum von A."""
        return self.pseudo @ self.A

    def lambda_min(self) -> float:
        """Kleinster Eigenwert von A·Aᵀ (exakt fuer e = 1)."""
        if self.e == 1:
            return float(self.gram[0, 0])
        return float(scipy.linalg.eigvalsh(self.gram)[0])

    def project_expr(self, x: Expr) -> Expr:
        return x - ad.matvec(ad.constant(self.pseudo), ad.matvec(ad.constant(self.A), x) - self.b)


class ProjectionKind(Enum):
    BOX = "box"
    AFFINE = "affine"
    ORTHANT = "orthant"
    IDENTITY = "identity"


@dataclass(frozen=True, eq=False)
class Projection:
    """Projektion des Endpunkts auf die Loesungsmenge.

    Bei `AFFINE` werden nur die fuehrenden j Komponenten projiziert;
    nachfolgende Dual-Komponenten bleiben unveraendert.
    """

    kind: ProjectionKind
    box: BoxSet | None = None
    affine: AffineSet | None = None

    @classmethod
    def onto_box(cls, omega: BoxSet) -> Projection:
        return cls(ProjectionKind.BOX, box=omega)

    @classmethod
    def onto_affine(cls, s: AffineSet) -> Projection:
        return cls(ProjectionKind.AFFINE, affine=s)

    @classmethod
    def orthant(cls) -> Projection:
        return cls(ProjectionKind.ORTHANT)

    @classmethod
    def identity(cls) -> Projection:
        return cls(ProjectionKind.IDENTITY)

    def __call__(self, y: ArrayLike) -> np.ndarray:
        arr = np.asarray(y, dtype=np.float64)
        match self.kind:
            case ProjectionKind.BOX:
                assert self.box is not None
                return project_box(arr, self.box)
            case ProjectionKind.AFFINE:
                assert self.affine is not None
                j = self.affine.j
                if arr.shape[0] < j:
                    raise ShapeError(f"state of length {arr.shape[0]} is shorter than the affine set ({j})")
                return np.concatenate([project_affine(arr[:j], self.affine), arr[j:]])
            case ProjectionKind.ORTHANT:
                return np.maximum(arr, 0.0)
            case _:
                return arr.copy()


def project_box(s: ArrayLike, omega: BoxSet) -> np.ndarray:
    """Komponentenweises Clamp auf Ω."""
    arr = np.asarray(s, dtype=np.float64)
    if arr.shape != (omega.n,):
        raise ShapeError(f"box projection expects length {omega.n}, got {arr.shape}")
    return np.clip(arr, omega.lower, omega.upper)


def project_affine(x: ArrayLike, s: AffineSet) -> np.ndarray:
    """x − Aᵀ(AAᵀ)⁻¹(Ax − b)."""
    return s.project(x)


def unit_gradient(fx: Expr, x: Expr) -> Expr:
    """∇f als Vektor aus Richtungsableitungen entlang der Einheitsvektoren."""
    n = x.shape[0]
    eye = np.eye(n)
    return ad.concat(*(ad.tangent(fx, x, eye[i]) for i in range(n)))


def jacobian_transpose_times(gx: Expr, x: Expr, u: Expr) -> Expr:
    """∇g(x)ᵀu ohne die Jacobi-Matrix explizit aufzubauen."""
    n = x.shape[0]
    eye = np.eye(n)
    return ad.concat(*(ad.dot(ad.tangent(gx, x, eye[i]), u) for i in range(n)))


def _output_shape(fn: Callable[[Expr], Expr], n: int) -> tuple[int, ...]:
    return fn(ad.input_vector("x", n)).shape


@dataclass(frozen=True)
class NpeProblem:
    """Nichtlineare Projektionsgleichung P_Ω(y − G(y)) = y."""

    G: VectorMap
    omega: BoxSet
    name: str = ""

    def __post_init__(self) -> None:
        shape = _output_shape(self.G, self.omega.n)
        if shape != (self.omega.n,):
            raise ShapeError(f"G maps R^{self.omega.n} to shape {shape}")

    @property
    def n(self) -> int:
        return self.omega.n

    @cached_property
    def g_numeric(self) -> CompiledMap:
        return ad.compile_map(self.G, self.n)


@dataclass(frozen=True)
class ViProblem:
    """Variationsungleichung auf einer Kastenmenge."""

    G: VectorMap
    omega: BoxSet
    name: str = ""

    @property
    def n(self) -> int:
        return self.omega.n


@dataclass(frozen=True)
class NcpProblem:
    """Nichtlineares Komplementaritaetsproblem y >= 0, G(y) >= 0, yᵀG(y) = 0."""

    G: VectorMap
    n: int
    name: str = ""


@dataclass(frozen=True)
class StandardCnlp:
    """min f(x) u.d.N. g(x) <= 0, A x = b, x in bounds.

    Attributes:
        f: Zielfunktion als Builder (skalar).
        g: Ungleichungen als Builder (Vektor der Laenge k) oder None.
        n_x: Anzahl der primalen Variablen j.
        equality: Gleichungs-Nebenbedingungen oder None.
        bounds: Schranken fuer x oder None (= ganz R^j).
    """

    f: ScalarMap
    n_x: int
    g: VectorMap | None = None
    equality: AffineSet | None = None
    bounds: BoxSet | None = None
    name: str = ""
    _k: int = field(default=0, init=False, repr=False)

    def __post_init__(self) -> None:
        if _output_shape(self.f, self.n_x) != ():
            raise ShapeError("objective f must be scalar-valued")
        k = 0
        if self.g is not None:
            shape = _output_shape(self.g, self.n_x)
            if len(shape) != 1:
                raise ShapeError(f"constraints g must be vector-valued, got shape {shape}")
            k = shape[0]
        object.__setattr__(self, "_k", k)
        if self.equality is not None and self.equality.j != self.n_x:
            raise ShapeError(f"A has {self.equality.j} columns but x has {self.n_x} entries")
        if self.bounds is not None and self.bounds.n != self.n_x:
            raise ShapeError(f"bounds have length {self.bounds.n}, expected {self.n_x}")

    @property
    def k(self) -> int:
        """Anzahl der Ungleichungen."""
        return self._k

    @cached_property
    def objective(self) -> CompiledMap:
        return ad.compile_map(self.f, self.n_x)

    @cached_property
    def constraints(self) -> CompiledMap | None:
        return ad.compile_map(self.g, self.n_x) if self.g is not None else None

    def x_bounds(self) -> BoxSet:
        return self.bounds if self.bounds is not None else BoxSet.unbounded(self.n_x)


def leading(y: Expr, j: int) -> Expr:
    """Fuehrende j Komponenten von y (der primale Teil x)."""
    if y.shape == (j,):
        return y
    return ad.concat(*(ad.index(y, i) for i in range(j)))


def trailing(y: Expr, j: int) -> Expr:
    """Komponenten ab Index j (der duale Teil u)."""
    return ad.concat(*(ad.index(y, i) for i in range(j, y.shape[0])))
