"""Ausdrucksgraph der Differentiations-Engine.

Ein `Expr` ist ein unveraenderlicher Knoten mit Art, Operanden und Shape.
Shapes werden beim Aufbau geprueft; da Operanden immer vor dem Knoten
existieren muessen, ist der Graph per Konstruktion azyklisch.

Shapes:
    ``()`` Skalar, ``(n,)`` Vektor, ``(m, n)`` Matrix.
"""

from __future__ import annotations

from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from ..errors import ShapeError

Shape = tuple[int, ...]


class Kind(Enum):
    """Knotenarten des Graphen."""

    CONSTANT = "constant"
    INPUT = "input"
    PARAMETER = "parameter"
    ADD = "add"
    SUB = "sub"
    NEG = "negate"
    MUL = "multiply"
    SCALE = "scale"
    MATVEC = "matvec"
    DOT = "dot"
    TANH = "tanh"
    EXP = "exp"
    ABS = "abs"
    RELU = "max0"
    CLAMP = "clamp"
    SIGN = "sign"
    STEP = "step"
    RECIPROCAL = "reciprocal"
    SQNORM = "sqnorm"
    NORM = "norm"
    INDEX = "index"
    CONCAT = "concat"
    BATCH_MEAN = "batch_mean"


LEAF_KINDS = frozenset({Kind.CONSTANT, Kind.INPUT, Kind.PARAMETER})


class Expr:
    """Knoten im Ausdrucksgraphen.

    Knoten werden ueber die Konstruktor-Funktionen dieses Moduls oder die
    ueberladenen Operatoren erzeugt, nie direkt. Gleichheit und Hash sind
    Identitaet, damit Knoten als Dict-Schluessel taugen.
    """

    __slots__ = ("__weakref__", "attrs", "kind", "name", "operands", "shape", "value")

    # numpy soll bei ``array + expr`` die reflektierten Operatoren aufrufen
    __array_ufunc__ = None

    def __init__(
        self,
        kind: Kind,
        operands: tuple[Expr, ...],
        shape: Shape,
        *,
        name: str = "",
        value: np.ndarray | None = None,
        attrs: dict[str, Any] | None = None,
    ) -> None:
        self.kind = kind
        self.operands = operands
        self.shape = shape
        self.name = name
        self.value = value
        self.attrs = attrs or {}

    def __repr__(self) -> str:
        label = self.name or self.kind.value
        return f"Expr({label}, shape={self.shape})"

    @property
    def size(self) -> int:
        """Anzahl der Eintraege (1 fuer Skalare)."""
        return int(np.prod(self.shape, dtype=int))

    @property
    def is_scalar(self) -> bool:
        return self.shape == ()

    # --- Operatoren ---

    def __add__(self, other: object) -> Expr:
        return add(self, _coerce(other, self.shape))

    def __radd__(self, other: object) -> Expr:
        return add(_coerce(other, self.shape), self)

    def __sub__(self, other: object) -> Expr:
        return sub(self, _coerce(other, self.shape))

    def __rsub__(self, other: object) -> Expr:
        return sub(_coerce(other, self.shape), self)

    def __neg__(self) -> Expr:
        return neg(self)

    def __mul__(self, other: object) -> Expr:
        return _multiply(self, other)

    def __rmul__(self, other: object) -> Expr:
        return _multiply(self, other)

    def __truediv__(self, other: object) -> Expr:
        if isinstance(other, Expr):
            return _multiply(self, reciprocal(other))
        return _multiply(self, 1.0 / float(other))  # type: ignore[arg-type]

    def __rtruediv__(self, other: object) -> Expr:
        return _multiply(reciprocal(self), other)

    def __pow__(self, exponent: int) -> Expr:
        if not isinstance(exponent, int) or exponent < 1:
            raise ShapeError(f"only positive integer powers are supported, got {exponent!r}")
        result = self
        for _ in range(exponent - 1):
            result = mul(result, self)
        return result

    def __matmul__(self, other: Expr) -> Expr:
        if len(self.shape) == 2:
            return matvec(self, other)
        return dot(self, other)

    def __rmatmul__(self, other: ArrayLike) -> Expr:
        return matvec(constant(other), self)

    def __getitem__(self, i: int) -> Expr:
        return index(self, i)


# --- Hilfen ---


def _as_array(value: ArrayLike) -> np.ndarray:
    return np.array(value, dtype=np.float64)


def _coerce(other: object, shape: Shape) -> Expr:
    """Wandelt Python-Zahlen/Arrays in Konstanten um; Zahlen werden auf `shape` aufgefuellt."""
    if isinstance(other, Expr):
        return other
    arr = _as_array(other)  # type: ignore[arg-type]
    if arr.ndim == 0 and shape != ():
        arr = np.full(shape, float(arr))
    return constant(arr)


def _multiply(a: Expr, other: object) -> Expr:
    b = _coerce(other, a.shape) if not isinstance(other, Expr) else other
    if isinstance(other, (int, float)) and a.shape != ():
        # Zahl * Vektor: als Skalierung statt elementweisem Produkt
        return scale(constant(float(other)), a)
    if a.shape == b.shape:
        return mul(a, b)
    if a.shape == ():
        return scale(a, b)
    if b.shape == ():
        return scale(b, a)
    raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")


def _require_same(kind: Kind, a: Expr, b: Expr) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{kind.value}: operand shapes differ: {a.shape} vs {b.shape}")


def _require_vector(kind: Kind, a: Expr) -> int:
    if len(a.shape) != 1:
        raise ShapeError(f"{kind.value}: expected a vector, got shape {a.shape}")
    return a.shape[0]


def _unary(kind: Kind, a: Expr, **attrs: Any) -> Expr:
    return Expr(kind, (a,), a.shape, attrs=attrs)


# --- Blaetter ---


def constant(value: ArrayLike) -> Expr:
    """Konstante (Skalar, Vektor oder Matrix)."""
    arr = _as_array(value)
    if arr.ndim > 2:
        raise ShapeError(f"constants must be at most 2-dimensional, got {arr.shape}")
    arr.setflags(write=False)
    return Expr(Kind.CONSTANT, (), arr.shape, value=arr)


def zeros(shape: Shape) -> Expr:
    return constant(np.zeros(shape))


def input_scalar(name: str) -> Expr:
    """Freie skalare Eingabe, z.B. die Zeit t."""
    return Expr(Kind.INPUT, (), (), name=name)


def input_vector(name: str, n: int) -> Expr:
    """Freie Vektor-Eingabe, z.B. der Zustand y."""
    if n < 1:
        raise ShapeError(f"input vector '{name}' needs n >= 1, got {n}")
    return Expr(Kind.INPUT, (), (n,), name=name)


def parameter(name: str, shape: Shape) -> Expr:
    """Lernbarer Parameter-Tensor; `grad` liefert dafuer einen Gradienten."""
    if len(shape) > 2:
        raise ShapeError(f"parameter '{name}' must be at most 2-dimensional, got {shape}")
    return Expr(Kind.PARAMETER, (), tuple(shape), name=name)


# --- Arithmetik ---


def add(a: Expr, b: Expr) -> Expr:
    _require_same(Kind.ADD, a, b)
    return Expr(Kind.ADD, (a, b), a.shape)


def sub(a: Expr, b: Expr) -> Expr:
    _require_same(Kind.SUB, a, b)
    return Expr(Kind.SUB, (a, b), a.shape)


def neg(a: Expr) -> Expr:
    return _unary(Kind.NEG, a)


def mul(a: Expr, b: Expr) -> Expr:
    """Elementweises Produkt gleich geformter Operanden."""
    _require_same(Kind.MUL, a, b)
    return Expr(Kind.MUL, (a, b), a.shape)


def scale(s: Expr, v: Expr) -> Expr:
    """Skalar mal Vektor (oder Matrix)."""
    if s.shape != ():
        raise ShapeError(f"scale: factor must be scalar, got shape {s.shape}")
    return Expr(Kind.SCALE, (s, v), v.shape)


def matvec(m: Expr, v: Expr) -> Expr:
    if len(m.shape) != 2:
        raise ShapeError(f"matvec: expected a matrix, got shape {m.shape}")
    n = _require_vector(Kind.MATVEC, v)
    if m.shape[1] != n:
        raise ShapeError(f"matvec: matrix {m.shape} does not match vector of length {n}")
    return Expr(Kind.MATVEC, (m, v), (m.shape[0],))


def dot(a: Expr, b: Expr) -> Expr:
    _require_vector(Kind.DOT, a)
    _require_same(Kind.DOT, a, b)
    return Expr(Kind.DOT, (a, b), ())


# --- Nichtlineare Primitive ---


def tanh(a: Expr) -> Expr:
    return _unary(Kind.TANH, a)


def exp(a: Expr) -> Expr:
    return _unary(Kind.EXP, a)


def absolute(a: Expr) -> Expr:
    return _unary(Kind.ABS, a)


def relu(a: Expr) -> Expr:
    """max(a, 0) elementweise, also ``(a)⁺``."""
    return _unary(Kind.RELU, a)


def clamp(a: Expr, lower: ArrayLike, upper: ArrayLike) -> Expr:
    """Komponentenweise Beschraenkung auf ``[lower, upper]``; ±inf erlaubt."""
    lo = np.broadcast_to(_as_array(lower), a.shape).copy()
    hi = np.broadcast_to(_as_array(upper), a.shape).copy()
    if np.any(lo > hi):
        raise ShapeError("clamp: lower bound exceeds upper bound")
    lo.setflags(write=False)
    hi.setflags(write=False)
    return _unary(Kind.CLAMP, a, lower=lo, upper=hi)


def sign(a: Expr) -> Expr:
    """Vorzeichen mit sign(0) = 0."""
    return _unary(Kind.SIGN, a)


def step(a: Expr) -> Expr:
    """Heaviside-Auswahl: 1 fuer a > 0, sonst 0."""
    return _unary(Kind.STEP, a)


def reciprocal(a: Expr, *, guarded: bool = False) -> Expr:
    """1/a; mit ``guarded=True`` wird 1/0 zu 0."""
    return _unary(Kind.RECIPROCAL, a, guarded=guarded)


def sqnorm(a: Expr) -> Expr:
    _require_vector(Kind.SQNORM, a)
    return Expr(Kind.SQNORM, (a,), ())


def norm(a: Expr) -> Expr:
    _require_vector(Kind.NORM, a)
    return Expr(Kind.NORM, (a,), ())


# --- Struktur ---


def index(a: Expr, i: int) -> Expr:
    n = _require_vector(Kind.INDEX, a)
    if not 0 <= i < n:
        raise ShapeError(f"index {i} out of range for vector of length {n}")
    return Expr(Kind.INDEX, (a,), (), attrs={"i": i})


def concat(*parts: Expr) -> Expr:
    """Haengt Skalare und Vektoren zu einem Vektor zusammen."""
    if not parts:
        raise ShapeError("concat needs at least one part")
    sizes = []
    for part in parts:
        if len(part.shape) > 1:
            raise ShapeError(f"concat: parts must be scalars or vectors, got {part.shape}")
        sizes.append(part.size)
    return Expr(Kind.CONCAT, tuple(parts), (sum(sizes),), attrs={"sizes": tuple(sizes)})


def batch_mean(a: Expr) -> Expr:
    """Mittelwert ueber die Stichprobenachse (bei ungebatchten Werten die Identitaet)."""
    if a.shape != ():
        raise ShapeError(f"batch_mean expects a scalar per sample, got shape {a.shape}")
    return Expr(Kind.BATCH_MEAN, (a,), ())


def stack(parts: list[Expr]) -> Expr:
    """Kurzform fuer `concat` ueber eine Liste."""
    return concat(*parts)


def as_expr(value: Expr | ArrayLike) -> Expr:
    return value if isinstance(value, Expr) else constant(value)
