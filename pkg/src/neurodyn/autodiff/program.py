"""Vorwaertsauswertung von Ausdrucksgraphen.

Ein `Program` cached die topologische Reihenfolge eines oder mehrerer
Wurzelknoten und wertet sie mit numpy aus. Eingaben duerfen eine
fuehrende Stichprobenachse tragen; Parameter und Konstanten werden
ueber diese Achse geteilt.
"""

from __future__ import annotations

import weakref
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from ..errors import BindingError, ShapeError
from .expr import Expr, Kind, input_vector

Bindings = Mapping[str, ArrayLike]


def topological_order(roots: Iterable[Expr]) -> list[Expr]:
    """Operanden vor ihren Verbrauchern, iterativ (keine Rekursionstiefe)."""
    order: list[Expr] = []
    seen: set[int] = set()
    for root in roots:
        if id(root) in seen:
            continue
        stack: list[tuple[Expr, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for operand in reversed(node.operands):
                if id(operand) not in seen:
                    stack.append((operand, False))
    return order


def _scale_factor(s: np.ndarray, target_ndim: int) -> np.ndarray:
    """Haengt Achsen an einen (gebatchten) Skalar, damit er gegen einen Tensor broadcastet."""
    return np.reshape(s, np.shape(s) + (1,) * target_ndim)


def _safe_reciprocal(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=np.float64)
    np.divide(1.0, a, out=out, where=a != 0)
    return out


@dataclass
class Evaluation:
    """Knotenwerte eines Vorwaertslaufs.

    ``batched[node]`` sagt, ob der Wert eine fuehrende Stichprobenachse hat.
    """

    values: dict[Expr, np.ndarray]
    batched: dict[Expr, bool]
    batch_size: int | None

    def __getitem__(self, node: Expr) -> np.ndarray:
        return self.values[node]


class Program:
    """Ausfuehrbare Form einer Menge von Wurzelknoten."""

    def __init__(self, roots: Iterable[Expr]) -> None:
        self.roots = tuple(roots)
        self.order = topological_order(self.roots)
        self.inputs = [n for n in self.order if n.kind is Kind.INPUT]
        self.parameters = [n for n in self.order if n.kind is Kind.PARAMETER]

    def run(self, bindings: Bindings) -> Evaluation:
        values: dict[Expr, np.ndarray] = {}
        batched: dict[Expr, bool] = {}
        batch_size: int | None = None

        for node in self.order:
            kind = node.kind
            if kind is Kind.CONSTANT:
                assert node.value is not None
                values[node] = node.value
                batched[node] = False
                continue
            if kind is Kind.INPUT or kind is Kind.PARAMETER:
                arr, is_batched = self._bind(node, bindings)
                if is_batched:
                    if batch_size is not None and arr.shape[0] != batch_size:
                        raise ShapeError(f"input '{node.name}' has batch size {arr.shape[0]}, expected {batch_size}")
                    batch_size = arr.shape[0]
                values[node] = arr
                batched[node] = is_batched
                continue

            operand_values = [values[o] for o in node.operands]
            values[node] = _forward(node, operand_values, [batched[o] for o in node.operands])
            if kind is Kind.BATCH_MEAN:
                batched[node] = False
            else:
                batched[node] = any(batched[o] for o in node.operands)

        return Evaluation(values, batched, batch_size)

    @staticmethod
    def _bind(node: Expr, bindings: Bindings) -> tuple[np.ndarray, bool]:
        if node.name not in bindings:
            what = "parameter" if node.kind is Kind.PARAMETER else "input"
            raise BindingError(f"unbound {what} '{node.name}'")
        arr = np.asarray(bindings[node.name], dtype=np.float64)
        if arr.shape == node.shape:
            return arr, False
        if node.kind is Kind.INPUT and arr.ndim == len(node.shape) + 1 and arr.shape[1:] == node.shape:
            return arr, True
        raise ShapeError(f"binding '{node.name}' has shape {arr.shape}, expected {node.shape}")

    def __call__(self, bindings: Bindings) -> list[np.ndarray]:
        evaluation = self.run(bindings)
        return [evaluation.values[r] for r in self.roots]


def _forward(node: Expr, args: list[np.ndarray], flags: list[bool]) -> np.ndarray:
    kind = node.kind
    if kind is Kind.ADD:
        return args[0] + args[1]
    if kind is Kind.SUB:
        return args[0] - args[1]
    if kind is Kind.NEG:
        return -args[0]
    if kind is Kind.MUL:
        return args[0] * args[1]
    if kind is Kind.SCALE:
        return _scale_factor(args[0], len(node.shape)) * args[1]
    if kind is Kind.MATVEC:
        m, v = args
        if not flags[0]:
            return v @ m.T
        return np.einsum("...ij,...j->...i", m, v)
    if kind is Kind.DOT:
        return np.sum(args[0] * args[1], axis=-1)
    if kind is Kind.TANH:
        return np.tanh(args[0])
    if kind is Kind.EXP:
        return np.exp(args[0])
    if kind is Kind.ABS:
        return np.abs(args[0])
    if kind is Kind.RELU:
        return np.maximum(args[0], 0.0)
    if kind is Kind.CLAMP:
        return np.clip(args[0], node.attrs["lower"], node.attrs["upper"])
    if kind is Kind.SIGN:
        return np.sign(args[0])
    if kind is Kind.STEP:
        return (args[0] > 0).astype(np.float64)
    if kind is Kind.RECIPROCAL:
        if node.attrs.get("guarded"):
            return _safe_reciprocal(args[0])
        with np.errstate(divide="ignore"):
            return 1.0 / args[0]
    if kind is Kind.SQNORM:
        return np.sum(args[0] * args[0], axis=-1)
    if kind is Kind.NORM:
        return np.sqrt(np.sum(args[0] * args[0], axis=-1))
    if kind is Kind.INDEX:
        return args[0][..., node.attrs["i"]]
    if kind is Kind.CONCAT:
        return _concat(args, flags)
    if kind is Kind.BATCH_MEAN:
        if not flags[0]:
            return args[0]
        return np.sum(args[0], axis=0) / args[0].shape[0]
    raise ShapeError(f"unknown node kind {kind}")  # pragma: no cover


def _concat(args: list[np.ndarray], flags: list[bool]) -> np.ndarray:
    batch = next((a.shape[0] for a, f in zip(args, flags, strict=True) if f), None)
    pieces = []
    for arr, is_batched in zip(args, flags, strict=True):
        # Skalare werden zu Laenge-1-Vektoren
        piece = arr[..., None] if arr.ndim == int(is_batched) else arr
        if batch is not None and not is_batched:
            piece = np.broadcast_to(piece, (batch, *piece.shape))
        pieces.append(piece)
    return np.concatenate(pieces, axis=-1)


def evaluate(expr: Expr, bindings: Bindings) -> np.ndarray:
    """Wertet `expr` mit einem Vorwaertslauf aus.

    Args:
        expr: Wurzelknoten.
        bindings: Name -> Wert fuer alle freien Eingaben und Parameter.

    Returns:
        Wert des Knotens (mit Stichprobenachse, falls eine Eingabe gebatcht ist).

    Raises:
        BindingError: Eingabe oder Parameter fehlt.
        ShapeError: Bindung passt nicht zur Shape.
    """
    return program_for(expr).run(bindings).values[expr]


_programs: weakref.WeakKeyDictionary[Expr, Program] = weakref.WeakKeyDictionary()


def program_for(expr: Expr) -> Program:
    """Gecachtes Programm fuer einen einzelnen Wurzelknoten."""
    program = _programs.get(expr)
    if program is None:
        program = Program([expr])
        _programs[expr] = program
    return program


class CompiledMap:
    """numpy-Aufruf einer Vektor-Abbildung, die ueber `Expr` definiert ist."""

    def __init__(self, fn: Callable[[Expr], Expr], n: int, name: str = "y") -> None:
        self.n = n
        self.name = name
        self.input = input_vector(name, n)
        self.output = fn(self.input)
        self.program = Program([self.output])

    def __call__(self, y: ArrayLike) -> np.ndarray:
        return self.program.run({self.name: y}).values[self.output]


def compile_map(fn: Callable[[Expr], Expr], n: int, name: str = "y") -> CompiledMap:
    """Baut den Graphen von `fn` einmal auf und liefert eine numpy-Funktion.

    >>> square = compile_map(lambda y: y * y, 2)
    >>> square([3.0, 4.0]).tolist()
    [9.0, 16.0]
    """
    return CompiledMap(fn, n, name)
