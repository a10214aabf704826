"""Vorwaertsmodus: Richtungsableitungen als neue Ausdrucksgraphen.

`tangent` baut zu einem Ausdruck den Graphen seiner Ableitung entlang
einer Eingabe auf. Weil das Ergebnis wieder ein `Expr` ist, kann der
Rueckwaertsmodus spaeter durch die Zeitableitung hindurch differenzieren.
`eval_dual` wertet Wert und Tangente gemeinsam aus (Dualzahl-Semantik).

Ableitungsregeln an Knickstellen:
    max0'(0) = 0, abs'(0) = 0, clamp' an einer Grenze = 0, sign' = step' = 0,
    norm' bei Norm 0 = 0.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from ..errors import DualUsageError, ShapeError
from .expr import (
    Expr,
    Kind,
    add,
    batch_mean,
    concat,
    constant,
    dot,
    index,
    matvec,
    mul,
    neg,
    reciprocal,
    scale,
    sign,
    step,
    sub,
    zeros,
)
from .program import Bindings, Program, topological_order

# None steht fuer eine strukturell verschwindende Tangente
_Tangent = Expr | None


@dataclass(frozen=True)
class DualValue:
    """Wert und Ableitung nach der ausgezeichneten skalaren Eingabe."""

    value: np.ndarray
    tangent: np.ndarray

    def __post_init__(self) -> None:
        if np.shape(self.value) != np.shape(self.tangent):
            raise ShapeError(f"dual value/tangent shapes differ: {np.shape(self.value)} vs {np.shape(self.tangent)}")


def _plus(a: _Tangent, b: _Tangent) -> _Tangent:
    if a is None:
        return b
    if b is None:
        return a
    return add(a, b)


def _rule(node: Expr, d: list[_Tangent]) -> _Tangent:
    kind = node.kind
    ops = node.operands

    if kind is Kind.ADD:
        return _plus(d[0], d[1])
    if kind is Kind.SUB:
        if d[1] is None:
            return d[0]
        return neg(d[1]) if d[0] is None else sub(d[0], d[1])
    if kind is Kind.NEG:
        return None if d[0] is None else neg(d[0])
    if kind is Kind.MUL:
        left = None if d[0] is None else mul(d[0], ops[1])
        right = None if d[1] is None else mul(ops[0], d[1])
        return _plus(left, right)
    if kind is Kind.SCALE:
        left = None if d[0] is None else scale(d[0], ops[1])
        right = None if d[1] is None else scale(ops[0], d[1])
        return _plus(left, right)
    if kind is Kind.MATVEC:
        left = None if d[0] is None else matvec(d[0], ops[1])
        right = None if d[1] is None else matvec(ops[0], d[1])
        return _plus(left, right)
    if kind is Kind.DOT:
        left = None if d[0] is None else dot(d[0], ops[1])
        right = None if d[1] is None else dot(ops[0], d[1])
        return _plus(left, right)

    du = d[0]
    if du is None or kind in (Kind.SIGN, Kind.STEP):
        return None
    u = ops[0]

    if kind is Kind.TANH:
        one = constant(np.ones(node.shape))
        return mul(sub(one, mul(node, node)), du)
    if kind is Kind.EXP:
        return mul(node, du)
    if kind is Kind.ABS:
        return mul(sign(u), du)
    if kind is Kind.RELU:
        return mul(step(u), du)
    if kind is Kind.CLAMP:
        lower = constant(node.attrs["lower"])
        upper = constant(node.attrs["upper"])
        inside = mul(step(sub(u, lower)), step(sub(upper, u)))
        return mul(inside, du)
    if kind is Kind.RECIPROCAL:
        return mul(neg(mul(node, node)), du)
    if kind is Kind.SQNORM:
        return scale(constant(2.0), dot(u, du))
    if kind is Kind.NORM:
        return mul(dot(u, du), reciprocal(node, guarded=True))
    if kind is Kind.INDEX:
        return index(du, node.attrs["i"])
    if kind is Kind.BATCH_MEAN:
        return batch_mean(du)
    raise ShapeError(f"no derivative rule for {kind}")  # pragma: no cover


def tangent(expr: Expr, wrt: Expr, direction: ArrayLike | None = None) -> Expr:
    """Baut den Graphen der Richtungsableitung von `expr` nach `wrt`.

    Args:
        expr: Abzuleitender Ausdruck.
        wrt: Knoten, nach dem abgeleitet wird (meist eine Eingabe).
        direction: Richtung mit der Shape von `wrt`; fuer skalare `wrt` Default 1.

    Returns:
        Ausdruck mit der Shape von `expr`. Haengt `expr` nicht von `wrt` ab,
        ist das Ergebnis eine Null-Konstante.
    """
    if direction is None:
        if wrt.shape != ():
            raise ShapeError("a direction is required for non-scalar wrt")
        direction = 1.0
    seed = constant(direction)
    if seed.shape != wrt.shape:
        raise ShapeError(f"direction shape {seed.shape} does not match wrt shape {wrt.shape}")

    memo: dict[Expr, _Tangent] = {}
    for node in topological_order([expr]):
        if node is wrt:
            memo[node] = seed
        elif not node.operands:
            memo[node] = None
        elif node.kind is Kind.CONCAT:
            parts = [memo[o] for o in node.operands]
            if all(p is None for p in parts):
                memo[node] = None
            else:
                memo[node] = concat(*(p if p is not None else zeros(o.shape) for p, o in zip(parts, node.operands, strict=True)))
        else:
            memo[node] = _rule(node, [memo[o] for o in node.operands])

    result = memo[expr]
    return result if result is not None else zeros(expr.shape)


_dual_cache: weakref.WeakKeyDictionary[Expr, dict[int, tuple[Expr, Program]]] = weakref.WeakKeyDictionary()


def _dual_program(expr: Expr, wrt: Expr) -> tuple[Expr, Program]:
    per_expr = _dual_cache.setdefault(expr, {})
    entry = per_expr.get(id(wrt))
    if entry is None:
        d_expr = tangent(expr, wrt)
        entry = (d_expr, Program([expr, d_expr]))
        per_expr[id(wrt)] = entry
    return entry


def _dual_input(expr: Expr, name: str | None) -> Expr:
    scalars = [n for n in topological_order([expr]) if n.kind is Kind.INPUT and n.shape == ()]
    if name is not None:
        scalars = [n for n in scalars if n.name == name]
    if len(scalars) > 1:
        names = ", ".join(sorted({n.name for n in scalars}))
        raise DualUsageError(f"more than one scalar input could be the dual direction: {names}")
    if not scalars:
        raise DualUsageError("expression has no scalar input to differentiate along")
    return scalars[0]


def eval_dual(expr: Expr, t: ArrayLike, bindings: Bindings | None = None, *, wrt: str | None = None) -> DualValue:
    """Wert und exakte Ableitung nach der skalaren Eingabe.

    Args:
        expr: Ausdruck mit genau einer skalaren Eingabe (oder `wrt` benennt sie).
        t: Wert der skalaren Eingabe; ein 1-D-Array wertet einen Batch aus.
        bindings: Uebrige Bindungen (Parameter, weitere Vektor-Eingaben).
        wrt: Name der Dual-Eingabe, falls der Graph mehrere skalare Eingaben hat.

    Raises:
        DualUsageError: Dual-Richtung ist nicht eindeutig.
    """
    direction = _dual_input(expr, wrt)
    d_expr, program = _dual_program(expr, direction)
    env = dict(bindings or {})
    env[direction.name] = t
    evaluation = program.run(env)
    value = evaluation.values[expr]
    tan = evaluation.values[d_expr]
    # strukturelle Null-Tangente hat keine Stichprobenachse
    return DualValue(value, np.broadcast_to(tan, np.shape(value)).copy())
