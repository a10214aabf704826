"""Rueckwaertsmodus: Gradienten eines skalaren Ausdrucks nach allen Parametern."""

from __future__ import annotations

import weakref

import numpy as np

from ..errors import ShapeError
from .expr import Expr, Kind
from .program import Bindings, Evaluation, Program, _safe_reciprocal, _scale_factor

GradientSet = dict[str, np.ndarray]


class _GradProgram:
    """Gecachte Auswertungsreihenfolge plus Menge der parameterabhaengigen Knoten."""

    def __init__(self, root: Expr) -> None:
        self.program = Program([root])
        needs: set[Expr] = set()
        for node in self.program.order:
            if node.kind is Kind.PARAMETER or any(o in needs for o in node.operands):
                needs.add(node)
        self.needs_grad = needs


_grad_programs: weakref.WeakKeyDictionary[Expr, _GradProgram] = weakref.WeakKeyDictionary()


def _grad_program(root: Expr) -> _GradProgram:
    gp = _grad_programs.get(root)
    if gp is None:
        gp = _GradProgram(root)
        _grad_programs[root] = gp
    return gp


def grad(root: Expr, bindings: Bindings) -> GradientSet:
    """Gradient eines skalaren Ausdrucks nach allen Parametern im Graphen.

    Stichprobenachsen muessen vorher mit `batch_mean` reduziert sein.

    Args:
        root: Skalarer Wurzelknoten.
        bindings: Bindungen fuer alle Eingaben und Parameter.

    Returns:
        Parametername -> Gradient mit der Shape des Parameters.

    Raises:
        ShapeError: Wurzel ist nicht skalar oder noch gebatcht.
    """
    if root.shape != ():
        raise ShapeError(f"grad needs a scalar root, got shape {root.shape}")
    gp = _grad_program(root)
    evaluation = gp.program.run(bindings)
    if evaluation.batched[root]:
        raise ShapeError("grad root still carries a sample axis; reduce it with batch_mean")
    return backward(gp, evaluation, root)


def value_and_grad(root: Expr, bindings: Bindings) -> tuple[float, GradientSet]:
    """Wie `grad`, liefert zusaetzlich den Wert der Wurzel aus demselben Vorwaertslauf."""
    if root.shape != ():
        raise ShapeError(f"grad needs a scalar root, got shape {root.shape}")
    gp = _grad_program(root)
    evaluation = gp.program.run(bindings)
    if evaluation.batched[root]:
        raise ShapeError("grad root still carries a sample axis; reduce it with batch_mean")
    return float(evaluation.values[root]), backward(gp, evaluation, root)


def backward(gp: _GradProgram, evaluation: Evaluation, root: Expr) -> GradientSet:
    values = evaluation.values
    batched = evaluation.batched
    adjoint: dict[Expr, np.ndarray] = {root: np.ones(())}
    grads: GradientSet = {p.name: np.zeros(p.shape) for p in gp.program.parameters}

    for node in reversed(gp.program.order):
        g = adjoint.pop(node, None)
        if g is None:
            continue
        if node.kind is Kind.PARAMETER:
            grads[node.name] = grads[node.name] + g
            continue
        for operand, contrib in _vjp(node, g, values, batched):
            if operand not in gp.needs_grad:
                continue
            if not batched[operand] and contrib.ndim > len(operand.shape):
                # geteilter Operand: Beitraege ueber die Stichprobenachse summieren
                contrib = np.sum(contrib, axis=0)
            previous = adjoint.get(operand)
            adjoint[operand] = contrib if previous is None else previous + contrib
    return grads


def _vjp(
    node: Expr,
    g: np.ndarray,
    values: dict[Expr, np.ndarray],
    batched: dict[Expr, bool],
) -> list[tuple[Expr, np.ndarray]]:
    kind = node.kind
    ops = node.operands
    y = values[node]

    if kind is Kind.ADD:
        return [(ops[0], g), (ops[1], g)]
    if kind is Kind.SUB:
        return [(ops[0], g), (ops[1], -g)]
    if kind is Kind.NEG:
        return [(ops[0], -g)]
    if kind is Kind.MUL:
        a, b = values[ops[0]], values[ops[1]]
        return [(ops[0], g * b), (ops[1], g * a)]
    if kind is Kind.SCALE:
        s, v = values[ops[0]], values[ops[1]]
        k = len(node.shape)
        gs = np.sum(g * v, axis=tuple(range(-k, 0))) if k else g * v
        return [(ops[0], gs), (ops[1], _scale_factor(s, k) * g)]
    if kind is Kind.MATVEC:
        return _matvec_vjp(node, g, values, batched)
    if kind is Kind.DOT:
        a, b = values[ops[0]], values[ops[1]]
        return [(ops[0], g[..., None] * b), (ops[1], g[..., None] * a)]

    u = values[ops[0]]
    if kind is Kind.TANH:
        return [(ops[0], g * (1.0 - y * y))]
    if kind is Kind.EXP:
        return [(ops[0], g * y)]
    if kind is Kind.ABS:
        return [(ops[0], g * np.sign(u))]
    if kind is Kind.RELU:
        return [(ops[0], g * (u > 0))]
    if kind is Kind.CLAMP:
        inside = (u > node.attrs["lower"]) & (u < node.attrs["upper"])
        return [(ops[0], g * inside)]
    if kind in (Kind.SIGN, Kind.STEP):
        return []
    if kind is Kind.RECIPROCAL:
        return [(ops[0], -g * y * y)]
    if kind is Kind.SQNORM:
        return [(ops[0], 2.0 * g[..., None] * u)]
    if kind is Kind.NORM:
        return [(ops[0], (g * _safe_reciprocal(y))[..., None] * u)]
    if kind is Kind.INDEX:
        gu = np.zeros(np.shape(u))
        gu[..., node.attrs["i"]] = g
        return [(ops[0], gu)]
    if kind is Kind.CONCAT:
        out = []
        offset = 0
        for operand, size in zip(ops, node.attrs["sizes"], strict=True):
            if operand.shape == ():
                out.append((operand, g[..., offset]))
            else:
                out.append((operand, g[..., offset : offset + size]))
            offset += size
        return out
    if kind is Kind.BATCH_MEAN:
        if not batched[ops[0]]:
            return [(ops[0], g)]
        count = u.shape[0]
        return [(ops[0], np.full(u.shape, g / count))]
    raise ShapeError(f"no reverse rule for {kind}")  # pragma: no cover


def _matvec_vjp(
    node: Expr,
    g: np.ndarray,
    values: dict[Expr, np.ndarray],
    batched: dict[Expr, bool],
) -> list[tuple[Expr, np.ndarray]]:
    m_node, v_node = node.operands
    m, v = values[m_node], values[v_node]
    if batched[m_node]:
        gm = np.einsum("...i,...j->...ij", g, v)
        gv = np.einsum("...i,...ij->...j", g, m)
        return [(m_node, gm), (v_node, gv)]

    gv = g @ m
    if not batched[node]:
        gm = np.outer(g, v)
    elif batched[v_node]:
        gm = g.T @ v
    else:
        gm = np.outer(np.sum(g, axis=0), v)
    return [(m_node, gm), (v_node, gv)]
