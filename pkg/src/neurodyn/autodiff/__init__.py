"""Kleine Differentiations-Engine: Vorwaertsmodus fuer d/dt, Rueckwaertsmodus fuer Parameter."""

from __future__ import annotations

from .expr import (
    Expr,
    Kind,
    absolute,
    add,
    as_expr,
    batch_mean,
    clamp,
    concat,
    constant,
    dot,
    exp,
    index,
    input_scalar,
    input_vector,
    matvec,
    mul,
    neg,
    norm,
    parameter,
    reciprocal,
    relu,
    scale,
    sign,
    sqnorm,
    stack,
    step,
    sub,
    tanh,
    zeros,
)
from .forward import DualValue, eval_dual, tangent
from .program import CompiledMap, Program, compile_map, evaluate, topological_order
from .reverse import GradientSet, grad, value_and_grad

__all__ = [
    "CompiledMap",
    "DualValue",
    "Expr",
    "GradientSet",
    "Kind",
    "Program",
    "absolute",
    "add",
    "as_expr",
    "batch_mean",
    "clamp",
    "compile_map",
    "concat",
    "constant",
    "dot",
    "eval_dual",
    "evaluate",
    "exp",
    "grad",
    "index",
    "input_scalar",
    "input_vector",
    "matvec",
    "mul",
    "neg",
    "norm",
    "parameter",
    "reciprocal",
    "relu",
    "scale",
    "sign",
    "sqnorm",
    "stack",
    "step",
    "sub",
    "tangent",
    "tanh",
    "topological_order",
    "value_and_grad",
    "zeros",
]
