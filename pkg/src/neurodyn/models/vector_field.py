"""Rechte Seite dy/dt = Φ(t, y) eines neurodynamischen Anfangswertproblems."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike

from .. import autodiff as ad
from ..autodiff import Expr, Program
from ..errors import ShapeError

FieldBuilder = Callable[[Expr, Expr], Expr]


@dataclass(frozen=True)
class _Compiled:
    t: Expr
    y: Expr
    out: Expr
    program: Program


@dataclass(frozen=True)
class VectorField:
    """Vektorfeld als Builder ueber Ausdruecke.

    Attributes:
        n: Zustandsdimension.
        build: ``(t, y) -> Φ`` als Ausdruck; `y` darf gebatcht sein.
        name: Kennung des Modells (z.B. ``xia2007``).
        switch_times: Bekannte Unstetigkeitsstellen in t.
    """

    n: int
    build: FieldBuilder
    name: str
    switch_times: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        compiled = self._compiled
        if compiled.out.shape != (self.n,):
            raise ShapeError(f"field '{self.name}' returns shape {compiled.out.shape}, expected ({self.n},)")

    @cached_property
    def _compiled(self) -> _Compiled:
        t = ad.input_scalar("t")
        y = ad.input_vector("y", self.n)
        out = self.build(t, y)
        return _Compiled(t, y, out, Program([out]))

    @cached_property
    def time_dependent(self) -> bool:
        """True genau dann, wenn der Feldgraph t liest."""
        return any(node is self._compiled.t for node in self._compiled.program.order)

    def expr(self, t: Expr, y: Expr) -> Expr:
        """Feld als Teilausdruck, z.B. innerhalb des Trainings-Loss."""
        return self.build(t, y)

    def __call__(self, t: ArrayLike, y: ArrayLike) -> np.ndarray:
        """Numerische Auswertung; `y` darf die Form ``(B, n)`` haben."""
        c = self._compiled
        bindings: dict[str, ArrayLike] = {"y": y}
        if self.time_dependent:
            bindings["t"] = t
        return c.program.run(bindings).values[c.out]
