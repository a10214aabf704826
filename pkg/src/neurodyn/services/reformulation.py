"""Umformungen von VI, NCP und glatten CNLPs in eine Projektionsgleichung."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from .. import autodiff as ad
from ..autodiff import Expr
from ..errors import ShapeError, UnsupportedProblemError
from ..models.problems import (
    BoxSet,
    NcpProblem,
    NpeProblem,
    StandardCnlp,
    ViProblem,
    jacobian_transpose_times,
    leading,
    project_box,
    trailing,
    unit_gradient,
)


def npe_residual(y: ArrayLike, p: NpeProblem, alpha: float = 1.0) -> np.ndarray:
    """P_Ω(y − α·G(y)) − y.

    Args:
        y: Zustand der Laenge n.
        p: Projektionsgleichung.
        alpha: Schrittweite des Residuums (> 0).

    Returns:
        Residuenvektor; Null genau in den Loesungen.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    arr = np.asarray(y, dtype=np.float64)
    if arr.shape != (p.n,):
        raise ShapeError(f"state has shape {arr.shape}, problem expects ({p.n},)")
    return project_box(arr - alpha * p.g_numeric(arr), p.omega) - arr


def ncp_as_npe(p: NcpProblem) -> NpeProblem:
    """NCP -> NPE auf dem nichtnegativen Orthanten."""
    return NpeProblem(p.G, BoxSet.nonnegative(p.n), name=p.name)


def vi_as_npe(p: ViProblem) -> NpeProblem:
    return NpeProblem(p.G, p.omega, name=p.name)


def kkt_npe_of_cnlp(p: StandardCnlp) -> NpeProblem:
    """KKT-System eines glatten CNLP als NPE ueber y = [x; u].

    G(y) = [∇f(x) + ∇g(x)ᵀu; −g(x)], Ω = x-Schranken × [0, ∞)^k.
    Gradienten kommen aus der Engine.

    Raises:
        UnsupportedProblemError: Das Problem hat allgemeine Gleichungs-Nebenbedingungen.
    """
    if p.equality is not None:
        raise UnsupportedProblemError("the KKT reformulation does not handle equality constraints; use qin2014_field or xu2020_field")
    j, k = p.n_x, p.k

    def kkt_map(y: Expr) -> Expr:
        x = leading(y, j)
        fx = p.f(x)
        stationarity = unit_gradient(fx, x)
        if k == 0 or p.g is None:
            return stationarity
        u = trailing(y, j)
        gx = p.g(x)
        return ad.concat(stationarity + jacobian_transpose_times(gx, x, u), -gx)

    omega = BoxSet.product(p.x_bounds(), BoxSet.nonnegative(k)) if k else p.x_bounds()
    return NpeProblem(kkt_map, omega, name=p.name)

