"""Neurodynamische Vektorfelder fuer NPE, konvexe und pseudokonvexe CNLPs.

Alle Felder werden als Ausdrucksgraphen gebaut; Gradienten von f und g
liefert die Engine. Auswahl an Knickstellen: sign(0) = 0 fuer ρ,
μ(0) = 0 fuer die Randterme von ∂B.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from .. import autodiff as ad
from ..autodiff import Expr
from ..models.problems import (
    NpeProblem,
    StandardCnlp,
    jacobian_transpose_times,
    leading,
    trailing,
    unit_gradient,
)
from ..models.vector_field import VectorField

EqualityPenalty = Literal["sign", "linear"]


def rho_select(s: ArrayLike) -> np.ndarray:
    """Komponentenweises Vorzeichen mit Auswahl 0 bei 0."""
    return np.sign(np.asarray(s, dtype=np.float64))


def theta(t: float, t0: float) -> float:
    """Zeit-Gate: 0 fuer t <= T₀, sonst 1."""
    return 0.0 if t <= t0 else 1.0


def theta_expr(t: Expr, t0: float) -> Expr:
    return ad.step(t - t0)


def xia2007_field(p: NpeProblem, lam: float = 1.0) -> VectorField:
    """Φ(y) = λ(−G(P_Ω(y)) + P_Ω(y) − y).

    Args:
        p: Projektionsgleichung.
        lam: Konvergenzrate λ > 0.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")

    def build(t: Expr, y: Expr) -> Expr:
        projected = p.omega.clamp(y)
        inner = -p.G(projected) + projected - y
        return ad.scale(ad.constant(lam), inner)

    return VectorField(p.n, build, "xia2007")


def _equality_term(p: StandardCnlp, x: Expr, penalty: EqualityPenalty) -> Expr:
    assert p.equality is not None
    a = p.equality.A
    h = ad.matvec(ad.constant(a), x) - p.equality.b
    selected = ad.sign(h) if penalty == "sign" else h
    return ad.matvec(ad.constant(a.T), selected)


def _tangent_projector(p: StandardCnlp) -> Expr:
    assert p.equality is not None
    return ad.constant(np.eye(p.n_x) - p.equality.projector)


def qin2014_field(p: StandardCnlp, equality_penalty: EqualityPenalty = "sign") -> VectorField:
    """Zwei-Schicht-Modell fuer konvexe, nichtglatte CNLPs ueber y = [x; u].

    dx/dt = −(I−U)[∂f + ∂gᵀ(u+g)⁺] − Aᵀρ(Ax−b),  du/dt = ½(−u + (u+g)⁺).

    Args:
        p: CNLP mit Gleichungen und mindestens einer Ungleichung.
        equality_penalty: ``"sign"`` fuer ρ(Ax−b), ``"linear"`` fuer Ax−b.

    Raises:
        ValueError: Gleichungen oder Ungleichungen fehlen.
    """
    if p.equality is None or p.g is None or p.k == 0:
        raise ValueError("qin2014_field needs equality constraints and at least one inequality constraint")
    j, g_map = p.n_x, p.g
    i_minus_u = _tangent_projector(p)

    def build(t: Expr, y: Expr) -> Expr:
        x = leading(y, j)
        u = trailing(y, j)
        gx = g_map(x)
        multiplier = ad.relu(u + gx)
        inner = unit_gradient(p.f(x), x) + jacobian_transpose_times(gx, x, multiplier)
        dx = -ad.matvec(i_minus_u, inner) - _equality_term(p, x, equality_penalty)
        du = 0.5 * (multiplier - u)
        return ad.concat(dx, du)

    return VectorField(j + p.k, build, "qin2014")


def xu2020_t0(p: StandardCnlp, x0: ArrayLike) -> float:
    """T₀ = 1 + ‖Ax₀ − b‖₁ / λ_min(AAᵀ)."""
    assert p.equality is not None
    residual = p.equality.residual(x0)
    return 1.0 + float(np.sum(np.abs(residual))) / p.equality.lambda_min()


def xu2020_field(p: StandardCnlp, x0: ArrayLike) -> VectorField:
    """Zeitabhaengiges Modell fuer pseudokonvexe, nichtglatte CNLPs ueber y = x.

    dx/dt = −θ(t)(I−U)(μ(x)∇f + ∂B(x)) − Aᵀρ(Ax−b) mit
    μ(x) = Π(1 − step(g_i)), ∂B(x) = Σ step(g_i)∇g_i.

    Raises:
        ValueError: Gleichungen fehlen.
        FactorizationError: A hat keinen vollen Zeilenrang (beim Aufbau der AffineSet).
    """
    if p.equality is None:
        raise ValueError("xu2020_field needs equality constraints")
    t0 = xu2020_t0(p, x0)
    i_minus_u = _tangent_projector(p)
    g_map = p.g

    def build(t: Expr, y: Expr) -> Expr:
        gradient = unit_gradient(p.f(y), y)
        if g_map is not None and p.k > 0:
            gy = g_map(y)
            active = ad.step(gy)
            mu = ad.constant(1.0)
            for i in range(p.k):
                mu = mu * (1.0 - ad.index(active, i))
            inner = ad.scale(mu, gradient) + jacobian_transpose_times(gy, y, active)
        else:
            inner = gradient
        gated = ad.scale(theta_expr(t, t0), ad.matvec(i_minus_u, inner))
        return -gated - _equality_term(p, y, "sign")

    return VectorField(p.n_x, build, "xu2020", switch_times=(t0,))
