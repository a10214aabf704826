"""OINN-Modell: y(t; w) = y0 + (1 − e^{−t})·N(t; w) mit einschichtigem tanh-Netz.

Die Konstruktion erfuellt die Anfangsbedingung exakt: bei t = 0 ist der
Faktor 1 − e⁰ in IEEE-Arithmetik genau 0.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from .. import autodiff as ad
from ..autodiff import Expr, Program
from ..errors import CheckpointFormatError, ShapeError
from .problems import Projection

CHECKPOINT_FORMAT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Gewichte des Netzes N(t) = W2·tanh(W1·t + b1) + b2."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        h = self.W1.shape[0]
        n = self.W2.shape[0]
        expected = {"W1": (h, 1), "b1": (h,), "W2": (n, h), "b2": (n,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def hidden(self) -> int:
        return int(self.W1.shape[0])

    @property
    def n(self) -> int:
        return int(self.W2.shape[0])

    def to_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @classmethod
    def from_dict(cls, data: dict[str, ArrayLike]) -> MlpParams:
        return cls(**{name: np.array(data[name], dtype=np.float64) for name in PARAM_NAMES})

    def norm(self) -> float:
        """Euklidische Norm ueber alle Eintraege."""
        return float(np.sqrt(sum(np.sum(np.square(v)) for v in self.to_dict().values())))

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(v))) for v in self.to_dict().values())

    @classmethod
    def zeros(cls, n: int, hidden: int) -> MlpParams:
        return cls(np.zeros((hidden, 1)), np.zeros(hidden), np.zeros((n, hidden)), np.zeros(n))


@dataclass(frozen=True, eq=False)
class OinnModel:
    params: MlpParams
    y0: np.ndarray
    horizon: float

    def __post_init__(self) -> None:
        y0 = np.array(self.y0, dtype=np.float64)
        if y0.shape != (self.params.n,):
            raise ShapeError(f"y0 has shape {y0.shape}, network outputs {self.params.n} values")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def n(self) -> int:
        return self.params.n

    def with_params(self, params: MlpParams) -> OinnModel:
        return OinnModel(params, self.y0, self.horizon)

    def bindings(self) -> dict[str, np.ndarray]:
        return {**self.params.to_dict(), "y0": self.y0}


def init_params(n: int, hidden: int, rng: np.random.Generator) -> MlpParams:
    """Glorot-uniforme Gewichte, Null-Biases.

    Args:
        n: Zustandsdimension.
        hidden: Breite der verdeckten Schicht.
        rng: Seeded Generator (die CLI nutzt Philox).
    """

    def glorot(fan_out: int, fan_in: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_out, fan_in))

    return MlpParams(glorot(hidden, 1), np.zeros(hidden), glorot(n, hidden), np.zeros(n))


def seeded_rng(seed: int) -> np.random.Generator:
    """Zaehlerbasierter Generator; gleiche Seeds liefern gleiche Stroeme auf allen Plattformen."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class OinnGraph:
    """Ausdrucksgraph des Modells fuer eine feste Form (n, hidden).

    `y0` ist eine Eingabe, damit derselbe Graph fuer alle Anfangspunkte taugt.
    """

    n: int
    hidden: int
    t: Expr
    y0: Expr
    params: dict[str, Expr]
    network: Expr
    state: Expr
    state_program: Program
    network_program: Program


@functools.lru_cache(maxsize=32)
def oinn_graph(n: int, hidden: int) -> OinnGraph:
    t = ad.input_scalar("t")
    y0 = ad.input_vector("y0", n)
    params = {
        "W1": ad.parameter("W1", (hidden, 1)),
        "b1": ad.parameter("b1", (hidden,)),
        "W2": ad.parameter("W2", (n, hidden)),
        "b2": ad.parameter("b2", (n,)),
    }
    pre = params["W1"] @ ad.concat(t) + params["b1"]
    network = params["W2"] @ ad.tanh(pre) + params["b2"]
    state = y0 + ad.scale(1.0 - ad.exp(-t), network)
    return OinnGraph(n, hidden, t, y0, params, network, state, Program([state]), Program([network]))


def _graph(m: OinnModel | MlpParams) -> OinnGraph:
    params = m.params if isinstance(m, OinnModel) else m
    return oinn_graph(params.n, params.hidden)


def nn_forward(t: ArrayLike, p: MlpParams) -> np.ndarray:
    """N(t) = W2·tanh(W1·t + b1) + b2; `t` darf ein 1-D-Batch sein."""
    g = _graph(p)
    return g.network_program.run({**p.to_dict(), "t": t}).values[g.network]


def model_forward(t: ArrayLike, m: OinnModel) -> np.ndarray:
    """y(t; w) = y0 + (1 − e^{−t})·N(t; w)."""
    g = _graph(m)
    return g.state_program.run({**m.bindings(), "t": t}).values[g.state]


def model_time_derivative(t: ArrayLike, m: OinnModel) -> np.ndarray:
    """∂y/∂t = e^{−t}·N(t) + (1 − e^{−t})·dN/dt, ueber Dualzahlen."""
    g = _graph(m)
    return ad.eval_dual(g.state, t, m.bindings(), wrt="t").tangent


def predict(m: OinnModel, proj: Projection) -> np.ndarray:
    """Projizierter Endpunkt P(y(T; w)) als Naeherung der Loesung."""
    return proj(model_forward(m.horizon, m))


def predict_trajectory(m: OinnModel, times: ArrayLike) -> np.ndarray:
    """Zustaende y(t_i; w) fuer ein Zeitgitter, Form ``(len(times), n)``."""
    ts = np.asarray(times, dtype=np.float64)
    return np.atleast_2d(model_forward(ts, m)) if ts.ndim else model_forward(ts, m)[None, :]


def save_checkpoint(path: Path, m: OinnModel) -> None:
    """Schreibt das Modell als ``.npz`` (Formatversion, y0, T, Gewichte)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        np.savez(
            fh,
            format_version=np.array(CHECKPOINT_FORMAT_VERSION),
            y0=m.y0,
            horizon=np.array(m.horizon),
            **m.params.to_dict(),
        )


def load_checkpoint(path: Path) -> OinnModel:
    """Laedt ein Modell aus einer mit `save_checkpoint` geschriebenen Datei.

    Raises:
        CheckpointFormatError: Schluessel fehlen oder die Version ist unbekannt.
    """
    with np.load(path) as data:
        missing = {"format_version", "y0", "horizon", *PARAM_NAMES} - set(data.files)
        if missing:
            raise CheckpointFormatError(f"checkpoint {path} lacks keys: {', '.join(sorted(missing))}")
        version = int(data["format_version"])
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointFormatError(f"unsupported checkpoint format version {version}")
        params = MlpParams.from_dict({name: data[name] for name in PARAM_NAMES})
        return OinnModel(params, np.array(data["y0"]), float(data["horizon"]))
