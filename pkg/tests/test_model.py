"""Tests fuer das OINN-Modell (Anfangsbedingung, Zeitableitung, Checkpoints)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from neurodyn.errors import CheckpointFormatError, ShapeError
from neurodyn.models.oinn_model import (
    CHECKPOINT_FORMAT_VERSION,
    MlpParams,
    OinnModel,
    init_params,
    load_checkpoint,
    model_forward,
    model_time_derivative,
    nn_forward,
    predict,
    predict_trajectory,
    save_checkpoint,
    seeded_rng,
)
from neurodyn.models.problems import BoxSet, Projection


def _model(n: int = 3, hidden: int = 8, seed: int = 0, horizon: float = 10.0) -> OinnModel:
    rng = seeded_rng(seed)
    return OinnModel(init_params(n, hidden, rng), rng.normal(size=n), horizon)


class TestInitialCondition:
    def test_exact_at_zero_for_random_weights(self) -> None:
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            hidden = int(rng.integers(1, 12))
            params = MlpParams(
                rng.normal(scale=3.0, size=(hidden, 1)),
                rng.normal(size=hidden),
                rng.normal(scale=3.0, size=(n, hidden)),
                rng.normal(size=n),
            )
            y0 = rng.normal(scale=10.0, size=n)
            assert np.array_equal(model_forward(0.0, OinnModel(params, y0, 5.0)), y0)

    def test_batch_of_times(self) -> None:
        m = _model()
        out = model_forward(np.array([0.0, 1.0, 2.0]), m)
        assert out.shape == (3, 3)
        assert np.array_equal(out[0], m.y0)


class TestNetwork:
    def test_zero_weights_give_zero_output(self) -> None:
        assert nn_forward(1.5, MlpParams.zeros(2, 4)).tolist() == [0.0, 0.0]

    def test_matches_explicit_formula(self) -> None:
        m = _model(n=2, hidden=5)
        p = m.params
        t = 0.7
        expected = p.W2 @ np.tanh(p.W1[:, 0] * t + p.b1) + p.b2
        np.testing.assert_allclose(nn_forward(t, p), expected, rtol=1e-14)
        np.testing.assert_allclose(model_forward(t, m), m.y0 + (1.0 - np.exp(-t)) * expected, rtol=1e-14)

    def test_time_derivative_against_central_difference(self) -> None:
        h = 1e-5
        for seed in range(5):
            m = _model(seed=seed)
            for t in (0.0, 0.3, 2.0, 7.5):
                numeric = (model_forward(t + h, m) - model_forward(t - h, m)) / (2 * h)
                exact = model_time_derivative(t, m)
                assert np.linalg.norm(exact - numeric) <= 1e-4 * max(1.0, float(np.linalg.norm(numeric)))

    def test_derivative_at_zero_equals_network(self) -> None:
        m = _model()
        np.testing.assert_allclose(model_time_derivative(0.0, m), nn_forward(0.0, m.params), rtol=1e-12)


class TestInit:
    def test_glorot_bounds_and_zero_biases(self) -> None:
        p = init_params(3, 100, seeded_rng(0))
        assert np.all(np.abs(p.W1) <= np.sqrt(6.0 / 101.0))
        assert np.all(np.abs(p.W2) <= np.sqrt(6.0 / 103.0))
        assert not p.b1.any()
        assert not p.b2.any()

    def test_same_seed_same_weights(self) -> None:
        a = init_params(4, 10, seeded_rng(5))
        b = init_params(4, 10, seeded_rng(5))
        c = init_params(4, 10, seeded_rng(6))
        assert np.array_equal(a.W1, b.W1) and np.array_equal(a.W2, b.W2)
        assert not np.array_equal(a.W1, c.W1)

    def test_shape_validation(self) -> None:
        with pytest.raises(ShapeError):
            MlpParams(np.zeros((4, 1)), np.zeros(3), np.zeros((2, 4)), np.zeros(2))

    def test_model_validation(self) -> None:
        with pytest.raises(ShapeError):
            OinnModel(MlpParams.zeros(2, 3), np.zeros(3), 1.0)
        with pytest.raises(ValueError):
            OinnModel(MlpParams.zeros(2, 3), np.zeros(2), 0.0)

    def test_norm_and_finiteness(self) -> None:
        p = MlpParams(np.full((1, 1), 3.0), np.zeros(1), np.full((1, 1), 4.0), np.zeros(1))
        assert p.norm() == 5.0
        assert p.is_finite()
        assert not MlpParams(np.full((1, 1), np.nan), np.zeros(1), np.zeros((1, 1)), np.zeros(1)).is_finite()


class TestPredict:
    def test_projected_endpoint(self) -> None:
        m = OinnModel(MlpParams.zeros(2, 3), np.array([-1.0, 4.0]), 10.0)
        box = BoxSet(np.zeros(2), np.full(2, 2.0))
        assert predict(m, Projection.onto_box(box)).tolist() == [0.0, 2.0]

    def test_trajectory_grid(self) -> None:
        m = _model()
        times = np.linspace(0.0, m.horizon, 11)
        states = predict_trajectory(m, times)
        assert states.shape == (11, 3)
        assert np.array_equal(states[0], m.y0)
        np.testing.assert_allclose(states[-1], model_forward(m.horizon, m), rtol=1e-14)


class TestCheckpoint:
    def test_save_and_load(self, tmp_path: Path) -> None:
        m = _model(horizon=8.0)
        path = tmp_path / "ckpt" / "checkpoint.npz"
        save_checkpoint(path, m)
        loaded = load_checkpoint(path)
        assert loaded.horizon == 8.0
        assert np.array_equal(loaded.y0, m.y0)
        for name, value in m.params.to_dict().items():
            assert np.array_equal(loaded.params.to_dict()[name], value)

    def test_missing_key(self, tmp_path: Path) -> None:
        path = tmp_path / "broken.npz"
        np.savez(path, format_version=np.array(CHECKPOINT_FORMAT_VERSION), y0=np.zeros(2))
        with pytest.raises(CheckpointFormatError, match="lacks keys"):
            load_checkpoint(path)

    def test_unknown_version(self, tmp_path: Path) -> None:
        m = _model()
        path = tmp_path / "future.npz"
        np.savez(path, format_version=np.array(99), y0=m.y0, horizon=np.array(m.horizon), **m.params.to_dict())
        with pytest.raises(CheckpointFormatError, match="version"):
            load_checkpoint(path)
