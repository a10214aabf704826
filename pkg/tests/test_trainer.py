"""Tests fuer Loss, ADAM, Epsilon-Metriken und die Trainingsschleife."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from neurodyn import autodiff as ad
from neurodyn.errors import NonFiniteLossError, UsageError
from neurodyn.models.config import TrainConfig
from neurodyn.models.oinn_model import MlpParams, OinnModel, init_params, load_checkpoint, model_forward, seeded_rng
from neurodyn.models.problems import AffineSet, BoxSet, NpeProblem, ProjectionKind, StandardCnlp
from neurodyn.models.vector_field import VectorField
from neurodyn.services.trainer import (
    AdamState,
    EpsilonKind,
    adam_step,
    batch_loss,
    epsilon_npe,
    epsilon_objective,
    loss_gradient,
    loss_value_and_gradient,
    make_epsilon,
    pointwise_loss,
    train,
)


def _decay_field(n: int = 2) -> VectorField:
    return VectorField(n, lambda t, y: -y, "decay")


def _identity_npe(n: int = 2) -> NpeProblem:
    # Loesung y = 0 auf dem Orthanten
    return NpeProblem(lambda y: y * 1.0, BoxSet.nonnegative(n))


def _model(n: int = 2, hidden: int = 4, seed: int = 0) -> OinnModel:
    return OinnModel(init_params(n, hidden, seeded_rng(seed)), np.ones(n), 3.0)


def _small_config(**overrides: object) -> TrainConfig:
    cfg = TrainConfig(max_iter=6, batch_size=16, hidden=4, lr=0.01)
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


class TestLoss:
    def test_pointwise_loss_is_weighted_residual(self) -> None:
        m = OinnModel(MlpParams.zeros(2, 3), np.array([3.0, 4.0]), 1.0)
        # N = 0: dy/dt = 0, y = y0, Residuum = ‖0 − (−y0)‖ = 5
        assert pointwise_loss(0.0, m, _decay_field(), 0.5) == pytest.approx(5.0)
        assert pointwise_loss(2.0, m, _decay_field(), 0.5) == pytest.approx(5.0 * math.exp(-1.0))

    def test_batch_loss_is_mean_of_pointwise(self) -> None:
        m = _model()
        ts = np.array([0.1, 0.5, 2.0])
        expected = np.mean([pointwise_loss(t, m, _decay_field(), 0.5) for t in ts])
        assert batch_loss(ts, m, _decay_field(), 0.5) == pytest.approx(expected, rel=1e-12)

    def test_empty_batch_rejected(self) -> None:
        with pytest.raises(ValueError):
            batch_loss([], _model(), _decay_field(), 0.5)

    def test_gradient_against_central_difference(self) -> None:
        m = _model(hidden=3, seed=4)
        ts = np.array([0.2, 0.9, 1.7, 2.6])
        f = _decay_field()
        gradient = loss_gradient(ts, m, f, 0.5)
        h = 1e-6
        for name, value in m.params.to_dict().items():
            numeric = np.zeros_like(value)
            for idx in np.ndindex(value.shape):
                plus, minus = m.params.to_dict(), m.params.to_dict()
                plus[name] = value.copy()
                minus[name] = value.copy()
                plus[name][idx] += h
                minus[name][idx] -= h
                up = batch_loss(ts, m.with_params(MlpParams.from_dict(plus)), f, 0.5)
                down = batch_loss(ts, m.with_params(MlpParams.from_dict(minus)), f, 0.5)
                numeric[idx] = (up - down) / (2 * h)
            assert np.linalg.norm(gradient[name] - numeric) <= 1e-5 * max(1.0, float(np.linalg.norm(numeric)))

    def test_value_and_gradient_agree_with_batch_loss(self) -> None:
        m = _model()
        ts = np.array([0.3, 1.1])
        value, gradient = loss_value_and_gradient(ts, m, _decay_field(), 0.5)
        assert value == pytest.approx(batch_loss(ts, m, _decay_field(), 0.5), rel=1e-14)
        assert set(gradient) == {"W1", "b1", "W2", "b2"}


class TestAdam:
    def test_first_step_moves_by_learning_rate(self) -> None:
        p = MlpParams(np.ones((2, 1)), np.zeros(2), np.ones((1, 2)), np.zeros(1))
        g = {"W1": np.array([[2.0], [-3.0]]), "b1": np.zeros(2), "W2": np.array([[0.5, -0.5]]), "b2": np.array([1.0])}
        new, state = adam_step(p, g, AdamState.zeros_like(p), lr=0.1)
        np.testing.assert_allclose(new.W1, np.array([[0.9], [1.1]]), rtol=1e-6)
        np.testing.assert_allclose(new.W2, np.array([[0.9, 1.1]]), rtol=1e-6)
        assert new.b1.tolist() == [0.0, 0.0]
        assert state.step == 1

    def test_inputs_unchanged(self) -> None:
        p = MlpParams(np.ones((1, 1)), np.zeros(1), np.ones((1, 1)), np.zeros(1))
        g = {"W1": np.ones((1, 1)), "b1": np.ones(1), "W2": np.ones((1, 1)), "b2": np.ones(1)}
        s = AdamState.zeros_like(p)
        adam_step(p, g, s, lr=0.1)
        assert p.W1.tolist() == [[1.0]]
        assert s.step == 0
        assert not s.m["W1"].any()

    def test_moments_accumulate(self) -> None:
        p = MlpParams(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
        g = {"W1": np.ones((1, 1)), "b1": np.zeros(1), "W2": np.zeros((1, 1)), "b2": np.zeros(1)}
        _, s1 = adam_step(p, g, AdamState.zeros_like(p), lr=0.1)
        _, s2 = adam_step(p, g, s1, lr=0.1)
        assert s2.m["W1"][0, 0] == pytest.approx(0.1 + 0.9 * 0.1)
        assert s2.v["W1"][0, 0] == pytest.approx(0.001 + 0.999 * 0.001)


class TestEpsilon:
    def test_npe_error_zero_at_solution(self) -> None:
        assert epsilon_npe(np.zeros(2), _identity_npe()) == 0.0
        assert epsilon_npe(np.array([3.0, 4.0]), _identity_npe()) == 5.0

    def test_objective_feasibility_gate(self) -> None:
        p = StandardCnlp(
            lambda x: ad.dot(x, x),
            2,
            g=lambda x: ad.concat(x[0] - 1.0),
            equality=AffineSet(np.array([[1.0, 1.0]]), np.array([1.0])),
        )
        assert epsilon_objective(np.array([0.5, 0.5]), p) == 0.5
        assert epsilon_objective(np.array([2.0, -1.0]), p) == math.inf
        assert epsilon_objective(np.array([0.5, 0.6]), p) == math.inf
        assert epsilon_objective(np.array([0.5, 0.5 + 1e-8]), p) == pytest.approx(0.5)
        assert epsilon_objective(np.array([np.nan, 0.5]), p) == math.inf

    def test_objective_ignores_dual_components(self) -> None:
        p = StandardCnlp(lambda x: ad.dot(x, x), 1)
        assert epsilon_objective(np.array([2.0, -99.0]), p) == 4.0

    def test_objective_respects_bounds(self) -> None:
        p = StandardCnlp(lambda x: ad.dot(x, x), 1, bounds=BoxSet.nonnegative(1))
        assert epsilon_objective(np.array([-1.0]), p) == math.inf

    def test_metric_kind_and_default_projection(self) -> None:
        npe_metric = make_epsilon(_identity_npe())
        assert npe_metric.kind is EpsilonKind.NPE_ERROR
        assert npe_metric.projection.kind is ProjectionKind.BOX
        cnlp = StandardCnlp(lambda x: ad.dot(x, x), 2, equality=AffineSet(np.array([[1.0, 1.0]]), np.array([1.0])))
        cnlp_metric = make_epsilon(cnlp)
        assert cnlp_metric.kind is EpsilonKind.OBJECTIVE
        prediction, eps = cnlp_metric.measure(np.zeros(2))
        np.testing.assert_allclose(prediction, [0.5, 0.5])
        assert eps == pytest.approx(0.5)


class TestTrain:
    def test_history_and_monotone_best(self) -> None:
        report = train(_identity_npe(), _decay_field(), _model(), _small_config())
        assert [row.iteration for row in report.history] == list(range(7))
        assert report.history[0].loss is None
        assert all(row.loss is not None and row.loss >= 0 for row in report.history[1:])
        bests = [row.epsilon_best for row in report.history]
        assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:], strict=False))
        assert report.epsilon_best == min(row.epsilon for row in report.history)
        assert bests[-1] == report.epsilon_best

    def test_best_params_reproduce_best_epsilon(self) -> None:
        report = train(_identity_npe(), _decay_field(), _model(), _small_config())
        endpoint = model_forward(report.best_model.horizon, report.best_model)
        assert epsilon_npe(np.maximum(endpoint, 0.0), _identity_npe()) == pytest.approx(report.epsilon_best, rel=1e-12)
        row = next(r for r in report.history if r.iteration == report.best_iteration)
        assert row.epsilon == report.epsilon_best

    def test_zero_iterations_is_untrained_baseline(self) -> None:
        m = _model()
        report = train(_identity_npe(), _decay_field(), m, _small_config(max_iter=0))
        assert len(report.history) == 1
        assert report.best_iteration == 0
        endpoint = np.maximum(model_forward(m.horizon, m), 0.0)
        assert report.epsilon_best == epsilon_npe(endpoint, _identity_npe())

    def test_deterministic_under_fixed_seed(self) -> None:
        a = train(_identity_npe(), _decay_field(), _model(), _small_config(seed=3))
        b = train(_identity_npe(), _decay_field(), _model(), _small_config(seed=3))
        assert [(r.iteration, r.loss, r.epsilon, r.epsilon_best) for r in a.history] == [
            (r.iteration, r.loss, r.epsilon, r.epsilon_best) for r in b.history
        ]
        assert np.array_equal(a.final_model.params.W2, b.final_model.params.W2)

    def test_cadence_thins_rows(self) -> None:
        report = train(_identity_npe(), _decay_field(), _model(), _small_config(cadence=2, max_iter=5))
        assert [row.iteration for row in report.history] == [0, 2, 4]

    def test_callbacks_and_checkpoint(self, tmp_path: Path) -> None:
        rows = []
        messages: list[str] = []
        path = tmp_path / "checkpoint.npz"
        report = train(
            _identity_npe(),
            _decay_field(),
            _model(),
            _small_config(max_iter=10),
            checkpoint_path=path,
            on_row=rows.append,
            log=messages.append,
        )
        assert rows == report.history
        assert messages
        saved = load_checkpoint(path)
        assert np.array_equal(saved.params.W2, report.best_params.W2)

    def test_non_finite_loss_aborts(self) -> None:
        broken = VectorField(2, lambda t, y: y * float("nan"), "broken")
        with pytest.raises(NonFiniteLossError) as info:
            train(_identity_npe(), broken, _model(), _small_config())
        assert info.value.iteration == 1
        assert math.isfinite(info.value.param_norm)

    def test_invalid_config_rejected(self) -> None:
        with pytest.raises(UsageError):
            train(_identity_npe(), _decay_field(), _model(), _small_config(lr=0.0))
