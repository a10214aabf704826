"""Tests fuer das Beispiel-Register."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from neurodyn.errors import UsageError
from neurodyn.services import benchmarks
from neurodyn.services.benchmarks import list_examples, load_example, register_example, verify_reference
from neurodyn.services.dynamics import qin2014_field, xu2020_field
from neurodyn.services.trainer import EpsilonKind


class TestRegistry:
    def test_six_examples(self) -> None:
        entries = list_examples()
        assert [e["id"] for e in entries] == [1, 2, 3, 4, 5, 6]
        assert [e["n"] for e in entries] == [5, 4, 4, 3, 4, 3]
        assert set(entries[0]) == {"id", "name", "n", "epsilon_kind", "reference"}

    def test_epsilon_kinds(self) -> None:
        kinds = [load_example(i).epsilon_kind for i in range(1, 7)]
        assert kinds == [EpsilonKind.NPE_ERROR] * 4 + [EpsilonKind.OBJECTIVE] * 2

    def test_resolve_by_number_name_and_digit_string(self) -> None:
        assert load_example("3") is load_example(3)
        assert load_example("variational-inequality").id == 3

    def test_unknown_example(self) -> None:
        with pytest.raises(UsageError):
            load_example(7)
        with pytest.raises(UsageError):
            load_example("no-such-example")

    def test_register_custom_example(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(benchmarks, "_custom", {})
        register_example("shifted", lambda: dataclasses.replace(load_example(2), name="shifted", y0=np.ones(4)))
        inst = load_example("shifted")
        assert inst.name == "shifted"
        assert inst.y0.tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_sweeps_only_on_variational_inequality(self) -> None:
        assert set(load_example(3).sweeps) == {"initial_point", "time_range"}
        assert load_example(3).sweeps["time_range"] == [5.0, 8.0, 15.0]
        assert not load_example(1).sweeps


class TestReferenceSolutions:
    @pytest.mark.parametrize("example", [1, 2, 3, 4, 5, 6])
    def test_reference_passes(self, example: int) -> None:
        check = verify_reference(load_example(example))
        assert check.passed, check

    def test_perturbed_solution_fails(self) -> None:
        assert not verify_reference(load_example(2), [0.5, 2.0, 0.0, 1.0]).passed

    def test_complementarity_rounded_and_refined_points(self) -> None:
        inst = load_example(4)
        assert inst.metric().measure(inst.reference)[1] == pytest.approx(0.034, abs=2e-3)
        assert inst.metric().measure(np.array([0.0, 0.16704, 0.0]))[1] <= 0.01

    def test_objective_of_projected_reference(self) -> None:
        check = verify_reference(load_example(5))
        assert check.epsilon == pytest.approx(39.0197, abs=1e-3)
        np.testing.assert_allclose(np.array([2.0, 0.0, 5.0]) @ np.array(check.prediction[:3]), 7.0, rtol=1e-12)


class TestFields:
    def test_quadratic_program_field_at_origin(self) -> None:
        inst = load_example(1)
        assert inst.vector_field(0.0, inst.y0).tolist() == [30.0, 30.0, -15.0, 5.0, -1.0]

    def test_complementarity_epsilon_at_origin(self) -> None:
        inst = load_example(4)
        _, eps = inst.metric().measure(inst.y0)
        assert eps == pytest.approx(2.0 * np.e - 3.0, rel=1e-12)

    def test_convex_nonsmooth_uses_linear_penalty(self) -> None:
        inst = load_example(5)
        reference = qin2014_field(inst.problem, equality_penalty="linear")
        state = np.array([0.3, -0.2, 1.1, 0.4])
        np.testing.assert_allclose(inst.vector_field(0.0, state), reference(0.0, state), rtol=1e-12)

    def test_specialized_pseudoconvex_field_matches_generic(self) -> None:
        inst = load_example(6)
        generic = xu2020_field(inst.problem, inst.y0)
        rng = np.random.default_rng(0)
        for t in (0.5, 1.0, 2.0, 9.0):
            for _ in range(20):
                x = rng.normal(scale=2.0, size=3)
                np.testing.assert_allclose(inst.vector_field(t, x), generic(t, x), rtol=1e-10, atol=1e-12)

    def test_field_depends_on_start_only_for_pseudoconvex(self) -> None:
        inst = load_example(6)
        assert inst.field_for(inst.y0) is inst.vector_field
        assert inst.field_for([0.0, 1.0, 0.0]).switch_times == (1.0,)
        assert load_example(3).field_for(np.ones(4)).switch_times == ()

    def test_variational_inequality_near_equilibrium(self) -> None:
        inst = load_example(3)
        ref = inst.reference
        projected_step = inst.projection(ref + inst.vector_field(0.0, ref)) - ref
        assert float(np.linalg.norm(projected_step)) <= 0.1
