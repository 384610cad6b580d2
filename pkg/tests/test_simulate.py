"""Monte Carlo policy evaluation and paired comparisons."""

import numpy as np
import pytest

from beliefpomdp.costs import NonlinearCostSpec, instantaneous_cost
from beliefpomdp.errors import HorizonUnbounded
from beliefpomdp.grid import build_grid
from beliefpomdp.model import Belief, PomdpModel, uniform_belief, unit_belief
from beliefpomdp.simulate import (
    compare_policies,
    constant_policy,
    default_initial_beliefs,
    evaluate_policy,
    myopic_sensor_policy,
    simulate_path_costs,
)
from beliefpomdp.solver import solve_discounted, solve_stopping
from conftest import qd_model, two_state_general


class TestEvaluatePolicy:
    def test_constant_cost_gives_geometric_series(self):
        model = two_state_general(linear=[[0.7, 0.7], [0.7, 0.7]], discount=0.9)
        result = evaluate_policy(
            model, constant_policy(1), uniform_belief(2), num_paths=400, tolerance=1e-6
        )
        expected = 0.7 / (1.0 - 0.9)
        # constant costs make every path identical up to truncation
        assert result.std_error <= 1e-12
        assert abs(result.mean - expected) <= 1e-5
        assert result.truncation_bound <= 1e-6

    def test_zero_discount_is_exact_myopic_cost(self):
        model = two_state_general(discount=0.0)
        pi0 = Belief([0.3, 0.7])
        result = evaluate_policy(model, constant_policy(2), pi0, num_paths=50)
        assert result.mean == pytest.approx(instantaneous_cost(model, pi0, 2), abs=1e-15)
        assert result.horizon == 1

    def test_matches_grid_value_within_noise(self):
        spec = NonlinearCostSpec("entropy", alpha=[0.3, 0.3], beta=[0.0, 0.0])
        model = two_state_general(nonlinear=spec)
        grid = build_grid(2, 400)
        sol = solve_discounted(model, grid, tol=1e-10)
        pi0 = uniform_belief(2)
        result = evaluate_policy(
            model, sol.policy, pi0, num_paths=40_000, tolerance=1e-4, seed=11
        )
        grid_error = 1e-3  # refinement estimate for M = 400 on this fixture
        assert abs(result.mean - sol.value.at(pi0)) <= 3 * result.std_error + grid_error + 1e-4

    def test_stopping_policy_evaluation_matches_value(self):
        model = qd_model()
        sol = solve_stopping(model, build_grid(2, 500), tol=1e-9)
        result = evaluate_policy(
            model, sol.policy, unit_belief(2, 2), num_paths=40_000, seed=3
        )
        assert result.truncation_bound is None
        assert abs(result.mean - sol.value.at(unit_belief(2, 2))) <= (
            3 * result.std_error + 2.0 / 500
        )

    def test_never_stopping_policy_rejected_undiscounted(self):
        model = qd_model()
        with pytest.raises(HorizonUnbounded):
            evaluate_policy(model, constant_policy(2), unit_belief(2, 2), num_paths=10)

    def test_undiscounted_general_models_rejected(self):
        model = qd_model()
        relabeled = PomdpModel(
            **{
                **{
                    k: v
                    for k, v in model.to_dict().items()
                    if k not in ("model_kind", "nonlinear_cost")
                },
                "model_kind": "general_discounted",
            }
        )
        with pytest.raises(HorizonUnbounded):
            evaluate_policy(relabeled, constant_policy(2), unit_belief(2, 2), num_paths=10)


class TestComparePolicies:
    def test_policy_against_itself_is_exactly_zero(self):
        model = two_state_general()
        grid = build_grid(2, 100)
        sol = solve_discounted(model, grid)
        pi0s = [uniform_belief(2), unit_belief(1, 2)]
        comparison = compare_policies(
            model, sol.policy, sol.policy, pi0s, num_paths=2000, seed=5
        )
        for row in comparison.rows:
            assert row["mean_diff"] == 0.0
            assert row["se_diff"] == 0.0
        assert comparison.a_not_worse == 2

    def test_common_random_numbers_pair_paths(self):
        model = two_state_general()
        pi0 = uniform_belief(2)
        a = simulate_path_costs(model, constant_policy(1), pi0, 500, 40, seed=7)
        b = simulate_path_costs(model, constant_policy(1), pi0, 500, 40, seed=7)
        np.testing.assert_array_equal(a, b)

    def test_optimal_not_worse_than_constant_sensors(self):
        spec = NonlinearCostSpec("entropy", alpha=[1.0, 0.5], beta=[0.0, 0.0])
        shared_p = [[0.9, 0.1], [0.2, 0.8]]
        model = PomdpModel(
            num_states=2,
            num_actions=2,
            num_observations=(2, 2),
            transition=(shared_p, shared_p),
            observation=([[0.5, 0.5], [0.5, 0.5]], [[0.8, 0.2], [0.3, 0.7]]),
            linear_cost=([0.0, 0.0], [0.3, 0.3]),
            nonlinear_cost=spec,
            discount=0.9,
        )
        sol = solve_discounted(model, build_grid(2, 200), tol=1e-9)
        beliefs = default_initial_beliefs(2)[:5]
        for rival in (myopic_sensor_policy(model), constant_policy(1)):
            comparison = compare_policies(
                model, sol.policy, rival, beliefs, num_paths=4000, seed=1
            )
            assert comparison.a_not_worse == len(beliefs)

    def test_worker_count_does_not_change_results(self):
        model = two_state_general()
        pi0 = uniform_belief(2)
        grid = build_grid(2, 50)
        sol = solve_discounted(model, grid)
        one = evaluate_policy(model, sol.policy, pi0, num_paths=9000, seed=2, workers=1)
        many = evaluate_policy(model, sol.policy, pi0, num_paths=9000, seed=2, workers=8)
        assert one.mean == many.mean
        assert one.std_error == many.std_error


def test_default_initial_beliefs_cover_vertices():
    beliefs = default_initial_beliefs(3)
    mat = np.array([b.probs for b in beliefs])
    assert mat.shape[1] == 3
    for i in range(3):
        assert any(np.array_equal(b.probs, unit_belief(i + 1, 3).probs) for b in beliefs)
