"""Regenerate the shipped model fixture corpus.

Run from the repository root:  python3 tools/make_fixtures.py
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from beliefpomdp.costs import NonlinearCostSpec
from beliefpomdp.model import (
    GENERAL_DISCOUNTED,
    STOPPING_TIME,
    PomdpModel,
    save_model,
    validate_model,
)
from beliefpomdp.structure import blackwell_factorize, is_tp2, is_ultrametric, matrix_root

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "beliefpomdp" / "fixtures"


def emit(name, model, expect_valid=True):
    violations = validate_model(model)
    if expect_valid and violations:
        raise SystemExit(f"{name}: {[str(v) for v in violations]}")
    OUT.mkdir(parents=True, exist_ok=True)
    save_model(model, OUT / name)
    print("wrote", name)


def renormalize(matrix):
    """Exact row sums of 1.0 after float division."""
    m = np.array(matrix, dtype=float)
    m /= m.sum(axis=1, keepdims=True)
    m[:, -1] = 1.0 - m[:, :-1].sum(axis=1)
    assert np.all(m.sum(axis=1) == 1.0)
    return m


def main():
    qd_p = [[1.0, 0.0], [0.1, 0.9]]
    qd_b = [[0.8, 0.2], [0.3, 0.7]]
    emit(
        "quickest_detection_x2.json",
        PomdpModel(
            num_states=2,
            num_actions=2,
            num_observations=(2, 2),
            transition=(qd_p, qd_p),
            observation=(qd_b, qd_b),
            linear_cost=([0.0, 1.0], [0.05, 0.0]),
            discount=1.0,
            model_kind=STOPPING_TIME,
        ),
    )

    qd3_p = [[1.0, 0.0, 0.0], [0.15, 0.8, 0.05], [0.05, 0.15, 0.8]]
    qd3_b = [[0.7, 0.2, 0.1], [0.2, 0.6, 0.2], [0.1, 0.2, 0.7]]
    emit(
        "quickest_detection_x3.json",
        PomdpModel(
            num_states=3,
            num_actions=2,
            num_observations=(3, 3),
            transition=(qd3_p, qd3_p),
            observation=(qd3_b, qd3_b),
            linear_cost=([0.0, 1.0, 1.0], [0.05, 0.0, 0.0]),
            discount=1.0,
            model_kind=STOPPING_TIME,
        ),
    )

    shared_p = [[0.9, 0.1], [0.2, 0.8]]
    emit(
        "filter_vs_predictor.json",
        PomdpModel(
            num_states=2,
            num_actions=2,
            num_observations=(2, 2),
            transition=(shared_p, shared_p),
            observation=([[0.5, 0.5], [0.5, 0.5]], [[0.8, 0.2], [0.3, 0.7]]),
            linear_cost=([0.0, 0.0], [0.3, 0.3]),
            nonlinear_cost=NonlinearCostSpec(
                "entropy", alpha=[1.0, 0.5], beta=[0.0, 0.0]
            ),
            discount=0.9,
            model_kind=GENERAL_DISCOUNTED,
        ),
    )

    base2 = np.array([[0.6, 0.4], [0.4, 0.6]])
    assert is_ultrametric(base2).holds
    root2 = renormalize(matrix_root(base2, 2))
    fac = blackwell_factorize(base2, root2)
    assert fac.dominates, fac.residual
    emit(
        "ultrametric_chain.json",
        PomdpModel(
            num_states=2,
            num_actions=2,
            num_observations=(2, 2),
            transition=([[0.85, 0.15], [0.25, 0.75]],) * 2,
            observation=(base2, root2),
            linear_cost=([0.0, 0.0], [0.05, 0.05]),
            nonlinear_cost=NonlinearCostSpec(
                "mean_square",
                weight_matrix=np.eye(2),
                alpha=[1.0, 0.4],
                beta=[0.0, 0.0],
            ),
            discount=0.9,
            model_kind=GENERAL_DISCOUNTED,
        ),
    )

    base3 = np.array([[0.5, 0.3, 0.2], [0.3, 0.5, 0.2], [0.2, 0.2, 0.6]])
    assert is_ultrametric(base3).holds
    root3 = renormalize(matrix_root(base3, 2))
    emit(
        "ultrametric_chain_x3.json",
        PomdpModel(
            num_states=3,
            num_actions=2,
            num_observations=(3, 3),
            transition=([[0.8, 0.15, 0.05], [0.1, 0.8, 0.1], [0.05, 0.15, 0.8]],) * 2,
            observation=(base3, root3),
            linear_cost=([0.0, 0.0, 0.0], [0.04, 0.04, 0.04]),
            nonlinear_cost=NonlinearCostSpec(
                "entropy", alpha=[1.0, 0.5], beta=[0.0, 0.0]
            ),
            discount=0.85,
            model_kind=GENERAL_DISCOUNTED,
        ),
    )

    monotone = dict(
        num_states=2,
        num_actions=2,
        num_observations=(2, 2),
        transition=([[0.8, 0.2], [0.3, 0.7]], [[0.9, 0.1], [0.4, 0.6]]),
        observation=([[0.7, 0.3], [0.2, 0.8]], [[0.85, 0.15], [0.35, 0.65]]),
        discount=0.8,
        model_kind=GENERAL_DISCOUNTED,
    )
    model = PomdpModel(linear_cost=([1.0, 0.2], [0.8, 0.1]), **monotone)
    for u in range(2):
        assert is_tp2(model.transition[u]).holds
        assert is_tp2(model.observation[u]).holds
    emit("monotone_a123.json", model)
    emit(
        "increasing_cost.json",
        PomdpModel(linear_cost=([0.2, 1.0], [0.1, 0.8]), **monotone),
    )

    bad_b = [[0.2, 0.8], [0.7, 0.3]]
    assert not is_tp2(np.array(bad_b)).holds
    emit(
        "non_tp2_observation.json",
        PomdpModel(
            num_states=2,
            num_actions=2,
            num_observations=(2, 2),
            transition=([[0.8, 0.2], [0.3, 0.7]], [[0.9, 0.1], [0.4, 0.6]]),
            observation=(bad_b, [[0.85, 0.15], [0.35, 0.65]]),
            linear_cost=([1.0, 0.2], [0.8, 0.1]),
            discount=0.8,
            model_kind=GENERAL_DISCOUNTED,
        ),
    )

    emit(
        "linear_x3.json",
        PomdpModel(
            num_states=3,
            num_actions=2,
            num_observations=(2, 3),
            transition=(
                [[0.7, 0.2, 0.1], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6]],
                [[0.6, 0.3, 0.1], [0.15, 0.7, 0.15], [0.05, 0.25, 0.7]],
            ),
            observation=(
                [[0.8, 0.2], [0.5, 0.5], [0.2, 0.8]],
                [[0.7, 0.2, 0.1], [0.25, 0.5, 0.25], [0.1, 0.2, 0.7]],
            ),
            linear_cost=([2.0, 1.0, 0.5], [1.8, 0.9, 0.3]),
            discount=0.85,
            model_kind=GENERAL_DISCOUNTED,
        ),
    )


if __name__ == "__main__":
    main()
