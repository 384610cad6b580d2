"""Bayesian quickest change detection as a two-state stopping POMDP.

A state process sits in a pre-change regime, jumps once to an absorbing
post-change state at a geometric time, and emits observations whose
distribution shifts at the jump.  Announcing too early incurs a false
alarm penalty; announcing late pays a per-step delay weight.  The
resulting stopping problem is undiscounted with a single-threshold
optimal policy in the post-change probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .costs import NonlinearCostSpec
from .errors import PreconditionFailed, StructureViolation
from .grid import build_grid
from .model import STOPPING_TIME, Belief, PomdpModel, unit_belief
from .simulate import run_chunked
from .solver import NotThreshold, extract_threshold, solve_stopping

DEFAULT_HORIZON_CAP = 10_000


@dataclass(frozen=True)
class QdSpec:
    """Parameters of the detection problem.

    ``persistence`` is the probability of staying pre-change each step
    (so the change time is geometric with mean 1/(1 - persistence));
    ``delay_weight`` prices each step of detection delay against a unit
    false-alarm penalty.  ``observation`` is the 2 x Y emission matrix,
    row 1 post-change, row 2 pre-change, shared by both actions.
    """

    persistence: float
    delay_weight: float
    observation: np.ndarray
    continue_loss: NonlinearCostSpec = field(default_factory=NonlinearCostSpec)

    def __post_init__(self):
        if not 0.0 <= self.persistence < 1.0:
            raise ValueError(
                f"persistence must lie in [0, 1): the change must eventually "
                f"arrive, got {self.persistence}"
            )
        if self.delay_weight <= 0.0:
            raise ValueError(f"delay_weight must be positive, got {self.delay_weight}")
        b = np.array(self.observation, dtype=float)
        if b.ndim != 2 or b.shape[0] != 2:
            raise ValueError("observation matrix must have two rows")
        if np.any(b < 0) or np.any(np.abs(b.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("observation rows must be probability vectors")
        b.setflags(write=False)
        object.__setattr__(self, "observation", b)

    @property
    def mean_change_time(self) -> float:
        return 1.0 / (1.0 - self.persistence)


def build_qd_model(spec: QdSpec) -> PomdpModel:
    """Stopping-time model: state 1 absorbing post-change, start in state 2.

    Stop cost [0, 1] charges a unit false alarm when the change has not
    happened; continue cost [d, 0] charges the delay weight once it has.
    The optional nonlinear loss rides on the continue action.
    """
    p = [[1.0, 0.0], [1.0 - spec.persistence, spec.persistence]]
    return PomdpModel(
        num_states=2,
        num_actions=2,
        num_observations=(spec.observation.shape[1],) * 2,
        transition=(p, p),
        observation=(spec.observation, spec.observation),
        linear_cost=([0.0, 1.0], [spec.delay_weight, 0.0]),
        nonlinear_cost=spec.continue_loss,
        discount=1.0,
        model_kind=STOPPING_TIME,
    )


def initial_belief() -> Belief:
    """The chain starts pre-change with certainty."""
    return unit_belief(2, 2)


def spec_from_model(model: PomdpModel) -> QdSpec:
    """Recover a QdSpec from a stopping model with the detection structure."""
    if not model.is_stopping or model.num_states != 2 or model.discount != 1.0:
        raise PreconditionFailed(
            "quickest detection needs an undiscounted two-state stopping model"
        )
    p = model.transition[1]
    if not (p[0, 0] == 1.0 and p[0, 1] == 0.0):
        raise PreconditionFailed("state 1 must be absorbing under continue")
    c1, c2 = model.linear_cost
    if not (c1[0] == 0.0 and c1[1] == 1.0 and c2[1] == 0.0 and c2[0] > 0.0):
        raise PreconditionFailed(
            "costs must be stop = [0, 1] and continue = [d, 0] with d > 0"
        )
    if not np.array_equal(model.observation[0], model.observation[1]):
        raise PreconditionFailed("both actions must share one observation matrix")
    return QdSpec(
        persistence=float(p[1, 1]),
        delay_weight=float(c2[0]),
        observation=model.observation[1],
        continue_loss=model.nonlinear_cost,
    )


@dataclass
class QdThresholdResult:
    threshold: float
    resolution: int
    iterations: int
    final_change: float
    converged: bool
    value_at_start: float
    stop_points: int

    def to_dict(self) -> dict:
        return {
            "threshold": float(self.threshold),
            "resolution": int(self.resolution),
            "iterations": int(self.iterations),
            "final_change": float(self.final_change),
            "converged": bool(self.converged),
            "value_at_start": float(self.value_at_start),
            "stop_points": int(self.stop_points),
        }


def qd_threshold(
    spec: QdSpec,
    resolution: int = 1000,
    tol: float = 1e-9,
    max_iters: int = 100_000,
) -> QdThresholdResult:
    """Solve the detection problem and extract the announcement threshold.

    The solved policy must stop at pi(2) = 0 and switch exactly once to
    continue; anything else signals a misconfigured solve and raises
    StructureViolation.
    """
    model = build_qd_model(spec)
    grid = build_grid(2, resolution)
    result = solve_stopping(model, grid, tol=tol, max_iters=max_iters)
    threshold = extract_threshold(result.policy)
    if isinstance(threshold, NotThreshold):
        raise StructureViolation(
            f"policy is not a single stop-to-continue switch "
            f"({threshold.switch_count} switches; {threshold.reason})"
        )
    return QdThresholdResult(
        threshold=float(threshold),
        resolution=resolution,
        iterations=result.log.iterations,
        final_change=float(result.log.final_change),
        converged=result.log.converged,
        value_at_start=result.value.at(initial_belief()),
        stop_points=int(np.count_nonzero(result.policy.actions == 1)),
    )


@dataclass
class KsCostEstimate:
    """Monte Carlo estimate of delay-plus-false-alarm detection cost."""

    delay_term: float
    false_alarm: float
    ks_cost: float
    ci_halfwidth: float
    num_paths: int
    cap_hits: int
    horizon_cap: int
    seed: int
    threshold: float
    mean_change_time: float

    def to_dict(self) -> dict:
        return {
            "delay_term": float(self.delay_term),
            "false_alarm": float(self.false_alarm),
            "ks_cost": float(self.ks_cost),
            "ci_halfwidth": float(self.ci_halfwidth),
            "num_paths": int(self.num_paths),
            "cap_hits": int(self.cap_hits),
            "horizon_cap": int(self.horizon_cap),
            "seed": int(self.seed),
            "threshold": float(self.threshold),
            "mean_change_time": float(self.mean_change_time),
        }


def ks_cost_estimate(
    spec: QdSpec,
    threshold: float,
    num_paths: int,
    horizon_cap: int = DEFAULT_HORIZON_CAP,
    seed: int = 0,
    workers: int = 1,
) -> KsCostEstimate:
    """Simulate the threshold rule: announce at the first step whose
    posterior change probability drops strictly below ``threshold``.

    Returns the estimated delay term, false alarm probability, their
    weighted sum, and a 95 percent normal-approximation half width.
    Paths hitting the horizon cap are treated as announcing there and
    counted in ``cap_hits``.  ``mean_change_time`` is a diagnostic; it is
    exact only when the simulation runs to the cap (pass a threshold
    below 0 to disable announcements), since chunks stop stepping once
    every path has announced.
    """
    if num_paths < 1:
        raise ValueError("num_paths must be >= 1")
    persistence = spec.persistence
    b = spec.observation
    d = spec.delay_weight
    cum_b = np.cumsum(b, axis=1)

    def sim(rng, count):
        # pre marks paths still in the pre-change state; belief is pi(2)
        pre = np.ones(count, dtype=bool)
        belief = np.ones(count)
        announced = np.zeros(count, dtype=bool)
        announce_time = np.full(count, horizon_cap)
        change_time = np.full(count, horizon_cap + 1)
        for k in range(1, horizon_cap + 1):
            if np.all(announced):
                break
            jump = rng.random(count) >= persistence
            newly_changed = pre & jump
            change_time[newly_changed] = k
            pre &= ~jump
            state_row = np.where(pre, 1, 0)  # observation row: 1 pre, 0 post
            draw = rng.random(count)
            obs = (draw[:, None] > cum_b[state_row]).sum(axis=1)
            z1 = b[0, obs] * (1.0 - persistence * belief)
            z2 = b[1, obs] * persistence * belief
            belief = z2 / (z1 + z2)
            hit = ~announced & (belief < threshold)
            announce_time[hit] = k
            announced |= hit
        delay = np.maximum(announce_time - change_time, 0)
        false_alarm = announce_time < change_time
        capped = ~announced
        return np.stack(
            [
                delay.astype(float),
                false_alarm.astype(float),
                capped.astype(float),
                change_time.astype(float),
            ],
            axis=1,
        )

    table = run_chunked(sim, seed, num_paths, workers=workers)
    delay, fa, capped, change = table.T
    per_path = d * delay + fa
    mean = float(per_path.mean())
    se = float(per_path.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else 0.0
    return KsCostEstimate(
        delay_term=float(d * delay.mean()),
        false_alarm=float(fa.mean()),
        ks_cost=mean,
        ci_halfwidth=1.96 * se,
        num_paths=num_paths,
        cap_hits=int(capped.sum()),
        horizon_cap=horizon_cap,
        seed=seed,
        threshold=float(threshold),
        mean_change_time=float(change.mean()),
    )
