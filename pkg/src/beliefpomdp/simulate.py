"""Monte Carlo policy evaluation on POMDP models.

Paths are simulated in fixed-size chunks, each with its own generator
spawned from the master seed, and reduced in chunk order; results are
therefore identical for any worker count.  Every step draws one
transition uniform and one observation uniform for every path in the
chunk, whether or not the path is still active, so two policies
evaluated with the same seed see common random numbers path by path.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .costs import instantaneous_cost_batch, max_cost_bound
from .errors import HorizonUnbounded
from .model import Belief, PomdpModel, unit_belief

CHUNK_SIZE = 8192
DEFAULT_HORIZON_CAP = 10_000


def chunk_seeds(seed, num_paths: int, chunk_size: int = CHUNK_SIZE):
    """Deterministic (generator, count) list covering num_paths paths.

    The passed seed (int or SeedSequence) is copied before spawning:
    SeedSequence.spawn advances an internal counter, and reruns from the
    same seed must produce the same chunk streams.
    """
    n_chunks = (num_paths + chunk_size - 1) // chunk_size
    if isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        seed = np.random.SeedSequence(seed)
    seqs = seed.spawn(n_chunks)
    out = []
    for i, seq in enumerate(seqs):
        count = min(chunk_size, num_paths - i * chunk_size)
        out.append((seq, count))
    return out


def run_chunked(sim_fn, seed, num_paths: int, workers: int = 1):
    """Run sim_fn(rng, count) over all chunks; concatenate in chunk order.

    ``seed`` may be an int or a SeedSequence.
    """
    jobs = chunk_seeds(seed, num_paths)

    def one(job):
        seq, count = job
        return sim_fn(np.random.default_rng(seq), count)

    if workers <= 1:
        parts = [one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, jobs))
    return np.concatenate(parts)


@dataclass
class EvalResult:
    """Monte Carlo estimate of the discounted objective from one start belief."""

    mean: float
    std_error: float
    num_paths: int
    horizon: int
    truncation_bound: float | None
    cap_hits: int = 0

    def to_dict(self) -> dict:
        return {
            "mean": float(self.mean),
            "std_error": float(self.std_error),
            "num_paths": int(self.num_paths),
            "horizon": int(self.horizon),
            "truncation_bound": (
                None if self.truncation_bound is None else float(self.truncation_bound)
            ),
            "cap_hits": int(self.cap_hits),
        }


@dataclass
class FunctionPolicy:
    """Adapter turning a vectorized beliefs->actions function into a policy."""

    fn: object

    def actions_at(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(points)), dtype=np.int32)

    def action_at(self, belief) -> int:
        probs = belief.probs if isinstance(belief, Belief) else np.asarray(belief, float)
        return int(self.actions_at(probs[None, :])[0])


def constant_policy(action: int) -> FunctionPolicy:
    return FunctionPolicy(lambda pts: np.full(pts.shape[0], action, dtype=np.int32))


def myopic_sensor_policy(model: PomdpModel) -> FunctionPolicy:
    """Pick sensor 2 wherever it is instantaneously cheaper, else sensor 1."""
    if model.num_actions != 2:
        raise ValueError("the myopic sensor rule needs a two-action model")

    def rule(points):
        c1 = instantaneous_cost_batch(model, points, 1)
        c2 = instantaneous_cost_batch(model, points, 2)
        return np.where(c2 < c1, 2, 1).astype(np.int32)

    return FunctionPolicy(rule)


def _policy_actions(policy, points: np.ndarray) -> np.ndarray:
    if hasattr(policy, "actions_at"):
        return np.asarray(policy.actions_at(points), dtype=np.int64)
    return np.array(
        [int(policy(Belief(row))) for row in points], dtype=np.int64
    )


def discounted_horizon(model: PomdpModel, tolerance: float) -> tuple:
    """Smallest horizon whose discount truncation error is within tolerance."""
    rho = model.discount
    bound_scale = max_cost_bound(model)
    if bound_scale == 0.0 or rho == 0.0:
        return 1, 0.0
    horizon = max(1, math.ceil(math.log(tolerance * (1.0 - rho) / bound_scale) / math.log(rho)))
    return horizon, rho**horizon * bound_scale / (1.0 - rho)


def _belief_step(model, beliefs, u, obs):
    """Vectorized filter update for rows sharing action u, per-row observation."""
    predicted = beliefs @ model.transition[u - 1]
    z = predicted * model.observation[u - 1].T[obs]
    sigma = z.sum(axis=1)
    safe = np.where(sigma > 0.0, sigma, 1.0)
    post = z / safe[:, None]
    post /= post.sum(axis=1, keepdims=True)
    return post


def simulate_path_costs(
    model: PomdpModel,
    policy,
    initial_belief: Belief,
    num_paths: int,
    horizon: int,
    seed=0,
    workers: int = 1,
):
    """Per-path discounted costs (and stop flags for stopping models).

    Returns an array of shape (num_paths, 2): accumulated cost and a
    0/1 flag marking paths still running at the horizon.
    """
    rho = model.discount
    pi0 = initial_belief.probs

    def sim(rng, count):
        states = (rng.random(count)[:, None] > np.cumsum(pi0)[None, :]).sum(axis=1)
        beliefs = np.tile(pi0, (count, 1))
        costs = np.zeros(count)
        active = np.ones(count, dtype=bool)
        disc = 1.0
        for _ in range(horizon):
            if not np.any(active):
                break
            actions = _policy_actions(policy, beliefs)
            if model.is_stopping:
                stopping_now = active & (actions == 1)
                if np.any(stopping_now):
                    term = instantaneous_cost_batch(model, beliefs[stopping_now], 1)
                    costs[stopping_now] += disc * term
                    active = active & ~stopping_now
            step_u = rng.random(count)
            step_y = rng.random(count)
            for u in range(1, model.num_actions + 1):
                rows = active & (actions == u)
                if model.is_stopping and u == 1:
                    continue
                if not np.any(rows):
                    continue
                costs[rows] += disc * instantaneous_cost_batch(model, beliefs[rows], u)
                cum_p = np.cumsum(model.transition[u - 1], axis=1)
                nxt = (step_u[rows, None] > cum_p[states[rows]]).sum(axis=1)
                cum_b = np.cumsum(model.observation[u - 1], axis=1)
                obs = (step_y[rows, None] > cum_b[nxt]).sum(axis=1)
                states[rows] = nxt
                beliefs[rows] = _belief_step(model, beliefs[rows], u, obs)
            disc *= rho
        return np.stack([costs, active.astype(float)], axis=1)

    return run_chunked(sim, seed, num_paths, workers=workers)


def _check_stopping_evaluable(model: PomdpModel, policy) -> None:
    vertices = np.eye(model.num_states)
    actions = _policy_actions(policy, vertices)
    p_continue = model.transition[1]
    absorbing = np.isclose(np.diag(p_continue), 1.0)
    stops_somewhere = np.any(actions == 1)
    absorbing_stop = np.any(absorbing & (actions == 1))
    if not (stops_somewhere and absorbing_stop):
        raise HorizonUnbounded(
            "undiscounted evaluation needs a policy that stops at some "
            "absorbing state's vertex"
        )


def evaluate_policy(
    model: PomdpModel,
    policy,
    initial_belief: Belief,
    num_paths: int,
    tolerance: float = 1e-3,
    seed: int = 0,
    workers: int = 1,
    horizon_cap: int = DEFAULT_HORIZON_CAP,
) -> EvalResult:
    """Estimate the discounted objective of a policy from one start belief.

    The horizon is chosen so the discount truncation bound is within
    ``tolerance``; undiscounted stopping runs use ``horizon_cap`` and
    report how many paths were cut off.
    """
    if num_paths < 1:
        raise ValueError("num_paths must be >= 1")
    if model.discount < 1.0:
        horizon, bound = discounted_horizon(model, tolerance)
        horizon = min(horizon, horizon_cap)
    else:
        if not model.is_stopping:
            raise HorizonUnbounded("undiscounted general models cannot be evaluated")
        _check_stopping_evaluable(model, policy)
        horizon, bound = horizon_cap, None
    table = simulate_path_costs(
        model, policy, initial_belief, num_paths, horizon, seed=seed, workers=workers
    )
    costs = table[:, 0]
    cap_hits = int(table[:, 1].sum()) if model.is_stopping else 0
    se = float(costs.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else 0.0
    return EvalResult(
        mean=float(costs.mean()),
        std_error=se,
        num_paths=num_paths,
        horizon=horizon,
        truncation_bound=bound,
        cap_hits=cap_hits,
    )


@dataclass
class PolicyComparison:
    """Paired-seed comparison of two policies across start beliefs."""

    rows: list
    a_not_worse: int
    num_beliefs: int

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "a_not_worse": int(self.a_not_worse),
            "num_beliefs": int(self.num_beliefs),
        }


def compare_policies(
    model: PomdpModel,
    policy_a,
    policy_b,
    initial_beliefs,
    num_paths: int,
    tolerance: float = 1e-3,
    seed: int = 0,
    workers: int = 1,
    horizon_cap: int = DEFAULT_HORIZON_CAP,
) -> PolicyComparison:
    """Evaluate two policies under common random numbers per start belief.

    A row records both means, their standard errors, and the paired
    difference (a minus b); ``a_not_worse`` counts beliefs where the
    difference is within three standard errors of nonpositive.
    """
    if model.discount < 1.0:
        horizon, _ = discounted_horizon(model, tolerance)
        horizon = min(horizon, horizon_cap)
    else:
        if not model.is_stopping:
            raise HorizonUnbounded("undiscounted general models cannot be evaluated")
        _check_stopping_evaluable(model, policy_a)
        _check_stopping_evaluable(model, policy_b)
        horizon = horizon_cap
    rows = []
    wins = 0
    pair_seeds = np.random.SeedSequence(seed).spawn(len(list(initial_beliefs)))
    for i, pi0 in enumerate(initial_beliefs):
        pi0 = pi0 if isinstance(pi0, Belief) else Belief(pi0)
        cost_a = simulate_path_costs(
            model, policy_a, pi0, num_paths, horizon, seed=pair_seeds[i], workers=workers
        )[:, 0]
        cost_b = simulate_path_costs(
            model, policy_b, pi0, num_paths, horizon, seed=pair_seeds[i], workers=workers
        )[:, 0]
        diff = cost_a - cost_b
        se_diff = float(diff.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else 0.0
        row = {
            "initial_belief": pi0.probs.tolist(),
            "mean_a": float(cost_a.mean()),
            "se_a": float(cost_a.std(ddof=1) / math.sqrt(num_paths)),
            "mean_b": float(cost_b.mean()),
            "se_b": float(cost_b.std(ddof=1) / math.sqrt(num_paths)),
            "mean_diff": float(diff.mean()),
            "se_diff": se_diff,
            "num_paths": num_paths,
            "horizon": horizon,
        }
        rows.append(row)
        if row["mean_diff"] <= 3.0 * se_diff:
            wins += 1
    return PolicyComparison(rows=rows, a_not_worse=wins, num_beliefs=len(rows))


def default_initial_beliefs(num_states: int, extra: int = 3):
    """Vertices, centroid, and a few deterministic interior mixtures."""
    beliefs = [unit_belief(i, num_states) for i in range(1, num_states + 1)]
    beliefs.append(Belief(np.full(num_states, 1.0 / num_states)))
    for j in range(1, extra + 1):
        w = np.arange(1, num_states + 1, dtype=float) ** j
        beliefs.append(Belief(w / w.sum()))
    return beliefs
