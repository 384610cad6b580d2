"""Numerical certification of structural properties on solved models.

Each verifier samples or sweeps a concrete finite model and reports the
worst violation it found, never just a boolean; a property "holds" when
that worst case is within the stated tolerance.  These are instance
checks on solved grids, not proofs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .costs import instantaneous_cost_batch
from .errors import (
    DimensionMismatch,
    NegativeEigenvalue,
    PostconditionFailed,
    PreconditionFailed,
)
from .grid import SimplexGrid, build_grid
from .model import Belief, PomdpModel
from .reports import OrderCheckReport, make_report
from .solver import (
    ValueFunction,
    build_tables,
    continuation_values,
    q_values,
    solve_discounted,
    solve_relaxed,
)

MINOR_TOL = 1e-12
MLR_TOL = 1e-12
PAIR_CAP = 1_000_000


# ---------------------------------------------------------------------------
# order predicates
# ---------------------------------------------------------------------------


def _probs(belief) -> np.ndarray:
    return belief.probs if isinstance(belief, Belief) else np.asarray(belief, float)


def mlr_geq(pi1, pi2, tol: float = MLR_TOL) -> bool:
    """True iff pi1 dominates pi2 in the monotone likelihood ratio order."""
    p1, p2 = _probs(pi1), _probs(pi2)
    if p1.shape != p2.shape:
        raise DimensionMismatch("beliefs must have the same dimension")
    x = p1.size
    for i in range(x):
        for j in range(i + 1, x):
            if p1[i] * p2[j] > p2[i] * p1[j] + tol:
                return False
    return True


def fosd_geq(pi1, pi2, tol: float = MLR_TOL) -> bool:
    """True iff pi1 first-order stochastically dominates pi2 (mass on higher states)."""
    p1, p2 = _probs(pi1), _probs(pi2)
    if p1.shape != p2.shape:
        raise DimensionMismatch("beliefs must have the same dimension")
    t1 = np.cumsum(p1[::-1])[::-1]
    t2 = np.cumsum(p2[::-1])[::-1]
    return bool(np.all(t1 >= t2 - tol))


def is_tp2(matrix, tol: float = MINOR_TOL) -> OrderCheckReport:
    """Check that every 2x2 minor of a nonnegative matrix is nonnegative."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch("TP2 check needs a matrix")
    worst = -np.inf
    witness = None
    rows, cols = a.shape
    count = 0
    for i in range(rows):
        for j in range(i + 1, rows):
            # minors a[i,k]a[j,l] - a[i,l]a[j,k] for all k < l
            for k in range(cols):
                minors = a[i, k] * a[j, k + 1 :] - a[i, k + 1 :] * a[j, k]
                count += minors.size
                if minors.size and float(-minors.min()) > worst:
                    l_rel = int(np.argmin(minors))
                    worst = float(-minors.min())
                    witness = {"rows": [i + 1, j + 1], "cols": [k + 1, k + 2 + l_rel]}
    return make_report("tp2", worst, tol, witness=witness, samples=count)


def tp2_column_permutation(matrix, tol: float = MINOR_TOL):
    """Column order making the matrix TP2, or None if no permutation works.

    For two-row matrices sorting columns by likelihood ratio always
    succeeds; the search is exhaustive, so keep the column count small.
    """
    a = np.asarray(matrix, dtype=float)
    for perm in itertools.permutations(range(a.shape[1])):
        if is_tp2(a[:, perm], tol).holds:
            return tuple(p + 1 for p in perm)
    return None


# ---------------------------------------------------------------------------
# cost and value-function shape checks
# ---------------------------------------------------------------------------


def fosd_decreasing_cost(
    model: PomdpModel,
    u: int,
    samples: int = 500,
    tolerance: float = 1e-9,
    seed: int = 0,
) -> OrderCheckReport:
    """Check C(pi, u) decreases along first-order dominance.

    Comparable pairs are built by perturbing tail cumulative sums upward,
    which yields a dominating belief for each sampled base point.
    """
    rng = np.random.default_rng(seed)
    x = model.num_states
    low = rng.dirichlet(np.ones(x), size=samples)
    tails = np.cumsum(low[:, ::-1], axis=1)[:, ::-1]
    lift = rng.uniform(0.0, 1.0, size=(samples, x - 1))
    high_tails = tails.copy()
    for i in range(1, x):
        high_tails[:, i] = high_tails[:, i] + lift[:, i - 1] * (
            high_tails[:, i - 1] - high_tails[:, i]
        )
    high = np.empty_like(low)
    high[:, :-1] = high_tails[:, :-1] - high_tails[:, 1:]
    high[:, -1] = high_tails[:, -1]

    gap = instantaneous_cost_batch(model, high, u) - instantaneous_cost_batch(
        model, low, u
    )
    worst = int(np.argmax(gap))
    return make_report(
        "fosd_decreasing_cost",
        float(gap[worst]),
        tolerance,
        witness={"pi_high": high[worst].tolist(), "pi_low": low[worst].tolist()},
        samples=samples,
        action=u,
    )


def _even_midpoint_pairs(grid: SimplexGrid, num_trials: int, rng) -> tuple:
    """Random grid index pairs whose coordinate midpoint is a grid point."""
    if grid.resolution % 2 != 0:
        raise PreconditionFailed("midpoint sampling needs an even grid resolution")
    n = grid.num_points
    keep_a, keep_b = [], []
    collected = 0
    for _ in range(200):
        a = rng.integers(0, n, size=num_trials)
        b = rng.integers(0, n, size=num_trials)
        ok = ~np.any((grid.coords[a] + grid.coords[b]) % 2, axis=1)
        keep_a.append(a[ok])
        keep_b.append(b[ok])
        collected += int(ok.sum())
        if collected >= num_trials:
            break
    a = np.concatenate(keep_a)[:num_trials]
    b = np.concatenate(keep_b)[:num_trials]
    mid = grid.index_of((grid.coords[a] + grid.coords[b]) // 2)
    return a, b, mid


def verify_concavity(
    value: ValueFunction,
    num_trials: int = 2000,
    tolerance: float = 1e-9,
    seed: int = 0,
) -> OrderCheckReport:
    """Midpoint concavity test on the stored grid values.

    Samples grid-point pairs whose midpoint is itself a grid point and
    checks V(mid) >= (V(a) + V(b)) / 2 - tolerance.
    """
    grid = value.grid
    rng = np.random.default_rng(seed)
    a, b, mid = _even_midpoint_pairs(grid, num_trials, rng)
    v = value.values
    gap = 0.5 * v[a] + 0.5 * v[b] - v[mid]
    worst = int(np.argmax(gap))
    return make_report(
        "value_concavity",
        float(gap[worst]),
        tolerance,
        witness={
            "pi1": grid.points[a[worst]].tolist(),
            "pi2": grid.points[b[worst]].tolist(),
        },
        samples=int(gap.size),
    )


def verify_stopping_set_convex(policy, grid: SimplexGrid | None = None) -> OrderCheckReport:
    """Sweep all stop-region pairs with on-grid midpoints for convexity.

    The stop region is the set of grid points with action 1; a violation
    is a pair of stop points whose midpoint continues.
    """
    grid = grid or policy.grid
    if grid.resolution % 2 != 0:
        raise PreconditionFailed("convexity sweep needs an even grid resolution")
    stop_idx = np.flatnonzero(policy.actions == 1)
    if stop_idx.size < 2:
        return make_report(
            "stopping_set_convex", 0.0, 0.5, samples=0, stop_points=int(stop_idx.size)
        )
    a_all, b_all = np.triu_indices(stop_idx.size, k=1)
    a_all, b_all = stop_idx[a_all], stop_idx[b_all]
    worst = 0.0
    witness = None
    checked = 0
    for start in range(0, a_all.size, 500_000):
        a = a_all[start : start + 500_000]
        b = b_all[start : start + 500_000]
        ok = ~np.any((grid.coords[a] + grid.coords[b]) % 2, axis=1)
        a, b = a[ok], b[ok]
        if a.size == 0:
            continue
        mid = grid.index_of((grid.coords[a] + grid.coords[b]) // 2)
        checked += a.size
        bad = policy.actions[mid] != 1
        if np.any(bad):
            first = int(np.argmax(bad))
            worst = 1.0
            witness = {
                "pi1": grid.points[a[first]].tolist(),
                "pi2": grid.points[b[first]].tolist(),
                "midpoint_action": int(policy.actions[mid[first]]),
            }
            break
    return make_report(
        "stopping_set_convex",
        worst,
        0.5,
        witness=witness,
        samples=checked,
        stop_points=int(stop_idx.size),
    )


def verify_homogeneity(
    model: PomdpModel,
    grid: SimplexGrid,
    kappas=(0.001, 0.5, 1.0, 2.0, 7.3),
    num_samples: int = 50,
    tolerance: float = 1e-10,
    seed: int = 0,
    tol: float = 1e-9,
    max_iters: int = 100_000,
) -> OrderCheckReport:
    """Check W(kappa * alpha) = kappa * W(alpha) on sampled orthant points.

    Violations are scaled by max(1, kappa * |W|) so the tolerance is
    relative to the value magnitude at each scale.
    """
    relaxed = solve_relaxed(model, grid, tol=tol, max_iters=max_iters)
    w = relaxed.value
    scale = max(1.0, w.scale())
    rng = np.random.default_rng(seed)
    alphas = rng.uniform(0.05, 2.0, size=(num_samples, model.num_states))
    worst = -np.inf
    witness = None
    for alpha in alphas:
        base = w.at(alpha)
        for kappa in kappas:
            err = abs(w.at(kappa * alpha) - kappa * base)
            rel = err / max(1.0, kappa * scale)
            if rel > worst:
                worst = rel
                witness = {"alpha": alpha.tolist(), "kappa": float(kappa)}
    return make_report(
        "positive_homogeneity",
        worst,
        tolerance,
        witness=witness,
        samples=num_samples * len(tuple(kappas)),
    )


def _mlr_direction(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """+1 where points[a] >=_r points[b], -1 for the reverse, 0 incomparable."""
    pa, pb = points[a], points[b]
    x = points.shape[1]
    a_dom = np.ones(a.size, dtype=bool)
    b_dom = np.ones(a.size, dtype=bool)
    for i in range(x):
        for j in range(i + 1, x):
            lhs = pa[:, i] * pb[:, j]
            rhs = pb[:, i] * pa[:, j]
            a_dom &= lhs <= rhs + MLR_TOL
            b_dom &= rhs <= lhs + MLR_TOL
    return np.where(a_dom, 1, np.where(b_dom, -1, 0))


def verify_mlr_monotone_value(
    value: ValueFunction,
    tolerance: float,
    max_pairs: int = PAIR_CAP,
    seed: int = 0,
) -> OrderCheckReport:
    """Check V is MLR decreasing over comparable grid-point pairs.

    Enumerates all pairs up to ``max_pairs`` and samples uniformly
    beyond; for each comparable pair the dominating belief must not have
    the larger value (within tolerance).
    """
    grid = value.grid
    n = grid.num_points
    total = n * (n - 1) // 2
    if total <= max_pairs:
        a, b = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        a = rng.integers(0, n, size=max_pairs)
        b = rng.integers(0, n, size=max_pairs)
        keep = a != b
        a, b = a[keep], b[keep]
    direction = _mlr_direction(grid.points, a, b)
    comparable = direction != 0
    a, b, direction = a[comparable], b[comparable], direction[comparable]
    hi = np.where(direction > 0, a, b)
    lo = np.where(direction > 0, b, a)
    gap = value.values[hi] - value.values[lo]
    if gap.size == 0:
        return make_report("mlr_monotone_value", 0.0, tolerance, samples=0)
    worst = int(np.argmax(gap))
    return make_report(
        "mlr_monotone_value",
        float(gap[worst]),
        tolerance,
        witness={
            "pi_high": grid.points[hi[worst]].tolist(),
            "pi_low": grid.points[lo[worst]].tolist(),
        },
        samples=int(gap.size),
    )


# ---------------------------------------------------------------------------
# conjecture probe: monotone values without a TP2 observation matrix
# ---------------------------------------------------------------------------


def random_a1a2_non_tp2_model(rng, num_obs: int | None = None, discount: float = 0.8):
    """Random two-state model with decreasing costs and TP2 transitions
    whose observation matrices are deliberately not TP2."""
    y = int(num_obs) if num_obs else int(rng.integers(2, 4))
    transition = []
    linear_cost = []
    for _ in range(2):
        p11 = rng.uniform(0.5, 0.95)
        p21 = rng.uniform(0.05, p11)
        transition.append([[p11, 1.0 - p11], [p21, 1.0 - p21]])
        c1 = rng.uniform(0.5, 1.0)
        linear_cost.append([c1, rng.uniform(0.0, c1)])
    observation = []
    for _ in range(2):
        while True:
            b = rng.dirichlet(np.ones(y), size=2)
            if not is_tp2(b).holds:
                observation.append(b.tolist())
                break
    return PomdpModel(
        num_states=2,
        num_actions=2,
        num_observations=(y, y),
        transition=transition,
        observation=observation,
        linear_cost=linear_cost,
        discount=discount,
    )


def conjecture_probe(
    model_generator,
    num_models: int,
    resolution: int = 200,
    tolerance_scale: float = 1e-6,
    solver_tol: float = 1e-9,
    max_iters: int = 100_000,
) -> dict:
    """Search for an MLR-monotonicity counterexample in a model stream.

    ``model_generator(index)`` must yield models; each is solved and its
    value function checked for MLR monotonicity.  Returns a summary with
    the first counterexample found, if any.
    """
    grid = None
    for index in range(num_models):
        model = model_generator(index)
        if grid is None or grid.num_states != model.num_states:
            grid = build_grid(model.num_states, resolution)
        result = solve_discounted(model, grid, tol=solver_tol, max_iters=max_iters)
        tolerance = tolerance_scale * max(1.0, result.value.scale())
        report = verify_mlr_monotone_value(result.value, tolerance)
        if not report.holds:
            return {
                "num_models": num_models,
                "counterexample_found": True,
                "model_index": index,
                "model": model.to_dict(),
                "report": report.to_dict(),
            }
    return {"num_models": num_models, "counterexample_found": False}


# ---------------------------------------------------------------------------
# Blackwell dominance
# ---------------------------------------------------------------------------


@dataclass
class BlackwellFactorization:
    """Best row-stochastic R with B1 ~ B2 R, and whether it certifies dominance."""

    garbling: np.ndarray
    residual: float
    dominates: bool
    iterations: int
    residual_tolerance: float = 1e-6

    def to_dict(self) -> dict:
        return {
            "garbling": self.garbling.tolist(),
            "residual": float(self.residual),
            "dominates": bool(self.dominates),
            "iterations": int(self.iterations),
            "residual_tolerance": float(self.residual_tolerance),
        }


def project_rows_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    srt = np.sort(v, axis=1)[:, ::-1]
    css = np.cumsum(srt, axis=1) - 1.0
    ks = np.arange(1, v.shape[1] + 1)
    cond = srt - css / ks > 0
    rho = cond.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1.0)
    return np.maximum(v - theta[:, None], 0.0)


def blackwell_factorize(
    b1,
    b2,
    max_iters: int = 50_000,
    tol: float = 1e-14,
    residual_tolerance: float = 1e-6,
) -> BlackwellFactorization:
    """Least-squares garbling recovery: min ||B2 R - B1||_F over stochastic R.

    Solved by accelerated projected gradient with per-row simplex
    projection; the problem is convex, so the residual at the returned R
    is a certificate.  Dominance is declared when the residual is within
    ``residual_tolerance``.
    """
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if b1.ndim != 2 or b2.ndim != 2 or b1.shape[0] != b2.shape[0]:
        raise DimensionMismatch(
            f"observation matrices need matching state counts, got {b1.shape} and {b2.shape}"
        )
    y1, y2 = b1.shape[1], b2.shape[1]
    gram = b2.T @ b2
    lipschitz = 2.0 * float(np.linalg.eigvalsh(gram).max())
    step = 1.0 / lipschitz

    r = np.full((y2, y1), 1.0 / y1)
    z = r.copy()
    t = 1.0
    best_r = r
    best_obj = float(np.linalg.norm(b2 @ r - b1))
    iterations = 0
    for iterations in range(1, max_iters + 1):
        grad = 2.0 * (gram @ z - b2.T @ b1)
        r_new = project_rows_to_simplex(z - step * grad)
        obj = float(np.linalg.norm(b2 @ r_new - b1))
        if obj < best_obj:
            best_obj = obj
            best_r = r_new
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = r_new + ((t - 1.0) / t_new) * (r_new - r)
        move = float(np.max(np.abs(r_new - r)))
        r = r_new
        t = t_new
        if move < tol and iterations > 10:
            break
        if best_obj < 1e-15:
            break
    return BlackwellFactorization(
        garbling=best_r,
        residual=best_obj,
        dominates=bool(best_obj <= residual_tolerance),
        iterations=iterations,
        residual_tolerance=residual_tolerance,
    )


def verify_myopic_bound(
    model: PomdpModel,
    grid: SimplexGrid,
    solver_tol: float = 1e-9,
    max_iters: int = 100_000,
    jensen_tolerance_scale: float = 1e-8,
    q_tolerance: float = 1e-9,
    strictness_margin: float = 1e-9,
) -> OrderCheckReport:
    """Certify the myopic lower bound on a two-sensor model.

    Requires both actions to share the transition matrix and sensor 2 to
    Blackwell-dominate sensor 1.  Checks, at every grid point: (a) the
    dominated sensor's continuation value is not below the dominant
    sensor's (Jensen inequality), and (b) wherever sensor 2 is strictly
    cheaper instantaneously, Q(pi, 2) <= Q(pi, 1), so the optimal policy
    sits above the myopic one with ties resolved by Q comparison.

    The reported worst violation is normalized: each raw defect is
    divided by its own tolerance, so "holds" means both checks pass.
    """
    if model.num_actions != 2:
        raise PreconditionFailed("myopic bound check needs exactly two sensing modes")
    if model.is_stopping:
        raise PreconditionFailed("myopic bound check applies to discounted models")
    if not np.allclose(model.transition[0], model.transition[1], atol=1e-12):
        raise PreconditionFailed(
            "both sensing modes must share one transition matrix"
        )
    fac = blackwell_factorize(model.observation[0], model.observation[1])
    if not fac.dominates:
        raise PreconditionFailed(
            f"sensor 2 does not Blackwell-dominate sensor 1 "
            f"(residual {fac.residual:.3e})"
        )

    result = solve_discounted(model, grid, tol=solver_tol, max_iters=max_iters)
    values = result.value.values
    tables = build_tables(model, grid)
    cont1 = continuation_values(tables, values, 1)
    cont2 = continuation_values(tables, values, 2)
    jensen_gap = cont2 - cont1
    jensen_tol = jensen_tolerance_scale * max(1.0, result.value.scale())
    jensen_worst = int(np.argmax(jensen_gap))

    q = q_values(tables, values)
    cheaper2 = tables.cost[1] < tables.cost[0] - strictness_margin
    if np.any(cheaper2):
        q_gap = np.where(cheaper2, q[1] - q[0], -np.inf)
        q_worst = int(np.argmax(q_gap))
        q_worst_val = float(q_gap[q_worst])
    else:
        q_worst, q_worst_val = None, -np.inf

    myopic = np.where(cheaper2, 2, 1)
    policy_ok = (result.policy.actions >= myopic) | (
        cheaper2 & (q[1] <= q[0] + q_tolerance)
    )

    ratios = [jensen_gap[jensen_worst] / jensen_tol]
    if q_worst is not None:
        ratios.append(q_worst_val / q_tolerance)
    worst_ratio = float(max(ratios))
    witness_idx = jensen_worst if ratios[0] == worst_ratio else q_worst
    return make_report(
        "myopic_policy_bound",
        worst_ratio,
        1.0,
        witness={"pi": grid.points[witness_idx].tolist()},
        samples=grid.num_points,
        jensen_worst=float(jensen_gap[jensen_worst]),
        jensen_tolerance=float(jensen_tol),
        q_worst=(None if q_worst is None else q_worst_val),
        q_tolerance=float(q_tolerance),
        strict_set_size=int(np.count_nonzero(cheaper2)),
        policy_respects_bound=bool(np.all(policy_ok)),
        factorization_residual=float(fac.residual),
    )


# ---------------------------------------------------------------------------
# ultrametric matrices and stochastic roots
# ---------------------------------------------------------------------------


def is_ultrametric(matrix, tol: float = 1e-12) -> OrderCheckReport:
    """Check symmetry, stochasticity, the min inequality
    B_ij >= min(B_ik, B_kj), and strict diagonal dominance."""
    b = np.asarray(matrix, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionMismatch("ultrametric check needs a square matrix")
    x = b.shape[0]
    checks = []

    asym = float(np.max(np.abs(b - b.T)))
    checks.append(("symmetry", asym, None))
    row_err = float(np.max(np.abs(b.sum(axis=1) - 1.0)))
    checks.append(("row_sums", row_err, None))
    neg = float(max(0.0, -b.min()))
    checks.append(("nonnegativity", neg, None))

    lhs = np.minimum(b[:, None, :], b.T[None, :, :])  # min(B_ik, B_kj) at (i, j, k)
    need = lhs.max(axis=2)
    min_gap = need - b
    i, j = np.unravel_index(np.argmax(min_gap), min_gap.shape)
    checks.append(("min_inequality", float(min_gap[i, j]), {"i": int(i + 1), "j": int(j + 1)}))

    off = b.copy()
    np.fill_diagonal(off, -np.inf)
    diag_gap = float(np.max(off.max(axis=1) - np.diag(b)))
    # strictness: diagonal must exceed every off-diagonal entry in its row
    strict_viol = diag_gap if diag_gap < 0.0 else max(diag_gap, 2.0 * tol)
    checks.append(("strict_diagonal", strict_viol, None))

    name, worst, witness = max(checks, key=lambda c: c[1])
    return make_report(
        "ultrametric",
        worst,
        tol,
        witness={"condition": name, **(witness or {})},
        samples=x * x * x,
        conditions={n: float(v) for n, v, _ in checks},
    )


def matrix_root(matrix, degree: int) -> np.ndarray:
    """Spectral ``degree``-th root of a symmetric stochastic ultrametric matrix.

    The root of such a matrix is again stochastic; the computed root is
    checked for row sums, nonnegativity, and for reproducing the input
    when raised back to ``degree``.
    """
    if degree < 1 or int(degree) != degree:
        raise ValueError("degree must be a positive integer")
    b = np.asarray(matrix, dtype=float)
    report = is_ultrametric(b)
    if not report.holds:
        raise PreconditionFailed(
            f"matrix is not symmetric stochastic ultrametric "
            f"(failed {report.witness['condition']}, defect {report.worst_violation:.3e})"
        )
    if degree == 1:
        return b.copy()
    eigvals, eigvecs = np.linalg.eigh(b)
    if float(eigvals.min()) < -1e-10:
        raise NegativeEigenvalue(
            f"eigenvalue {float(eigvals.min()):.3e} < 0; no real stochastic root"
        )
    rooted = np.clip(eigvals, 0.0, None) ** (1.0 / degree)
    root = (eigvecs * rooted) @ eigvecs.T

    row_err = float(np.max(np.abs(root.sum(axis=1) - 1.0)))
    neg = float(max(0.0, -root.min()))
    back = np.linalg.matrix_power(root, degree)
    recon = float(np.max(np.abs(back - b)))
    if row_err > 1e-10 or neg > 1e-10 or recon > 1e-8:
        raise PostconditionFailed(
            f"root checks failed: row sums off by {row_err:.3e}, "
            f"negativity {neg:.3e}, reconstruction {recon:.3e}"
        )
    return root
