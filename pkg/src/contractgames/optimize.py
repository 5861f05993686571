"""Principal's problem: maximize an increasing objective over tiered contracts.

The search space is the family of ordered agent partitions (priority tiers)
with positive within-tier weights. Tiers are enumerated exhaustively for
n <= 6; weights are optimized per tier structure by a coarse simplex grid
followed by Nelder-Mead refinement, each candidate scored at the best
converged equilibrium of its expanded contract. A two-agent quadratic-cost
closed form is provided for cross-checking.
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import bisect, minimize

from .core import Contract, CostModel, LuceSpec, Profile, expand_luce
from .equilibrium import SolverOptions, find_equilibria
from .errors import ObjectiveNotIncreasing, ParameterOutOfRange

# Weight vectors are kept a macroscopic step inside each block's simplex:
# every simplex boundary is exactly the expansion of a finer partition, which
# the enumeration evaluates directly, so searching arbitrarily close to a
# corner only duplicates that candidate at lower numerical contrast. The value
# sacrificed on an interior optimum closer than the floor is O(floor^2), far
# below the refinement tolerance.
_WEIGHT_FLOOR = 1e-3
_PENALTY = 1e9


@dataclass(frozen=True)
class Objective:
    """Principal's objective over success profiles; must be increasing."""

    kind: str
    weights: tuple[float, ...] | None = None
    fn: Callable[[Sequence[float]], float] | None = None

    @classmethod
    def linear(cls, weights: Sequence[float]) -> "Objective":
        w = tuple(float(x) for x in weights)
        if any(x <= 0 for x in w):
            raise ValueError("linear objective weights must be positive")
        return cls(kind="linear", weights=w)

    @classmethod
    def custom(cls, fn: Callable[[Sequence[float]], float]) -> "Objective":
        """Caller asserts fn is strictly increasing in every coordinate."""
        return cls(kind="custom", fn=fn)

    def value(self, p: Sequence[float]) -> float:
        if self.kind == "linear":
            return float(np.dot(self.weights, np.asarray(p, dtype=float)))
        return float(self.fn(tuple(p)))


@dataclass(frozen=True)
class Optimum:
    spec: LuceSpec
    equilibrium: Profile
    value: float
    search_trace: int


def ordered_set_partitions(n: int) -> list[tuple[tuple[int, ...], ...]]:
    """All ordered partitions of agents 0..n-1, fewest blocks first."""

    def set_partitions(items: tuple[int, ...]):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for smaller in set_partitions(rest):
            for k in range(len(smaller)):
                yield smaller[:k] + [sorted([first] + smaller[k])] + smaller[k + 1:]
            yield [[first]] + smaller

    ordered = []
    for blocks in set_partitions(tuple(range(n))):
        for perm in itertools.permutations(blocks):
            ordered.append(tuple(tuple(b) for b in perm))
    ordered.sort(key=lambda part: (len(part), part))
    return ordered


def _probe_increasing(objective: Objective, n: int) -> None:
    if objective.kind != "custom":
        return
    base = np.full(n, 0.3)
    v0 = objective.value(base)
    for i in range(n):
        bumped = base.copy()
        bumped[i] += 0.05
        if objective.value(bumped) < v0 - 1e-12:
            warnings.warn(
                f"objective decreased along coordinate {i}; the search assumes "
                "a strictly increasing objective",
                ObjectiveNotIncreasing,
            )
            return


def _weights_from_free(partition, x: np.ndarray, n: int) -> np.ndarray | None:
    """Free coordinates are each block's weights except the last member's."""
    weights = np.empty(n)
    pos = 0
    for block in partition:
        k = len(block)
        if k == 1:
            weights[block[0]] = 1.0
            continue
        head = x[pos: pos + k - 1]
        pos += k - 1
        tail = 1.0 - head.sum()
        if np.any(head < _WEIGHT_FLOOR) or tail < _WEIGHT_FLOOR:
            return None
        for j, agent in enumerate(block[:-1]):
            weights[agent] = head[j]
        weights[block[-1]] = tail
    return weights


def _free_grid(partition, resolution: int) -> list[np.ndarray]:
    """Interior grid over the product of within-block weight simplices."""
    per_block = []
    for block in partition:
        k = len(block)
        if k == 1:
            continue
        pts = []
        for combo in itertools.product(range(1, resolution), repeat=k - 1):
            head = np.array(combo, dtype=float) / resolution
            if head.sum() < 1.0 - 1.0 / (2.0 * resolution):
                pts.append(head)
        per_block.append(pts)
    if not per_block:
        return [np.empty(0)]
    return [np.concatenate(parts) for parts in itertools.product(*per_block)]


class _Evaluator:
    def __init__(self, partition, objective, costs, solver):
        self.partition = partition
        self.objective = objective
        self.costs = costs
        self.solver = solver
        self.n = costs.n
        self.evals = 0
        self.best: tuple[float, LuceSpec, Profile] | None = None

    def __call__(self, x: np.ndarray) -> float:
        """Negative objective value at the best equilibrium; large when infeasible."""
        weights = _weights_from_free(self.partition, np.asarray(x, dtype=float), self.n)
        if weights is None:
            return _PENALTY
        spec = LuceSpec(self.partition, tuple(weights))
        contract = expand_luce(spec, self.n)
        self.evals += 1
        value = -np.inf
        best_profile = None
        for res in find_equilibria(contract, self.costs, self.solver):
            if not res.converged:
                continue
            v = self.objective.value(res.profile.probs)
            if v > value:
                value, best_profile = v, res.profile
        if best_profile is None:
            return _PENALTY
        if self.best is None or value > self.best[0]:
            self.best = (value, spec, best_profile)
        return -value


def _optimize_partition(partition, objective, costs, solver, grid_resolution,
                        restarts, rng) -> tuple[float, LuceSpec, Profile, int] | None:
    evaluator = _Evaluator(partition, objective, costs, solver)
    n = costs.n
    dims = sum(len(b) - 1 for b in partition)
    if dims == 0:
        evaluator(np.empty(0))
    else:
        grid = _free_grid(partition, grid_resolution)
        scored = [(evaluator(x), tuple(x)) for x in grid]
        scored.sort(key=lambda t: t[0])
        seeds = [np.array(scored[0][1])]
        for _ in range(max(0, restarts - 1)):
            weights = np.empty(n)
            for block in partition:
                w = rng.dirichlet(2.0 * np.ones(len(block)))
                weights[list(block)] = w
            x0 = np.concatenate([
                [weights[a] for a in block[:-1]] for block in partition if len(block) > 1
            ])
            seeds.append(x0)
        for x0 in seeds:
            simplex = np.vstack([x0] + [x0 + 0.1 * e for e in np.eye(dims)])
            minimize(
                evaluator,
                x0,
                method="Nelder-Mead",
                options={
                    "initial_simplex": simplex,
                    "xatol": 1e-8,
                    "fatol": 1e-12,
                    "maxiter": 400 * dims,
                },
            )
    if evaluator.best is None:
        return None
    value, spec, profile = evaluator.best
    return value, spec, profile, evaluator.evals


def optimize_principal(objective: Objective, costs: CostModel,
                       grid_resolution: int = 12, restarts: int = 4,
                       seed: int | None = None,
                       solver: SolverOptions | None = None,
                       partitions: Sequence[tuple[tuple[int, ...], ...]] | None = None,
                       threads: int = 1) -> Optimum:
    """Maximize the objective over tier structures and within-tier weights.

    Tier structures are enumerated exhaustively for n <= 6 (13 at n = 3, 75
    at n = 4); beyond that only the single-tier family is searched unless
    `partitions` supplies candidates explicitly. Ties in value go to the
    candidate listed first: fewer tiers, then lexicographic order, which
    makes the output deterministic for a fixed seed.
    """
    n = costs.n
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be at least 2")
    _probe_increasing(objective, n)
    if partitions is None:
        if n <= 6:
            partitions = ordered_set_partitions(n)
        else:
            partitions = [(tuple(range(n)),)]
    else:
        partitions = sorted(
            (tuple(tuple(sorted(b)) for b in part) for part in partitions),
            key=lambda part: (len(part), part),
        )
    solver = solver or SolverOptions(starts=2)
    rng = np.random.default_rng(seed)
    jobs = [
        (part, np.random.default_rng(rng.integers(0, 2 ** 63)))
        for part in partitions
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(
                lambda job: _optimize_partition(
                    job[0], objective, costs, solver, grid_resolution, restarts, job[1]
                ),
                jobs,
            ))
    else:
        outcomes = [
            _optimize_partition(part, objective, costs, solver, grid_resolution, restarts, r)
            for part, r in jobs
        ]
    best = None
    trace = 0
    for out in outcomes:
        if out is None:
            continue
        value, spec, profile, evals = out
        trace += evals
        if best is None or value > best[0]:
            best = (value, spec, profile)
    if best is None:
        raise RuntimeError("no candidate contract produced a converged equilibrium")
    value, spec, profile = best
    return Optimum(spec=spec, equilibrium=profile, value=value, search_trace=trace)


# ---------------------------------------------------------------------------
# Two agents, quadratic costs: closed forms
# ---------------------------------------------------------------------------

def _check_two_agent(c1: float, c2: float) -> None:
    if not (c1 > 1 and c2 > 1):
        raise ParameterOutOfRange(f"quadratic scales must exceed 1, got ({c1}, {c2})")


def two_agent_sge(lam: float, budget: float = 1.0) -> Contract:
    """The n=2 budget-exhausting contract with agent 1's joint share lam."""
    if not 0.0 <= lam <= 1.0:
        raise ParameterOutOfRange(f"share must lie in [0, 1], got {lam}")
    table = np.zeros((4, 2))
    table[0b01] = (1.0, 0.0)
    table[0b10] = (0.0, 1.0)
    table[0b11] = (lam, 1.0 - lam)
    return Contract(2, table, budget)


def two_agent_equilibrium(c1: float, c2: float, lam: float) -> tuple[float, float]:
    """Unique equilibrium of the lam-contract under costs (c_i/2) p^2."""
    _check_two_agent(c1, c2)
    if not 0.0 <= lam <= 1.0:
        raise ParameterOutOfRange(f"share must lie in [0, 1], got {lam}")
    den = c1 * c2 - lam * (1.0 - lam)
    return (c2 - (1.0 - lam)) / den, (c1 - lam) / den


def two_agent_equilibrium_derivatives(c1: float, c2: float, lam: float) -> tuple[float, float]:
    """d/d lam of the two equilibrium coordinates."""
    _check_two_agent(c1, c2)
    den = (c1 * c2 - lam * (1.0 - lam)) ** 2
    dp1 = (c1 * c2 - c2 * (2.0 * lam - 1.0) - (1.0 - lam) ** 2) / den
    dp2 = (-c1 * c2 - c1 * (2.0 * lam - 1.0) + lam ** 2) / den
    return dp1, dp2


def lambda_thresholds(c1: float, c2: float) -> tuple[float, float]:
    """Objective-weight thresholds below/above which the corners are optimal."""
    _check_two_agent(c1, c2)
    lower = (c1 * c2 - c1) / (c1 * c2 + c2 - 1.0)
    upper = (c1 * c2 + c1 - 1.0) / (c1 * c2 - c2)
    return lower, upper


def two_agent_optimal_lambda(c1: float, c2: float, w: float) -> float:
    """Optimal joint share for the objective w p_1 + p_2.

    Corner solutions bind at the closed-form thresholds; in between the
    optimum is the unique root of dp2/dp1 = -w, located by bisection to
    1e-12. Increasing in w, and exactly 1/2 at w = 1 for any costs.
    """
    _check_two_agent(c1, c2)
    if not w > 0:
        raise ParameterOutOfRange(f"objective weight must be positive, got {w}")
    lower, upper = lambda_thresholds(c1, c2)
    if w <= lower:
        return 0.0
    if w >= upper:
        return 1.0

    def slope(lam: float) -> float:
        dp1, dp2 = two_agent_equilibrium_derivatives(c1, c2, lam)
        return dp2 / dp1 + w

    return float(bisect(slope, 0.0, 1.0, xtol=1e-12))
