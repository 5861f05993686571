"""Implementability and maximality tests, plus a brute-force dominance oracle.

The key scalar is z(p) = sum_i p_i c_i'(p_i) + prod_i (1 - p_i). Any profile
implementable with a unit budget has z(p) <= 1, with equality exactly when
the implementing contract hands out the whole budget on every nonempty
outcome. The subset inequality compared here for every nonempty I,

    sum_{i in I} p_i c_i'(p_i) / sum_i p_i c_i'(p_i)
        <= P[S meets I] / P[S nonempty],

characterizes the profiles a Luce contract can implement; its equality cases
(the tight sets) chain into the priority partition.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    Contract,
    CostModel,
    Profile,
    ProfileLike,
    as_profile,
    mask_agents,
    require_interior,
)
from .equilibrium import SolverOptions, find_equilibria
from .errors import GridTooCoarse

TIGHT_TOL = 1e-9


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of checking the subset inequality on every nonempty subset.

    `worst_subset` is the mask maximizing lhs - rhs, with the two sides
    recorded for it; `tight_sets` lists the masks where equality holds within
    tolerance and always contains the full set.
    """

    n: int
    holds: bool
    worst_subset: int
    lhs: float
    rhs: float
    tight_sets: tuple[int, ...]


def _subset_sums(values: np.ndarray) -> np.ndarray:
    """sums[mask] = sum of values[i] over i in mask, for all masks."""
    sums = np.zeros(1)
    for v in values:
        sums = np.concatenate([sums, sums + v])
    return sums


def _fail_products(p: np.ndarray) -> np.ndarray:
    """prods[mask] = prod of (1 - p_i) over i in mask, for all masks."""
    prods = np.ones(1)
    for pi in p:
        prods = np.concatenate([prods, prods * (1.0 - pi)])
    return prods


def z_value(p: ProfileLike, costs: CostModel) -> float:
    """sum_i p_i c_i'(p_i) + prod_i (1 - p_i); equals 1 at budget-exhausting equilibria."""
    prof = as_profile(p, costs.n)
    arr = prof.as_array()
    return float(arr @ costs.marginal_vec(arr) + np.prod(1.0 - arr))


def implementability_necessary(p: ProfileLike, costs: CostModel, tol: float = TIGHT_TOL) -> bool:
    """Necessary condition for implementability with a unit budget: z(p) <= 1.

    Not sufficient; a profile passing this test may still fail the subset
    inequality.
    """
    return z_value(p, costs) <= 1.0 + tol


def luce_condition(p: ProfileLike, costs: CostModel, tol: float = TIGHT_TOL) -> ConditionReport:
    """Evaluate the subset inequality for every nonempty subset of agents."""
    prof = require_interior(as_profile(p, costs.n))
    n = prof.n
    arr = prof.as_array()
    spend = arr * costs.marginal_vec(arr)
    sums = _subset_sums(spend)
    fails = _fail_products(arr)
    full = (1 << n) - 1
    lhs = sums[1:] / sums[full]
    rhs = (1.0 - fails[1:]) / (1.0 - fails[full])
    diff = lhs - rhs
    worst = int(np.argmax(diff))
    holds = bool(diff[worst] <= tol)
    tight = tuple(
        int(m) + 1 for m in np.nonzero(np.abs(diff) <= tol)[0]
    )
    tight = tuple(sorted(tight, key=lambda m: (bin(m).count("1"), m)))
    return ConditionReport(
        n=n,
        holds=holds,
        worst_subset=worst + 1,
        lhs=float(lhs[worst]),
        rhs=float(rhs[worst]),
        tight_sets=tight,
    )


def maximal_candidate(p: ProfileLike, costs: CostModel, tol: float = TIGHT_TOL) -> bool:
    """True when z(p) = 1 and the subset inequality holds (interior p only)."""
    if abs(z_value(p, costs) - 1.0) > tol:
        return False
    return luce_condition(p, costs, tol).holds


# ---------------------------------------------------------------------------
# Brute-force frontier and dominance oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrontierPoint:
    """One sampled budget-exhausting contract equilibrium."""

    params: tuple[float, ...]
    profile: Profile
    z: float


@dataclass(frozen=True)
class DominanceCheck:
    """Dominance audit of one sampled sub-budget contract equilibrium."""

    equilibrium: Profile
    slack_needed: float


@dataclass(frozen=True)
class FrontierResult:
    points: tuple[FrontierPoint, ...]
    grid_step: float
    slack_allowed: float
    checks: tuple[DominanceCheck, ...]

    def all_dominated(self) -> bool:
        return all(c.slack_needed <= self.slack_allowed for c in self.checks)


def _compositions(total: int, parts: int):
    """Nonnegative integer tuples of length `parts` summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def _sge_grid(n: int, resolution: int):
    """All budget-exhausting contracts on a share grid of the free outcomes.

    Singleton outcomes are forced (the lone successful agent takes all); each
    outcome with two or more successes gets every grid point of its share
    simplex. Yields (params, Contract); params concatenates, per free outcome
    in mask order, the shares of all members except the last.
    """
    free_masks = [m for m in range(1, 1 << n) if bin(m).count("1") >= 2]
    grids = []
    for mask in free_masks:
        k = len(mask_agents(mask))
        grids.append([np.array(c, dtype=float) / resolution for c in _compositions(resolution, k)])
    base = np.zeros((1 << n, n))
    for mask in range(1, 1 << n):
        members = mask_agents(mask)
        if len(members) == 1:
            base[mask, members[0]] = 1.0
    for combo in itertools.product(*grids) if free_masks else [()]:
        table = base.copy()
        params: list[float] = []
        for mask, shares in zip(free_masks, combo):
            members = list(mask_agents(mask))
            table[mask, members] = shares
            params.extend(shares[:-1])
        yield tuple(params), Contract(n, table)


def _random_subbudget_fgn(n: int, rng: np.random.Generator) -> Contract:
    """A random FGN contract that strictly underuses the budget everywhere."""
    table = np.zeros((1 << n, n))
    for mask in range(1, 1 << n):
        members = list(mask_agents(mask))
        shares = rng.dirichlet(np.ones(len(members))) * rng.uniform(0.2, 0.95)
        table[mask, members] = shares
    return Contract(n, table)


def dominated_by(frontier: tuple[FrontierPoint, ...], q: ProfileLike, slack: float = 0.0) -> bool:
    """True when some frontier point weakly dominates q coordinate-wise, up to slack."""
    arr = as_profile(q).as_array()
    return any(np.all(fp.profile.as_array() >= arr - slack) for fp in frontier)


def _slack_needed(frontier: tuple[FrontierPoint, ...], q: np.ndarray) -> float:
    """Smallest slack making some frontier point dominate q coordinate-wise."""
    best = np.inf
    for fp in frontier:
        gap = float(np.max(q - fp.profile.as_array()))
        best = min(best, max(gap, 0.0))
    return best


def brute_force_frontier(costs: CostModel, grid_resolution: int,
                         non_sge_samples: int = 0, seed: int | None = None,
                         options: SolverOptions | None = None,
                         threads: int = 1) -> FrontierResult:
    """Sample the maximal frontier by exhausting budget-exhausting contracts.

    Enumerates those contracts on a grid over the free share parameters (for
    two agents a single parameter, agent 1's share when both succeed), solves
    each for its equilibria, and returns every converged fixed point. When
    `non_sge_samples` > 0 it additionally draws random strictly-sub-budget
    FGN contracts and audits that each of their equilibria is coordinate-wise
    dominated by some sampled frontier point; needing more than two grid
    steps of slack raises a GridTooCoarse warning. Practical for n <= 3 only.
    """
    n = costs.n
    if n > 3:
        raise ValueError(f"frontier enumeration is limited to n <= 3, got {n}")
    if grid_resolution < 1:
        raise ValueError("grid_resolution must be at least 1")
    opts = options or SolverOptions(starts=4)

    def solve_cell(job) -> list[FrontierPoint]:
        params, contract = job
        return [
            FrontierPoint(params, res.profile, z_value(res.profile, costs))
            for res in find_equilibria(contract, costs, opts)
            if res.converged
        ]

    cells = list(_sge_grid(n, grid_resolution))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            solved = list(pool.map(solve_cell, cells))
    else:
        solved = [solve_cell(job) for job in cells]
    points: list[FrontierPoint] = [pt for cell in solved for pt in cell]
    grid_step = 1.0 / grid_resolution
    slack_allowed = 2.0 * grid_step
    checks: list[DominanceCheck] = []
    if non_sge_samples > 0:
        rng = np.random.default_rng(seed)
        frontier = tuple(points)
        for _ in range(non_sge_samples):
            contract = _random_subbudget_fgn(n, rng)
            for res in find_equilibria(contract, costs, opts):
                if res.converged:
                    needed = _slack_needed(frontier, res.profile.as_array())
                    checks.append(DominanceCheck(res.profile, needed))
        worst = max((c.slack_needed for c in checks), default=0.0)
        if worst > slack_allowed:
            warnings.warn(
                f"dominance verification needed slack {worst:.3g} above "
                f"2 x grid step = {slack_allowed:.3g}; refine the grid",
                GridTooCoarse,
            )
    return FrontierResult(tuple(points), grid_step, slack_allowed, tuple(checks))
