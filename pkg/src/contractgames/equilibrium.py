"""Marginal gains, best responses, and Nash fixed points of contract games.

An agent's best response solves c_i'(p_i) = max(0, r_i) where r_i is the
expected reward gain from succeeding rather than failing, computed exactly
over all outcomes of the other agents and scaled by the contract budget.
Equilibria are found by damped simultaneous best-response iteration from
several starting profiles; every fixed point found is reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Contract,
    CostModel,
    EquilibriumResult,
    Profile,
    ProfileLike,
    as_profile,
    outcome_probabilities,
)
from .errors import NotAdmissible, NotAnEquilibrium

_DEDUP_TOL = 1e-6
_OSCILLATION_WINDOW = 10


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the fixed-point iteration."""

    tolerance: float = 1e-10
    max_iterations: int = 10_000
    damping: float = 1.0
    starts: int = 8
    seed: int | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


class _Workspace:
    """Per-contract arrays reused across best-response sweeps."""

    def __init__(self, f: Contract):
        n = f.n
        masks = np.arange(1 << n, dtype=np.uint32)
        member = ((masks[:, None] >> np.arange(n)) & 1).astype(float)
        self.n = n
        self.budget = f.budget
        self.table = f.table
        self.in_table = f.table * member          # shares paid when i succeeded
        self.out_table = f.table * (1.0 - member)  # shares paid when i failed
        self.c_at_one: np.ndarray | None = None


def _forced_conditional(table_col: np.ndarray, p: np.ndarray, i: int, succeed: bool) -> float:
    """E[f_i(S)] conditioning agent i's outcome by forcing p_i to 1 or 0."""
    forced = p.copy()
    forced[i] = 1.0 if succeed else 0.0
    return float(outcome_probabilities(forced) @ table_col)


def _success_conditionals(ws: _Workspace, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent E[f_i | i in S] and E[f_i | i not in S] in share units."""
    probs = outcome_probabilities(p)
    ein = probs @ ws.in_table
    eout = probs @ ws.out_table
    cond_in = np.empty(ws.n)
    nz = p > 0.0
    # Every term of ein carries the factor p_i exactly once, so the division
    # is clean; only p_i = 0 needs the forced-outcome fallback.
    cond_in[nz] = ein[nz] / p[nz]
    for i in np.nonzero(~nz)[0]:
        cond_in[i] = _forced_conditional(ws.table[:, i], p, int(i), succeed=True)
    cond_out = eout / (1.0 - p)
    return cond_in, cond_out


def _marginal_gains(ws: _Workspace, p: np.ndarray) -> np.ndarray:
    cond_in, cond_out = _success_conditionals(ws, p)
    return (cond_in - cond_out) * ws.budget


def _best_responses(ws: _Workspace, p: np.ndarray, costs: CostModel) -> np.ndarray:
    r = np.maximum(_marginal_gains(ws, p), 0.0)
    if ws.c_at_one is None:
        ws.c_at_one = costs.marginal_at_one()
    if np.any(r >= ws.c_at_one):
        i = int(np.argmax(r - ws.c_at_one))
        raise NotAdmissible(
            f"agent {i}: marginal gain {r[i]:.6g} reaches c'(1) = {ws.c_at_one[i]:.6g}; "
            "small-budget admissibility violated"
        )
    return costs.inverse_marginal_vec(r)


def marginal_gain(i: int, f: Contract, p: ProfileLike) -> float:
    """Expected reward gain for agent i from succeeding, times the budget.

    Exact summation over the outcomes of the other agents; p_i itself is
    ignored. Negative values are possible when the contract rewards failure.
    """
    prof = as_profile(p, f.n)
    arr = prof.as_array()
    col = f.table[:, i]
    win = _forced_conditional(col, arr, i, succeed=True)
    lose = _forced_conditional(col, arr, i, succeed=False)
    return (win - lose) * f.budget


def best_response(i: int, f: Contract, p: ProfileLike, costs: CostModel) -> float:
    """The unique maximizer of agent i's payoff against p_{-i}."""
    r = max(0.0, marginal_gain(i, f, p))
    c_one = costs.marginal(i, 1.0)
    if r >= c_one:
        raise NotAdmissible(
            f"agent {i}: marginal gain {r:.6g} reaches c'(1) = {c_one:.6g}; "
            "small-budget admissibility violated"
        )
    return costs.inverse_marginal(i, r)


def equilibrium_residual(f: Contract, p: ProfileLike, costs: CostModel) -> float:
    """Max over agents of |p_i - best_response_i(p)|."""
    prof = as_profile(p, f.n)
    ws = _Workspace(f)
    b = _best_responses(ws, prof.as_array(), costs)
    return float(np.max(np.abs(b - prof.as_array())))


def _solo_start(ws: _Workspace, costs: CostModel) -> np.ndarray:
    """Each agent's best response when everyone else is sure to fail."""
    n = ws.n
    r0 = np.array([(ws.table[1 << i, i] - ws.table[0, i]) * ws.budget for i in range(n)])
    r0 = np.maximum(r0, 0.0)
    if ws.c_at_one is None:
        ws.c_at_one = costs.marginal_at_one()
    if np.any(r0 >= ws.c_at_one):
        i = int(np.argmax(r0 - ws.c_at_one))
        raise NotAdmissible(
            f"agent {i}: solo reward {r0[i]:.6g} reaches c'(1) = {ws.c_at_one[i]:.6g}"
        )
    return costs.inverse_marginal_vec(r0)


def _iterate(ws: _Workspace, costs: CostModel, start: np.ndarray,
             opts: SolverOptions) -> tuple[np.ndarray, float, int, bool]:
    p = start.copy()
    damping = opts.damping
    history: list[float] = []
    for it in range(1, opts.max_iterations + 1):
        b = _best_responses(ws, p, costs)
        residual = float(np.max(np.abs(b - p)))
        if residual <= opts.tolerance:
            return b, residual, it, True
        history.append(residual)
        if len(history) > _OSCILLATION_WINDOW:
            history.pop(0)
            if damping > 0.5 and any(y > x for x, y in zip(history, history[1:])):
                damping = 0.5
        p = (1.0 - damping) * p + damping * b
    return p, residual, opts.max_iterations, False


def find_equilibria(f: Contract, costs: CostModel, options: SolverOptions | None = None,
                    initial_profiles: tuple[ProfileLike, ...] = ()) -> list[EquilibriumResult]:
    """All Nash fixed points found by damped best-response iteration.

    Starts from the origin, each agent's solo optimum, and seeded random
    profiles (`options.starts` standard starts in total), plus any profiles
    in `initial_profiles`. Damping drops to 0.5 automatically when the
    residual stops decreasing monotonically. Fixed points are deduplicated
    at 1e-6 in the max norm and sorted by total effort, highest first.
    Starts that fail to converge within the iteration budget are reported
    with converged=False rather than raised.
    """
    opts = options or SolverOptions()
    if costs.n != f.n:
        raise ValueError(f"cost model has {costs.n} agents, contract has {f.n}")
    ws = _Workspace(f)
    rng = np.random.default_rng(opts.seed)
    starts: list[np.ndarray] = [np.zeros(f.n), _solo_start(ws, costs)]
    while len(starts) < max(1, opts.starts):
        starts.append(rng.uniform(0.0, 0.9, size=f.n))
    starts = starts[: max(1, opts.starts)]
    for extra in initial_profiles:
        starts.append(as_profile(extra, f.n).as_array())

    raw = [_iterate(ws, costs, s, opts) for s in starts]
    # Prefer converged, tighter fixed points as dedup representatives.
    raw.sort(key=lambda r: (not r[3], r[1]))
    results: list[EquilibriumResult] = []
    kept: list[np.ndarray] = []
    for p, residual, iterations, converged in raw:
        if any(np.max(np.abs(p - q)) <= _DEDUP_TOL for q in kept):
            continue
        kept.append(p)
        results.append(
            EquilibriumResult(Profile(tuple(p)), residual, iterations, converged)
        )
    results.sort(key=lambda r: -sum(r.profile))
    return results


def fgn_normalize(f: Contract, p: ProfileLike, costs: CostModel,
                  tolerance: float = 1e-10) -> Contract:
    """Rescale each agent's success rewards into an equivalent FGN contract.

    Requires p to be an equilibrium of f (residual at most `tolerance`).
    Each agent's rewards on outcomes where it succeeded are scaled by
    r_i / E[f_i | i in S] (zero when p_i = 0) and all failure rewards are
    dropped; the profile remains an equilibrium, which is re-verified.
    """
    prof = as_profile(p, f.n)
    arr = prof.as_array()
    ws = _Workspace(f)
    b = _best_responses(ws, arr, costs)
    residual = float(np.max(np.abs(b - arr)))
    if residual > tolerance:
        raise NotAnEquilibrium(
            f"profile is not an equilibrium of the contract: residual {residual:.3g} "
            f"> tolerance {tolerance:.3g}"
        )
    cond_in, cond_out = _success_conditionals(ws, arr)
    lam = np.zeros(f.n)
    for i in range(f.n):
        if arr[i] > 0.0:
            # First-order condition bounds the ratio by 1; clip rounding spill.
            lam[i] = min(1.0, max(0.0, (cond_in[i] - cond_out[i]) / cond_in[i]))
    n = f.n
    member = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)
    g_table = f.table * member * lam[None, :]
    g = Contract(n, g_table, budget=f.budget, unconstrained=f.unconstrained)
    check = equilibrium_residual(g, prof, costs)
    if check > tolerance:
        raise NotAnEquilibrium(
            f"normalization failed to preserve the equilibrium: residual {check:.3g}"
        )
    return g
