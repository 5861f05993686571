"""Synthesis of the unique tiered-weights contract implementing a profile.

Given an interior profile passing the subset inequality, the implementing
contract is reconstructed in three steps: the budget comes from the exact
formula sum_i p_i c_i'(p_i) / P[S nonempty]; the priority tiers are read off
the chain of tight subsets; and the within-tier weights are solved by a
damped multiplicative fixed-point iteration on the expanded contract's best
responses. A perturbation harness then checks that no other spec reproduces
the same profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CostModel,
    LuceSpec,
    ProfileLike,
    as_profile,
    expand_luce,
    mask_agents,
    require_interior,
)
from .equilibrium import SolverOptions, _Workspace, _best_responses, find_equilibria
from .errors import (
    InconsistentTightSets,
    NoConvergence,
    NotLuceImplementable,
    UniquenessViolation,
)
from .maximal import TIGHT_TOL, ConditionReport, luce_condition

# Per-sweep multiplicative weight updates are clipped to this band to prevent
# overshoot; the fixed point itself is unaffected.
_RATIO_CLIP = (0.5, 2.0)


@dataclass(frozen=True)
class SynthesisResult:
    """The implementing spec, its budget, and the audit trail."""

    spec: LuceSpec
    budget: float
    residual: float
    tight_chain: tuple[int, ...]


@dataclass(frozen=True)
class UniquenessReport:
    """Worst-case separation of perturbed specs' equilibria from the target."""

    trials: int
    worst_separation: float


def required_budget(p: ProfileLike, costs: CostModel) -> float:
    """Budget needed to implement p: sum_i p_i c_i'(p_i) / P[S nonempty]."""
    prof = require_interior(as_profile(p, costs.n))
    arr = prof.as_array()
    spend = float(arr @ costs.marginal_vec(arr))
    p_any = 1.0 - float(np.prod(1.0 - arr))
    return spend / p_any


def derive_partition(report: ConditionReport) -> tuple[tuple[int, ...], ...]:
    """Turn the chain of tight subsets into ordered priority tiers.

    Tight sets must be totally ordered by inclusion, ending at the full set;
    the tiers are the successive differences along the chain. Raises
    InconsistentTightSets when two tight sets are incomparable, which signals
    that the profile is not implementable at the working tolerance.
    """
    full = (1 << report.n) - 1
    chain = sorted(set(report.tight_sets), key=lambda m: (bin(m).count("1"), m))
    if not chain or chain[-1] != full:
        raise InconsistentTightSets("tight sets must include the full agent set")
    prev = 0
    blocks: list[tuple[int, ...]] = []
    for mask in chain:
        if mask & prev != prev or mask == prev:
            raise InconsistentTightSets(
                f"tight sets are not a chain under inclusion: mask {prev} vs {mask}"
            )
        blocks.append(mask_agents(mask & ~prev))
        prev = mask
    return tuple(blocks)


def synthesize_luce(p: ProfileLike, costs: CostModel, tolerance: float = 1e-10,
                    max_iterations: int = 10_000, tight_tol: float = TIGHT_TOL) -> SynthesisResult:
    """Construct the unique tiered-weights contract implementing p.

    Raises NotLuceImplementable when the subset inequality fails, and
    NoConvergence (carrying the best residual) if the within-tier weight
    iteration cannot drive the equilibrium residual at p below `tolerance`.
    """
    prof = require_interior(as_profile(p, costs.n))
    n = prof.n
    report = luce_condition(prof, costs, tight_tol)
    if not report.holds:
        raise NotLuceImplementable(
            f"subset inequality fails at agents {mask_agents(report.worst_subset)}: "
            f"lhs {report.lhs:.6g} > rhs {report.rhs:.6g}",
            report=report,
        )
    budget = required_budget(prof, costs)
    partition = derive_partition(report)
    arr = prof.as_array()
    target = costs.marginal_vec(arr)

    def evaluate(log_weights: np.ndarray):
        spec = LuceSpec(partition, tuple(np.exp(log_weights)))
        contract = expand_luce(spec, n, budget)
        b = _best_responses(_Workspace(contract), arr, costs)
        return spec, b, float(np.max(np.abs(b - arr)))

    def centered(log_weights: np.ndarray) -> np.ndarray:
        out = log_weights.copy()
        for block in partition:
            idx = list(block)
            out[idx] -= out[idx].max()
        return out

    # Warm start: weights proportional to each agent's expected spend.
    log_w = np.log(arr * target)
    best_residual = np.inf
    eta = 1.0  # damping exponent on the multiplicative update
    prev_residual = np.inf
    prev_delta = None
    settled = 0
    for _ in range(max_iterations):
        spec, b, residual = evaluate(log_w)
        best_residual = min(best_residual, residual)
        if residual <= tolerance:
            return SynthesisResult(spec, budget, residual, report.tight_sets)
        if residual > prev_residual:
            eta = 0.5
        prev_residual = residual
        ratios = np.clip(target / np.maximum(costs.marginal_vec(b), 1e-300), *_RATIO_CLIP)
        delta = eta * np.log(ratios)
        log_w = centered(log_w + delta)
        settled += 1
        if prev_delta is not None and settled >= 8:
            # Near-degenerate weights decay geometrically and slowly; estimate
            # the per-component decay rate and complete the geometric series,
            # keeping the jump only when it actually tightens the residual.
            safe = np.abs(prev_delta) > 1e-14
            rho = np.clip(np.where(safe, delta / np.where(safe, prev_delta, 1.0), 0.0),
                          -0.5, 0.98)
            jump = delta * rho / (1.0 - rho)
            _, _, jumped_residual = evaluate(centered(log_w + jump))
            if jumped_residual < residual:
                log_w = centered(log_w + jump)
                prev_residual = jumped_residual
            settled = 0
            prev_delta = None
        else:
            prev_delta = delta
    raise NoConvergence(
        f"weight iteration did not reach residual {tolerance:.1g} within "
        f"{max_iterations} sweeps (best {best_residual:.3g})",
        best_residual=best_residual,
    )


def _random_ordered_partition(n: int, rng: np.random.Generator) -> tuple[tuple[int, ...], ...]:
    labels = rng.integers(0, n, size=n)
    order = sorted(set(int(x) for x in labels))
    return tuple(
        tuple(i for i in range(n) if labels[i] == lab) for lab in order
    )


def _jittered(spec: LuceSpec, rng: np.random.Generator) -> LuceSpec:
    """Same tiers, every weight nudged by 5 to 30 percent relative."""
    n = spec.n
    factors = 1.0 + rng.uniform(0.05, 0.30, size=n) * rng.choice((-1.0, 1.0), size=n)
    return LuceSpec(spec.partition, tuple(np.array(spec.weights) * factors))


def _meaningfully_distinct(candidate: LuceSpec, base: LuceSpec, n: int,
                           min_gap: float = 0.02) -> bool:
    """True when the two specs expand to visibly different reward tables.

    Spec-level comparisons are not enough: canonicalization can cancel a raw
    jitter, and a merged tier with a near-zero weight mimics a split tier, so
    encodings that differ can still describe almost the same contract. Draws
    whose tables agree within min_gap are skipped rather than counted.
    """
    gap = np.max(np.abs(expand_luce(candidate, n).table - expand_luce(base, n).table))
    return float(gap) >= min_gap


def verify_uniqueness(result: SynthesisResult, p: ProfileLike, costs: CostModel,
                      trials: int = 50, seed: int | None = None,
                      separation_tol: float = 1e-4,
                      solver_tolerance: float = 1e-8) -> UniquenessReport:
    """Check that perturbed and re-tiered specs all fail to reproduce p.

    Alternates weight jitter with random alternative tier structures, solves
    each expanded contract at the same budget, and records the smallest
    max-coordinate distance between p and any equilibrium found. A
    meaningfully distinct spec landing within `separation_tol` of p in every
    coordinate raises UniquenessViolation. Draws whose expanded tables are
    indistinguishable from the original's are skipped, not counted.
    """
    prof = as_profile(p, costs.n)
    n = prof.n
    base = result.spec
    rng = np.random.default_rng(seed)
    opts = SolverOptions(tolerance=solver_tolerance, starts=2, seed=seed)
    worst = np.inf
    done = 0
    attempts = 0
    while done < trials and attempts < 20 * max(trials, 1):
        attempts += 1
        if attempts % 2 == 1:
            candidate = _jittered(base, rng)
        else:
            partition = _random_ordered_partition(n, rng)
            candidate = LuceSpec(partition, tuple(rng.dirichlet(2.0 * np.ones(n))))
        if not _meaningfully_distinct(candidate, base, n):
            continue
        contract = expand_luce(candidate, n, result.budget)
        separation = np.inf
        for res in find_equilibria(contract, costs, opts, initial_profiles=(prof,)):
            gap = float(np.max(np.abs(res.profile.as_array() - prof.as_array())))
            separation = min(separation, gap)
        if separation <= separation_tol:
            raise UniquenessViolation(
                f"distinct spec {candidate} reproduced the profile within "
                f"{separation:.3g} (tolerance {separation_tol:.3g})"
            )
        worst = min(worst, separation)
        done += 1
    return UniquenessReport(trials=done, worst_separation=float(worst))
