"""Total-payment distributions and the spread comparison between contracts.

For a target profile q implementable by a tiered-weights contract, every
failures-get-nothing contract implementing q pays out the same mean, but the
tiered contract concentrates the payment on two atoms {0, budget}. The
comparison here checks means, variances, maximum payments, and second-order
stochastic dominance via integrated CDFs on the merged support.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import (
    Contract,
    CostModel,
    ProfileLike,
    as_profile,
    outcome_probabilities,
    require_interior,
)

_ATOM_MERGE_TOL = 1e-12
_PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class PaymentDistribution:
    """Finite distribution of the total payment, atoms sorted ascending."""

    values: tuple[float, ...]
    probs: tuple[float, ...]
    mean: float
    variance: float

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, float]]) -> "PaymentDistribution":
        """Build from (value, probability) pairs, merging values within 1e-12."""
        pairs = sorted((float(v), float(q)) for v, q in atoms)
        if any(q < 0 for _, q in pairs):
            raise ValueError("atom probabilities must be nonnegative")
        merged: list[tuple[float, float]] = []
        for v, q in pairs:
            if q == 0.0:
                continue
            if merged and v - merged[-1][0] <= _ATOM_MERGE_TOL:
                v0, q0 = merged[-1]
                merged[-1] = ((v0 * q0 + v * q) / (q0 + q), q0 + q)
            else:
                merged.append((v, q))
        if not merged:
            raise ValueError("distribution needs at least one atom with mass")
        total = sum(q for _, q in merged)
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        values = tuple(v for v, _ in merged)
        probs = tuple(q for _, q in merged)
        mean = sum(v * q for v, q in merged)
        variance = sum((v - mean) ** 2 * q for v, q in merged)
        return cls(values, probs, mean, variance)

    @property
    def max_payment(self) -> float:
        return self.values[-1]

    def atoms(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.values, self.probs))

    def prob_at(self, value: float, tol: float = _ATOM_MERGE_TOL) -> float:
        return sum(q for v, q in zip(self.values, self.probs) if abs(v - value) <= tol)


def payment_distribution(f: Contract, p: ProfileLike) -> PaymentDistribution:
    """Exact distribution of budget * total shares over all outcomes."""
    prof = as_profile(p, f.n)
    probs = outcome_probabilities(prof)
    totals = f.total_shares() * f.budget
    return PaymentDistribution.from_atoms(zip(totals, probs))


def implementing_fgn_samples(q: ProfileLike, costs: CostModel, count: int,
                             seed: int | None = None,
                             scale: float | None = None) -> list[Contract]:
    """Random failures-get-nothing contracts that all implement q.

    Starting from the per-success payment c_i'(q_i), each agent's success
    rewards get zero-mean noise under the success-conditional outcome
    distribution, are truncated at zero, and are rescaled so the conditional
    expectation is exactly c_i'(q_i) again; q is then an equilibrium of every
    sample. Noise is uniform on [-scale, scale] with scale defaulting to a
    quarter of the smallest per-success payment, which keeps truncation
    inactive at the default. Contracts carry the unconstrained flag.
    """
    prof = require_interior(as_profile(q, costs.n))
    n = prof.n
    arr = prof.as_array()
    base = costs.marginal_vec(arr)
    if scale is None:
        scale = 0.25 * float(base.min())
    rng = np.random.default_rng(seed)
    masks_with = [
        np.array([m for m in range(1 << n) if (m >> i) & 1]) for i in range(n)
    ]
    cond_probs = []
    for i in range(n):
        forced = arr.copy()
        forced[i] = 1.0
        cond_probs.append(outcome_probabilities(forced)[masks_with[i]])
    samples = []
    for _ in range(count):
        table = np.zeros((1 << n, n))
        for i in range(n):
            pi = cond_probs[i]
            noise = rng.uniform(-scale, scale, size=pi.size)
            noise -= pi @ noise
            col = np.maximum(base[i] + noise, 0.0)
            col *= base[i] / (pi @ col)
            table[masks_with[i], i] = col
        samples.append(Contract(n, table, budget=1.0, unconstrained=True))
    return samples


@dataclass(frozen=True)
class MpsVerdict:
    """Comparison of a reference payment distribution against another."""

    means_equal: bool
    variance_ordered: bool
    sosd: bool
    max_payment_ordered: bool
    mean_difference: float
    variance_margin: float


def _integrated_cdf(dist: PaymentDistribution, xs: np.ndarray) -> np.ndarray:
    """Integral of the CDF from -inf to each x: sum_v p_v * max(0, x - v)."""
    values = np.asarray(dist.values)
    probs = np.asarray(dist.probs)
    return np.clip(xs[:, None] - values[None, :], 0.0, None) @ probs


def mps_compare(luce_dist: PaymentDistribution, other_dist: PaymentDistribution) -> MpsVerdict:
    """Check that `other_dist` spreads `luce_dist` while preserving the mean.

    sosd is true when other's integrated CDF dominates luce's pointwise on
    the merged support (with 1e-10 slack), i.e. the reference distribution
    second-order stochastically dominates the other.
    """
    mean_diff = other_dist.mean - luce_dist.mean
    var_margin = other_dist.variance - luce_dist.variance
    xs = np.unique(np.concatenate([luce_dist.values, other_dist.values]))
    sosd = bool(np.all(
        _integrated_cdf(other_dist, xs) >= _integrated_cdf(luce_dist, xs) - 1e-10
    ))
    return MpsVerdict(
        means_equal=abs(mean_diff) <= 1e-8,
        variance_ordered=var_margin >= -1e-10,
        sosd=sosd,
        max_payment_ordered=luce_dist.max_payment <= other_dist.max_payment + 1e-10,
        mean_difference=float(mean_diff),
        variance_margin=float(var_margin),
    )
