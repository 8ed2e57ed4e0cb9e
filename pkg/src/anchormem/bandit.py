"""Bernoulli KL confidence machinery for rule-precision certification.

Upper and lower confidence bounds invert the Bernoulli KL divergence by
bisection. Candidate selection follows the LUCB schedule: sample the
empirical leader and its strongest challenger until the leader's lower
bound clears every challenger's upper bound (up to a slack), or the sample
budget runs out. A rule's precision is certified against a threshold when
its lower bound reaches it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .core import RuleStats

KL_EPS = 1e-12
DEFAULT_BATCH = 100
DEFAULT_BUDGET = 100_000
DEFAULT_ALPHA = 1.1
DEFAULT_EPSILON = 0.05


def kl_bernoulli(p: float, q: float) -> float:
    """KL(Bernoulli(p) || Bernoulli(q)), with q clamped away from {0, 1}."""
    q = min(max(q, KL_EPS), 1.0 - KL_EPS)
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out


def kl_upper_bound(p_hat: float, trials: int, level: float) -> float:
    """Largest q in [p_hat, 1] with trials * KL(p_hat, q) <= level."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if level < 0:
        raise ValueError("level must be non-negative")
    if p_hat >= 1.0:
        return 1.0
    if level == 0.0:
        return p_hat
    target = level / trials
    if kl_bernoulli(p_hat, 1.0) <= target:
        return 1.0
    lo, hi = p_hat, 1.0
    while hi - lo > 1e-12:
        mid = (lo + hi) / 2.0
        if kl_bernoulli(p_hat, mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def kl_lower_bound(p_hat: float, trials: int, level: float) -> float:
    """Smallest q in [0, p_hat] with trials * KL(p_hat, q) <= level."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if level < 0:
        raise ValueError("level must be non-negative")
    if p_hat <= 0.0:
        return 0.0
    if level == 0.0:
        return p_hat
    target = level / trials
    if kl_bernoulli(p_hat, 0.0) <= target:
        return 0.0
    lo, hi = 0.0, p_hat
    while hi - lo > 1e-12:
        mid = (lo + hi) / 2.0
        if kl_bernoulli(p_hat, mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def exploration_level(
    round_index: int, delta: float, num_candidates: int = 1, alpha: float = DEFAULT_ALPHA
) -> float:
    """Exploration rate log(nf * t^alpha / delta) at sampling round t."""
    t = max(1, round_index)
    return math.log(max(1, num_candidates) * t**alpha / delta)


def sampling_round(trials: int, batch: int) -> int:
    return max(1, -(-trials // batch))


@dataclass(frozen=True)
class ConfidenceBound:
    lower: float
    upper: float
    level: float


def confidence_bounds(p_hat: float, trials: int, level: float) -> ConfidenceBound:
    return ConfidenceBound(
        kl_lower_bound(p_hat, trials, level),
        kl_upper_bound(p_hat, trials, level),
        level,
    )


class SampleBudget:
    """Mutable per-explanation cap on rule-conditioned samples."""

    def __init__(self, total: int):
        if total < 0:
            raise ValueError("budget must be non-negative")
        self.total = total
        self.used = 0

    @property
    def remaining(self) -> int:
        return self.total - self.used

    @property
    def exhausted(self) -> bool:
        return self.remaining <= 0

    def take(self, count: int) -> int:
        grant = max(0, min(count, self.remaining))
        self.used += grant
        return grant


@dataclass
class BanditArm:
    """A candidate under evaluation: its stats plus a way to sample more.

    ``draw(count)`` performs up to ``count`` fresh conditional samples,
    folds them into ``stats`` and returns how many were actually drawn
    (less than requested only when an external budget ran dry).
    """

    stats: RuleStats
    draw: Callable[[int], int]


class CertOutcome(Enum):
    ABOVE = "certified-above"
    BELOW = "certified-below"
    EXHAUSTED = "budget-exhausted"


@dataclass
class CertificationResult:
    outcome: CertOutcome
    stats: RuleStats
    bound: ConfidenceBound | None

    @property
    def certified(self) -> bool:
        return self.outcome is CertOutcome.ABOVE


def certify_precision(
    arm: BanditArm,
    tau: float,
    delta: float,
    *,
    batch: int = DEFAULT_BATCH,
    budget: int = DEFAULT_BUDGET,
    num_candidates: int = 1,
    alpha: float = DEFAULT_ALPHA,
) -> CertificationResult:
    """Sample until the precision bound settles on one side of ``tau``.

    Existing trials on the arm count toward the certificate, so a rule that
    already satisfies the bound returns without further sampling.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    bound = None
    while True:
        stats = arm.stats
        if stats.trials > 0:
            level = exploration_level(sampling_round(stats.trials, batch), delta, num_candidates, alpha)
            bound = confidence_bounds(stats.precision_hat, stats.trials, level)
            if bound.lower >= tau:
                return CertificationResult(CertOutcome.ABOVE, stats, bound)
            if bound.upper < tau:
                return CertificationResult(CertOutcome.BELOW, stats, bound)
            if stats.trials >= budget:
                return CertificationResult(CertOutcome.EXHAUSTED, stats, bound)
        request = min(batch, budget - stats.trials) if stats.trials else batch
        if arm.draw(request) == 0:
            return CertificationResult(CertOutcome.EXHAUSTED, stats, bound)


def best_candidate(
    arms: Sequence[BanditArm],
    *,
    epsilon: float = DEFAULT_EPSILON,
    delta: float = 0.6,
    batch: int = DEFAULT_BATCH,
    budget: int = DEFAULT_BUDGET,
    alpha: float = DEFAULT_ALPHA,
) -> int:
    """LUCB identification of the arm with the highest precision estimate.

    Returns the index of the empirical leader once its lower bound is within
    ``epsilon`` of every challenger's upper bound, breaking ties toward the
    lowest index.
    """
    if not arms:
        raise ValueError("at least one candidate required")
    for arm in arms:
        if arm.stats.trials == 0:
            arm.draw(batch)
    if len(arms) == 1:
        return 0
    n = len(arms)
    while True:
        sampled = [arm.stats.trials > 0 for arm in arms]
        p_hats = np.array(
            [arm.stats.precision_hat if ok else 0.0 for ok, arm in zip(sampled, arms)]
        )
        best = int(np.argmax(p_hats))
        levels = [
            exploration_level(sampling_round(max(arm.stats.trials, 1), batch), delta, n, alpha)
            for arm in arms
        ]
        uppers = np.array(
            [
                kl_upper_bound(p_hats[i], arms[i].stats.trials, levels[i]) if sampled[i] else 1.0
                for i in range(n)
            ]
        )
        uppers[best] = -1.0
        challenger = int(np.argmax(uppers))
        best_lower = (
            kl_lower_bound(p_hats[best], arms[best].stats.trials, levels[best])
            if sampled[best]
            else 0.0
        )
        if best_lower >= uppers[challenger] - epsilon:
            return best
        if sum(arm.stats.trials for arm in arms) >= budget:
            return best
        drawn = arms[best].draw(batch) + arms[challenger].draw(batch)
        if drawn == 0:
            return best
