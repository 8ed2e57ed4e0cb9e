"""Greedy anchor search.

Starting from the empty rule, each iteration conjoins one of the anchor
instance's own predicates, picks the bandit-estimated highest-precision
candidate, and stops once a candidate's precision certificate clears the
output threshold. The committed rule is additionally certified against a
lower intermediate threshold along the way; the first rule to clear it is
recorded for the reuse memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .bandit import (
    BanditArm,
    CertOutcome,
    SampleBudget,
    best_candidate,
    certify_precision,
    exploration_level,
    kl_lower_bound,
    sampling_round,
)
from .core import FrozenStats, Instance, Label, Predicate, Rule, RuleStats
from .errors import ExplainerError, SchemaError
from .models import ModelOracle
from .perturb import PerturbationSampler, estimate_precision


@dataclass(frozen=True)
class SearchConfig:
    """Sampling knobs shared by every certification loop."""

    batch: int = 100
    budget: int = 100_000
    epsilon: float = 0.05
    alpha: float = 1.1
    coverage_samples: int = 10_000

    def __post_init__(self) -> None:
        if self.batch < 1 or self.budget < 1 or self.coverage_samples < 1:
            raise ValueError("batch, budget and coverage_samples must be positive")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    rule: Rule
    precision_hat: float
    coverage_hat: float
    queries: int

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "rule": self.rule.to_pairs(),
            "precision_hat": self.precision_hat,
            "coverage_hat": self.coverage_hat,
            "queries": self.queries,
        }


def trace_to_jsonl(trace: Sequence[TraceStep]) -> str:
    return "\n".join(json.dumps(step.to_dict()) for step in trace)


@dataclass
class SearchOutcome:
    rule: Rule
    stats: RuleStats
    precision_lower: float | None
    coverage_hat: float
    mid_rule: Rule | None
    exhausted: bool


@dataclass
class AnchorsResult:
    final_rule: Rule
    mid_rule: Rule
    final_stats: FrozenStats
    precision_lower: float | None
    coverage_hat: float
    target: Label
    exhausted: bool
    trace: list[TraceStep] = field(default_factory=list)
    samples_used: int = 0


def generate_predicates(x: Instance, pad_value: int | None = None) -> list[Predicate]:
    """One predicate per feature slot pinning the anchor's own value.

    Padding slots of text instances carry no information and are skipped.
    """
    return [
        Predicate(i, v) for i, v in enumerate(x) if pad_value is None or v != pad_value
    ]


class GreedyRuleSearch:
    """Grow-and-certify loop shared by anchor search and vertical refinement.

    Holds the per-explanation sample budget and the fixed pool of
    unconditioned draws against which every candidate's coverage is
    estimated, so sibling candidates are compared on one sample frame.
    """

    def __init__(
        self,
        oracle: ModelOracle,
        sampler: PerturbationSampler,
        target: Label,
        *,
        delta: float,
        config: SearchConfig,
    ):
        self.oracle = oracle
        self.sampler = sampler
        self.target = target
        self.delta = delta
        self.config = config
        self.budget = SampleBudget(config.budget)
        self.coverage_pool = sampler.sample_unconditioned(config.coverage_samples)
        self.trace: list[TraceStep] = []
        self._query_base = oracle.query_count

    def coverage_hat(self, rule: Rule) -> float:
        return float(rule.matches(self.coverage_pool).mean())

    def arm_for(self, rule: Rule) -> BanditArm:
        stats = RuleStats()
        stats.record_coverage(
            int(rule.matches(self.coverage_pool).sum()), self.config.coverage_samples
        )

        def draw(count: int) -> int:
            grant = self.budget.take(count)
            if grant > 0:
                estimate_precision(self.sampler, rule, self.oracle, self.target, grant, stats)
            return grant

        return BanditArm(stats, draw)

    def _record(self, iteration: int, rule: Rule, stats: RuleStats) -> None:
        p_hat = stats.precision_hat if stats.trials else float("nan")
        self.trace.append(
            TraceStep(
                iteration,
                rule,
                p_hat,
                stats.coverage_hat,
                self.oracle.query_count - self._query_base,
            )
        )

    def _certified_level(self, arm: BanditArm, num_candidates: int) -> float:
        return exploration_level(
            sampling_round(arm.stats.trials, self.config.batch),
            self.delta,
            num_candidates,
            self.config.alpha,
        )

    def certify(self, arm: BanditArm, tau: float, num_candidates: int = 1):
        return certify_precision(
            arm,
            tau,
            self.delta,
            batch=self.config.batch,
            budget=self.config.budget,
            num_candidates=num_candidates,
            alpha=self.config.alpha,
        )

    def _select_certified(
        self,
        candidates: list[Rule],
        arms: list[BanditArm],
        tau: float,
        committed_index: int,
    ) -> tuple[int, float]:
        """Max-coverage rule among this iteration's certified candidates.

        Ties go to fewer predicates, then to the lowest predicate order.
        The committed candidate is certified by construction, so the set is
        never empty.
        """
        certified: list[int] = []
        lowers: dict[int, float] = {}
        for i, arm in enumerate(arms):
            if arm.stats.trials == 0:
                continue
            level = self._certified_level(arm, len(arms))
            lower = kl_lower_bound(arm.stats.precision_hat, arm.stats.trials, level)
            if lower >= tau:
                certified.append(i)
                lowers[i] = lower
        if committed_index not in certified:
            certified.append(committed_index)
            arm = arms[committed_index]
            lowers[committed_index] = kl_lower_bound(
                arm.stats.precision_hat,
                arm.stats.trials,
                self._certified_level(arm, len(arms)),
            )
        chosen = min(
            certified,
            key=lambda i: (
                -arms[i].stats.coverage_hat,
                len(candidates[i]),
                candidates[i].to_pairs(),
            ),
        )
        return chosen, lowers[chosen]

    def grow(
        self,
        start: Rule,
        predicates: Sequence[Predicate],
        tau: float,
        mid_tau: float | None = None,
    ) -> SearchOutcome:
        """Conjoin predicates greedily until a candidate certifies at ``tau``.

        Oracle or sampler failures propagate with the per-iteration trace
        collected so far attached as ``exc.partial_trace``.
        """
        try:
            return self._grow(start, predicates, tau, mid_tau)
        except ExplainerError as exc:
            exc.partial_trace = list(self.trace)
            raise

    def _grow(
        self,
        start: Rule,
        predicates: Sequence[Predicate],
        tau: float,
        mid_tau: float | None,
    ) -> SearchOutcome:
        rule = start
        mid_rule: Rule | None = None
        mid_iteration = -1
        available = [p for p in predicates if not rule.constrains(p.feature_index)]
        iteration = 0
        last_stats = RuleStats()
        while available:
            iteration += 1
            candidates = [rule.conjoin(p) for p in available]
            arms = [self.arm_for(c) for c in candidates]
            best = best_candidate(
                arms,
                epsilon=self.config.epsilon,
                delta=self.delta,
                batch=self.config.batch,
                budget=self.config.budget,
                alpha=self.config.alpha,
            )
            committed = candidates[best]
            committed_arm = arms[best]
            if mid_tau is not None and mid_rule is None:
                mid_cert = self.certify(committed_arm, mid_tau, len(arms))
                if mid_cert.outcome is CertOutcome.ABOVE:
                    mid_rule = committed
                    mid_iteration = iteration
            cert = self.certify(committed_arm, tau, len(arms))
            self._record(iteration, committed, committed_arm.stats)
            if cert.outcome is CertOutcome.ABOVE:
                chosen, lower = self._select_certified(candidates, arms, tau, best)
                final = candidates[chosen]
                if mid_rule is None or mid_iteration == iteration:
                    mid_rule = final
                return SearchOutcome(
                    final,
                    arms[chosen].stats,
                    lower,
                    arms[chosen].stats.coverage_hat,
                    mid_rule,
                    exhausted=False,
                )
            rule = committed
            last_stats = committed_arm.stats
            del available[best]
            if self.budget.exhausted:
                break
        lower = None
        if last_stats.trials:
            level = exploration_level(
                sampling_round(last_stats.trials, self.config.batch),
                self.delta,
                1,
                self.config.alpha,
            )
            lower = kl_lower_bound(last_stats.precision_hat, last_stats.trials, level)
        coverage = (
            last_stats.coverage_hat if last_stats.total_uncond else self.coverage_hat(rule)
        )
        return SearchOutcome(rule, last_stats, lower, coverage, mid_rule, exhausted=True)


def explain(
    oracle: ModelOracle,
    x: Instance,
    sampler: PerturbationSampler,
    *,
    tau_p: float = 0.95,
    tau_p_mid: float = 0.8,
    delta: float = 0.6,
    config: SearchConfig | None = None,
    target: Label | None = None,
    pad_value: int | None = None,
) -> AnchorsResult:
    """Run the greedy anchor search for one instance.

    Returns the max-coverage candidate certified at ``tau_p`` in the final
    iteration, together with the first committed rule certified at
    ``tau_p_mid``. When the sample budget runs out first, the current
    committed rule is returned with ``exhausted`` set.
    """
    if not 0.0 < tau_p_mid <= tau_p < 1.0:
        raise ValueError(
            f"thresholds must satisfy 0 < tau_p_mid <= tau_p < 1, got "
            f"({tau_p_mid}, {tau_p})"
        )
    if sampler.anchor != tuple(x):
        raise SchemaError("sampler was built for a different anchor instance")
    config = config or SearchConfig()
    if target is None:
        target = oracle.predict_one(x)
    predicates = generate_predicates(x, pad_value)
    if not predicates:
        raise ValueError("instance yields no predicates to search over")
    search = GreedyRuleSearch(oracle, sampler, target, delta=delta, config=config)
    outcome = search.grow(Rule(), predicates, tau_p, mid_tau=tau_p_mid)
    mid_rule = outcome.mid_rule if outcome.mid_rule is not None else outcome.rule
    return AnchorsResult(
        final_rule=outcome.rule,
        mid_rule=mid_rule,
        final_stats=FrozenStats.snapshot(outcome.stats),
        precision_lower=outcome.precision_lower,
        coverage_hat=outcome.coverage_hat,
        target=target,
        exhausted=outcome.exhausted,
        trace=search.trace,
        samples_used=search.budget.used,
    )
