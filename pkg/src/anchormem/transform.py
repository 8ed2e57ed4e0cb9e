"""Adapting a cached rule to a new input.

The horizontal transformation remaps each predicate of a retrieved rule
onto the most similar feature of the new input, pinning that slot to the
new input's own value, so the adapted rule always covers the new input.
The vertical transformation then strengthens the adapted rule, one
predicate at a time, until its precision certificate clears the output
threshold, keeping the result a syntactic superset of its starting rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .anchors import GreedyRuleSearch, SearchConfig, TraceStep, generate_predicates
from .bandit import CertOutcome
from .core import FrozenStats, Instance, Label, Predicate, Rule
from .data import CATEGORICAL, EmbeddingTable, FeatureSchema, NUMERIC
from .errors import RuleCoverageError
from .models import ModelOracle
from .perturb import PerturbationSampler


class FeatureDistance:
    """Distance between two feature values, each taken with its slot context.

    Implementations must be symmetric, non-negative and zero when both
    sides denote the same value in compatible slots. Incomparable pairs
    return infinity.
    """

    def between(self, slot_a: int, value_a: int, slot_b: int, value_b: int) -> float:
        raise NotImplementedError


class TabularDistance(FeatureDistance):
    """Numeric slots compare raw bin representatives; categorical slots
    compare labels (0 on equality, 1 otherwise); mixed kinds are incomparable."""

    def __init__(self, schema: FeatureSchema):
        self.schema = schema

    def between(self, slot_a: int, value_a: int, slot_b: int, value_b: int) -> float:
        a, b = self.schema[slot_a], self.schema[slot_b]
        if a.kind == NUMERIC and b.kind == NUMERIC:
            return abs(a.bin_midpoint(value_a) - b.bin_midpoint(value_b))
        if a.kind == CATEGORICAL and b.kind == CATEGORICAL:
            return 0.0 if a.vocab[value_a] == b.vocab[value_b] else 1.0
        return math.inf


class TokenDistance(FeatureDistance):
    """Euclidean distance in the embedding table; padding is incomparable."""

    def __init__(self, table: EmbeddingTable):
        self.table = table

    def between(self, slot_a: int, value_a: int, slot_b: int, value_b: int) -> float:
        pad = self.table.pad_code
        if value_a == pad or value_b == pad:
            return math.inf
        return self.table.token_distance(value_a, value_b)


def horizontal_transform(
    mid_rule: Rule, x_new: Instance, dist: FeatureDistance
) -> Rule:
    """Remap a cached rule's predicates onto the nearest features of ``x_new``.

    Each predicate picks the slot of ``x_new`` whose value minimizes the
    feature distance and pins that slot to the new input's own value.
    Distance ties prefer the predicate's original slot (the same feature is
    the most similar one), then the lowest index. Predicates landing on an
    already pinned slot are dropped, so the result never exceeds the source
    rule in length.
    """
    if len(mid_rule) == 0:
        raise ValueError("cannot transform an empty rule")
    result = Rule()
    n = len(x_new)
    for p in mid_rule:
        best_j = -1
        best_key = (math.inf, 2, n)
        for j in range(n):
            d = dist.between(p.feature_index, p.value, j, x_new[j])
            key = (d, 0 if j == p.feature_index else 1, j)
            if key < best_key:
                best_j, best_key = j, key
        if not math.isfinite(best_key[0]):
            # No comparable slot in the new input; the predicate is dropped.
            continue
        if not result.constrains(best_j):
            result = result.conjoin(Predicate(best_j, x_new[best_j]))
    return result


@dataclass
class VerticalResult:
    rule: Rule
    stats: FrozenStats
    precision_lower: float | None
    coverage_hat: float
    exhausted: bool
    samples_used: int
    trace: list[TraceStep] = field(default_factory=list)


def vertical_transform(
    base_rule: Rule,
    x: Instance,
    oracle: ModelOracle,
    tau: float,
    delta: float,
    *,
    sampler: PerturbationSampler,
    config: SearchConfig | None = None,
    target: Label | None = None,
    pad_value: int | None = None,
) -> VerticalResult:
    """Strengthen ``base_rule`` until its precision certificate clears ``tau``.

    The base rule's own certificate is checked first; when it already
    holds, the rule is returned untouched (growing it would only shrink
    coverage). Otherwise the greedy search extends it with the anchor's
    remaining predicates.
    """
    if not base_rule.evaluate(x):
        raise RuleCoverageError(f"{base_rule} does not cover {x}")
    config = config or SearchConfig()
    if target is None:
        target = oracle.predict_one(x)
    search = GreedyRuleSearch(oracle, sampler, target, delta=delta, config=config)
    base_arm = search.arm_for(base_rule)
    cert = search.certify(base_arm, tau)
    if cert.outcome is not CertOutcome.BELOW:
        return VerticalResult(
            base_rule,
            FrozenStats.snapshot(base_arm.stats),
            cert.bound.lower if cert.bound else None,
            base_arm.stats.coverage_hat,
            exhausted=cert.outcome is CertOutcome.EXHAUSTED,
            samples_used=search.budget.used,
            trace=search.trace,
        )
    outcome = search.grow(base_rule, generate_predicates(x, pad_value), tau)
    return VerticalResult(
        outcome.rule,
        FrozenStats.snapshot(outcome.stats),
        outcome.precision_lower,
        outcome.coverage_hat,
        exhausted=outcome.exhausted,
        samples_used=search.budget.used,
        trace=search.trace,
    )
