"""Perturbation distributions around an anchored instance.

A sampler owns one seeded RNG and a finite per-slot value distribution.
Sampling under a rule copies the rule-constrained slots verbatim and draws
every free slot independently, so every emitted instance satisfies the
rule by construction. Tabular slots draw from the training-split marginals;
token slots keep the anchor's token with probability ``keep_prob`` and
otherwise draw uniformly from its nearest embedding-table neighbours.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

from .core import Instance, Label, Rule, RuleStats
from .data import EmbeddingTable, EmpiricalDistribution
from .errors import DegenerateRuleError, RuleCoverageError, SchemaError
from .models import ModelOracle

ENUMERATION_LIMIT = 1_000_000


class PerturbationSampler:
    def __init__(
        self,
        anchor: Instance,
        slot_values: Sequence[np.ndarray],
        slot_probs: Sequence[np.ndarray],
        seed,
    ):
        if len(slot_values) != len(anchor) or len(slot_probs) != len(anchor):
            raise SchemaError("one value pool and probability vector per slot required")
        self.anchor = tuple(int(v) for v in anchor)
        self.arity = len(anchor)
        self.slot_values = [np.asarray(v, dtype=np.int64) for v in slot_values]
        self.slot_probs = [np.asarray(p, dtype=np.float64) for p in slot_probs]
        for i, (vals, probs) in enumerate(zip(self.slot_values, self.slot_probs)):
            if vals.shape != probs.shape:
                raise SchemaError(f"slot {i}: pool and probabilities differ in length")
            if abs(probs.sum() - 1.0) > 1e-9:
                raise SchemaError(f"slot {i}: probabilities do not sum to 1")
        self.rng = np.random.default_rng(seed)

    @classmethod
    def for_tabular(
        cls, anchor: Instance, distribution: EmpiricalDistribution, seed
    ) -> "PerturbationSampler":
        return cls(anchor, distribution.pools, distribution.pool_probs, seed)

    @classmethod
    def for_text(
        cls,
        anchor: Instance,
        table: EmbeddingTable,
        seed,
        *,
        neighbours: int = 10,
        keep_prob: float = 0.5,
    ) -> "PerturbationSampler":
        pools: list[np.ndarray] = []
        probs: list[np.ndarray] = []
        pad = table.pad_code
        for value in anchor:
            if value == pad:
                pools.append(np.array([pad]))
                probs.append(np.array([1.0]))
                continue
            near = table.nearest(value, neighbours)
            if value not in near:
                near = near.copy()
                near[-1] = value
            weight = {int(t): (1.0 - keep_prob) / len(near) for t in near}
            weight[value] = weight.get(value, 0.0) + keep_prob
            values = np.array(sorted(weight))
            pools.append(values)
            probs.append(np.array([weight[int(v)] for v in values]))
        return cls(anchor, pools, probs, seed)

    def _require_covers_anchor(self, rule: Rule) -> None:
        if not rule.evaluate(self.anchor):
            raise RuleCoverageError(f"{rule} does not cover the anchor {self.anchor}")

    def sample_conditional(self, rule: Rule, count: int) -> np.ndarray:
        """Draw ``count`` instances from the rule-conditioned distribution."""
        if count <= 0:
            raise ValueError(f"count must be positive, got {count}")
        self._require_covers_anchor(rule)
        out = np.empty((count, self.arity), dtype=np.int64)
        pinned = {p.feature_index: p.value for p in rule}
        for i in range(self.arity):
            if i in pinned:
                out[:, i] = pinned[i]
            elif len(self.slot_values[i]) == 1:
                out[:, i] = self.slot_values[i][0]
            else:
                out[:, i] = self.rng.choice(
                    self.slot_values[i], size=count, p=self.slot_probs[i]
                )
        return out

    def sample_unconditioned(self, count: int) -> np.ndarray:
        return self.sample_conditional(Rule(), count)

    def universe_size(self) -> int:
        return int(np.prod([len(v) for v in self.slot_values], dtype=np.float64))

    def enumerate_universe(self, limit: int = ENUMERATION_LIMIT) -> tuple[np.ndarray, np.ndarray]:
        """All instances in the product support with their probability masses."""
        size = self.universe_size()
        if size > limit:
            raise ValueError(f"universe of {size} instances exceeds the {limit} limit")
        grids = np.meshgrid(*self.slot_values, indexing="ij")
        universe = np.stack([g.ravel() for g in grids], axis=1)
        weights = reduce(np.multiply.outer, self.slot_probs).ravel()
        return universe, weights


def estimate_precision(
    sampler: PerturbationSampler,
    rule: Rule,
    oracle: ModelOracle,
    target: Label,
    count: int,
    stats: RuleStats,
) -> RuleStats:
    """Sample under the rule, query the oracle, and accumulate agreement counts."""
    batch = sampler.sample_conditional(rule, count)
    labels = oracle.predict_batch(batch)
    stats.record_trials(int((labels == target).sum()), count)
    return stats


def estimate_coverage(
    sampler: PerturbationSampler, rule: Rule, count: int, stats: RuleStats
) -> RuleStats:
    """Count rule acceptance among fresh unconditioned perturbations."""
    batch = sampler.sample_unconditioned(count)
    stats.record_coverage(int(rule.matches(batch).sum()), count)
    return stats


def exact_precision_coverage(
    universe: np.ndarray,
    weights: np.ndarray,
    rule: Rule,
    oracle: ModelOracle,
    target: Label,
) -> tuple[float, float]:
    """Exact precision and coverage by full enumeration of a finite universe.

    Intended for tests and fidelity evaluation; queries the oracle on every
    enumerated instance.
    """
    universe = np.asarray(universe, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if universe.shape[0] > ENUMERATION_LIMIT:
        raise ValueError("universe too large to enumerate")
    if abs(weights.sum() - 1.0) > 1e-6:
        raise ValueError("universe weights must sum to 1")
    accepted = rule.matches(universe)
    coverage = float(weights[accepted].sum())
    if coverage == 0.0:
        raise DegenerateRuleError(f"{rule} covers no instance of the universe")
    labels = oracle.predict_batch(universe[accepted])
    matched = float(weights[accepted][labels == target].sum())
    return matched / coverage, coverage
