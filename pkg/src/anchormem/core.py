"""Rules, predicates and their running sample statistics.

Instances are plain tuples of non-negative integer codes (bin index,
category id or token id, one per feature slot). Rules are immutable
conjunctions of equality predicates with at most one predicate per slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np

from .errors import RuleConflictError, SchemaError

Instance = tuple[int, ...]
Label = int


class Predicate(tuple):
    """Test fixing one feature slot to one value: holds iff z[i] == v."""

    __slots__ = ()

    def __new__(cls, feature_index: int, value: int) -> "Predicate":
        if feature_index < 0:
            raise SchemaError(f"feature index must be non-negative, got {feature_index}")
        return super().__new__(cls, (int(feature_index), int(value)))

    @property
    def feature_index(self) -> int:
        return self[0]

    @property
    def value(self) -> int:
        return self[1]

    def holds(self, z: Instance) -> bool:
        if self.feature_index >= len(z):
            raise SchemaError(
                f"predicate on slot {self.feature_index} applied to arity-{len(z)} instance"
            )
        return z[self.feature_index] == self.value

    def __repr__(self) -> str:
        return f"Predicate({self.feature_index}, {self.value})"


@dataclass(frozen=True)
class Rule:
    """Conjunction of predicates, at most one per feature slot.

    The empty rule accepts every instance. Predicates are kept in
    canonical ascending slot order so equal rules hash and serialize
    identically regardless of construction order.
    """

    predicates: tuple[Predicate, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.predicates))
        seen = [p.feature_index for p in ordered]
        if len(set(seen)) != len(seen):
            raise RuleConflictError(f"duplicate feature index in {seen}")
        object.__setattr__(self, "predicates", ordered)

    @classmethod
    def of(cls, *pairs: tuple[int, int]) -> "Rule":
        return cls(tuple(Predicate(i, v) for i, v in pairs))

    def __len__(self) -> int:
        return len(self.predicates)

    def __iter__(self) -> Iterator[Predicate]:
        return iter(self.predicates)

    def __call__(self, z: Instance) -> bool:
        return self.evaluate(z)

    @cached_property
    def _index_array(self) -> np.ndarray:
        return np.array([p.feature_index for p in self.predicates], dtype=np.intp)

    @cached_property
    def _value_array(self) -> np.ndarray:
        return np.array([p.value for p in self.predicates], dtype=np.int64)

    @property
    def feature_indices(self) -> frozenset[int]:
        return frozenset(p.feature_index for p in self.predicates)

    def evaluate(self, z: Instance) -> bool:
        """True iff every predicate holds on ``z`` (empty rule: always True)."""
        if self.predicates and self.predicates[-1].feature_index >= len(z):
            raise SchemaError(
                f"rule constrains slot {self.predicates[-1].feature_index} "
                f"but instance has arity {len(z)}"
            )
        return all(z[p.feature_index] == p.value for p in self.predicates)

    def matches(self, batch: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over a (count, arity) integer matrix."""
        if not self.predicates:
            return np.ones(batch.shape[0], dtype=bool)
        if batch.shape[1] <= self.predicates[-1].feature_index:
            raise SchemaError(
                f"rule constrains slot {self.predicates[-1].feature_index} "
                f"but batch has arity {batch.shape[1]}"
            )
        return (batch[:, self._index_array] == self._value_array).all(axis=1)

    def conjoin(self, p: Predicate) -> "Rule":
        """Return a new rule with ``p`` added; raises on an already pinned slot."""
        if p.feature_index in self.feature_indices:
            raise RuleConflictError(
                f"slot {p.feature_index} is already constrained in {self}"
            )
        return Rule(self.predicates + (p,))

    def constrains(self, feature_index: int) -> bool:
        return feature_index in self.feature_indices

    def to_pairs(self) -> list[list[int]]:
        """Canonical serialization: sorted [feature_index, value] pairs."""
        return [[p.feature_index, p.value] for p in self.predicates]

    @classmethod
    def from_pairs(cls, pairs: Iterable[Iterable[int]]) -> "Rule":
        return cls.of(*(tuple(pair) for pair in pairs))

    def implies(self, other: "Rule") -> bool:
        """Syntactic implication: every predicate of ``other`` appears here."""
        return set(other.predicates) <= set(self.predicates)

    def __repr__(self) -> str:
        body = " AND ".join(f"x{p.feature_index}={p.value}" for p in self.predicates)
        return f"Rule({body or 'TRUE'})"


EMPTY_RULE = Rule()


def evaluate_rule(rule: Rule, z: Instance) -> int:
    """Indicator form of rule evaluation, 1 iff ``z`` satisfies ``rule``."""
    return int(rule.evaluate(z))


def conjoin(rule: Rule, p: Predicate) -> Rule:
    return rule.conjoin(p)


@dataclass
class RuleStats:
    """Running Bernoulli counts behind a rule's precision and coverage estimates.

    ``successes``/``trials`` count label agreement under the rule-conditioned
    perturbation distribution; ``covered``/``total_uncond`` count acceptance
    among unconditioned perturbations.
    """

    successes: int = 0
    trials: int = 0
    covered: int = 0
    total_uncond: int = 0

    @property
    def precision_hat(self) -> float:
        if self.trials == 0:
            raise ValueError("precision estimate undefined with zero trials")
        return self.successes / self.trials

    @property
    def coverage_hat(self) -> float:
        if self.total_uncond == 0:
            raise ValueError("coverage estimate undefined with zero unconditioned samples")
        return self.covered / self.total_uncond

    def record_trials(self, successes: int, trials: int) -> None:
        if not 0 <= successes <= trials:
            raise ValueError(f"bad trial update ({successes}/{trials})")
        self.successes += successes
        self.trials += trials

    def record_coverage(self, covered: int, total: int) -> None:
        if not 0 <= covered <= total:
            raise ValueError(f"bad coverage update ({covered}/{total})")
        self.covered += covered
        self.total_uncond += total


@dataclass(frozen=True)
class FrozenStats:
    """Immutable snapshot of a RuleStats, for traces and reports."""

    successes: int
    trials: int
    covered: int
    total_uncond: int

    @classmethod
    def snapshot(cls, stats: RuleStats) -> "FrozenStats":
        return cls(stats.successes, stats.trials, stats.covered, stats.total_uncond)

    @property
    def precision_hat(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def coverage_hat(self) -> float:
        return self.covered / self.total_uncond if self.total_uncond else float("nan")
