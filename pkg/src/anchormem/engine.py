"""Memoized explanation engine.

Each query first looks for a sufficiently similar previously explained
input. On a miss the full greedy anchor search runs and its intermediate
rule is cached; on a hit the cached rule is horizontally adapted to the
new input and vertically refined to the output precision threshold,
skipping the early search iterations entirely. All model queries funnel
through the oracle's counter, so per-explanation costs are exact.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import anchors
from .anchors import SearchConfig, TraceStep
from .core import Instance, Label, Rule
from .data import EmbeddingTable, EmpiricalDistribution, FeatureSchema, TOKEN
from .errors import ExplainerError
from .memory import Embedder, MemoryStore
from .models import ModelOracle
from .perturb import PerturbationSampler
from .transform import (
    FeatureDistance,
    TabularDistance,
    TokenDistance,
    horizontal_transform,
    vertical_transform,
)

MISS = "miss"
HIT = "hit"


@dataclass(frozen=True)
class ExplainParams:
    """Thresholds and knobs of the memoized explanation loop."""

    tau_p: float = 0.95
    tau_p_mid: float = 0.8
    tau_sim: float = 0.6
    delta: float = 0.6
    seed: int = 42
    search: SearchConfig = field(default_factory=SearchConfig)
    similarity: str = "inverse"
    insert_on_hit: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.tau_p_mid <= self.tau_p < 1.0:
            raise ValueError(
                f"need 0 < tau_p_mid <= tau_p < 1, got ({self.tau_p_mid}, {self.tau_p})"
            )
        if not 0.0 < self.tau_sim <= 1.0:
            raise ValueError(f"tau_sim must lie in (0, 1], got {self.tau_sim}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def input_seed(seed: int, index: int) -> tuple[int, int]:
    """Entropy for the sampler of the ``index``-th explained input."""
    return (seed, index)


@dataclass
class ExplainReport:
    rule: Rule | None
    precision_lower: float | None
    coverage_hat: float
    rule_length: int
    model_queries: int
    wall_time: float
    path: str
    target: Label | None = None
    similarity: float | None = None
    matched_entry_index: int | None = None
    exhausted: bool = False
    samples_used: int = 0
    error: str | None = None
    trace: list[TraceStep] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rule": self.rule.to_pairs() if self.rule is not None else None,
            "precision_lower": self.precision_lower,
            "coverage_hat": self.coverage_hat,
            "rule_length": self.rule_length,
            "model_queries": self.model_queries,
            "wall_time": self.wall_time,
            "path": self.path,
            "target": self.target,
            "similarity": self.similarity,
            "matched_entry_index": self.matched_entry_index,
            "exhausted": self.exhausted,
            "samples_used": self.samples_used,
            "error": self.error,
        }


@dataclass
class StreamResult:
    reports: list[ExplainReport]
    total_queries: int = 0
    total_time: float = 0.0
    hits: int = 0
    misses: int = 0
    failures: int = 0

    @property
    def hit_rate(self) -> float:
        explained = self.hits + self.misses
        return self.hits / explained if explained else 0.0


class MemoizedExplainer:
    """Explanation engine bound to one oracle, schema and memory store."""

    def __init__(
        self,
        oracle: ModelOracle,
        schema: FeatureSchema,
        distribution: EmpiricalDistribution | None = None,
        table: EmbeddingTable | None = None,
        params: ExplainParams | None = None,
        store: MemoryStore | None = None,
        feature_distance: FeatureDistance | None = None,
    ):
        self.oracle = oracle
        self.schema = schema
        self.distribution = distribution
        self.table = table
        self.params = params or ExplainParams()
        self.is_text = any(s.kind == TOKEN for s in schema)
        self.pad_value = table.pad_code if (self.is_text and table is not None) else None
        self.embedder = Embedder(schema, distribution, table)
        self.store = store or MemoryStore(
            self.embedder,
            schema_hash=schema.hash(),
            similarity=self.params.similarity,
        )
        if feature_distance is not None:
            self.distance = feature_distance
        elif self.is_text:
            self.distance = TokenDistance(table)
        else:
            self.distance = TabularDistance(schema)

    def build_sampler(self, x: Instance, seed) -> PerturbationSampler:
        if self.is_text:
            return PerturbationSampler.for_text(x, self.table, seed)
        return PerturbationSampler.for_tabular(x, self.distribution, seed)

    def explain(self, x: Instance, seed=None) -> ExplainReport:
        """Explain one instance, consulting and updating the memory."""
        x = tuple(int(v) for v in x)
        self.schema.validate_instance(x)
        if seed is None:
            seed = self.params.seed
        start = time.perf_counter()
        query_base = self.oracle.query_count
        params = self.params
        sampler = self.build_sampler(x, seed)
        target = self.oracle.predict_one(x)
        embedding = self.embedder.embed(x)
        match = self.store.find_nearest(embedding)

        if match is None or match[1] < params.tau_sim:
            result = anchors.explain(
                self.oracle,
                x,
                sampler,
                tau_p=params.tau_p,
                tau_p_mid=params.tau_p_mid,
                delta=params.delta,
                config=params.search,
                target=target,
                pad_value=self.pad_value,
            )
            self.store.insert(x, result.mid_rule, embedding)
            return ExplainReport(
                rule=result.final_rule,
                precision_lower=result.precision_lower,
                coverage_hat=result.coverage_hat,
                rule_length=len(result.final_rule),
                model_queries=self.oracle.query_count - query_base,
                wall_time=time.perf_counter() - start,
                path=MISS,
                target=target,
                similarity=match[1] if match else None,
                exhausted=result.exhausted,
                samples_used=result.samples_used,
                trace=result.trace,
            )

        entry, similarity = match
        adapted = horizontal_transform(entry.mid_rule, x, self.distance)
        refined = vertical_transform(
            adapted,
            x,
            self.oracle,
            params.tau_p,
            params.delta,
            sampler=sampler,
            config=params.search,
            target=target,
            pad_value=self.pad_value,
        )
        if params.insert_on_hit:
            self.store.insert(x, adapted if len(adapted) else refined.rule, embedding)
        return ExplainReport(
            rule=refined.rule,
            precision_lower=refined.precision_lower,
            coverage_hat=refined.coverage_hat,
            rule_length=len(refined.rule),
            model_queries=self.oracle.query_count - query_base,
            wall_time=time.perf_counter() - start,
            path=HIT,
            target=target,
            similarity=similarity,
            matched_entry_index=entry.insertion_index,
            exhausted=refined.exhausted,
            samples_used=refined.samples_used,
            trace=refined.trace,
        )

    def explain_stream(self, xs) -> StreamResult:
        """Explain a sequence against the evolving store, input by input."""
        out = StreamResult(reports=[])
        for i, x in enumerate(xs):
            try:
                report = self.explain(x, seed=input_seed(self.params.seed, i))
            except ExplainerError as exc:
                report = ExplainReport(
                    rule=None,
                    precision_lower=None,
                    coverage_hat=0.0,
                    rule_length=0,
                    model_queries=0,
                    wall_time=0.0,
                    path="error",
                    error=str(exc),
                )
                out.failures += 1
            else:
                if report.path == HIT:
                    out.hits += 1
                else:
                    out.misses += 1
            out.reports.append(report)
            out.total_queries += report.model_queries
            out.total_time += report.wall_time
        return out


def explain_memoized(
    x: Instance,
    oracle: ModelOracle,
    store: MemoryStore,
    params: ExplainParams,
    *,
    schema: FeatureSchema,
    distribution: EmpiricalDistribution | None = None,
    table: EmbeddingTable | None = None,
    seed=None,
) -> ExplainReport:
    """One-shot form of :meth:`MemoizedExplainer.explain` around a given store."""
    explainer = MemoizedExplainer(
        oracle, schema, distribution, table, params=params, store=store
    )
    return explainer.explain(x, seed=seed)
