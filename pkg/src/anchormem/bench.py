"""Paired benchmarking of the plain and memoized explainers.

Both methods see the same shuffled input order and the same per-input
sampler seeds; costs are measured at the oracle's query counter. Final
rules from both methods are scored against a shared evaluation frame:
full enumeration of the perturbation space when it is small enough,
otherwise one held-out sample pool.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Sequence

import numpy as np

from . import anchors
from .core import Instance, Rule
from .data import CATEGORICAL, EmpiricalDistribution, FeatureSchema, SlotSpec
from .engine import ExplainParams, MemoizedExplainer, input_seed
from .models import ModelOracle
from .perturb import ENUMERATION_LIMIT

Z95 = 1.959963984540054


def compute_speedup(t_base: float, t_ours: float) -> float:
    """Ratio of baseline to accelerated cost; both must be positive."""
    if t_base <= 0 or t_ours <= 0:
        raise ValueError(f"times must be positive, got ({t_base}, {t_ours})")
    return t_base / t_ours


def compute_sampling_reduction(q_base: int, q_ours: int) -> float:
    """One minus the query-count ratio, in (-inf, 1]."""
    if q_base <= 0:
        raise ValueError(f"baseline query count must be positive, got {q_base}")
    return 1.0 - q_ours / q_base


class NearestCentroidOracle(ModelOracle):
    """Labels every instance with the class of its nearest centroid.

    Distance is Hamming over the feature codes; ties go to the lowest
    centroid index, so the oracle is a pure lookup over the finite universe.
    """

    def __init__(self, centroids: np.ndarray, classes: np.ndarray):
        centroids = np.asarray(centroids, dtype=np.int64)
        super().__init__(arity=centroids.shape[1])
        self.centroids = centroids
        self.classes = np.asarray(classes, dtype=np.int64)

    def _predict(self, batch: np.ndarray) -> np.ndarray:
        mismatches = (batch[:, None, :] != self.centroids[None, :, :]).sum(axis=2)
        return self.classes[np.argmin(mismatches, axis=1)]


@dataclass
class ClusteredWorkload:
    schema: FeatureSchema
    instances: list[Instance]
    oracle: NearestCentroidOracle
    distribution: EmpiricalDistribution
    centroids: np.ndarray
    classes: np.ndarray
    noise: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "cardinality": self.schema[0].cardinality,
            "n_features": self.schema.arity,
            "noise": self.noise,
            "seed": self.seed,
            "centroids": self.centroids.tolist(),
            "classes": self.classes.tolist(),
            "instances": [list(x) for x in self.instances],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ClusteredWorkload":
        schema = _coded_schema(payload["n_features"], payload["cardinality"])
        centroids = np.array(payload["centroids"], dtype=np.int64)
        classes = np.array(payload["classes"], dtype=np.int64)
        return cls(
            schema=schema,
            instances=[tuple(x) for x in payload["instances"]],
            oracle=NearestCentroidOracle(centroids, classes),
            distribution=EmpiricalDistribution.uniform(schema),
            centroids=centroids,
            classes=classes,
            noise=payload["noise"],
            seed=payload["seed"],
        )


def _coded_schema(n_features: int, cardinality: int) -> FeatureSchema:
    vocab = tuple(str(v) for v in range(cardinality))
    return FeatureSchema(
        tuple(
            SlotSpec(f"f{i}", CATEGORICAL, cardinality, vocab=vocab)
            for i in range(n_features)
        )
    )


def generate_clustered_workload(
    n_clusters: int,
    per_cluster: int,
    n_features: int,
    cardinality: int,
    noise: float,
    seed: int,
) -> ClusteredWorkload:
    """Synthetic stream where similar inputs share anchor structure.

    Centroids are drawn uniformly; each member re-draws every slot with
    probability ``noise``. The paired oracle labels by the nearest
    centroid's class, so inputs from one cluster admit the same anchors.
    """
    if min(n_clusters, per_cluster, n_features) < 1:
        raise ValueError("all counts must be positive")
    if cardinality < 2:
        raise ValueError(f"cardinality must be at least 2, got {cardinality}")
    if not 0.0 <= noise < 0.5:
        raise ValueError(f"noise must lie in [0, 0.5), got {noise}")
    rng = np.random.default_rng(seed)
    centroids = rng.integers(0, cardinality, size=(n_clusters, n_features))
    classes = np.arange(n_clusters) % 2
    members = np.repeat(centroids, per_cluster, axis=0)
    flip = rng.random(members.shape) < noise
    members[flip] = rng.integers(0, cardinality, size=int(flip.sum()))
    schema = _coded_schema(n_features, cardinality)
    return ClusteredWorkload(
        schema=schema,
        instances=[tuple(int(v) for v in row) for row in members],
        oracle=NearestCentroidOracle(centroids, classes),
        distribution=EmpiricalDistribution.uniform(schema),
        centroids=centroids,
        classes=np.asarray(classes),
        noise=noise,
        seed=seed,
    )


@dataclass
class MeanCI:
    mean: float
    half_width: float
    count: int

    @classmethod
    def of(cls, values: Sequence[float]) -> "MeanCI":
        arr = np.asarray([v for v in values if not math.isnan(v)], dtype=np.float64)
        if arr.size == 0:
            return cls(float("nan"), float("nan"), 0)
        half = Z95 * arr.std(ddof=1) / math.sqrt(arr.size) if arr.size > 1 else 0.0
        return cls(float(arr.mean()), float(half), int(arr.size))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "ci95": self.half_width, "n": self.count}


@dataclass
class InputRecord:
    input_index: int
    method: str
    path: str
    queries: int
    time: float
    precision: float
    coverage: float
    length: int


@dataclass
class BenchmarkSummary:
    baseline_time: float
    memoized_time: float
    baseline_queries: int
    memoized_queries: int
    speedup: float
    query_speedup: float
    sampling_reduction: float
    hit_rate: float
    failures: int
    baseline_precision: MeanCI
    memoized_precision: MeanCI
    baseline_coverage: MeanCI
    memoized_coverage: MeanCI
    baseline_length: MeanCI
    memoized_length: MeanCI
    exact_evaluation: bool
    records: list[InputRecord] = field(default_factory=list)
    cold_start: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "baseline": {"time": self.baseline_time, "queries": self.baseline_queries},
            "memoized": {"time": self.memoized_time, "queries": self.memoized_queries},
            "speedup": self.speedup,
            "query_speedup": self.query_speedup,
            "sampling_reduction": self.sampling_reduction,
            "hit_rate": self.hit_rate,
            "failures": self.failures,
            "precision": {
                "baseline": self.baseline_precision.to_dict(),
                "memoized": self.memoized_precision.to_dict(),
            },
            "coverage": {
                "baseline": self.baseline_coverage.to_dict(),
                "memoized": self.memoized_coverage.to_dict(),
            },
            "length": {
                "baseline": self.baseline_length.to_dict(),
                "memoized": self.memoized_length.to_dict(),
            },
            "exact_evaluation": self.exact_evaluation,
            "cold_start": self.cold_start,
        }


class _RuleScorer:
    """Shared evaluation frame for final-rule precision and coverage.

    Enumerates the perturbation universe (one frame serves all inputs,
    since the tabular distribution does not depend on the anchor) when it
    fits the enumeration limit; otherwise scores on one held-out pool.
    """

    def __init__(
        self,
        distribution: EmpiricalDistribution,
        oracle: ModelOracle,
        *,
        pool_size: int = 50_000,
        seed: int = 7,
    ):
        sizes = [len(p) for p in distribution.pools]
        self.exact = float(np.prod(sizes)) <= ENUMERATION_LIMIT
        if self.exact:
            grids = np.meshgrid(*distribution.pools, indexing="ij")
            self.frame = np.stack([g.ravel() for g in grids], axis=1)
            self.weights = reduce(np.multiply.outer, distribution.pool_probs).ravel()
        else:
            rng = np.random.default_rng(seed)
            cols = [
                rng.choice(pool, size=pool_size, p=probs)
                for pool, probs in zip(distribution.pools, distribution.pool_probs)
            ]
            self.frame = np.stack(cols, axis=1)
            self.weights = np.full(pool_size, 1.0 / pool_size)
        self.labels = oracle.predict_batch(self.frame)

    def score(self, rule: Rule | None, target: int) -> tuple[float, float]:
        if rule is None:
            return float("nan"), float("nan")
        accepted = rule.matches(self.frame)
        coverage = float(self.weights[accepted].sum())
        if coverage == 0.0:
            return float("nan"), 0.0
        matched = float(self.weights[accepted][self.labels[accepted] == target].sum())
        return matched / coverage, coverage


def run_paired_benchmark(
    schema: FeatureSchema,
    instances: Sequence[Instance],
    oracle: ModelOracle,
    distribution: EmpiricalDistribution,
    params: ExplainParams | None = None,
    *,
    shuffle: bool = True,
    eval_pool: int = 50_000,
) -> BenchmarkSummary:
    """Run plain and memoized explanations over one stream and compare."""
    if not instances:
        raise ValueError("dataset must be nonempty")
    params = params or ExplainParams()
    order = np.arange(len(instances))
    if shuffle:
        order = np.random.default_rng(params.seed).permutation(order)
    stream = [instances[i] for i in order]

    explainer = MemoizedExplainer(oracle, schema, distribution, params=params)

    base_records: list[InputRecord] = []
    base_results = []
    for i, x in enumerate(stream):
        sampler = explainer.build_sampler(x, input_seed(params.seed, i))
        before = oracle.query_count
        start = time.perf_counter()
        result = anchors.explain(
            oracle,
            x,
            sampler,
            tau_p=params.tau_p,
            tau_p_mid=params.tau_p_mid,
            delta=params.delta,
            config=params.search,
        )
        elapsed = time.perf_counter() - start
        base_results.append(result)
        base_records.append(
            InputRecord(i, "baseline", "full-search", oracle.query_count - before, elapsed,
                        float("nan"), float("nan"), len(result.final_rule))
        )

    stream_result = explainer.explain_stream(stream)

    scorer = _RuleScorer(distribution, oracle, pool_size=eval_pool, seed=params.seed + 1)
    ours_records: list[InputRecord] = []
    for i, report in enumerate(stream_result.reports):
        precision, coverage = scorer.score(report.rule, report.target)
        ours_records.append(
            InputRecord(i, "memoized", report.path, report.model_queries,
                        report.wall_time, precision, coverage, report.rule_length)
        )
    for record, result in zip(base_records, base_results):
        precision, coverage = scorer.score(result.final_rule, result.target)
        record.precision = precision
        record.coverage = coverage

    baseline_time = sum(r.time for r in base_records)
    memoized_time = stream_result.total_time
    baseline_queries = sum(r.queries for r in base_records)
    memoized_queries = stream_result.total_queries

    def curve(records: list[InputRecord]) -> dict:
        times = np.cumsum([r.time for r in records])
        queries = np.cumsum([r.queries for r in records])
        counts = np.arange(1, len(records) + 1)
        return {
            "mean_time": (times / counts).tolist(),
            "mean_queries": (queries / counts).tolist(),
        }

    return BenchmarkSummary(
        baseline_time=baseline_time,
        memoized_time=memoized_time,
        baseline_queries=baseline_queries,
        memoized_queries=memoized_queries,
        speedup=compute_speedup(baseline_time, memoized_time),
        query_speedup=compute_speedup(baseline_queries, memoized_queries),
        sampling_reduction=compute_sampling_reduction(baseline_queries, memoized_queries),
        hit_rate=stream_result.hit_rate,
        failures=stream_result.failures,
        baseline_precision=MeanCI.of([r.precision for r in base_records]),
        memoized_precision=MeanCI.of([r.precision for r in ours_records]),
        baseline_coverage=MeanCI.of([r.coverage for r in base_records]),
        memoized_coverage=MeanCI.of([r.coverage for r in ours_records]),
        baseline_length=MeanCI.of([float(r.length) for r in base_records]),
        memoized_length=MeanCI.of([float(r.length) for r in ours_records]),
        exact_evaluation=scorer.exact,
        records=base_records + ours_records,
        cold_start={"baseline": curve(base_records), "memoized": curve(ours_records)},
    )


def write_summary_json(summary: BenchmarkSummary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")


def write_per_input_csv(summary: BenchmarkSummary, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["input_index", "method", "path", "queries", "time", "precision", "coverage", "length"]
        )
        for r in summary.records:
            writer.writerow(
                [r.input_index, r.method, r.path, r.queries, f"{r.time:.6f}",
                 f"{r.precision:.6f}", f"{r.coverage:.6f}", r.length]
            )
