import csv
import json

import numpy as np
import pytest

from anchormem.anchors import SearchConfig
from anchormem.bench import (
    ClusteredWorkload,
    MeanCI,
    NearestCentroidOracle,
    compute_sampling_reduction,
    compute_speedup,
    generate_clustered_workload,
    run_paired_benchmark,
    write_per_input_csv,
    write_summary_json,
)
from anchormem.engine import ExplainParams
from anchormem.memory import Embedder


class TestMetricFormulas:
    def test_speedup_simple(self):
        assert compute_speedup(10.0, 5.0) == 2.0
        assert compute_speedup(3.0, 3.0) == 1.0

    def test_speedup_reported_llama_case(self):
        assert compute_speedup(513.06, 58.70) == pytest.approx(8.74, abs=0.01)

    def test_speedup_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            compute_speedup(0.0, 1.0)
        with pytest.raises(ValueError):
            compute_speedup(1.0, -2.0)

    def test_sampling_reduction_reported_ratios(self):
        assert compute_sampling_reduction(100, 13) == pytest.approx(0.87)
        assert compute_sampling_reduction(100, 46) == pytest.approx(0.54)

    def test_sampling_reduction_degenerate_cases(self):
        assert compute_sampling_reduction(50, 50) == 0.0
        assert compute_sampling_reduction(10, 20) == -1.0
        with pytest.raises(ValueError):
            compute_sampling_reduction(0, 5)


class TestMeanCI:
    def test_known_values(self):
        ci = MeanCI.of([1.0, 2.0, 3.0])
        assert ci.mean == 2.0
        assert ci.half_width == pytest.approx(1.959963984540054 * 1.0 / np.sqrt(3))

    def test_nan_values_ignored(self):
        ci = MeanCI.of([1.0, float("nan"), 3.0])
        assert ci.count == 2
        assert ci.mean == 2.0


class TestWorkloadGeneration:
    def test_zero_noise_members_equal_centroids(self):
        w = generate_clustered_workload(3, 5, 4, 4, noise=0.0, seed=1)
        for c in range(3):
            for i in range(5):
                assert w.instances[c * 5 + i] == tuple(w.centroids[c])

    def test_intra_cluster_similarity_exceeds_inter(self):
        w = generate_clustered_workload(2, 6, 6, 5, noise=0.0, seed=2)
        embedder = Embedder(w.schema, w.distribution)
        a = embedder.embed(w.instances[0])
        b = embedder.embed(w.instances[1])
        other = embedder.embed(w.instances[6])
        assert np.linalg.norm(a - b) < np.linalg.norm(a - other)

    def test_generation_is_reproducible(self):
        w1 = generate_clustered_workload(4, 3, 5, 3, noise=0.2, seed=9)
        w2 = generate_clustered_workload(4, 3, 5, 3, noise=0.2, seed=9)
        assert w1.instances == w2.instances
        assert (w1.centroids == w2.centroids).all()

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            generate_clustered_workload(2, 2, 2, 1, noise=0.0, seed=0)
        with pytest.raises(ValueError):
            generate_clustered_workload(2, 2, 2, 3, noise=0.5, seed=0)
        with pytest.raises(ValueError):
            generate_clustered_workload(0, 2, 2, 3, noise=0.1, seed=0)

    def test_round_trip_through_dict(self):
        w = generate_clustered_workload(3, 4, 4, 3, noise=0.1, seed=5)
        restored = ClusteredWorkload.from_dict(json.loads(json.dumps(w.to_dict())))
        assert restored.instances == w.instances
        batch = np.array(w.instances)
        assert (restored.oracle.predict_batch(batch) == w.oracle.predict_batch(batch)).all()


class TestNearestCentroidOracle:
    def test_labels_by_nearest_centroid(self):
        oracle = NearestCentroidOracle(
            np.array([[0, 0, 0], [2, 2, 2]]), np.array([0, 1])
        )
        assert oracle.predict_one((0, 0, 1)) == 0
        assert oracle.predict_one((2, 2, 1)) == 1

    def test_ties_go_to_lowest_centroid(self):
        oracle = NearestCentroidOracle(np.array([[0, 0], [1, 1]]), np.array([0, 1]))
        assert oracle.predict_one((0, 1)) == 0


def small_params(**kwargs):
    defaults = dict(
        seed=3,
        search=SearchConfig(batch=50, budget=20_000, coverage_samples=1000),
    )
    defaults.update(kwargs)
    return ExplainParams(**defaults)


class TestPairedBenchmark:
    def test_repeated_input_stream_hits(self):
        w = generate_clustered_workload(1, 3, 3, 3, noise=0.0, seed=4)
        summary = run_paired_benchmark(
            w.schema, w.instances, w.oracle, w.distribution, small_params()
        )
        assert summary.hit_rate == pytest.approx(2 / 3)
        assert summary.memoized_queries < summary.baseline_queries
        assert summary.exact_evaluation

    def test_no_hit_configuration_matches_baseline_queries(self):
        w = generate_clustered_workload(4, 1, 5, 4, noise=0.0, seed=6)
        summary = run_paired_benchmark(
            w.schema, w.instances, w.oracle, w.distribution,
            small_params(tau_sim=1.0),
        )
        # pairwise-distinct inputs at tau_sim = 1.0 never hit; both methods
        # then run the identical search with identical seeds
        assert summary.hit_rate == 0.0
        assert summary.memoized_queries == summary.baseline_queries
        assert summary.query_speedup == pytest.approx(1.0)
        assert summary.sampling_reduction == pytest.approx(0.0)

    def test_clustered_stream_reduces_sampling(self):
        w = generate_clustered_workload(3, 12, 4, 3, noise=0.05, seed=7)
        summary = run_paired_benchmark(
            w.schema, w.instances, w.oracle, w.distribution, small_params()
        )
        assert summary.sampling_reduction > 0.0
        assert summary.hit_rate > 0.0

    def test_summary_accounting_is_consistent(self):
        w = generate_clustered_workload(2, 4, 4, 3, noise=0.0, seed=8)
        summary = run_paired_benchmark(
            w.schema, w.instances, w.oracle, w.distribution, small_params()
        )
        base = [r for r in summary.records if r.method == "baseline"]
        ours = [r for r in summary.records if r.method == "memoized"]
        assert sum(r.queries for r in base) == summary.baseline_queries
        assert sum(r.queries for r in ours) == summary.memoized_queries
        assert len(summary.cold_start["memoized"]["mean_queries"]) == len(ours)

    def test_empty_dataset_rejected(self):
        w = generate_clustered_workload(1, 1, 3, 3, noise=0.0, seed=1)
        with pytest.raises(ValueError):
            run_paired_benchmark(w.schema, [], w.oracle, w.distribution, small_params())

    def test_writers_produce_files(self, tmp_path):
        w = generate_clustered_workload(1, 2, 3, 3, noise=0.0, seed=2)
        summary = run_paired_benchmark(
            w.schema, w.instances, w.oracle, w.distribution, small_params()
        )
        json_path = tmp_path / "summary.json"
        csv_path = tmp_path / "per_input.csv"
        write_summary_json(summary, json_path)
        write_per_input_csv(summary, csv_path)
        payload = json.loads(json_path.read_text())
        assert {"speedup", "sampling_reduction", "hit_rate"} <= payload.keys()
        with open(csv_path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(summary.records)
        assert set(rows[0]) == {
            "input_index", "method", "path", "queries", "time",
            "precision", "coverage", "length",
        }
