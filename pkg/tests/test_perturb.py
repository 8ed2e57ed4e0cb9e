import numpy as np
import pytest

from anchormem.core import Predicate, Rule, RuleStats
from anchormem.data import load_embedding_table
from anchormem.errors import DegenerateRuleError, RuleCoverageError
from anchormem.models import SingleFeatureModel, ConstantModel
from anchormem.perturb import (
    PerturbationSampler,
    estimate_coverage,
    estimate_precision,
    exact_precision_coverage,
)


def uniform_sampler(anchor, cardinality, seed=0):
    n = len(anchor)
    values = [np.arange(cardinality)] * n
    probs = [np.full(cardinality, 1.0 / cardinality)] * n
    return PerturbationSampler(anchor, values, probs, seed)


class TestSampling:
    def test_fully_constrained_rule_yields_copies(self):
        sampler = uniform_sampler((1, 0), 2, seed=4)
        rule = Rule.of((0, 1), (1, 0))
        batch = sampler.sample_conditional(rule, 5)
        assert (batch == [1, 0]).all()

    def test_unconditioned_support(self):
        sampler = uniform_sampler((1, 1, 1), 2, seed=7)
        batch = sampler.sample_conditional(Rule(), 4)
        assert batch.shape == (4, 3)
        assert ((batch == 0) | (batch == 1)).all()

    def test_marginal_concentration(self):
        sampler = uniform_sampler((1,), 2, seed=7)
        batch = sampler.sample_unconditioned(10_000)
        freq = batch.mean()
        assert 0.48 <= freq <= 0.52

    def test_conditional_support_always_satisfies_rule(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            anchor = tuple(rng.integers(0, 3, size=4))
            sampler = uniform_sampler(anchor, 3, seed=int(rng.integers(1 << 30)))
            slots = rng.choice(4, size=rng.integers(1, 4), replace=False)
            rule = Rule.of(*[(int(i), anchor[i]) for i in slots])
            batch = sampler.sample_conditional(rule, 200)
            assert rule.matches(batch).all()

    def test_rule_must_cover_anchor(self):
        sampler = uniform_sampler((1, 1), 2)
        with pytest.raises(RuleCoverageError):
            sampler.sample_conditional(Rule.of((0, 0)), 10)

    def test_identical_seeds_identical_streams(self):
        a = uniform_sampler((0, 1, 2), 3, seed=99)
        b = uniform_sampler((0, 1, 2), 3, seed=99)
        assert (a.sample_unconditioned(50) == b.sample_unconditioned(50)).all()
        assert (
            a.sample_conditional(Rule.of((1, 1)), 50)
            == b.sample_conditional(Rule.of((1, 1)), 50)
        ).all()


class TestEstimators:
    def test_constant_model_matches_always(self):
        sampler = uniform_sampler((1, 1), 2, seed=3)
        stats = estimate_precision(sampler, Rule(), ConstantModel(1), 1, 50, RuleStats())
        assert (stats.successes, stats.trials) == (50, 50)
        assert stats.precision_hat == 1.0

    def test_half_precision_rule(self):
        # f(z) = z0, x = (1, 1): conditioning on x1=1 leaves z0 uniform
        sampler = uniform_sampler((1, 1), 2, seed=5)
        stats = estimate_precision(
            sampler, Rule.of((1, 1)), SingleFeatureModel(0), 1, 40_000, RuleStats()
        )
        assert stats.precision_hat == pytest.approx(0.5, abs=0.03)

    def test_perfect_precision_rule(self):
        sampler = uniform_sampler((1, 1), 2, seed=5)
        stats = estimate_precision(
            sampler, Rule.of((0, 1)), SingleFeatureModel(0), 1, 1000, RuleStats()
        )
        assert stats.precision_hat == 1.0

    def test_coverage_of_empty_rule(self):
        sampler = uniform_sampler((1, 1), 2, seed=6)
        stats = estimate_coverage(sampler, Rule(), 500, RuleStats())
        assert stats.coverage_hat == 1.0

    def test_coverage_estimates(self):
        sampler = uniform_sampler((1, 1), 2, seed=6)
        one = estimate_coverage(sampler, Rule.of((1, 1)), 100_000, RuleStats())
        both = estimate_coverage(sampler, Rule.of((0, 1), (1, 1)), 100_000, RuleStats())
        assert one.coverage_hat == pytest.approx(0.5, abs=0.03)
        assert both.coverage_hat == pytest.approx(0.25, abs=0.03)


class TestExactOracle:
    def universe(self):
        sampler = uniform_sampler((1, 1), 2)
        return sampler.enumerate_universe()

    def test_worked_example(self):
        universe, weights = self.universe()
        precision, coverage = exact_precision_coverage(
            universe, weights, Rule.of((1, 1)), SingleFeatureModel(0), 1
        )
        assert (precision, coverage) == (0.5, 0.5)

    def test_empty_rule_gives_base_rate(self):
        universe, weights = self.universe()
        precision, coverage = exact_precision_coverage(
            universe, weights, Rule(), SingleFeatureModel(0), 1
        )
        assert coverage == 1.0
        assert precision == 0.5  # half the uniform universe has z0 = 1

    def test_contradicting_rule_is_degenerate(self):
        universe, weights = self.universe()
        with pytest.raises(DegenerateRuleError):
            exact_precision_coverage(
                universe, weights, Rule.of((0, 5)), SingleFeatureModel(0), 1
            )

    def test_monotone_coverage_under_conjoin(self):
        rng = np.random.default_rng(20)
        sampler = uniform_sampler((0, 1, 2), 3)
        universe, weights = sampler.enumerate_universe()
        model = ConstantModel(0)
        for _ in range(30):
            k = int(rng.integers(0, 3))
            slots = rng.choice(3, size=k, replace=False)
            rule = Rule.of(*[(int(i), int(rng.integers(0, 3))) for i in slots])
            free = [i for i in range(3) if not rule.constrains(i)]
            if not free:
                continue
            grown = rule.conjoin(Predicate(free[0], int(rng.integers(0, 3))))
            try:
                _, cov = exact_precision_coverage(universe, weights, rule, model, 0)
            except DegenerateRuleError:
                continue
            try:
                _, cov_grown = exact_precision_coverage(universe, weights, grown, model, 0)
            except DegenerateRuleError:
                cov_grown = 0.0
            assert cov_grown <= cov + 1e-12

    def test_sampled_estimates_track_exact_values(self):
        sampler = uniform_sampler((1, 1), 2, seed=8)
        universe, weights = sampler.enumerate_universe()
        model = SingleFeatureModel(0)
        rule = Rule.of((1, 1))
        exact_p, exact_c = exact_precision_coverage(universe, weights, rule, model, 1)
        stats = estimate_precision(sampler, rule, model, 1, 100_000, RuleStats())
        estimate_coverage(sampler, rule, 100_000, stats)
        assert abs(stats.precision_hat - exact_p) <= 0.03
        assert abs(stats.coverage_hat - exact_c) <= 0.03


class TestTextSampler:
    def make_table(self, tmp_path):
        rows = ["good\t1 0", "great\t0.9 0.1", "bad\t-1 0", "poor\t-0.9 0.1", "film\t0 1"]
        path = tmp_path / "emb.tsv"
        path.write_text("\n".join(rows) + "\n")
        return load_embedding_table(path)

    def test_pad_slots_stay_padded(self, tmp_path):
        table = self.make_table(tmp_path)
        x = (0, 4, table.pad_code)
        sampler = PerturbationSampler.for_text(x, table, seed=2, neighbours=2)
        batch = sampler.sample_unconditioned(50)
        assert (batch[:, 2] == table.pad_code).all()

    def test_keep_probability_dominates(self, tmp_path):
        table = self.make_table(tmp_path)
        x = (0, 4)
        sampler = PerturbationSampler.for_text(x, table, seed=2, neighbours=2)
        batch = sampler.sample_unconditioned(20_000)
        keep = (batch[:, 0] == 0).mean()
        # keep_prob 0.5 plus a 1/2 share of the uniform neighbour draw
        assert keep == pytest.approx(0.75, abs=0.02)

    def test_free_slots_draw_only_neighbours(self, tmp_path):
        table = self.make_table(tmp_path)
        x = (0, 4)
        sampler = PerturbationSampler.for_text(x, table, seed=2, neighbours=2)
        batch = sampler.sample_unconditioned(500)
        assert set(np.unique(batch[:, 0])) <= {0, 1}  # good and its neighbour great
