"""Walkthrough: the Bernoulli KL confidence bounds behind rule certification.

A rule's precision is a Bernoulli mean estimated from perturbation samples.
The certifier brackets it between KL-inverted bounds and stops once the
bracket clears (or excludes) the precision threshold. This script shows the
bracket tightening with sample count and a live certification run.
"""

import numpy as np

from anchormem.bandit import (
    BanditArm,
    certify_precision,
    confidence_bounds,
    exploration_level,
    kl_bernoulli,
)
from anchormem.core import RuleStats

print("KL(0.9 || q) for a few q:", [round(kl_bernoulli(0.9, q), 4) for q in (0.5, 0.8, 0.9, 0.99)])

print("\nbracket around an empirical precision of 0.9 (level = ln(t^1.1/0.6)):")
print(f"{'trials':>8s} {'lower':>8s} {'upper':>8s} {'width':>8s}")
for trials in (50, 100, 500, 2000, 10000):
    level = exploration_level(trials // 100 + 1, delta=0.6)
    bound = confidence_bounds(0.9, trials, level)
    print(f"{trials:8d} {bound.lower:8.4f} {bound.upper:8.4f} "
          f"{bound.upper - bound.lower:8.4f}")

print("\ncertifying a rule with true precision 0.97 against tau = 0.95:")
rng = np.random.default_rng(3)
stats = RuleStats()


def draw(count):
    stats.record_trials(int(rng.binomial(count, 0.97)), count)
    return count


result = certify_precision(BanditArm(stats, draw), tau=0.95, delta=0.6, budget=50_000)
print(f"  outcome {result.outcome.value} after {stats.trials} samples "
      f"(estimate {stats.precision_hat:.4f}, lower bound {result.bound.lower:.4f})")

print("\nand one with true precision 0.90 (should be refused):")
rng = np.random.default_rng(4)
stats = RuleStats()


def draw_low(count):
    stats.record_trials(int(rng.binomial(count, 0.90)), count)
    return count


result = certify_precision(BanditArm(stats, draw_low), tau=0.95, delta=0.6, budget=50_000)
print(f"  outcome {result.outcome.value} after {stats.trials} samples "
      f"(estimate {stats.precision_hat:.4f}, upper bound {result.bound.upper:.4f})")
