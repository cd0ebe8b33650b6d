#!/usr/bin/env python3
"""How many queries does a trustworthy 99.9th percentile need?

The planner answers with the normal-approximation rank bound: enough samples
that the empirical tail estimate lands within half the tail mass of the true
quantile at the chosen confidence. The check below verifies the bound
empirically with a quick Monte-Carlo.
"""

import numpy as np

from rtbench import min_query_count, percentile

for p in (0.9, 0.99, 0.999):
    print(f"p={p}: need >= {min_query_count(p, 0.99):>6} completed queries at 99% confidence")

# Empirical check: draw that many samples from a known distribution and see
# how often the empirical 99.9th percentile rank lands within the margin.
n = min_query_count(0.999, 0.99)
rng = np.random.default_rng(1)
trials, hits = 400, 0
for _ in range(trials):
    draws = rng.uniform(0.0, 1.0, size=n)
    phat = (draws <= 0.999).sum() / n
    hits += abs(phat - 0.999) <= (1 - 0.999) / 2
print(f"\ncoverage over {trials} trials at n={n}: {hits / trials:.3f} (target ~0.99)")

# And why the percentile itself is an order statistic:
latencies = list(range(1, 1001))
print(f"\np999 of 1..1000 ns is the 999th smallest: {percentile(latencies, 0.999)} ns")
print("an element of the data, so the reported tail is something that actually happened")
