#!/usr/bin/env python3
"""Catching rule-breaking systems with the compliance tests.

Closed-division rules prohibit result caching and expect deterministic,
mode-consistent behavior. The doubles below break those rules on purpose, and
the compliance tests catch them; an honest system passes with margin.
"""

import dataclasses
import math

from rtbench import (
    SampleStore,
    SimulatedClock,
    SimulatedSut,
    SimulatedSutConfig,
    TruncatingSut,
    default_settings,
    profile_by_name,
    test_accuracy_in_perf,
    test_caching,
    test_determinism,
)

profile = profile_by_name("ssd_resnet50")
settings = dataclasses.replace(
    default_settings(profile),
    min_query_count=400,
    min_duration_ns=0,
    store_size=32,
    sample_bytes=64,
)


def build(sut_cls, **config_kwargs):
    clock = SimulatedClock()
    store = SampleStore(settings.store_size, settings.sample_bytes, settings.seed)
    config = SimulatedSutConfig(**config_kwargs)
    return sut_cls(config, store, clock), clock


# An honest system: latency does not depend on which samples it has seen.
honest, clock = build(SimulatedSut, distribution="lognormal", params=(math.log(5e6), 0.25))
verdict = test_caching(honest, settings, profile, clock=clock)
print(f"honest lognormal: caching test passed={verdict.passed} ratio={verdict.evidence['ratio']:.3f}")

# A cheater that answers twice as fast when a sample repeats within 8 queries.
cheat, clock = build(
    SimulatedSut, distribution="lognormal", params=(math.log(5e6), 0.25),
    cache_speedup=0.5, cache_window=8,
)
verdict = test_caching(cheat, settings, profile, clock=clock)
print(f"result-caching SUT: caching test passed={verdict.passed} ratio={verdict.evidence['ratio']:.3f}")

# Determinism: same seed, same schedule, same log ordering.
honest, clock = build(SimulatedSut, distribution="fixed", params=(5e6,))
verdict = test_determinism(honest, settings, profile, clock=clock)
print(f"determinism: passed={verdict.passed}")

# A system that degrades its outputs when it thinks nobody is checking:
# full responses in accuracy mode, truncated ones under performance pacing.
trunc, clock = build(TruncatingSut, distribution="fixed", params=(5e6,), echo_responses=True)
verdict = test_accuracy_in_perf(trunc, settings, profile, clock=clock)
print(
    f"truncating SUT: accuracy-consistency test passed={verdict.passed} "
    f"({verdict.evidence['mismatch_count']}/{verdict.evidence['subset_size']} digests diverged)"
)
