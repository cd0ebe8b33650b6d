#!/usr/bin/env python3
"""Single Stream walkthrough.

Single Stream is the closed-loop scenario: the harness sends one query,
waits for its completion, and immediately sends the next. Under the
simulated clock everything below is deterministic and instantaneous, so you
can see the timing rules without waiting for wall time.
"""

import dataclasses

from rtbench import (
    SampleStore,
    SimulatedClock,
    SimulatedSut,
    SimulatedSutConfig,
    default_settings,
    profile_by_name,
    run_single_stream,
    summarize,
)

# Pick the 2D-detection profile (one 8 MP frame per query) and shrink the
# run so the trace is readable.
profile = profile_by_name("ssd_resnet50")
settings = dataclasses.replace(
    default_settings(profile),
    min_query_count=5,
    min_duration_ns=0,
    store_size=4,
    sample_bytes=64,
)

# A simulated SUT that always takes exactly 10 ms per query.
clock = SimulatedClock()
store = SampleStore(settings.store_size, settings.sample_bytes, settings.seed)
sut = SimulatedSut(SimulatedSutConfig("fixed", (10_000_000,)), store, clock)

log = run_single_stream(sut, settings, profile, clock=clock)

# Closed loop: each issue time equals the previous completion time.
print("query  issue_ns      completion_ns  latency_ns")
for query, completion in log.trace:
    print(
        f"{query.query_id:>5}  {query.issue_ns:>12}  {completion.completion_ns:>13}  "
        f"{completion.completion_ns - query.issue_ns:>10}"
    )

summary = summarize(log)
print()
print(f"count={summary.count}  p50={summary.p50_ns} ns  p999={summary.p999_ns} ns")
print("the p999 is an observed latency, not an interpolation")
