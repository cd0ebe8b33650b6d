"""Latency order statistics, sample-count planning, and run summaries.

Percentiles are exact order statistics with no interpolation: the reported
tail value is always a latency that was actually observed, which keeps the
headline number defensible. The sample-count planner answers "how many
queries does a run need before the p-th percentile estimate is trustworthy
at a given confidence" using the normal approximation to the binomial rank
distribution with a rank margin of half the tail mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

DEFAULT_CONFIDENCE = 0.99


@dataclass(frozen=True)
class RunSummary:
    """Latency statistics and counters for one finished run."""

    count: int
    min_ns: int
    mean_ns: int
    max_ns: int
    p50_ns: int
    p90_ns: int
    p99_ns: int
    p999_ns: int
    overrun_count: int
    duration_ns: int
    completed_per_second: float


@dataclass(frozen=True)
class ValidityReport:
    duration_ok: bool
    query_count_ok: bool
    messages: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.duration_ok and self.query_count_ok


def percentile(samples, p: float) -> int:
    """Return the k-th smallest sample with k = ceil(p * N), 1-based.

    No interpolation is performed, so the result is always an element of
    samples. Raises ValueError on empty input or p outside (0, 1).
    """
    n = len(samples)
    if n == 0:
        raise ValueError("percentile of empty sample list")
    if not 0.0 < p < 1.0:
        raise ValueError(f"percentile fraction must be in (0, 1); got {p}")
    k = math.ceil(p * n)
    k = min(max(k, 1), n)
    arr = np.asarray(samples, dtype=np.int64)
    return int(np.partition(arr, k - 1)[k - 1])


def min_query_count(p: float, confidence: float = DEFAULT_CONFIDENCE) -> int:
    """Minimum completed-query count for a stable p-th percentile estimate.

    Uses N = ceil(z^2 * p * (1 - p) / delta^2) with rank margin
    delta = (1 - p) / 2 and z the two-sided normal quantile for the given
    confidence (z = 2.5758293 at 0.99). For p = 0.999 at confidence 0.99
    this returns 26514.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"percentile fraction must be in (0, 1); got {p}")
    if not 0.5 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0.5, 1); got {confidence}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    delta = (1.0 - p) / 2.0
    return math.ceil(z * z * p * (1.0 - p) / (delta * delta))


def latencies_ns(log) -> list[int]:
    """Per-query latency in nanoseconds under the scenario's definition.

    Single Stream measures completion minus issue. Constant Stream measures
    completion minus the scheduled frame time, so scheduler lateness counts
    against the measured latency instead of being silently absorbed.
    """
    if log.settings.scenario == "constant_stream":
        return [c.completion_ns - q.scheduled_ns for q, c in log.trace]
    return [c.completion_ns - q.issue_ns for q, c in log.trace]


def count_overruns(trace) -> int:
    """Completions that landed after the next query's scheduled time.

    Only queries with an actual successor in the trace are considered, so the
    count is recomputable from the trace alone.
    """
    overruns = 0
    for (_, completion), (nxt, _) in zip(trace, trace[1:]):
        if nxt.scheduled_ns is not None and completion.completion_ns > nxt.scheduled_ns:
            overruns += 1
    return overruns


def summarize(log, settings=None) -> RunSummary:
    """Reduce a complete run log to its RunSummary.

    duration_ns is the largest completion timestamp (times are relative to
    run start), which makes the summary a pure function of the trace.
    """
    settings = settings if settings is not None else log.settings
    if log.failure is not None:
        raise ValueError(f"cannot summarize failed run: {log.failure}")
    if not log.trace:
        raise ValueError("cannot summarize empty run log")
    lats = latencies_ns(log)
    n = len(lats)
    duration_ns = max(c.completion_ns for _, c in log.trace)
    rate = n * 1e9 / duration_ns if duration_ns > 0 else 0.0
    return RunSummary(
        count=n,
        min_ns=min(lats),
        mean_ns=sum(lats) // n,
        max_ns=max(lats),
        p50_ns=percentile(lats, 0.5),
        p90_ns=percentile(lats, 0.9),
        p99_ns=percentile(lats, 0.99),
        p999_ns=percentile(lats, 0.999),
        overrun_count=log.overrun_count,
        duration_ns=duration_ns,
        completed_per_second=rate,
    )


def check_validity(summary: RunSummary, settings) -> ValidityReport:
    """Check the run-length sufficiency rules; violations are data, not errors."""
    messages = []
    duration_ok = summary.duration_ns >= settings.min_duration_ns
    if not duration_ok:
        messages.append(
            f"duration {summary.duration_ns} ns is short of the required "
            f"{settings.min_duration_ns} ns by {settings.min_duration_ns - summary.duration_ns} ns"
        )
    query_count_ok = summary.count >= settings.min_query_count
    if not query_count_ok:
        messages.append(
            f"completed query count {summary.count} is below the required {settings.min_query_count}"
        )
    return ValidityReport(duration_ok, query_count_ok, tuple(messages))
