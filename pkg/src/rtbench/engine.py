"""Scenario engine: deterministic schedules, query issuance, and run logs.

Two issuance disciplines are implemented. Single Stream is closed-loop: the
next query is issued the moment the previous one completes, measuring how
fast the system can turn queries around back to back. Constant Stream is
open-loop: query i is due at t0 + round(i * 1e9 / rate) regardless of
whether earlier queries have finished, mimicking a fixed-rate sensor. The
schedule for query i is computed directly from i, never by accumulating a
period, so there is no drift; and latency in this scenario is measured from
the scheduled time, not the actual issue time, so a late issuer cannot hide
queueing delay (no coordinated omission).

Sample selection is drawn from the splitmix64 stream seeded by the run seed,
one draw per sample slot, reduced modulo the store size. Accuracy runs
ignore the random schedule and instead sweep the whole store so every sample
is covered at least once.

A run uses exactly one clock. With the simulated clock, runs are bit-exact
and instantaneous; with the monotonic clock, simulated SUTs complete from a
worker thread and the engine honors real deadlines.
"""

from __future__ import annotations

import contextlib
import gc
import math
import os
import sys
from dataclasses import dataclass, field

from .clock import REALTIME_SPIN_WINDOW_NS, MonotonicClock, SimulatedClock
from .prng import SplitMix64
from .profiles import BenchmarkProfile, RunSettings, effective_rate_hz
from .recording import Completion, CompletionRecorder, Query, RecorderError
from .stats import count_overruns
from .sut import SutError

__all__ = [
    "Query",
    "Completion",
    "RunLog",
    "generate_schedule",
    "run_single_stream",
    "run_constant_stream",
    "run_accuracy",
]

_FLUSH_TIMEOUT_S = 120.0


@contextlib.contextmanager
def _realtime_interpreter(clock):
    """Keep avoidable pauses off the issuing timeline of a real-clock run.

    Three stall sources are suppressed for the run's duration: the 5 ms GIL
    switch interval (a completion worker can otherwise hold the issuer off
    right at a deadline), generational garbage collection (a full collection
    pauses every thread for milliseconds; run allocations are bounded by the
    trace, so deferring is safe), and, where the OS permits it, timesharing
    preemption of the issuing thread (best-effort SCHED_FIFO).
    """
    if clock.simulated:
        yield
        return
    previous = sys.getswitchinterval()
    gc_was_enabled = gc.isenabled()
    sys.setswitchinterval(0.0005)
    gc.disable()
    rt_acquired = False
    old_policy = old_param = None
    if hasattr(os, "sched_setscheduler"):
        try:
            old_policy = os.sched_getscheduler(0)
            old_param = os.sched_getparam(0)
            os.sched_setscheduler(0, os.SCHED_FIFO, os.sched_param(1))
            rt_acquired = True
        except (PermissionError, OSError):
            pass
    old_spin = getattr(clock, "spin_window_ns", None)
    if rt_acquired and old_spin is not None:
        clock.spin_window_ns = REALTIME_SPIN_WINDOW_NS
    try:
        yield
    finally:
        if old_spin is not None:
            clock.spin_window_ns = old_spin
        if rt_acquired:
            try:
                os.sched_setscheduler(0, old_policy, old_param)
            except OSError:
                pass
        sys.setswitchinterval(previous)
        if gc_was_enabled:
            gc.enable()


@dataclass
class RunLog:
    """Complete record of one run: every query paired with its completion.

    All times are nanoseconds relative to run start (wall_start_ns is 0 by
    construction). A run that failed mid-way keeps its completed prefix and
    carries the failure message; such logs are invalid for scoring.
    """

    profile_name: str
    settings: RunSettings
    trace: list[tuple[Query, Completion]] = field(default_factory=list)
    overrun_count: int = 0
    wall_start_ns: int = 0
    wall_end_ns: int = 0
    failure: str | None = None


def generate_schedule(seed: int, store_size: int, n_queries: int, samples_per_query: int):
    """Materialize the first n_queries index lists of the seeded schedule."""
    if store_size < 1:
        raise ValueError("store_size must be >= 1")
    if samples_per_query < 1:
        raise ValueError("samples_per_query must be >= 1")
    if n_queries < 0:
        raise ValueError("n_queries must be >= 0")
    rng = SplitMix64(seed)
    return [
        [rng.next_below(store_size) for _ in range(samples_per_query)] for _ in range(n_queries)
    ]


def _index_source(settings: RunSettings, profile: BenchmarkProfile, schedule):
    """Yield per-query index tuples: an explicit schedule or the seeded stream."""
    if schedule is not None:
        for indices in schedule:
            yield tuple(indices)
        return
    rng = SplitMix64(settings.seed)
    spq = profile.inputs_per_query
    while True:
        yield tuple(rng.next_below(settings.store_size) for _ in range(spq))


def _coverage_schedule(store_size: int, samples_per_query: int):
    """Sweep every store index at least once, wrapping to fill the last query."""
    n_queries = -(-store_size // samples_per_query)
    return [
        [(q * samples_per_query + j) % store_size for j in range(samples_per_query)]
        for q in range(n_queries)
    ]


def _start_run(sut, settings: RunSettings, clock, retain) -> tuple[CompletionRecorder, int]:
    t0 = clock.now_ns()
    recorder = CompletionRecorder(clock, retain=retain, origin_ns=t0)
    sut.set_recorder(recorder)
    sut.begin_run(settings.mode)
    sut.load_samples(range(settings.store_size))
    return recorder, t0


def _assemble(log: RunLog, recorder: CompletionRecorder | None, queries: list[Query]) -> None:
    """Pair queries with completions; on failure keep the completed prefix."""
    if recorder is None:
        log.trace = []
        return
    completions = recorder.completions
    trace = []
    for query in queries:
        completion = completions.get(query.query_id)
        if completion is None:
            break
        trace.append((query, completion))
    if log.failure is None and len(trace) != len(queries):
        log.failure = f"missing completions for {len(queries) - len(trace)} of {len(queries)} queries"
    log.trace = trace


def run_single_stream(sut, settings: RunSettings, profile: BenchmarkProfile, clock=None, schedule=None) -> RunLog:
    """Closed-loop run: issue, wait for the completion, repeat.

    Stops at the first point where both min_duration_ns and min_query_count
    are satisfied (or when an explicit schedule is exhausted).
    """
    clock = clock if clock is not None else MonotonicClock()
    log = RunLog(profile_name=profile.name, settings=settings)
    queries: list[Query] = []
    recorder, t0 = None, clock.now_ns()
    source = _index_source(settings, profile, schedule)
    try:
        with _realtime_interpreter(clock):
            recorder, t0 = _start_run(sut, settings, clock, retain="none")
            while True:
                indices = next(source, None)
                if indices is None:
                    break
                query = Query(len(queries), indices, None, clock.now_ns() - t0)
                queries.append(query)
                sut.issue(query)
                recorder.wait_for(query.query_id)
                issued = len(queries)
                elapsed = clock.now_ns() - t0
                if schedule is None and issued >= settings.min_query_count and elapsed >= settings.min_duration_ns:
                    break
            sut.flush()
    except (SutError, RecorderError) as exc:
        log.failure = str(exc)
    log.wall_end_ns = clock.now_ns() - t0
    _assemble(log, recorder, queries)
    return log


def run_constant_stream(sut, settings: RunSettings, profile: BenchmarkProfile, clock=None, schedule=None) -> RunLog:
    """Open-loop run at a fixed rate; never waits for completions to issue.

    Issues ceil(min_duration * rate) queries, or min_query_count if that is
    larger; each query is held until its scheduled time but never issued
    early. overrun_count reports completions that landed after the next
    query's scheduled time.
    """
    clock = clock if clock is not None else MonotonicClock()
    rate = effective_rate_hz(settings, profile)
    if rate is None:
        raise ValueError("constant_stream requires a rate from the profile or rate_override_hz")
    n_target = max(settings.min_query_count, math.ceil(settings.min_duration_ns * rate / 1e9))
    if schedule is not None:
        schedule = list(schedule)
        n_target = len(schedule)

    log = RunLog(profile_name=profile.name, settings=settings)
    queries: list[Query] = []
    recorder, t0 = None, clock.now_ns()
    source = _index_source(settings, profile, schedule)
    try:
        with _realtime_interpreter(clock):
            recorder, t0 = _start_run(sut, settings, clock, retain="none")
            for i in range(n_target):
                scheduled_ns = int(round(i * 1e9 / rate))
                clock.sleep_until(t0 + scheduled_ns)
                query = Query(i, next(source), scheduled_ns, clock.now_ns() - t0)
                queries.append(query)
                sut.issue(query)
            sut.flush()
            recorder.wait_count(n_target, timeout_s=_FLUSH_TIMEOUT_S)
    except (SutError, RecorderError) as exc:
        log.failure = str(exc)
    log.wall_end_ns = clock.now_ns() - t0
    _assemble(log, recorder, queries)
    log.overrun_count = count_overruns(log.trace)
    return log


def run_accuracy(sut, settings: RunSettings, profile: BenchmarkProfile, clock=None, schedule=None) -> RunLog:
    """Accuracy-mode run: cover the sample store and retain response bytes.

    Timing is recorded but carries no validity weight; pacing is closed-loop.
    """
    if settings.mode != "accuracy":
        raise ValueError(f"run_accuracy requires mode 'accuracy'; settings say '{settings.mode}'")
    clock = clock if clock is not None else MonotonicClock()
    if schedule is None:
        schedule = _coverage_schedule(settings.store_size, profile.inputs_per_query)
    log = RunLog(profile_name=profile.name, settings=settings)
    queries: list[Query] = []
    recorder, t0 = None, clock.now_ns()
    try:
        recorder, t0 = _start_run(sut, settings, clock, retain="all")
        for i, indices in enumerate(schedule):
            query = Query(i, tuple(indices), None, clock.now_ns() - t0)
            queries.append(query)
            sut.issue(query)
            recorder.wait_for(query.query_id)
        sut.flush()
    except (SutError, RecorderError) as exc:
        log.failure = str(exc)
    log.wall_end_ns = clock.now_ns() - t0
    _assemble(log, recorder, queries)
    return log
