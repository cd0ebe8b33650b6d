"""The system-under-test contract and simulated implementations.

A SUT is measured as a black box: it loads samples, accepts queries, and
reports completions through the run's recorder. Simulated SUTs make the
harness verifiable at desk scale; they draw latencies from fixed, uniform,
lognormal, or bimodal distributions and deliver completions asynchronously
(on the simulated clock's event queue, or from a worker thread under a real
clock) so the engine's concurrency contract is exercised even in tests.

Two intentionally misbehaving doubles are included: a result-caching SUT
that answers faster when a recently seen sample index repeats, and a
truncating SUT that degrades its responses in performance mode. Both exist
to be caught by the compliance tests.
"""

from __future__ import annotations

import abc
import heapq
import math
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass

from .clock import SimulatedClock
from .prng import SplitMix64, value_at
from .recording import CompletionRecorder, Query
from .samples import SampleStore

DISTRIBUTIONS = ("fixed", "uniform", "lognormal", "bimodal")
CATEGORIES = ("hardened_system", "development_system", "engineering_sample")

# category -> (functional_safety, publicly_available, auditable_closed)
_CATEGORY_RULES = {
    "hardened_system": (True, True, True),
    "development_system": (False, True, True),
    "engineering_sample": (False, False, False),
}

_DURATION_UNITS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000}


class SutError(RuntimeError):
    """Contract violation or failure inside a system under test."""


@dataclass(frozen=True)
class SutDescriptor:
    """Submission category metadata for a system under test."""

    name: str
    category: str
    functional_safety: bool
    publicly_available: bool
    auditable_closed: bool


def descriptor_violations(descriptor: SutDescriptor) -> list[str]:
    """Category invariants; empty list means the descriptor is consistent."""
    if descriptor.category not in _CATEGORY_RULES:
        return [f"category must be one of {CATEGORIES}; got '{descriptor.category}'"]
    expected = _CATEGORY_RULES[descriptor.category]
    actual = (
        descriptor.functional_safety,
        descriptor.publicly_available,
        descriptor.auditable_closed,
    )
    violations = []
    for field, want, got in zip(
        ("functional_safety", "publicly_available", "auditable_closed"), expected, actual
    ):
        if want != got:
            violations.append(f"category '{descriptor.category}' requires {field}={want}; got {got}")
    return violations


def parse_duration_ns(text: str) -> int:
    """Parse '10ms', '1.5s', '66666ns', or a bare nanosecond count."""
    text = text.strip()
    for unit, scale in sorted(_DURATION_UNITS.items(), key=lambda kv: -len(kv[0])):
        if text.endswith(unit):
            return int(round(float(text[: -len(unit)]) * scale))
    return int(text)


@dataclass(frozen=True)
class SimulatedSutConfig:
    """Latency distribution and behavior knobs for a simulated SUT.

    params by distribution (nanoseconds unless noted):
      fixed:     (latency,)
      uniform:   (lo, hi)
      lognormal: (mu, sigma) of the underlying normal in ln-nanoseconds
      bimodal:   (lo, hi, weight) with weight the probability of hi
    """

    distribution: str
    params: tuple[float, ...]
    cache_speedup: float = 1.0
    cache_window: int = 0
    seed: int = 0
    echo_responses: bool = False

    def violations(self) -> list[str]:
        bad = []
        if self.distribution not in DISTRIBUTIONS:
            bad.append(f"distribution must be one of {DISTRIBUTIONS}; got '{self.distribution}'")
            return bad
        arity = {"fixed": 1, "uniform": 2, "lognormal": 2, "bimodal": 3}[self.distribution]
        if len(self.params) != arity:
            bad.append(f"{self.distribution} takes {arity} params; got {len(self.params)}")
            return bad
        if self.distribution == "fixed" and self.params[0] < 0:
            bad.append("fixed latency must be >= 0")
        if self.distribution == "uniform" and not self.params[0] <= self.params[1]:
            bad.append(f"uniform requires lo <= hi; got {self.params}")
        if self.distribution == "lognormal" and self.params[1] < 0:
            bad.append("lognormal sigma must be >= 0")
        if self.distribution == "bimodal" and not 0.0 < self.params[2] < 1.0:
            bad.append(f"bimodal mixture weight must be in (0, 1); got {self.params[2]}")
        if not 0.0 < self.cache_speedup <= 1.0:
            bad.append(f"cache_speedup must be in (0, 1]; got {self.cache_speedup}")
        if self.cache_window < 0:
            bad.append(f"cache_window must be >= 0; got {self.cache_window}")
        return bad


def simulate_latency(config: SimulatedSutConfig, rng: SplitMix64) -> int:
    """Draw one latency in nanoseconds; deterministic in (seed, draw index)."""
    if config.distribution == "fixed":
        return max(0, int(round(config.params[0])))
    if config.distribution == "uniform":
        lo, hi = config.params
        return max(0, int(round(lo + rng.next_unit() * (hi - lo))))
    if config.distribution == "lognormal":
        mu, sigma = config.params
        u1 = 1.0 - rng.next_unit()  # (0, 1], keeps log() finite
        u2 = rng.next_unit()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return max(0, int(round(math.exp(mu + sigma * z))))
    if config.distribution == "bimodal":
        lo, hi, weight = config.params
        pick = hi if rng.next_unit() < weight else lo
        return max(0, int(round(pick)))
    raise ValueError(f"unknown distribution '{config.distribution}'")


class SutContract(abc.ABC):
    """Abstract system under test driven by the scenario engine.

    Lifecycle per run: set_recorder, begin_run, load_samples, issue...,
    flush, unload. Completions are delivered through the recorder and may
    arrive from any thread; flush blocks until every outstanding completion
    has been delivered.
    """

    def __init__(self) -> None:
        self._recorder: CompletionRecorder | None = None

    def set_recorder(self, recorder: CompletionRecorder) -> None:
        self._recorder = recorder

    def begin_run(self, mode: str) -> None:
        """Run-mode notification (performance or accuracy); optional hook."""

    @abc.abstractmethod
    def load_samples(self, indices) -> None: ...

    @abc.abstractmethod
    def unload(self) -> None: ...

    @abc.abstractmethod
    def issue(self, query: Query) -> None: ...

    @abc.abstractmethod
    def flush(self) -> None: ...


class _TimerWorker:
    """Delivers callbacks at monotonic deadlines from a dedicated thread."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._heap: list[tuple[int, int, object]] = []
        self._seq = 0
        self._in_flight = 0
        self._stopped = False
        self._thread = threading.Thread(target=self._loop, name="sut-completions", daemon=True)
        self._thread.start()

    def submit(self, due_ns: int, callback) -> None:
        with self._cond:
            if self._stopped:
                raise SutError("completion worker stopped")
            heapq.heappush(self._heap, (due_ns, self._seq, callback))
            self._seq += 1
            self._cond.notify_all()

    def wait_idle(self, timeout_s: float) -> None:
        deadline = time.monotonic() + timeout_s
        with self._cond:
            while self._heap or self._in_flight:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise SutError("timed out waiting for outstanding completions")
                self._cond.wait(timeout=remaining)

    def stop(self) -> None:
        with self._cond:
            self._stopped = True
            self._cond.notify_all()
        self._thread.join(timeout=5)

    def _loop(self) -> None:
        while True:
            with self._cond:
                while not self._stopped and (
                    not self._heap or self._heap[0][0] > time.monotonic_ns()
                ):
                    if self._heap:
                        delay = (self._heap[0][0] - time.monotonic_ns()) / 1e9
                        self._cond.wait(timeout=max(delay, 0.0))
                    else:
                        self._cond.wait()
                if self._stopped:
                    return
                _, _, callback = heapq.heappop(self._heap)
                self._in_flight += 1
            try:
                callback()
            finally:
                with self._cond:
                    self._in_flight -= 1
                    self._cond.notify_all()


class SimulatedSut(SutContract):
    """In-process SUT with a configurable latency distribution.

    Latency draws restart from a fresh stream on every load_samples call
    (one "generation" per run), so repeated runs against one instance see
    independent draws while a freshly constructed instance replays exactly.
    Draws never depend on sample content, only on the draw index, except for
    the deliberate cache-speedup cheat when it is enabled.
    """

    def __init__(self, config: SimulatedSutConfig, store: SampleStore, clock) -> None:
        super().__init__()
        bad = config.violations()
        if bad:
            raise ValueError("; ".join(bad))
        self.config = config
        self.store = store
        self.clock = clock
        self._loaded: set[int] = set()
        self._generation = 0
        self._rng: SplitMix64 | None = None
        self._recent: deque | None = None
        self._mode = "performance"
        self._pending = 0
        self._pending_lock = threading.Lock()
        self._worker: _TimerWorker | None = None

    # -- contract ---------------------------------------------------------

    def begin_run(self, mode: str) -> None:
        self._mode = mode

    def load_samples(self, indices) -> None:
        indices = list(indices)
        for index in indices:
            if not 0 <= index < self.store.store_size:
                raise SutError(f"cannot load sample {index}: store has {self.store.store_size}")
        self._loaded = set(indices)
        self._rng = SplitMix64(value_at(self.config.seed, self._generation))
        self._generation += 1
        window = self.config.cache_window
        self._recent = deque(maxlen=window) if window > 0 else None

    def unload(self) -> None:
        self._loaded = set()
        self._rng = None
        if self._worker is not None:
            self._worker.stop()
            self._worker = None

    def issue(self, query: Query) -> None:
        if not self._loaded or self._rng is None:
            raise SutError("issue before load_samples")
        for index in query.sample_indices:
            if index not in self._loaded:
                raise SutError(f"query {query.query_id} references unloaded sample {index}")
        if self._recorder is None:
            raise SutError("issue with no recorder attached")

        latency = self._next_latency(query.sample_indices)
        response = self._response(query)
        due = self.clock.now_ns() + latency
        query_id = query.query_id

        with self._pending_lock:
            self._pending += 1

        def deliver() -> None:
            try:
                self._recorder.record(query_id, response)
            finally:
                with self._pending_lock:
                    self._pending -= 1

        if isinstance(self.clock, SimulatedClock):
            self.clock.schedule(due, deliver)
        else:
            if self._worker is None:
                self._worker = _TimerWorker()
            self._worker.submit(due, deliver)

    def flush(self, timeout_s: float = 60.0) -> None:
        if isinstance(self.clock, SimulatedClock):
            while True:
                with self._pending_lock:
                    if self._pending == 0:
                        return
                if not self.clock.fire_next():
                    raise SutError("outstanding completions but no scheduled events")
        elif self._worker is not None:
            self._worker.wait_idle(timeout_s)

    # -- behavior ---------------------------------------------------------

    def _next_latency(self, sample_indices) -> int:
        base = simulate_latency(self.config, self._rng)
        latency = base
        if self._recent is not None:
            seen = set().union(*self._recent) if self._recent else set()
            if any(index in seen for index in sample_indices):
                latency = int(round(base * self.config.cache_speedup))
            self._recent.append(frozenset(sample_indices))
        return latency

    def _response(self, query: Query) -> bytes:
        if self.config.echo_responses:
            return b"".join(self.store.sample(i) for i in query.sample_indices)
        # Pure function of the query's sample indices so honest performance
        # and accuracy runs produce identical digests.
        return struct.pack(f"<{len(query.sample_indices)}I", *query.sample_indices)


class TruncatingSut(SimulatedSut):
    """Cheating double: returns degraded response payloads in performance mode."""

    def _response(self, query: Query) -> bytes:
        full = super()._response(query)
        if self._mode == "performance":
            return full[: len(full) // 2]
        return full


def run_sut_conformance(make_sut, clock=None) -> list[str]:
    """Exercise the SutContract rules against a factory-produced SUT.

    Returns a list of human-readable failures; an empty list means the
    implementation honors the contract. The same checks apply to in-process
    and remote implementations.
    """
    failures: list[str] = []
    clock = clock if clock is not None else SimulatedClock()
    sut = make_sut()
    recorder = CompletionRecorder(clock)
    sut.set_recorder(recorder)
    sut.begin_run("performance")

    try:
        sut.issue(Query(0, (0,), None, 0))
        failures.append("issue before load_samples did not raise")
    except SutError:
        pass

    sut.load_samples([0, 1])
    try:
        sut.issue(Query(0, (2,), None, 0))
        failures.append("issue over an unloaded sample index did not raise")
    except SutError:
        pass

    n = 5
    for query_id in range(n):
        sut.issue(Query(query_id, (query_id % 2,), None, clock.now_ns()))
    sut.flush()
    recorder.wait_count(n)
    if recorder.count() != n:
        failures.append(f"expected {n} completions after flush; got {recorder.count()}")
    if sorted(recorder.completions) != list(range(n)):
        failures.append(f"completion query ids {sorted(recorder.completions)} != issued {list(range(n))}")

    sut.unload()
    return failures
