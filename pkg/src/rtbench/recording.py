"""Query/completion records and the run's completion recorder.

The recorder is the single point where responses re-enter the harness. It
must accept reports from any thread at any time without blocking the issuing
timeline, so record() does constant work under a lock and all waiting happens
on the engine side. Under a simulated clock, waiting drives the clock's event
queue instead of a condition variable, which keeps runs deterministic.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

from .clock import SimulatedClock


def digest64(data: bytes) -> int:
    """64-bit digest of a response payload (blake2b-8, little-endian)."""
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class Query:
    """One request issued to the system under test.

    scheduled_ns is set only by the Constant Stream scenario; all times are
    nanoseconds relative to run start.
    """

    query_id: int
    sample_indices: tuple[int, ...]
    scheduled_ns: int | None
    issue_ns: int


@dataclass(frozen=True)
class Completion:
    query_id: int
    completion_ns: int
    response_digest: int
    # Payload bytes are retained only when the run needs them (accuracy mode
    # or a marked subset); performance logs carry digests only.
    response_bytes: bytes | None = None


class RecorderError(RuntimeError):
    pass


class CompletionRecorder:
    """Collects completions for one run; one recorder per run."""

    def __init__(self, clock, retain="none", origin_ns: int = 0):
        self._clock = clock
        self._retain = retain  # "none" | "all" | set of query ids
        self._origin_ns = origin_ns
        self._cond = threading.Condition()
        self._completions: dict[int, Completion] = {}
        self._failure: str | None = None

    @property
    def completions(self) -> dict[int, Completion]:
        return self._completions

    def count(self) -> int:
        with self._cond:
            return len(self._completions)

    def fail(self, message: str) -> None:
        """Mark the run as failed from any thread; wakes all waiters."""
        with self._cond:
            if self._failure is None:
                self._failure = message
            self._cond.notify_all()

    def record(self, query_id: int, response: bytes, completion_ns: int | None = None) -> None:
        if completion_ns is None:
            completion_ns = self._clock.now_ns()
        keep = self._retain == "all" or (isinstance(self._retain, set) and query_id in self._retain)
        completion = Completion(
            query_id=query_id,
            completion_ns=completion_ns - self._origin_ns,
            response_digest=digest64(response),
            response_bytes=bytes(response) if keep else None,
        )
        with self._cond:
            if query_id in self._completions:
                self._failure = f"duplicate completion for query {query_id}"
            else:
                self._completions[query_id] = completion
            self._cond.notify_all()

    def _raise_on_failure(self) -> None:
        if self._failure is not None:
            raise RecorderError(self._failure)

    def _wait(self, done, timeout_s: float) -> None:
        """Block until done() holds; drives the simulated clock if present."""
        if isinstance(self._clock, SimulatedClock):
            while True:
                with self._cond:
                    self._raise_on_failure()
                    if done():
                        return
                if not self._clock.fire_next():
                    raise RecorderError("waiting for completions but no scheduled events remain")
            # unreachable
        deadline = self._clock.now_ns() + int(timeout_s * 1e9)
        with self._cond:
            while True:
                self._raise_on_failure()
                if done():
                    return
                remaining = (deadline - self._clock.now_ns()) / 1e9
                if remaining <= 0:
                    raise RecorderError("timed out waiting for completions")
                self._cond.wait(timeout=remaining)

    def wait_for(self, query_id: int, timeout_s: float = 60.0) -> Completion:
        self._wait(lambda: query_id in self._completions, timeout_s)
        return self._completions[query_id]

    def wait_count(self, n: int, timeout_s: float = 60.0) -> None:
        self._wait(lambda: len(self._completions) >= n, timeout_s)
