"""Run clocks: a monotonic wall clock and a deterministic simulated clock.

Every run uses exactly one clock, and all timestamps are 64-bit nanosecond
counts read from it. The simulated clock doubles as a discrete event queue:
simulated systems under test schedule their completion callbacks on it, and
virtual time only moves when the engine sleeps or drains events, so whole
runs replay bit-exactly.
"""

from __future__ import annotations

import heapq
import time
from typing import Callable

# time.sleep routinely overshoots by a scheduler quantum; approach the
# deadline by sleeping half the remaining distance (re-arming keeps the
# thread interactive in the scheduler's eyes) and spin only the last
# stretch. Under timesharing a long spin gets the thread deprioritized and
# fattens the tail, so the default window is small; when the engine manages
# to acquire real-time scheduling it widens the window, since a spinning
# RT thread rides through other tasks' bursts instead of queueing behind
# them.
DEFAULT_SPIN_WINDOW_NS = 1_000_000
REALTIME_SPIN_WINDOW_NS = 8_000_000


class MonotonicClock:
    """Wall-clock time source backed by time.monotonic_ns()."""

    simulated = False

    def __init__(self) -> None:
        self.spin_window_ns = DEFAULT_SPIN_WINDOW_NS

    def now_ns(self) -> int:
        return time.monotonic_ns()

    def sleep_until(self, deadline_ns: int) -> None:
        spin_window = self.spin_window_ns
        while True:
            remaining = deadline_ns - time.monotonic_ns()
            if remaining <= 0:
                return
            if remaining > spin_window:
                time.sleep((remaining - spin_window) / 2 / 1e9)
            # else: busy-wait until the deadline passes


class SimulatedClock:
    """Virtual clock with an event queue; time advances only on demand.

    Events scheduled for the same instant fire in scheduling order.
    """

    simulated = True

    def __init__(self, start_ns: int = 0) -> None:
        self._now = start_ns
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = 0

    def now_ns(self) -> int:
        return self._now

    def schedule(self, at_ns: int, callback: Callable[[], None]) -> None:
        """Register callback to fire when virtual time reaches at_ns."""
        heapq.heappush(self._heap, (max(at_ns, self._now), self._seq, callback))
        self._seq += 1

    def pending(self) -> int:
        return len(self._heap)

    def fire_next(self) -> bool:
        """Advance to the earliest event and fire it; False if queue empty."""
        if not self._heap:
            return False
        at_ns, _, callback = heapq.heappop(self._heap)
        self._now = max(self._now, at_ns)
        callback()
        return True

    def sleep_until(self, deadline_ns: int) -> None:
        while self._heap and self._heap[0][0] <= deadline_ns:
            self.fire_next()
        self._now = max(self._now, deadline_ns)

    def drain(self) -> None:
        """Fire all outstanding events in time order."""
        while self.fire_next():
            pass
