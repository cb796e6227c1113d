"""Deterministic discrete-event clock.

Every time-dependent component in the system (acquisition cadence, ARQ
timeouts, daemon poll periods, idle-window rules) runs off one of these
clocks, never off the wall clock, so a whole multi-node scenario is a pure
function of its configuration and seed. Simulated time is integer
milliseconds. Events scheduled for the same instant fire in scheduling
order.
"""

from __future__ import annotations

import heapq
import itertools
import time
from typing import Callable


class Timer:
    """Handle for a scheduled callback; cancellation is lazy."""

    __slots__ = ("at_ms", "fn", "cancelled")

    def __init__(self, at_ms: int, fn: Callable[[], None]):
        self.at_ms = at_ms
        self.fn = fn
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class SimClock:
    def __init__(self, start_ms: int = 0):
        self._now = int(start_ms)
        self._heap: list[tuple[int, int, Timer]] = []
        self._seq = itertools.count()

    @property
    def now_ms(self) -> int:
        return self._now

    def schedule(self, delay_ms: int, fn: Callable[[], None]) -> Timer:
        if delay_ms < 0:
            raise ValueError("delay_ms must be >= 0")
        return self.schedule_at(self._now + int(delay_ms), fn)

    def schedule_at(self, at_ms: int, fn: Callable[[], None]) -> Timer:
        if at_ms < self._now:
            raise ValueError("cannot schedule in the past")
        timer = Timer(int(at_ms), fn)
        heapq.heappush(self._heap, (timer.at_ms, next(self._seq), timer))
        return timer

    def run_until(self, t_ms: int) -> None:
        """Run every event due at or before t_ms, then land on t_ms."""
        t_ms = int(t_ms)
        while self._heap and self._heap[0][0] <= t_ms:
            at, _, timer = heapq.heappop(self._heap)
            if timer.cancelled:
                continue
            self._now = at
            timer.fn()
        if t_ms > self._now:
            self._now = t_ms

    def run_for(self, duration_ms: int) -> None:
        self.run_until(self._now + int(duration_ms))

    def run_until_idle(self, limit_ms: int | None = None) -> None:
        """Drain the event heap; stop early at limit_ms if given."""
        while self._heap:
            at, _, timer = self._heap[0]
            if limit_ms is not None and at > limit_ms:
                self.run_until(limit_ms)
                return
            heapq.heappop(self._heap)
            if timer.cancelled:
                continue
            self._now = at
            timer.fn()
        if limit_ms is not None and limit_ms > self._now:
            self._now = limit_ms

    def pending(self) -> int:
        return sum(1 for _, _, t in self._heap if not t.cancelled)


def run_paced(clock: SimClock, speedup: float, should_stop: Callable[[], bool],
              slice_ms: int = 50) -> None:
    """Advance a SimClock in near real time, scaled by `speedup`.

    Used by live modes (gateway serving a browser) where the simulation has
    to progress while the process waits on I/O. Tests never need this.
    """
    if speedup < 1:
        raise ValueError("speedup must be >= 1")
    wall_start = time.monotonic()
    sim_start = clock.now_ms
    while not should_stop():
        elapsed = (time.monotonic() - wall_start) * 1000.0 * speedup
        clock.run_until(sim_start + int(elapsed))
        time.sleep(slice_ms / 1000.0)
