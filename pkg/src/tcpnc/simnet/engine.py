"""Discrete-event core: a clock and a heap of timestamped actions."""

from __future__ import annotations

import heapq
import itertools
from typing import Any, Callable

# Heap entries are [time, seq, action, args]; cancelling clears the action.
EventHandle = list


class Simulator:
    def __init__(self):
        self.now = 0.0
        self._heap: list[list[Any]] = []
        self._seq = itertools.count()
        self.events_run = 0

    def schedule(self, delay: float, action: Callable, *args) -> EventHandle:
        if delay < 0:
            raise ValueError(f"cannot schedule {delay} s into the past")
        return self.schedule_at(self.now + delay, action, *args)

    def schedule_at(self, time: float, action: Callable, *args) -> EventHandle:
        if time < self.now:
            raise ValueError(f"cannot schedule at {time} before now ({self.now})")
        entry = [time, next(self._seq), action, args]
        heapq.heappush(self._heap, entry)
        return entry

    @staticmethod
    def cancel(handle: EventHandle) -> None:
        handle[2] = None

    def pending(self) -> int:
        return sum(1 for e in self._heap if e[2] is not None)

    def run(self, until: float = float("inf")) -> None:
        """Execute events in (time, seq) order up to and including ``until``."""
        heap = self._heap
        pop = heapq.heappop
        count = 0
        while heap and heap[0][0] <= until:
            time, _, action, args = pop(heap)
            if action is None:
                continue
            self.now = time
            action(*args)
            count += 1
        self.events_run += count
        if until != float("inf"):
            self.now = max(self.now, until)
