"""Discrete-event kernel: integer-microsecond clock, FIFO tie-breaking, seeded RNG."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Any, Callable

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

US_PER_S = 1_000_000


def seconds(t_us: int) -> float:
    return t_us / US_PER_S


def micros(t_s: float) -> int:
    return int(round(t_s * US_PER_S))


class SchedulingInPast(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    fire_time: int
    sequence: int
    action: Callable[..., Any]
    args: tuple = ()


class SeededRng:
    """splitmix64 generator.

    The state advances by the golden-ratio gamma and each output passes
    through the standard splitmix64 finalizer, so a given seed yields the
    same stream on every platform.
    """

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        # 53 high bits -> [0, 1)
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self.random()

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        # rejection sampling keeps the draw unbiased
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def randint(self, a: int, b: int) -> int:
        return a + self.randrange(b - a + 1)

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def fork(self, label: str) -> "SeededRng":
        """Independent substream keyed by ``label``; does not advance self."""
        h = 0xCBF29CE484222325
        for b in label.encode():
            h = ((h ^ b) * 0x100000001B3) & MASK64
        mixer = SeededRng(self.seed ^ h)
        return SeededRng(mixer.next_u64())


class Simulator:
    """Single-threaded event loop over integer microseconds."""

    def __init__(self, trace: bool = False):
        self.now = 0
        self._heap: list[tuple[int, int, Callable[..., Any], tuple]] = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self._stopped = False
        self.trace: list[tuple[int, int, str]] | None = [] if trace else None

    def schedule(self, fire_time: int, action: Callable[..., Any], *args) -> int:
        if fire_time < self.now:
            raise SchedulingInPast(f"fire_time {fire_time} < now {self.now}")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (fire_time, seq, action, args))
        return seq

    def after(self, delay_us: int, action: Callable[..., Any], *args) -> int:
        return self.schedule(self.now + delay_us, action, *args)

    def cancel(self, event_id: int) -> None:
        self._cancelled.add(event_id)

    def pending(self) -> int:
        return sum(1 for e in self._heap if e[1] not in self._cancelled)

    def stop(self) -> None:
        """Ask run_until to return after the current event."""
        self._stopped = True

    def run_until(self, t_end: int) -> int:
        heap = self._heap
        cancelled = self._cancelled
        trace = self.trace
        pop = heapq.heappop
        executed = 0
        self._stopped = False
        while heap and heap[0][0] <= t_end:
            t, seq, action, args = pop(heap)
            if seq in cancelled:
                cancelled.discard(seq)
                continue
            self.now = t
            if trace is not None:
                trace.append((t, seq, getattr(action, "__qualname__", repr(action))))
            action(*args)
            executed += 1
            if self._stopped:
                return executed
        if t_end > self.now:
            self.now = t_end
        return executed
