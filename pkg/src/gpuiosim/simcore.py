"""Event engine, seeded RNG, and the synthetic file content model.

Single global event queue keyed by (fire_at, seq). fire_at is integer
nanoseconds, seq is a monotonically increasing schedule counter, so two
events at the same instant fire in the order they were scheduled (FIFO
tie-break). Everything downstream is deterministic given the seed.
"""

import heapq
from typing import Callable, NamedTuple


class SimError(Exception):
    """Fatal simulation error (bad config, causality bug, broken invariant)."""


class Event(NamedTuple):
    fire_at: int
    seq: int
    kind: str
    action: Callable[[int], None]


class EventQueue:
    """Priority queue of events plus the simulation clock.

    Scheduling in the past is fatal. An empty queue is the normal
    end-of-simulation signal: pop() returns None.
    """

    def __init__(self):
        self.now = 0
        self._heap: list[Event] = []
        self._seq = 0
        self.scheduled = 0
        self.fired = 0

    def schedule(self, at: int, kind: str, action: Callable[[int], None]) -> None:
        if at < self.now:
            raise SimError(f"schedule in the past: {kind} at {at} < now {self.now}")
        heapq.heappush(self._heap, Event(at, self._seq, kind, action))
        self._seq += 1
        self.scheduled += 1

    def pop(self) -> Event | None:
        """Advance the clock to the next event and return it, or None when drained."""
        if not self._heap:
            return None
        ev = heapq.heappop(self._heap)
        assert ev.fire_at >= self.now, "clock went backwards"
        self.now = ev.fire_at
        self.fired += 1
        return ev

    def pending(self) -> int:
        return len(self._heap)

    def conservation_ok(self) -> bool:
        """Every scheduled event was either fired or is still enqueued."""
        return self.scheduled == self.fired + len(self._heap)


# splitmix64 constants (Steele et al.); a published 64-bit permutation
# generator with the same output stream on every platform.
_MASK = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer: one 64-bit mix step."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


class SeededRng:
    """splitmix64 stream with unbiased bounded draws and Fisher-Yates shuffle."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        x = self._state
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
        return x ^ (x >> 31)

    def below(self, n: int) -> int:
        """Uniform draw in [0, n) by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def fork(self, tag: int) -> "SeededRng":
        """Independent child stream; derivation is part of the determinism contract."""
        return SeededRng(mix64(self._state ^ mix64(tag)))


def shuffled_order(n: int, rng: SeededRng) -> list[int]:
    """Seeded permutation of range(n)."""
    order = list(range(n))
    rng.shuffle(order)
    return order


def page_tag(file_id: int, page_index: int) -> int:
    """Content oracle: the 64-bit tag every byte of a page must carry.

    Synthetic stand-in for file data; any routing bug that delivers the
    wrong page surfaces as a tag mismatch.
    """
    return mix64((file_id << 40) ^ page_index ^ 0xA5A5A5A5A5A5A5A5)


def cost_ns(nbytes: int, ps_per_byte: int) -> int:
    """Per-byte cost in integer picoseconds/byte, rounded up to whole ns."""
    if nbytes <= 0 or ps_per_byte <= 0:
        return 0
    return (nbytes * ps_per_byte + 999) // 1000
