"""Deterministic counter-based random streams.

Dataset generation must be byte-reproducible across platforms and Python
versions, so nothing here touches the stdlib ``random`` module.  The
generator is SplitMix64: a 64-bit counter advanced by a fixed odd constant,
with the output produced by an avalanching finalizer.  Per-instance streams
are derived by hashing ``(seed, instance_index)`` through the same mixer, so
any instance can be regenerated in isolation and generation parallelizes
without shared state.
"""

from __future__ import annotations

from dataclasses import dataclass

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # 2^64 / golden ratio, the SplitMix64 increment


def _mix(z: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit word."""
    z = (z + _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, instance_index: int) -> int:
    """Seed for the stream owned by one instance: mix(mix(seed) ^ index)."""
    h = _mix(seed & _MASK64)
    return _mix(h ^ (instance_index & _MASK64))


class Stream:
    """Seeded deterministic stream with the few draw primitives we need."""

    def __init__(self, seed: int):
        self._counter = seed & _MASK64

    def next_u64(self) -> int:
        self._counter = (self._counter + _GAMMA) & _MASK64
        z = self._counter
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n). Rejection sampling keeps it unbiased."""
        if n <= 0:
            raise ValueError(f"randrange() bound must be positive, got {n}")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def choice(self, seq):
        if not seq:
            raise IndexError("choice() from empty sequence")
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class GenSeed:
    """Addresses one instance's stream within a run: (run seed, index)."""

    seed: int
    instance_index: int

    def stream(self) -> Stream:
        return Stream(derive_seed(self.seed, self.instance_index))
