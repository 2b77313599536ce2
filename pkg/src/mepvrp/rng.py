"""Seedable 64-bit random number generator (xoshiro256**).

Pure Python so that traces are bit-identical across platforms and numpy
versions. Seeding goes through splitmix64, which is also used to derive
independent child streams.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def splitmix64(state: int) -> tuple[int, int]:
    """Return ``(new_state, output)`` for one splitmix64 step."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class RandomNumberGenerator:
    """xoshiro256** generator.

    Construct either from an integer ``seed`` or from a full four-word
    ``state`` (as returned by :meth:`state`).
    """

    __slots__ = ("_s",)

    def __init__(self, seed: int | None = None, state: list[int] | None = None):
        if state is not None:
            if len(state) != 4 or not any(state):
                raise ValueError("state must be four 64-bit words, not all zero")
            self._s = [int(w) & _MASK for w in state]
            return
        if seed is None:
            raise ValueError("either seed or state is required")
        sm = int(seed) & _MASK
        words = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            words.append(out)
        self._s = words

    def state(self) -> list[int]:
        return list(self._s)

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def rand(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, high: int) -> int:
        """Uniform integer in ``{0, ..., high - 1}`` (unbiased, by rejection)."""
        if high <= 0:
            raise ValueError("high must be positive")
        if high & (high - 1) == 0:
            return self.next_u64() & (high - 1)
        limit = (1 << 64) - ((1 << 64) % high)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % high

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by :meth:`randint`."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def child_seed(self) -> int:
        """Draw a seed for an independent child stream."""
        return self.next_u64()

    def spawn(self) -> "RandomNumberGenerator":
        return RandomNumberGenerator(seed=self.child_seed())


def derive_seed(*parts: int) -> int:
    """Deterministically mix integers into one 64-bit seed."""
    state = 0x6A09E667F3BCC909
    for part in parts:
        state, out = splitmix64(state ^ (int(part) & _MASK))
        state ^= out
    _, out = splitmix64(state)
    return out


Rng = RandomNumberGenerator
