"""Seeded PCG32 generator used everywhere randomness is needed.

Both backends (compiled and pure) consume the exact same integer stream,
so a fixed seed pins the full training trajectory regardless of which
kernel implementation is active.  Distinct pipeline stages draw from
distinct streams of the same seed (see the STREAM_* constants) so that
adding draws to one stage never shifts another.
"""

MASK64 = (1 << 64) - 1
MASK32 = (1 << 32) - 1
_PCG_MULT = 6364136223846793005

# stream ids, one per consumer of seeded randomness
STREAM_SPLIT = 1
STREAM_EMB_INIT = 2
STREAM_EMB_TRAIN = 3
STREAM_EMB_SUBSAMPLE = 4
STREAM_LSTM_INIT = 5
STREAM_LSTM_SHUFFLE = 6
STREAM_ABLATION = 7
STREAM_SYNTH = 8


class Pcg32:
    """Minimal PCG32 (XSH-RR output, 64-bit LCG state)."""

    __slots__ = ("state", "inc")

    def __init__(self, seed: int, stream: int = 0):
        self.inc = ((stream << 1) | 1) & MASK64
        self.state = 0
        self.next_u32()
        self.state = (self.state + (seed & MASK64)) & MASK64
        self.next_u32()

    def next_u32(self) -> int:
        old = self.state
        self.state = (old * _PCG_MULT + self.inc) & MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & MASK32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & MASK32

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Fixed-point multiply, no rejection."""
        return (self.next_u32() * n) >> 32

    def next_f64(self) -> float:
        """Uniform float in [0, 1) with 32 bits of resolution."""
        return self.next_u32() * 2.0**-32

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_f64()

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def state_array(self):
        """State as a uint64 pair, the form the compiled kernels mutate."""
        import numpy as np

        return np.array([self.state, self.inc], dtype=np.uint64)

    def set_state_array(self, arr) -> None:
        self.state = int(arr[0])
        self.inc = int(arr[1])
