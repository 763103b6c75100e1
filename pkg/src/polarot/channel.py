"""BI-AWGN channel: BPSK mapping, seeded noise and LLRs.

Randomness comes from Philox4x64-10, a counter-based generator.  A substream
is keyed by the 128-bit value ``(seed << 64) | index`` so trial ``t`` of a run
with master seed ``s`` is replayable on its own.  Gaussians use Box-Muller on
the uniform stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def linear_to_db(snr: float) -> float:
    return 10.0 * math.log10(snr)


@dataclass(frozen=True)
class ChannelParams:
    snr: float
    rng_seed: int = 0

    def __post_init__(self):
        if not self.snr > 0:
            raise ValueError("snr must be positive")

    @classmethod
    def from_db(cls, snr_db: float, rng_seed: int = 0) -> "ChannelParams":
        return cls(db_to_linear(snr_db), rng_seed)

    @property
    def snr_db(self) -> float:
        return linear_to_db(self.snr)

    @property
    def noise_var(self) -> float:
        return 1.0 / self.snr


def substream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for (master seed, substream index)."""
    key = ((int(seed) & _MASK64) << 64) | (int(index) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def gaussian(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals by Box-Muller, two per uniform pair."""
    half = -(-size // 2)
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:size]


def modulate(x) -> np.ndarray:
    x = np.asarray(x)
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("bits must be 0 or 1")
    return 1.0 - 2.0 * x.astype(np.float64)


def add_noise(symbols, params: ChannelParams, rng: np.random.Generator | None = None) -> np.ndarray:
    s = np.asarray(symbols, dtype=np.float64)
    if rng is None:
        rng = substream(params.rng_seed)
    if math.isinf(params.snr):
        return s.copy()
    g = gaussian(rng, s.size).reshape(s.shape)
    return s + g * math.sqrt(params.noise_var)


def llr_map(y, params: ChannelParams) -> np.ndarray:
    """log P(y|0)/P(y|1) = 2*snr*y."""
    return 2.0 * params.snr * np.asarray(y, dtype=np.float64)
