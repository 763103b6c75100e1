"""Successive-cancellation decoding for u*T with arbitrary frozen masks.

Unfrozen positions are decided by LLR sign (a zero LLR decides 0), so random
bits placed on weak channels are simply decoded as information.  All entry
points accept a single LLR vector or a batch of shape (trials, n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, modulate
from .polar_core import BitMatrix, gf2_encode, polar_encode

LLR_CLIP = 40.0


@dataclass(frozen=True)
class FrozenSpec:
    frozen: np.ndarray  # bool per index
    values: np.ndarray  # frozen value per index (ignored where unfrozen)

    def __post_init__(self):
        f = np.asarray(self.frozen, dtype=bool)
        v = np.asarray(self.values, dtype=np.uint8)
        if f.shape != v.shape or f.ndim != 1:
            raise ValueError("mask and values must be 1-D of equal length")
        if np.any(v > 1):
            raise ValueError("frozen values must be 0 or 1")
        f.flags.writeable = False
        v = np.where(f, v, 0).astype(np.uint8)
        v.flags.writeable = False
        object.__setattr__(self, "frozen", f)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_unfrozen(cls, n: int, unfrozen, values=None) -> "FrozenSpec":
        mask = np.ones(n, dtype=bool)
        mask[list(unfrozen)] = False
        vals = np.zeros(n, dtype=np.uint8) if values is None else np.asarray(values)
        return cls(mask, vals)

    @property
    def n(self) -> int:
        return self.frozen.size

    @property
    def unfrozen(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(~self.frozen))


@dataclass(frozen=True)
class DecodeResult:
    u_hat: np.ndarray
    hard_llr_signs: np.ndarray  # decision LLR per index; nan where a frozen block was skipped


def f_exact(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """2 atanh(tanh(a/2) tanh(b/2)) in a numerically stable form."""
    return (
        np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
        + np.log1p(np.exp(-np.abs(a + b)))
        - np.log1p(np.exp(-np.abs(a - b)))
    )


def f_minsum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


class _Run:
    def __init__(self, spec, genie, f, full):
        self.frozen = spec.frozen
        self.values = spec.values
        self.genie = genie
        self.f = f
        self.full = full or genie is not None

    def go(self, llr, off, u_out, l_out):
        N = llr.shape[-1]
        if not self.full and self.frozen[off:off + N].all():
            block = self.values[off:off + N]
            u_out[:, off:off + N] = block
            return np.broadcast_to(polar_encode(block), llr.shape).copy()
        if N == 1:
            L = llr[:, 0]
            l_out[:, off] = L
            if self.genie is not None:
                u = self.genie[:, off]
            elif self.frozen[off]:
                u = np.full(L.shape, self.values[off], dtype=np.uint8)
            else:
                u = (L < 0).astype(np.uint8)
            u_out[:, off] = u
            return u[:, None].copy()
        h = N // 2
        top, bot = llr[:, :h], llr[:, h:]
        xa = self.go(self.f(top, bot), off, u_out, l_out)
        xb = self.go(bot + (1.0 - 2.0 * xa) * top, off + h, u_out, l_out)
        return np.concatenate([xa ^ xb, xb], axis=1)


def sc_decode(llrs, spec: FrozenSpec, *, genie=None, min_sum: bool = False,
              full_llrs: bool = False) -> DecodeResult:
    """SC decoding of LLRs (shape (n,) or (trials, n)) against T = T0^{(x)m}.

    ``genie`` feeds the true bits back instead of the decisions, which turns
    the returned LLRs into samples of the genie-aided bit-channels.
    """
    L = np.asarray(llrs, dtype=np.float64)
    single = L.ndim == 1
    L = np.atleast_2d(L)
    n = L.shape[1]
    if n == 0 or n & (n - 1):
        raise ValueError("length must be a power of two")
    if spec.n != n:
        raise ValueError("frozen spec length does not match the LLRs")
    if np.any(np.isnan(L)):
        raise ValueError("LLRs must not be NaN")
    L = np.clip(L, -LLR_CLIP, LLR_CLIP)
    g = None
    if genie is not None:
        g = np.atleast_2d(np.asarray(genie, dtype=np.uint8))
        g = np.broadcast_to(g, L.shape)
    u = np.zeros(L.shape, dtype=np.uint8)
    lo = np.full(L.shape, np.nan)
    _Run(spec, g, f_minsum if min_sum else f_exact, full_llrs).go(L, 0, u, lo)
    if single:
        return DecodeResult(u[0], lo[0])
    return DecodeResult(u, lo)


def codeword_loglik(y, u, G: BitMatrix, params: ChannelParams) -> float:
    """log W^n(y | modulate(u*G)) for the Gaussian channel, summed exactly."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (G.cols,):
        raise ValueError("dimension mismatch")
    s = modulate(gf2_encode(u, G))
    const = 0.5 * math.log(params.snr / (2.0 * math.pi))
    terms = -0.5 * params.snr * (y - s) ** 2 + const
    return math.fsum(terms.tolist())
