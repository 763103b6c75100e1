"""Universal hashing and key-length budgeting.

All budgets stay real-valued; only :func:`lhl_length` floors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class HashSeed:
    bits: np.ndarray
    input_len: int
    output_len: int

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8).copy()
        if self.input_len < 0 or self.output_len < 0:
            raise ValueError("lengths must be non-negative")
        need = max(0, self.input_len + self.output_len - 1)
        if b.shape != (need,):
            raise ValueError(f"Toeplitz seed needs {need} bits, got {b.size}")
        if np.any(b > 1):
            raise ValueError("seed bits must be 0 or 1")
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @classmethod
    def random(cls, rng: np.random.Generator, input_len: int, output_len: int) -> "HashSeed":
        need = max(0, input_len + output_len - 1)
        return cls(rng.integers(0, 2, size=need, dtype=np.uint8), input_len, output_len)

    def matrix(self) -> np.ndarray:
        a, l = self.input_len, self.output_len
        j = np.arange(l)[:, None]
        i = np.arange(a)[None, :]
        if a == 0 or l == 0:
            return np.zeros((l, a), dtype=np.uint8)
        return self.bits[j - i + a - 1]


def toeplitz_hash(x, seed: HashSeed) -> np.ndarray:
    """out_j = XOR_i x_i * seed[j - i + a - 1]."""
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (seed.input_len,):
        raise ValueError("input length does not match the seed")
    if seed.output_len == 0:
        return np.zeros(0, dtype=np.uint8)
    return ((seed.matrix().astype(np.int64) @ x.astype(np.int64)) & 1).astype(np.uint8)


def binary_entropy(t: float) -> float:
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return -t * math.log2(t) - (1.0 - t) * math.log2(1.0 - t)


def psi(v: int, t: float) -> float:
    """psi_v(t) = H_b(t) + (1 - t) log2(v - 1) + log2 t."""
    if v < 1 or not 0.0 < t <= 1.0:
        raise ValueError("need v >= 1 and t in (0, 1]")
    if v == 1:
        if t != 1.0:
            raise ValueError("v = 1 forces t = 1")
        return 0.0
    return binary_entropy(t) + (1.0 - t) * math.log2(v - 1) + math.log2(t)


@dataclass(frozen=True)
class MinEntropyGapInput:
    psi_mean: float
    eps: float
    hmax: float

    def __post_init__(self):
        if not 0.0 <= self.eps < 1.0:
            raise ValueError("eps must lie in [0, 1)")
        if self.hmax < 0:
            raise ValueError("hmax must be non-negative")


def delta_correction(g: MinEntropyGapInput) -> float:
    """Delta = psi_mean - log2(1 - eps) + eps/(1 - eps) * hmax."""
    return g.psi_mean - math.log2(1.0 - g.eps) + g.eps / (1.0 - g.eps) * g.hmax


def lhl_length(hmin_smooth: float, eps_s: float, eps_p: float) -> int:
    """Key length floor(hmin - 2 log2(1/eps_p)), never negative.

    ``eps_s`` is the smoothing parameter already folded into ``hmin_smooth``;
    it is accepted so callers can pass the full parameter set.
    """
    if not 0.0 < eps_p < 1.0:
        raise ValueError("eps_p must lie in (0, 1)")
    return max(0, math.floor(hmin_smooth - 2.0 * math.log2(1.0 / eps_p)))


def _pi_of(pi, i: int) -> int:
    return int(pi[i]) if not hasattr(pi, "pi") else pi.pi[i]


def half_gap_sum(good: Iterable[int], pi, I) -> float:
    """1/2 * sum over the selection of (I_i - I_pi(i)), summed in index order."""
    I = np.asarray(I, dtype=np.float64)
    return 0.5 * math.fsum(float(I[i] - I[_pi_of(pi, i)]) for i in sorted(good))


def _check_crosscut(good, pi):
    g = set(int(i) for i in good)
    image = {_pi_of(pi, i) for i in g}
    if g & image:
        raise ValueError("selection overlaps its image under pi")


def leakage(good: Iterable[int], pi, profile) -> float:
    """L = 1/2 * sum over the selection of (I_i + I_pi(i))."""
    good = list(good)
    _check_crosscut(good, pi)
    I = np.asarray(getattr(profile, "I", profile), dtype=np.float64)
    return 0.5 * math.fsum(float(I[i] + I[_pi_of(pi, i)]) for i in sorted(good))


def bad_side_bound(bad_count: int, gamma: float) -> float:
    """Leakage cap |S| * gamma over indices whose MI is at most gamma."""
    return bad_count * gamma


def beta_n(n: int, V: float, eps_sw: float) -> float:
    if not 0.0 < eps_sw < 1.0:
        raise ValueError("eps_sw must lie in (0, 1)")
    if V < 0:
        raise ValueError("V must be non-negative")
    return math.sqrt(n * V) * NormalDist().inv_cdf(1.0 - eps_sw)


def swc_length(recon_set: Iterable[int], profile, n: int, V: float = 0.0,
               eps_sw: float = 0.5) -> tuple[float, float]:
    """(sum over the set of (1 - I_i) + beta_n, beta_n)."""
    I = np.asarray(getattr(profile, "I", profile), dtype=np.float64)
    b = beta_n(n, V, eps_sw)
    return math.fsum(float(1.0 - I[i]) for i in sorted(recon_set)) + b, b


def ell_net(good: Iterable[int], pi, profile, beta: float = 0.0,
            c_eps: float = 0.0) -> tuple[float, float]:
    """(max(0, 1/2 sum (I_i - I_pi(i)) - beta - c_eps), that value / n)."""
    good = list(good)
    _check_crosscut(good, pi)
    I = np.asarray(getattr(profile, "I", profile), dtype=np.float64)
    val = max(0.0, half_gap_sum(good, pi, I) - beta - c_eps)
    return val, val / I.size


def c_epsilon(eps_p: float, gap: MinEntropyGapInput | None = None) -> float:
    """Delta + 2 log2(1/eps_p); without statistics psi_mean is taken as 0."""
    if gap is None:
        warnings.warn(
            "no min-entropy gap statistics supplied; psi_mean set to 0", stacklevel=2
        )
        gap = MinEntropyGapInput(0.0, 0.0, 0.0)
    return delta_correction(gap) + 2.0 * math.log2(1.0 / eps_p)


@dataclass(frozen=True)
class KeyBudget:
    ell: int
    ell_swc: float
    ell_net: float
    rate: float
    leakage: float
    c_eps: float
    eps_s: float
    eps_p: float
    eps_sw: float
    beta_n: float
    V: float

    def to_json(self) -> dict:
        return {
            "ell": self.ell, "ell_swc": self.ell_swc, "ell_net": self.ell_net,
            "rate": self.rate, "leakage": self.leakage, "c_eps": self.c_eps,
            "beta_n": self.beta_n, "eps_s": self.eps_s, "eps_p": self.eps_p,
            "eps_sw": self.eps_sw, "V": self.V,
        }


def key_budget(good, pi, profile, *, eps_s: float, eps_p: float, eps_sw: float,
               V: float = 0.0, c_eps: float | None = None,
               gap: MinEntropyGapInput | None = None) -> KeyBudget:
    """Assemble every budget term for one selection."""
    good = sorted(int(i) for i in good)
    I = np.asarray(getattr(profile, "I", profile), dtype=np.float64)
    n = I.size
    if c_eps is None:
        c_eps = c_epsilon(eps_p, gap)
    swc, b = swc_length(good, I, n, V, eps_sw)
    net, rate = ell_net(good, pi, I, b, c_eps)
    leak = leakage(good, pi, I)
    # smooth min-entropy of the hidden half: |G| - L minus the gap correction
    delta = c_eps - 2.0 * math.log2(1.0 / eps_p)
    ell = lhl_length(len(good) - leak - delta, eps_s, eps_p)
    # the floored key length caps the net budget
    net = min(net, float(ell))
    rate = net / n
    return KeyBudget(ell, swc, net, rate, leak, c_eps, eps_s, eps_p, eps_sw, b, V)
