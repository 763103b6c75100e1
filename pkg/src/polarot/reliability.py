"""Reliability certification: Clopper-Pearson bounds, Monte-Carlo harness, union bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .channel import ChannelParams, gaussian, llr_map, modulate, substream
from .polar_core import polar_encode
from .scdec import FrozenSpec, sc_decode

_TINY = 1e-300


def _betacf(a: float, b: float, x: float, tol: float = 1e-14, max_iter: int = 10000) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def binom_cdf(k: int, M: int, p: float) -> float:
    """P[Binomial(M, p) <= k]."""
    if k < 0:
        return 0.0
    if k >= M:
        return 1.0
    return 1.0 - reg_inc_beta(p, k + 1, M - k)


@dataclass(frozen=True)
class CpQuery:
    k: int
    M: int
    delta: float

    def __post_init__(self):
        if not 0 <= self.k <= self.M:
            raise ValueError("need 0 <= k <= M")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


def cp_upper(k, M: int | None = None, delta: float | None = None) -> float:
    """One-sided Clopper-Pearson upper limit: the u with F(k; M, u) = delta."""
    q = k if isinstance(k, CpQuery) else CpQuery(int(k), int(M), float(delta))
    if q.k == q.M:
        return 1.0
    if q.k == 0:
        # F(0; u) = (1-u)^M has a closed form
        return -math.expm1(math.log(q.delta) / q.M)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if binom_cdf(q.k, q.M, mid) > q.delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(hi, 1e-300) or hi - lo < 5e-324:
            break
    return hi


@dataclass(frozen=True)
class ReliabilityQuery:
    S_b: tuple[int, ...]
    R_b: tuple[int, ...]

    @property
    def i_star(self) -> int:
        return max(self.S_b)

    @property
    def prefix_set(self) -> tuple[int, ...]:
        if not self.S_b:
            return ()
        return tuple(sorted(i for i in set(self.S_b) | set(self.R_b) if i <= self.i_star))


def union_bound_prefix(rq: ReliabilityQuery, z) -> float:
    """Sum of Bhattacharyya parameters over the unfrozen indices up to max(S_b)."""
    Z = np.asarray(getattr(z, "Z", z), dtype=np.float64)
    return math.fsum(float(Z[i]) for i in rq.prefix_set)


@dataclass(frozen=True)
class McResult:
    trials: int
    errors: int
    p_hat: float
    cp_upper: float
    bit_errors: np.ndarray  # per-index error counts over S_b


def simulate_sets(m: int, hash_set: Iterable[int], random_set: Iterable[int],
                  params: ChannelParams, trials: int, seed: int, *,
                  batch: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Encode random bits on both sets, send over the channel, SC-decode.

    Returns (per-trial error flag on the hash set, per-trial per-index
    errors on the hash set).  Trial ``t`` draws from substream(seed, t).
    """
    n = 1 << m
    hs = np.array(sorted(hash_set), dtype=np.int64)
    rs = np.array(sorted(random_set), dtype=np.int64)
    if np.intersect1d(hs, rs).size:
        raise ValueError("hash and random sets overlap")
    unfrozen = np.union1d(hs, rs)
    spec = FrozenSpec.from_unfrozen(n, unfrozen)
    flags = np.zeros(trials, dtype=bool)
    per_bit = np.zeros((trials, hs.size), dtype=bool)
    for start in range(0, trials, batch):
        stop = min(trials, start + batch)
        u = np.zeros((stop - start, n), dtype=np.uint8)
        noise = np.empty((stop - start, n))
        for r, t in enumerate(range(start, stop)):
            g = substream(seed, t)
            # noise and hash bits first so they do not depend on the random set
            noise[r] = gaussian(g, n)
            u[r, hs] = g.integers(0, 2, size=hs.size, dtype=np.uint8)
            u[r, rs] = g.integers(0, 2, size=rs.size, dtype=np.uint8)
        y = modulate(polar_encode(u)) + noise * math.sqrt(params.noise_var)
        u_hat = sc_decode(llr_map(y, params), spec).u_hat
        wrong = u_hat[:, hs] != u[:, hs]
        per_bit[start:stop] = wrong
        flags[start:stop] = wrong.any(axis=1)
    return flags, per_bit


def mc_hash_input_error(selection, params: ChannelParams, trials: int, seed: int,
                        delta: float = 1e-6) -> McResult:
    """Hash-input error count with S_b = good_sel and random bits on bad_sel."""
    m = selection.sigma.m
    flags, per_bit = simulate_sets(m, selection.good_sel, selection.bad_sel, params,
                                   trials, seed)
    k = int(flags.sum())
    return McResult(trials, k, k / trials, cp_upper(k, trials, delta), per_bit.sum(axis=0))
