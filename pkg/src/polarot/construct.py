"""Gaussian-approximation construction of bit-channel profiles.

Each index is reached from the channel LLR through one f+/f- step per label
bit, the most significant bit acting first (it is the top-level split of
``u*T``).  SNR is linear, ``snr = 1/noise_var`` with unit-energy BPSK, so the
channel LLR has sigma = 2*sqrt(snr).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autgroup import IndexPermutation

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(128)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2.0 * math.pi)

SIGMA_MAX = 60.0
_BISECT_STEPS = 80


def j_fun(sigma):
    """J(sigma) = 1 - E[log2(1 + e^-L)], L ~ N(sigma^2/2, sigma^2)."""
    s = np.asarray(sigma, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("sigma must be non-negative")
    L = 0.5 * s[..., None] ** 2 + s[..., None] * _GH_NODES
    val = 1.0 - (np.logaddexp(0.0, -L) @ _GH_WEIGHTS) / math.log(2.0)
    val = np.clip(val, 0.0, 1.0)
    return float(val) if np.ndim(val) == 0 else val


def j_inv(info):
    """Inverse of :func:`j_fun` by bisection on [0, 60]."""
    I = np.asarray(info, dtype=np.float64)
    if np.any((I < 0) | (I > 1)) or np.any(np.isnan(I)):
        raise ValueError("mutual information must lie in [0, 1]")
    lo = np.zeros_like(I)
    hi = np.full_like(I, SIGMA_MAX)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        below = np.asarray(j_fun(mid)) < I
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = np.where(I <= 0.0, 0.0, 0.5 * (lo + hi))
    return float(out) if np.ndim(out) == 0 else out


def f_plus(info):
    """Check-free (better) child: J(sqrt(2) J^-1(I))."""
    return j_fun(math.sqrt(2.0) * np.asarray(j_inv(info)))


def f_minus(info):
    """Check-node (worse) child: 1 - J(sqrt(2) J^-1(1 - I))."""
    I = np.asarray(info, dtype=np.float64)
    out = 1.0 - np.asarray(j_fun(math.sqrt(2.0) * np.asarray(j_inv(1.0 - I))))
    return float(out) if out.ndim == 0 else out


def snr_to_i0(snr: float) -> float:
    return j_fun(2.0 * math.sqrt(snr))


def i0_to_snr(i0: float) -> float:
    """Linear SNR whose channel MI under the GA equals ``i0``."""
    return (j_inv(i0) / 2.0) ** 2


def _polarize(seed: float, m: int, minus, plus) -> np.ndarray:
    vals = np.array([seed], dtype=np.float64)
    for _ in range(m):
        nxt = np.empty(2 * vals.size)
        nxt[0::2] = minus(vals)
        nxt[1::2] = plus(vals)
        vals = nxt
    return vals


def ga_mi_profile(m: int, snr: float | None = None, *, i0: float | None = None) -> np.ndarray:
    """Per-index GA mutual information, 0-based.  Give ``snr`` or the seed MI ``i0``."""
    if (snr is None) == (i0 is None):
        raise ValueError("give exactly one of snr and i0")
    if i0 is None:
        if snr <= 0:
            raise ValueError("snr must be positive")
        i0 = snr_to_i0(snr)
    return np.clip(_polarize(float(i0), m, f_minus, f_plus), 0.0, 1.0)


def z_profile(m: int, snr: float) -> np.ndarray:
    """Bhattacharyya upper bounds: Z0 = exp(-snr), Z+ = Z^2, Z- = 2Z - Z^2."""
    if snr <= 0:
        raise ValueError("snr must be positive")
    return np.clip(
        _polarize(math.exp(-snr), m, lambda z: 2.0 * z - z * z, lambda z: z * z), 0.0, 1.0
    )


@dataclass(frozen=True)
class MiProfile:
    m: int
    n: int
    snr: float
    I: np.ndarray
    Z: np.ndarray


def mi_profile(m: int, snr: float | None = None, *, i0: float | None = None) -> MiProfile:
    if snr is None:
        snr = i0_to_snr(i0)
    I = ga_mi_profile(m, snr=snr) if i0 is None else ga_mi_profile(m, i0=i0)
    Z = z_profile(m, snr)
    I.flags.writeable = False
    Z.flags.writeable = False
    return MiProfile(m, 1 << m, float(snr), I, Z)


def default_gamma(n: int) -> float:
    """gamma_n = 2^(-n^0.3), clipped to [1e-6, 0.25]."""
    return float(min(0.25, max(1e-6, 2.0 ** (-(n ** 0.3)))))


@dataclass(frozen=True)
class GoodBadSets:
    gamma: float
    good: tuple[int, ...]
    bad: tuple[int, ...]


def good_bad_sets(profile: MiProfile, gamma: float) -> GoodBadSets:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    I = profile.I
    good = tuple(int(i) for i in np.flatnonzero(I >= 1.0 - gamma))
    bad = tuple(int(i) for i in np.flatnonzero(I <= gamma) if i not in set(good))
    return GoodBadSets(float(gamma), good, bad)


@dataclass(frozen=True)
class RelabelMap:
    order_real: tuple[int, ...]
    pi_rel: IndexPermutation
    good_tilde: frozenset
    bad_tilde: frozenset


def reliability_order(profile: MiProfile | np.ndarray) -> RelabelMap:
    """Sort by decreasing MI, ties to the smaller index; top half is the good candidate set."""
    I = np.asarray(getattr(profile, "I", profile))
    n = I.size
    order = tuple(int(i) for i in np.lexsort((np.arange(n), -I)))
    rel = [0] * n
    for t, i in enumerate(order):
        rel[i] = n - 1 - t
    half = n // 2
    return RelabelMap(
        order_real=order,
        pi_rel=IndexPermutation(tuple(rel)),
        good_tilde=frozenset(order[:half]),
        bad_tilde=frozenset(order[half:]),
    )


def mc_bit_channel_mi(m: int, snr: float, trials: int, seed: int = 0) -> np.ndarray:
    """Monte-Carlo genie-aided MI I(U_i; Y, U^{i-1}) from exact SC likelihoods."""
    from .channel import ChannelParams, gaussian, llr_map, modulate, substream
    from .polar_core import polar_encode
    from .scdec import FrozenSpec, sc_decode

    n = 1 << m
    rng = substream(seed, 0)
    u = rng.integers(0, 2, size=(trials, n), dtype=np.uint8)
    params = ChannelParams(snr)
    y = modulate(polar_encode(u)) + gaussian(rng, trials * n).reshape(trials, n) / math.sqrt(snr)
    res = sc_decode(llr_map(y, params), FrozenSpec.from_unfrozen(n, range(n)), genie=u)
    signed = (1.0 - 2.0 * u) * res.hard_llr_signs
    return 1.0 - np.mean(np.logaddexp(0.0, -signed), axis=0) / math.log(2.0)
