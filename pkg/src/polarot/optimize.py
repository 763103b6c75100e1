"""OT-rate optimization over bit permutations.

For a fixed sigma the inner problem picks the k eligible indices of largest
weight w_i = (I_i - I_pi(i))/2; the outer problem maximizes the resulting sum
s(sigma) over a candidate list of permutations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .autgroup import BitPermutation, IndexPermutation, enumerate_aut, induced_index_perm
from .construct import MiProfile, mi_profile, reliability_order
from .privacy import half_gap_sum


class InfeasibleError(ValueError):
    """No cross-cut selection of the requested size exists."""


@dataclass(frozen=True)
class OtSelection:
    sigma: BitPermutation
    pi: IndexPermutation
    good_sel: tuple[int, ...]
    bad_sel: tuple[int, ...]
    k: int
    s: float

    @property
    def ot_indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.good_sel + self.bad_sel))

    @property
    def n(self) -> int:
        return self.pi.n

    @property
    def rate(self) -> float:
        return self.s / self.n

    def to_json(self, snr: float | None = None) -> dict:
        """Report form; indices are 1-based."""
        out = {
            "schema": 1,
            "m": self.sigma.m,
            "sigma": list(self.sigma.sigma),
            "sigma_label": self.sigma.label(),
            "pi_cycles": self.pi.cycles_one_based(drop_fixed=True),
            "good_sel": [i + 1 for i in self.good_sel],
            "bad_sel": [i + 1 for i in self.bad_sel],
            "k": self.k,
            "s": self.s,
            "rate": self.rate,
        }
        if snr is not None:
            out["snr"] = snr
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "OtSelection":
        sigma = BitPermutation(tuple(obj["sigma"]))
        pi = induced_index_perm(sigma)
        good = tuple(int(i) - 1 for i in obj["good_sel"])
        bad = tuple(int(i) - 1 for i in obj["bad_sel"])
        if tuple(pi(i) for i in good) != bad:
            raise ValueError("bad_sel is not the image of good_sel under pi")
        return cls(sigma, pi, good, bad, len(good), float(obj.get("s", math.nan)))


def _as_index_perm(sigma, n: int) -> IndexPermutation:
    if isinstance(sigma, IndexPermutation):
        return sigma
    perm = induced_index_perm(sigma)
    if perm.n != n:
        raise ValueError("permutation size does not match the profile")
    return perm


def weights(sigma, profile: MiProfile | np.ndarray) -> np.ndarray:
    """w_i = (I_i - I_pi(i)) / 2."""
    I = np.asarray(getattr(profile, "I", profile), dtype=np.float64)
    pi = np.asarray(_as_index_perm(sigma, I.size).pi)
    return 0.5 * (I - I[pi])


Partition = tuple[frozenset, frozenset]


def top_half_partition(profile) -> Partition:
    rel = reliability_order(profile)
    return rel.good_tilde, rel.bad_tilde


def canonical_partition(n: int) -> Partition:
    """Upper half of the index range as the good candidates."""
    return frozenset(range(n // 2, n)), frozenset(range(n // 2))


def eligible_set(sigma, profile, partition: Partition | None = None) -> tuple[int, ...]:
    """{i in good candidates : pi(i) in bad candidates}."""
    I = np.asarray(getattr(profile, "I", profile))
    good, bad = partition if partition is not None else top_half_partition(I)
    pi = _as_index_perm(sigma, I.size)
    return tuple(sorted(i for i in good if pi(i) in bad))


def inner_topk(sigma, profile, k: int, partition: Partition | None = None) -> OtSelection:
    """Max-k rule: the k largest weights over the eligible set, ties to the smaller index."""
    I = np.asarray(getattr(profile, "I", profile), dtype=np.float64)
    if isinstance(sigma, IndexPermutation):
        raise TypeError("pass a BitPermutation so the selection records sigma")
    if k < 0:
        raise ValueError("k must be non-negative")
    pi = _as_index_perm(sigma, I.size)
    elig = eligible_set(pi, I, partition)
    if len(elig) < k:
        raise InfeasibleError(f"only {len(elig)} eligible indices for k={k}")
    w = weights(pi, I)
    ranked = sorted(elig, key=lambda i: (-w[i], i))
    good = tuple(sorted(ranked[:k]))
    bad = tuple(pi(i) for i in good)
    return OtSelection(sigma, pi, good, bad, k, half_gap_sum(good, pi, I))


def stage_transpositions(m: int) -> list[BitPermutation]:
    out = []
    for j in range(m - 1):
        s = list(range(m))
        s[j], s[j + 1] = s[j + 1], s[j]
        out.append(BitPermutation(tuple(s)))
    return out


def _random_involution(m: int, rng: np.random.Generator) -> BitPermutation:
    s = list(range(m))
    free = [int(v) for v in rng.permutation(m)]
    while len(free) >= 2:
        if rng.random() < 0.5:
            a, b = free.pop(), free.pop()
            s[a], s[b] = b, a
        else:
            free.pop()
    return BitPermutation(tuple(s))


def candidate_perms(m: int, perm_limit: int | None = None, seed: int = 0,
                    involutions_only: bool = False) -> list[BitPermutation]:
    """Exhaustive S_m up to m=8, otherwise a seeded sample plus adjacent transpositions."""
    if m <= 8 and (perm_limit is None or perm_limit >= math.factorial(m)):
        out = enumerate_aut(m)
    else:
        limit = 1000 if perm_limit is None else perm_limit
        rng = np.random.default_rng(seed)
        seen: dict[tuple, BitPermutation] = {}
        for t in stage_transpositions(m):
            seen.setdefault(t.sigma, t)
        tries = 0
        while len(seen) < limit and tries < 50 * limit:
            tries += 1
            if involutions_only:
                p = _random_involution(m, rng)
            else:
                p = BitPermutation(tuple(int(v) for v in rng.permutation(m)))
            seen.setdefault(p.sigma, p)
        out = list(seen.values())
    if involutions_only:
        out = [p for p in out if p.is_involution()]
    return out


@dataclass(frozen=True)
class SearchResult:
    best: OtSelection
    evaluated: int
    feasible: int

    @property
    def rate(self) -> float:
        return self.best.rate


def outer_search(m: int, snr: float | None = None, k: int = 1, perm_limit: int | None = None,
                 *, seed: int = 0, profile: MiProfile | None = None,
                 candidates: Sequence[BitPermutation] | None = None,
                 involutions_only: bool = False,
                 partition: Partition | None = None) -> SearchResult:
    """Maximize s(sigma) over candidates; ties keep the earliest candidate."""
    if profile is None:
        if snr is None:
            raise ValueError("give snr or a profile")
        profile = mi_profile(m, snr)
    if candidates is None:
        candidates = candidate_perms(m, perm_limit, seed, involutions_only)
    best = None
    feasible = 0
    for sigma in candidates:
        try:
            sel = inner_topk(sigma, profile, k, partition)
        except InfeasibleError:
            continue
        feasible += 1
        if best is None or sel.s > best.s:
            best = sel
    if best is None:
        raise InfeasibleError("no feasible permutation among the candidates")
    return SearchResult(best, len(candidates), feasible)


def brute_force_best(sigma: BitPermutation, profile, k: int,
                     partition: Partition | None = None) -> float:
    """Exhaustive max of the half-gap sum over k-subsets satisfying the cross-cut constraints."""
    I = np.asarray(getattr(profile, "I", profile), dtype=np.float64)
    pi = _as_index_perm(sigma, I.size)
    good, bad = partition if partition is not None else top_half_partition(I)
    best = -math.inf
    for sub in itertools.combinations(sorted(good), k):
        if all(pi(i) in bad for i in sub):
            best = max(best, half_gap_sum(sub, pi, I))
    if best == -math.inf:
        raise InfeasibleError("no feasible subset")
    return best


def is_crosscut(sel: OtSelection, partition: Partition) -> bool:
    good, bad = partition
    g, b = set(sel.good_sel), set(sel.bad_sel)
    return (
        len(g) == len(b) == sel.k
        and g <= good
        and b <= bad
        and not (g & b)
        and all(sel.pi(i) in b for i in g)
    )


def involutive_on(sel: OtSelection) -> bool:
    """True when pi maps the bad selection back onto the good one."""
    return tuple(sorted(sel.pi(i) for i in sel.bad_sel)) == tuple(sorted(sel.good_sel))


def selection_from_sets(sigma: BitPermutation, good: Iterable[int], profile) -> OtSelection:
    I = np.asarray(getattr(profile, "I", profile), dtype=np.float64)
    pi = induced_index_perm(sigma)
    good = tuple(sorted(int(i) for i in good))
    return OtSelection(sigma, pi, good, tuple(pi(i) for i in good), len(good),
                       half_gap_sum(good, pi, I))
