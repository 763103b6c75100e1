"""Automorphisms of the polar transform.

A bit permutation ``sigma`` (length m, LSB at position 0) sends the label of
index ``i`` to the label whose bit ``j`` is bit ``sigma[j]`` of ``i``.  The
induced index permutation ``pi`` is a 0-based array; its matrix ``A`` has
``A[pi[j], j] = 1`` so that ``A e_j = e_{pi(j)}``.  Composition ``a * b`` means
``a(b(i))``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .polar_core import BitMatrix, PolarTransform

MAX_ENUM_STAGES = 8


@dataclass(frozen=True)
class BitPermutation:
    sigma: tuple[int, ...]

    def __post_init__(self):
        s = tuple(int(v) for v in self.sigma)
        if sorted(s) != list(range(len(s))):
            raise ValueError(f"{self.sigma!r} is not a bijection on [m]")
        object.__setattr__(self, "sigma", s)

    @classmethod
    def identity(cls, m: int) -> "BitPermutation":
        return cls(tuple(range(m)))

    @classmethod
    def from_msb_sources(cls, sources: Sequence[int]) -> "BitPermutation":
        """Build from the MSB-left listing ``[b_x b_y ...]`` used in reports."""
        return cls(tuple(reversed(list(sources))))

    @property
    def m(self) -> int:
        return len(self.sigma)

    def __mul__(self, other: "BitPermutation") -> "BitPermutation":
        # induced(self * other) == induced(self) * induced(other)
        return BitPermutation(tuple(other.sigma[s] for s in self.sigma))

    def inverse(self) -> "BitPermutation":
        inv = [0] * self.m
        for j, s in enumerate(self.sigma):
            inv[s] = j
        return BitPermutation(tuple(inv))

    def is_involution(self) -> bool:
        return all(self.sigma[s] == j for j, s in enumerate(self.sigma))

    def label(self) -> str:
        return "[" + " ".join(f"b{s}" for s in reversed(self.sigma)) + "]"

    def to_json(self) -> dict:
        return {"m": self.m, "sigma": list(self.sigma)}

    @classmethod
    def from_json(cls, obj: dict) -> "BitPermutation":
        perm = cls(tuple(obj["sigma"]))
        if "m" in obj and int(obj["m"]) != perm.m:
            raise ValueError("sigma length does not match m")
        return perm


@dataclass(frozen=True)
class IndexPermutation:
    pi: tuple[int, ...]

    def __post_init__(self):
        p = tuple(int(v) for v in self.pi)
        if sorted(p) != list(range(len(p))):
            raise ValueError("not a bijection")
        object.__setattr__(self, "pi", p)

    @classmethod
    def identity(cls, n: int) -> "IndexPermutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, cycles: Iterable[Sequence[int]], n: int, one_based: bool = False):
        p = list(range(n))
        off = 1 if one_based else 0
        seen = set()
        for cyc in cycles:
            c = [int(v) - off for v in cyc]
            if seen.intersection(c) or len(set(c)) != len(c):
                raise ValueError("cycles are not disjoint")
            seen.update(c)
            for a, b in zip(c, c[1:] + c[:1]):
                p[a] = b
        return cls(tuple(p))

    @property
    def n(self) -> int:
        return len(self.pi)

    def __call__(self, i: int) -> int:
        return self.pi[i]

    def __mul__(self, other: "IndexPermutation") -> "IndexPermutation":
        if self.n != other.n:
            raise ValueError("size mismatch")
        return IndexPermutation(tuple(self.pi[j] for j in other.pi))

    def inverse(self) -> "IndexPermutation":
        inv = [0] * self.n
        for i, p in enumerate(self.pi):
            inv[p] = i
        return IndexPermutation(tuple(inv))

    def power(self, k: int) -> "IndexPermutation":
        k %= self.order
        out = IndexPermutation.identity(self.n)
        for _ in range(k):
            out = self * out
        return out

    @cached_property
    def cycles(self) -> tuple[tuple[int, ...], ...]:
        seen = [False] * self.n
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cyc = []
            i = start
            while not seen[i]:
                seen[i] = True
                cyc.append(i)
                i = self.pi[i]
            out.append(tuple(cyc))
        return tuple(out)

    @property
    def cycle_lengths(self) -> list[int]:
        return [len(c) for c in self.cycles]

    @property
    def order(self) -> int:
        return math.lcm(*self.cycle_lengths) if self.n else 1

    def cycles_one_based(self, drop_fixed: bool = False) -> list[list[int]]:
        return [[i + 1 for i in c] for c in self.cycles if not (drop_fixed and len(c) == 1)]

    def matrix(self) -> BitMatrix:
        d = np.zeros((self.n, self.n), dtype=np.uint8)
        d[list(self.pi), range(self.n)] = 1
        return BitMatrix.from_dense(d)

    @classmethod
    def from_matrix(cls, P: BitMatrix) -> "IndexPermutation":
        if not P.is_permutation():
            raise ValueError("not a permutation matrix")
        return cls(tuple(int(v) for v in np.argmax(P.dense, axis=0)))

    def is_identity(self) -> bool:
        return self.pi == tuple(range(self.n))


def induced_index_perm(sigma: BitPermutation, m: int | None = None) -> IndexPermutation:
    """pi(i) = sum_j bit(i, sigma[j]) << j."""
    m = sigma.m if m is None else m
    if sigma.m != m:
        raise ValueError("sigma length must equal m")
    i = np.arange(1 << m, dtype=np.int64)
    out = np.zeros_like(i)
    for j, s in enumerate(sigma.sigma):
        out |= ((i >> s) & 1) << j
    return IndexPermutation(tuple(out.tolist()))


def is_automorphism(P: BitMatrix, T: PolarTransform | BitMatrix) -> bool:
    """True iff P^T T P = T over GF(2)."""
    M = T.matrix if isinstance(T, PolarTransform) else T
    if not P.is_permutation():
        raise ValueError("P is not a permutation matrix")
    if P.rows != M.rows:
        raise ValueError("size mismatch")
    p = np.argmax(P.dense, axis=0)
    # (P^T M P)[a, b] = M[p(a), p(b)]
    return bool(np.array_equal(M.dense[np.ix_(p, p)], M.dense))


def enumerate_aut(m: int) -> list[BitPermutation]:
    """All m! bit permutations in lexicographic one-line order."""
    if m > MAX_ENUM_STAGES:
        raise ValueError(f"enumeration capped at m={MAX_ENUM_STAGES}")
    return [BitPermutation(p) for p in itertools.permutations(range(m))]


def brute_force_aut(T: PolarTransform) -> list[IndexPermutation]:
    """Every index permutation p with P^T T P = T, by exhaustive search (n <= 8)."""
    if T.n > 8:
        raise ValueError("exhaustive search is limited to n <= 8")
    M = T.matrix.dense
    found = []
    for p in itertools.permutations(range(T.n)):
        if np.array_equal(M[np.ix_(p, p)], M):
            found.append(IndexPermutation(p))
    return found


def cycle_decompose(pi) -> IndexPermutation:
    arr = getattr(pi, "pi", pi)
    return IndexPermutation(tuple(int(v) for v in arr))


def perm_orbit(A: IndexPermutation) -> list[IndexPermutation]:
    """[A^0, A^1, ..., A^(N-1)]."""
    out = [IndexPermutation.identity(A.n)]
    for _ in range(A.order - 1):
        out.append(A * out[-1])
    return out


def centralizer_auts(sigma: BitPermutation, m: int | None = None) -> list[BitPermutation]:
    m = sigma.m if m is None else m
    return [tau for tau in enumerate_aut(m) if tau * sigma == sigma * tau]


def conjugate_perm(rho: IndexPermutation, alpha: IndexPermutation) -> IndexPermutation:
    """rho * alpha * rho^-1."""
    if rho.n != alpha.n:
        raise ValueError("size mismatch")
    return rho * alpha * rho.inverse()


def upo_leq(i: int, j: int, m: int) -> bool:
    """Majorization order on labels, prefix sums taken from the most significant bit.

    i <= j means every leading block of i's label carries no more ones than the
    same block of j's label, so bit-channel i is never better than j.
    """
    if not (0 <= i < (1 << m) and 0 <= j < (1 << m)):
        raise ValueError("index out of range")
    si = sj = 0
    for b in range(m - 1, -1, -1):
        si += (i >> b) & 1
        sj += (j >> b) & 1
        if si > sj:
            return False
    return True
