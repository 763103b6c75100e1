"""GF(2) bit matrices and the polar transform T = T0^{(x)m}.

Internal indices are 0-based; the binary label of index ``i`` is its m-bit
expansion, bit 0 being the least significant.  No bit-reversal is applied.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

MAX_STAGES = 16

T0 = np.array([[1, 0], [1, 1]], dtype=np.uint8)


class CapacityError(ValueError):
    """Requested object would exceed the supported size."""


def _pack(dense: np.ndarray) -> np.ndarray:
    rows, cols = dense.shape
    nwords = max(1, -(-cols // 64))
    padded = np.zeros((rows, nwords * 64), dtype=np.uint8)
    padded[:, :cols] = dense
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").reshape(rows, nwords)


def _unpack(words: np.ndarray, cols: int) -> np.ndarray:
    raw = np.ascontiguousarray(words.astype("<u8")).view(np.uint8)
    bits = np.unpackbits(raw, axis=1, bitorder="little")
    return bits[:, :cols]


class BitMatrix:
    """Immutable GF(2) matrix stored as row-major 64-bit words.

    Column ``c`` of a row lives in word ``c // 64`` at bit ``c % 64``.
    """

    __slots__ = ("rows", "cols", "words", "__dict__")

    def __init__(self, rows: int, cols: int, words: np.ndarray):
        words = np.asarray(words, dtype=np.uint64)
        if words.shape != (rows, max(1, -(-cols // 64))):
            raise ValueError("word array does not match the declared shape")
        words = words.copy()
        words.flags.writeable = False
        self.rows = rows
        self.cols = cols
        self.words = words

    @classmethod
    def from_dense(cls, dense) -> "BitMatrix":
        a = np.asarray(dense)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("entries must be 0 or 1")
        a = a.astype(np.uint8)
        return cls(a.shape[0], a.shape[1], _pack(a))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls.from_dense(np.eye(n, dtype=np.uint8))

    @cached_property
    def dense(self) -> np.ndarray:
        d = _unpack(self.words, self.cols)
        d.flags.writeable = False
        return d

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.words, other.words)

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"

    def __matmul__(self, other: "BitMatrix") -> "BitMatrix":
        if self.cols != other.rows:
            raise ValueError("dimension mismatch")
        # float64 BLAS is exact here: every partial sum is at most n <= 2^16
        prod = self.dense.astype(np.float64) @ other.dense.astype(np.float64)
        return BitMatrix.from_dense(np.fmod(prod, 2.0).astype(np.uint8))

    @property
    def T(self) -> "BitMatrix":
        return BitMatrix.from_dense(self.dense.T)

    def permute_rows(self, order: Sequence[int]) -> "BitMatrix":
        """Return the matrix whose row ``r`` is row ``order[r]`` of ``self``."""
        return BitMatrix(self.rows, self.cols, self.words[np.asarray(order)])

    def permute_cols(self, order: Sequence[int]) -> "BitMatrix":
        """Return the matrix whose column ``c`` is column ``order[c]`` of ``self``."""
        return BitMatrix.from_dense(self.dense[:, np.asarray(order)])

    def is_permutation(self) -> bool:
        d = self.dense
        return (
            self.rows == self.cols
            and bool(np.all(d.sum(axis=0) == 1))
            and bool(np.all(d.sum(axis=1) == 1))
        )

    def to_base64(self) -> str:
        """Row-major bits, each row padded to whole 64-bit little-endian words."""
        return base64.b64encode(self.words.astype("<u8").tobytes()).decode("ascii")

    @classmethod
    def from_base64(cls, text: str, rows: int, cols: int | None = None) -> "BitMatrix":
        cols = rows if cols is None else cols
        raw = base64.b64decode(text.encode("ascii"), validate=True)
        nwords = max(1, -(-cols // 64))
        if len(raw) != rows * nwords * 8:
            raise ValueError("base64 payload has the wrong length")
        words = np.frombuffer(raw, dtype="<u8").reshape(rows, nwords)
        if cols % 64 and np.any(words[:, -1] >> np.uint64(cols % 64)):
            raise ValueError("padding bits must be zero")
        return cls(rows, cols, words)


@dataclass(frozen=True)
class PolarTransform:
    m: int
    n: int
    matrix: BitMatrix


def build_transform(m: int) -> PolarTransform:
    """Return T0^{(x)m}; entry (x, y) is 1 iff y is bit-wise below x."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if m > MAX_STAGES:
        raise CapacityError(f"m={m} exceeds the supported maximum {MAX_STAGES}")
    n = 1 << m
    y = np.arange(n, dtype=np.int64)
    nwords = max(1, -(-n // 64))
    words = np.empty((n, nwords), dtype=np.uint64)
    step = max(1, (1 << 22) // n)
    for start in range(0, n, step):
        x = np.arange(start, min(n, start + step), dtype=np.int64)[:, None]
        words[start:start + x.shape[0]] = _pack(((y[None, :] & ~x) == 0).astype(np.uint8))
    return PolarTransform(m, n, BitMatrix(n, n, words))


def gf2_encode(u, F: BitMatrix) -> np.ndarray:
    """Row vector times matrix over GF(2): XOR of the rows of F selected by u."""
    u = np.asarray(u)
    if u.shape != (F.rows,):
        raise ValueError(f"u has shape {u.shape}, expected ({F.rows},)")
    acc = np.bitwise_xor.reduce(F.words[u.astype(bool)], axis=0) if u.any() else np.zeros(
        F.words.shape[1], dtype=np.uint64
    )
    return _unpack(acc[None, :], F.cols)[0]


def polar_encode(u) -> np.ndarray:
    """Fast u*T for a batch of rows (shape (..., n)) by butterflies."""
    x = np.array(u, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = n // 2
    while h >= 1:
        v = x.reshape(x.shape[:-1] + (n // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h //= 2
    return x


def _as_bits(label, m: int | None) -> tuple[int, ...]:
    if isinstance(label, (int, np.integer)):
        if m is None:
            m = max(1, int(label).bit_length())
        return tuple((int(label) >> b) & 1 for b in range(m))
    return tuple(int(b) for b in label)


def order_indicator(x, y, m: int | None = None) -> int:
    """1 iff y <= x bit-wise.  Labels are ints or equal-length bit sequences."""
    if isinstance(x, (int, np.integer)) and isinstance(y, (int, np.integer)):
        return int((int(y) & ~int(x)) == 0)
    bx, by = _as_bits(x, m), _as_bits(y, m)
    if len(bx) != len(by):
        raise ValueError("labels must have the same length")
    return int(all(b <= a for a, b in zip(bx, by)))


def _perm_array(perm) -> np.ndarray:
    return np.asarray(getattr(perm, "pi", perm), dtype=np.int64)


def apply_index_perm(v, perm) -> np.ndarray:
    """Move entries: output position perm(i) holds input position i."""
    v = np.asarray(v)
    p = _perm_array(perm)
    if v.shape[-1] != p.size:
        raise ValueError("size mismatch")
    out = np.empty_like(v)
    out[..., p] = v
    return out


def apply_index_perm_inv(v, perm) -> np.ndarray:
    """Inverse of :func:`apply_index_perm`: output position i holds input perm(i)."""
    v = np.asarray(v)
    p = _perm_array(perm)
    if v.shape[-1] != p.size:
        raise ValueError("size mismatch")
    return v[..., p]
