"""Arithmetic over GF(2^8) and the linear algebra built on it.

Elements are plain ``int`` values in ``[0, 255]``; vectors are 1-D ``numpy.uint8``
arrays. Multiplication goes through a 256x256 product table (64 KiB) that is
built once at import time from the AES reduction polynomial.
"""
from __future__ import annotations

import numpy as np

POLY = 0x11B
ORDER = 256


def _mul_bitwise(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= POLY
    return r


def _build_tables():
    # exp/log over the generator 0x03, then the full product table from them
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = _mul_bitwise(x, 0x03)
    exp[255:510] = exp[0:255]
    la = log[:, None] + log[None, :]
    mul = exp[la].astype(np.uint8)
    mul[0, :] = 0
    mul[:, 0] = 0
    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[255 - log[1:]]
    mul.setflags(write=False)
    inv.setflags(write=False)
    return mul, inv


MUL, INV = _build_tables()


def add(a: int, b: int) -> int:
    return a ^ b


def mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("no inverse")
    return int(INV[a])


def vector(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.uint8)
    if v.ndim != 1:
        raise ValueError("a field vector must be one-dimensional")
    return v


def random_vector(rng: np.random.Generator, length: int) -> np.ndarray:
    return rng.integers(0, ORDER, size=length, dtype=np.uint8)


def scale(c: int, v: np.ndarray) -> np.ndarray:
    return MUL[c][v]


def dot(u: np.ndarray, v: np.ndarray) -> int:
    if len(u) != len(v):
        raise ValueError(f"length mismatch: {len(u)} != {len(v)}")
    return int(np.bitwise_xor.reduce(MUL[u, v])) if len(u) else 0


def matvec(w: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise dot products of ``w`` (k x N) with ``y`` (N,)."""
    if w.shape[-1] != len(y):
        raise ValueError(f"length mismatch: {w.shape[-1]} != {len(y)}")
    return np.bitwise_xor.reduce(MUL[w, y[None, :]], axis=1)


def combine(coeffs, rows: np.ndarray) -> np.ndarray:
    """Linear combination sum_i coeffs[i] * rows[i]."""
    coeffs = np.asarray(coeffs, dtype=np.uint8)
    rows = np.asarray(rows, dtype=np.uint8)
    if len(coeffs) != len(rows):
        raise ValueError("need one coefficient per row")
    if len(rows) == 0:
        raise ValueError("nothing to combine")
    return np.bitwise_xor.reduce(MUL[coeffs[:, None], rows], axis=0)


_ROWS = [bytes(row) for row in MUL.tolist()]


def combine_scalar(coeffs, rows) -> bytes:
    """:func:`combine` as a plain loop, for a few short rows such as tags.

    Skips array overhead, which dominates when the whole job is a dozen products.
    """
    if len(coeffs) != len(rows):
        raise ValueError("need one coefficient per row")
    if not len(rows):
        raise ValueError("nothing to combine")
    acc = bytearray(len(rows[0]))
    for c, row in zip(coeffs, rows):
        table = _ROWS[c]
        for j, x in enumerate(row):
            acc[j] ^= table[x]
    return bytes(acc)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over GF(2^8); ``a`` is (r x k), ``b`` is (k x c)."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape[1] != b.shape[0]:
        raise ValueError("inner dimensions differ")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    for i in range(a.shape[1]):
        out ^= MUL[a[:, i, None], b[None, i, :]]
    return out


class Basis:
    """Reduced row-echelon basis of a subspace of GF(2^8)^length.

    Rows are kept sorted by pivot column and every pivot column is zero in all
    other rows, so membership is a single reduction pass.
    """

    def __init__(self, length: int):
        self.length = length
        self.rows = np.zeros((0, length), dtype=np.uint8)
        self.pivots: list[int] = []

    @property
    def dim(self) -> int:
        return len(self.pivots)

    def __len__(self):
        return self.dim

    def copy(self) -> "Basis":
        b = Basis(self.length)
        b.rows = self.rows.copy()
        b.pivots = list(self.pivots)
        return b

    def reduce(self, v: np.ndarray) -> np.ndarray:
        """Residual of ``v`` after eliminating every pivot column."""
        if len(v) != self.length:
            raise ValueError(f"length mismatch: {len(v)} != {self.length}")
        r = np.array(v, dtype=np.uint8)
        if self.pivots:
            c = r[self.pivots]
            nz = np.nonzero(c)[0]
            if len(nz):
                r ^= np.bitwise_xor.reduce(MUL[c[nz, None], self.rows[nz]], axis=0)
        return r

    def contains(self, v: np.ndarray) -> bool:
        return not self.reduce(v).any()

    def insert(self, v: np.ndarray) -> bool:
        """Add ``v`` to the span; return True iff the dimension grew."""
        r = self.reduce(v)
        nz = np.flatnonzero(r)
        if not len(nz):
            return False
        p = int(nz[0])
        r = MUL[INV[r[p]]][r]
        col = self.rows[:, p]
        hit = np.nonzero(col)[0]
        if len(hit):
            self.rows[hit] ^= MUL[col[hit, None], r[None, :]]
        k = int(np.searchsorted(self.pivots, p))
        self.rows = np.insert(self.rows, k, r, axis=0)
        self.pivots.insert(k, p)
        return True

    def extend(self, vectors) -> int:
        return sum(self.insert(v) for v in vectors)

    @classmethod
    def from_vectors(cls, vectors, length: int | None = None) -> "Basis":
        vectors = list(vectors)
        if length is None:
            length = len(vectors[0])
        b = cls(length)
        b.extend(vectors)
        return b


def rank(vectors, length: int | None = None) -> int:
    vectors = list(vectors)
    if not vectors:
        return 0
    return Basis.from_vectors(vectors, length).dim


def insert(basis: Basis, v: np.ndarray) -> tuple[Basis, bool]:
    """Functional form of :meth:`Basis.insert`; the input basis is left untouched."""
    b = basis.copy()
    return b, b.insert(v)


def contains(basis: Basis, v: np.ndarray) -> bool:
    return basis.contains(v)
