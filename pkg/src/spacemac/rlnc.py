"""Generation-based random linear network coding over GF(2^8).

Packets are ``uint8`` vectors of length ``n + m``: ``n`` payload symbols followed
by the ``m`` global coding coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gf
from .mac import space_id


class InsufficientRank(Exception):
    def __init__(self, rank: int, needed: int):
        super().__init__(f"rank {rank} of {needed}")
        self.rank = rank
        self.needed = needed


class InconsistentSystem(ValueError):
    """Received packets cannot all come from one source space."""


@dataclass(frozen=True)
class Generation:
    id: bytes
    payloads: np.ndarray  # m x n
    packets: np.ndarray  # m x (n + m), packet i ends with e_i

    @property
    def n(self) -> int:
        return self.payloads.shape[1]

    @property
    def m(self) -> int:
        return self.payloads.shape[0]

    def basis(self) -> gf.Basis:
        return gf.Basis.from_vectors(self.packets, self.n + self.m)


def augment(payloads, sid) -> Generation:
    payloads = np.asarray(payloads, dtype=np.uint8)
    if payloads.ndim != 2 or payloads.shape[0] < 1 or payloads.shape[1] < 1:
        raise ValueError(f"expected an m x n payload matrix, got shape {payloads.shape}")
    m = payloads.shape[0]
    packets = np.hstack([payloads, np.eye(m, dtype=np.uint8)])
    payloads = payloads.copy()
    payloads.setflags(write=False)
    packets.setflags(write=False)
    return Generation(space_id(sid), payloads, packets)


def coefficients(y: np.ndarray, m: int) -> np.ndarray:
    return y[len(y) - m:]


def recode(buffer, coeffs) -> np.ndarray:
    buffer = list(buffer)
    if not buffer:
        raise ValueError("cannot recode an empty buffer")
    if len({len(p) for p in buffer}) != 1:
        raise ValueError("packets in a buffer must have equal length")
    return gf.combine(coeffs, np.stack(buffer))


def decode(packets, m: int) -> np.ndarray:
    """Recover the ``m`` source payloads by Gaussian elimination.

    Raises :class:`InconsistentSystem` if the packets span a vector with a zero
    coefficient part but nonzero payload, and :class:`InsufficientRank` if the
    coefficient part has rank below ``m``.
    """
    packets = [np.asarray(p, dtype=np.uint8) for p in packets]
    if not packets:
        raise InsufficientRank(0, m)
    length = len(packets[0])
    n = length - m
    # coefficients first, so pivots land there before they reach the payload
    b = gf.Basis.from_vectors((np.concatenate([p[n:], p[:n]]) for p in packets), length)
    if b.pivots and b.pivots[-1] >= m:
        raise InconsistentSystem("received packets are not from a single source space")
    if b.dim < m:
        raise InsufficientRank(b.dim, m)
    return b.rows[:, m:].copy()


def in_source_space(g: Generation, y: np.ndarray) -> bool:
    """Membership in the source space read off the global coefficients.

    Since source packet ``i`` ends in ``e_i``, ``y`` is in the source space iff its
    payload equals the payload combination named by its own coefficients.
    """
    y = np.asarray(y, dtype=np.uint8)
    if len(y) != g.n + g.m:
        raise ValueError(f"expected length {g.n + g.m}, got {len(y)}")
    c = y[g.n:]
    expected = gf.combine(c, g.payloads)
    return bool(np.array_equal(expected, y[:g.n]))


def sample_space(packets, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform random combination of ``packets``; returns the vector and its coefficients."""
    packets = list(packets)
    if not packets:
        raise ValueError("cannot sample from an empty set of packets")
    alphas = rng.integers(0, 256, size=len(packets), dtype=np.uint8)
    return recode(packets, alphas), alphas
