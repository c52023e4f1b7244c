"""SpaceMac: a homomorphic MAC for expanding subspaces of GF(2^8)^(n+m).

A tag of ``y`` under key ``(k1, k2)`` for space ``id`` is

    t = r . y + sum_j y[n+j] * F(k2, id, j)

with ``r = G(k1)``. Tags of vectors combine linearly, so anyone holding tags of
``y_1..y_p`` can produce the tag of any linear combination without the key,
while a tag for a vector outside that span can only be guessed (probability 1/q
per instance). ``l`` parallel instances give forgery probability q^-l.

PRF and PRG are both built from AES-128:

* ``F(k2, id, j, inst)`` = first byte of AES_k2(id[8] || j[4] || inst[2] || 00 00)
* ``G(k1, len)`` = first ``len`` bytes of AES_k1 in counter mode over blocks
  ``0^8 || ctr[8]`` with ``ctr`` starting at 0.

Instance ``i > 0`` uses PRG seed ``AES_k1(ff^8 || i[8])``; instance 0 uses ``k1``.
"""
from __future__ import annotations

import functools
import os
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from . import gf

KEY_BYTES = 16
ID_BYTES = 8


@dataclass(frozen=True)
class MacKey:
    k1: bytes
    k2: bytes

    def __post_init__(self):
        if len(self.k1) != KEY_BYTES or len(self.k2) != KEY_BYTES:
            raise ValueError("MacKey components must be 16 bytes each")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "MacKey":
        if len(raw) != 2 * KEY_BYTES:
            raise ValueError("a serialized MacKey is 32 bytes")
        return cls(bytes(raw[:KEY_BYTES]), bytes(raw[KEY_BYTES:]))

    @classmethod
    def generate(cls, rng: np.random.Generator | None = None) -> "MacKey":
        if rng is None:
            return cls.from_bytes(os.urandom(2 * KEY_BYTES))
        return cls.from_bytes(rng.bytes(2 * KEY_BYTES))

    def to_bytes(self) -> bytes:
        return self.k1 + self.k2

    def hex(self) -> str:
        return self.to_bytes().hex()


@dataclass(frozen=True)
class Dimensions:
    """Payload symbols ``n``, generation size ``m``, parallel tag count ``l``."""

    n: int
    m: int
    l: int = 1

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.l < 1:
            raise ValueError(f"dimensions must be positive, got {self}")

    @property
    def length(self) -> int:
        return self.n + self.m


def space_id(value: int | bytes) -> bytes:
    """Normalize a generation identifier to its 8-byte big-endian form."""
    if isinstance(value, (bytes, bytearray)):
        if len(value) != ID_BYTES:
            raise ValueError("space ids are 8 bytes")
        return bytes(value)
    return int(value).to_bytes(ID_BYTES, "big")


_ECB = modes.ECB()
try:
    # skips the Cipher wrapper's per-call validation; keys are fresh per trial in
    # the attack game, so context setup dominates there
    from cryptography.hazmat.bindings._rust import openssl as _ossl

    _create_ctx = _ossl.ciphers.create_encryption_ctx
except (ImportError, AttributeError):  # pragma: no cover
    _create_ctx = None


def _ecb(key: bytes, blocks: bytes) -> bytes:
    if _create_ctx is not None:
        return _create_ctx(algorithms.AES(key), _ECB).update(blocks)
    return Cipher(algorithms.AES(key), _ECB).encryptor().update(blocks)


def prf(key: bytes, sid: bytes | int, j: int, instance: int = 0, m: int | None = None) -> int:
    """F(key, id, j, instance) in GF(2^8); ``j`` is 1-based."""
    if j < 1 or (m is not None and j > m):
        raise ValueError(f"PRF index j={j} out of range")
    block = space_id(sid) + j.to_bytes(4, "big") + instance.to_bytes(2, "big") + b"\x00\x00"
    return _ecb(key, block)[0]


def prf_row(key: bytes, sid: bytes | int, m: int, instance: int = 0) -> np.ndarray:
    """F(key, id, j, instance) for j = 1..m in one cipher pass."""
    sid = space_id(sid)
    tail = instance.to_bytes(2, "big") + b"\x00\x00"
    blocks = b"".join(sid + j.to_bytes(4, "big") + tail for j in range(1, m + 1))
    out = np.frombuffer(_ecb(key, blocks), dtype=np.uint8)
    return out[::16].copy()


def prg(seed: bytes, length: int) -> np.ndarray:
    if length < 1:
        raise ValueError("PRG output length must be positive")
    nblocks = -(-length // 16)
    counters = b"".join(b"\x00" * 8 + i.to_bytes(8, "big") for i in range(nblocks))
    return np.frombuffer(_ecb(seed, counters), dtype=np.uint8)[:length].copy()


def instance_seed(k1: bytes, instance: int) -> bytes:
    if instance == 0:
        return k1
    return _ecb(k1, b"\xff" * 8 + instance.to_bytes(8, "big"))


def _prg_streams(k1: bytes, length: int, l: int) -> np.ndarray:
    """``G(k1_i)`` for every instance, as an ``l x length`` array."""
    nblocks = -(-length // 16)
    counters = b"".join(b"\x00" * 8 + i.to_bytes(8, "big") for i in range(nblocks))
    # one pass under k1 yields instance 0's stream and the seeds of the others
    seeds = b"".join(b"\xff" * 8 + i.to_bytes(8, "big") for i in range(1, l))
    out = _ecb(k1, counters + seeds)
    streams = [out[:length]]
    for i in range(1, l):
        seed = out[16 * (nblocks + i - 1):16 * (nblocks + i)]
        streams.append(_ecb(seed, counters)[:length])
    return np.frombuffer(b"".join(streams), dtype=np.uint8).reshape(l, length)


@functools.lru_cache(maxsize=4096)
def _cached_streams(k1: bytes, length: int, l: int) -> np.ndarray:
    w = _prg_streams(k1, length, l)
    w.setflags(write=False)
    return w


def _with_prf(w: np.ndarray, key: MacKey, sid: bytes | int, dims: Dimensions) -> np.ndarray:
    n, m, l = dims.n, dims.m, dims.l
    sid = space_id(sid)
    blocks = b"".join(
        sid + j.to_bytes(4, "big") + i.to_bytes(2, "big") + b"\x00\x00"
        for i in range(l)
        for j in range(1, m + 1)
    )
    f = np.frombuffer(_ecb(key.k2, blocks), dtype=np.uint8)[::16]
    w = w.copy()
    w[:, n:] ^= f.reshape(l, m)
    return w


def key_matrix_uncached(key: MacKey, sid: bytes | int, dims: Dimensions) -> np.ndarray:
    """Per-instance vectors ``w_i`` with ``mac_i(y) = w_i . y``.

    ``w_i`` is ``G(k1_i)`` with the PRF row added onto its last ``m`` symbols;
    both parts are fixed for a whole generation.
    """
    return _with_prf(_prg_streams(key.k1, dims.length, dims.l), key, sid, dims)


@functools.lru_cache(maxsize=4096)
def _cached(key: MacKey, sid: bytes, dims: Dimensions) -> np.ndarray:
    # the PRG part does not depend on the space id, so it is kept across generations
    w = _with_prf(_cached_streams(key.k1, dims.length, dims.l), key, sid, dims)
    w.setflags(write=False)
    return w


def key_matrix(key: MacKey, sid: bytes | int, dims: Dimensions) -> np.ndarray:
    return _cached(key, space_id(sid), dims)


def _check_vector(y: np.ndarray, dims: Dimensions) -> np.ndarray:
    y = np.asarray(y, dtype=np.uint8)
    if y.ndim != 1 or len(y) != dims.length:
        raise ValueError(f"expected a vector of length {dims.length}, got shape {y.shape}")
    return y


def mac(key: MacKey, sid: bytes | int, y: np.ndarray, dims: Dimensions) -> np.ndarray:
    y = _check_vector(y, dims)
    return gf.matvec(key_matrix(key, sid, dims), y)


def mac_reference(key: MacKey, sid: bytes | int, y: np.ndarray, dims: Dimensions) -> np.ndarray:
    """Tag computed straight from the definition, one PRF call per symbol, no cache."""
    y = _check_vector(y, dims)
    n, m = dims.n, dims.m
    out = np.zeros(dims.l, dtype=np.uint8)
    for i in range(dims.l):
        r = prg(instance_seed(key.k1, i), n + m)
        b = 0
        for j in range(1, m + 1):
            b ^= gf.mul(int(y[n + j - 1]), prf(key.k2, sid, j, i, m))
        out[i] = gf.dot(r, y) ^ b
    return out


def combine(items) -> np.ndarray:
    """Tag of sum(alpha_i * y_i) from ``(y_i, t_i, alpha_i)`` triples.

    The vectors themselves are not needed; they are accepted so the call mirrors
    how tagged packets are carried around.
    """
    items = list(items)
    if not items:
        raise ValueError("combine needs at least one tagged vector")
    tags = [np.asarray(t, dtype=np.uint8) for _, t, _ in items]
    if len({len(t) for t in tags}) != 1:
        raise ValueError("tag lengths differ")
    return gf.combine([a for _, _, a in items], np.stack(tags))


def verify(key: MacKey, sid: bytes | int, y: np.ndarray, t: np.ndarray, dims: Dimensions) -> bool:
    y = _check_vector(y, dims)
    t = np.asarray(t, dtype=np.uint8)
    if t.shape != (dims.l,):
        raise ValueError(f"expected a tag of length {dims.l}, got shape {t.shape}")
    return bool(np.array_equal(gf.matvec(key_matrix(key, sid, dims), y), t))


# -- attack game -------------------------------------------------------------


class Oracle:
    """Tagging oracle handed to an adversary; records every query."""

    def __init__(self, key: MacKey, dims: Dimensions):
        self._key = key
        self._w: dict[bytes, np.ndarray] = {}
        self.dims = dims
        self.queries: dict[bytes, list[np.ndarray]] = {}

    def _matrix(self, sid: bytes) -> np.ndarray:
        if sid not in self._w:
            self._w[sid] = key_matrix_uncached(self._key, sid, self.dims)
        return self._w[sid]

    def __call__(self, sid, y) -> np.ndarray:
        sid = space_id(sid)
        y = _check_vector(y, self.dims)
        self.queries.setdefault(sid, []).append(y.copy())
        return gf.matvec(self._matrix(sid), y)

    def check(self, sid, y, t) -> bool:
        w = self._matrix(space_id(sid))
        return bool(np.array_equal(gf.matvec(w, y), np.asarray(t, dtype=np.uint8)))


def forgery_wins(oracle: Oracle, sid, y, t) -> bool:
    """The three win conditions: nonzero augmentation, valid tag, outside the queried span."""
    dims = oracle.dims
    sid = space_id(sid)
    y = _check_vector(y, dims)
    if not y[dims.n:].any():
        return False
    if not oracle.check(sid, y, t):
        return False
    queried = oracle.queries.get(sid, [])
    if queried and gf.Basis.from_vectors(queried, dims.length).contains(y):
        return False
    return True


def attack_game(adversary, trials: int, dims: Dimensions, rng: np.random.Generator) -> float:
    """Fraction of ``trials`` in which ``adversary`` outputs a winning forgery.

    ``adversary(oracle, rng)`` may query ``oracle(id, y)`` any number of times
    and returns ``(id*, y*, t*)``. Each trial uses a fresh random key.
    """
    wins = 0
    for _ in range(trials):
        oracle = Oracle(MacKey.generate(rng), dims)
        sid, y, t = adversary(oracle, rng)
        wins += forgery_wins(oracle, sid, y, t)
    return wins / trials if trials else 0.0


def random_tag_adversary(queries: int = 1):
    """Queries a few random vectors, then guesses a tag for a fresh random vector."""

    def adversary(oracle: Oracle, rng: np.random.Generator):
        dims = oracle.dims
        sid = rng.bytes(ID_BYTES)
        for _ in range(queries):
            oracle(sid, gf.random_vector(rng, dims.length))
        y = gf.random_vector(rng, dims.length)
        y[dims.n + int(rng.integers(dims.m))] |= 1
        return sid, y, gf.random_vector(rng, dims.l)

    return adversary


def replay_adversary(oracle: Oracle, rng: np.random.Generator):
    dims = oracle.dims
    sid = rng.bytes(ID_BYTES)
    y = gf.random_vector(rng, dims.length)
    return sid, y, oracle(sid, y)


def zero_augmentation_adversary(oracle: Oracle, rng: np.random.Generator):
    """Outputs a vector with an all-zero coefficient part (never a valid forgery)."""
    dims = oracle.dims
    sid = rng.bytes(ID_BYTES)
    y = gf.random_vector(rng, dims.length)
    y[dims.n:] = 0
    return sid, y, gf.random_vector(rng, dims.l)


def random_tag_game(trials: int, dims: Dimensions, rng: np.random.Generator,
                    queries: int = 1, chunk: int = 20000) -> int:
    """Vectorized attack game against the random-tag adversary; returns the win count.

    Same challenger as :func:`attack_game` (a fresh key per trial, one space id,
    ``queries`` tagged random vectors, then one forgery), with the per-trial
    numpy work batched. The span condition is evaluated exactly, but only for
    the rare trials whose guessed tag verifies.
    """
    sid = space_id(0)
    wins = 0
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        raw = rng.bytes(2 * KEY_BYTES * b)
        keys = [MacKey.from_bytes(raw[32 * i:32 * i + 32]) for i in range(b)]
        w = np.stack([key_matrix_uncached(k, sid, dims) for k in keys])  # b x l x N
        qs = rng.integers(0, 256, size=(b, queries, dims.length), dtype=np.uint8)
        y = rng.integers(0, 256, size=(b, dims.length), dtype=np.uint8)
        y[np.arange(b), dims.n + rng.integers(dims.m, size=b)] |= 1
        guess = rng.integers(0, 256, size=(b, dims.l), dtype=np.uint8)
        true = np.bitwise_xor.reduce(gf.MUL[w, y[:, None, :]], axis=2)
        for i in np.flatnonzero((true == guess).all(axis=1)):
            if not gf.Basis.from_vectors(qs[i], dims.length).contains(y[i]):
                wins += 1
        done += b
    return wins
