"""Golden vectors, checked by an independent scalar implementation of the tag."""
import numpy as np
import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from spacemac import vectors


def _aes(key, data):
    return Cipher(algorithms.AES(key), modes.ECB()).encryptor().update(data)


def _mul(a, b):
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11B
        b >>= 1
    return r


def scalar_tag(key: bytes, sid: bytes, y: bytes, m: int, l: int) -> bytes:
    k1, k2 = key[:16], key[16:]
    n = len(y) - m
    out = []
    for inst in range(l):
        seed = k1 if inst == 0 else _aes(k1, b"\xff" * 8 + inst.to_bytes(8, "big"))
        stream = b""
        ctr = 0
        while len(stream) < len(y):
            stream += _aes(seed, bytes(8) + ctr.to_bytes(8, "big"))
            ctr += 1
        acc = 0
        for r, v in zip(stream, y):
            acc ^= _mul(r, v)
        for j in range(1, m + 1):
            f = _aes(k2, sid + j.to_bytes(4, "big") + inst.to_bytes(2, "big") + b"\0\0")[0]
            acc ^= _mul(y[n + j - 1], f)
        out.append(acc)
    return bytes(out)


def test_shipped_file_matches_scalar_oracle():
    vs = vectors.parse(vectors.default_path().read_text())
    assert len(vs) >= 16
    for v in vs:
        assert scalar_tag(v.key.to_bytes(), v.sid, v.y.tobytes(), v.dims.m, v.dims.l) == v.tag.tobytes()


def test_shipped_file_passes_library_check():
    assert vectors.check(vectors.parse(vectors.default_path().read_text())) == []


def test_one_corrupted_digit_gives_one_failure():
    lines = vectors.default_path().read_text().splitlines()
    idx = next(i for i, ln in enumerate(lines) if ln and not ln.startswith("#"))
    last = lines[idx][-1]
    lines[idx] = lines[idx][:-1] + ("0" if last != "0" else "1")
    bad = vectors.check(vectors.parse("\n".join(lines)))
    assert [b.line for b in bad] == [idx + 1]


def test_parse_errors_carry_line_numbers():
    with pytest.raises(vectors.VectorParseError) as e:
        vectors.parse("# dims m=2\n\nzz, 00, 00, 00\n")
    assert e.value.line == 3
    with pytest.raises(vectors.VectorParseError):
        vectors.parse("00" * 32 + ", " + "00" * 8 + ", 0000, 00\n")  # no dims directive


def test_empty_text_parses_to_nothing():
    assert vectors.parse("") == []


def test_generated_vectors_round_trip():
    text = vectors.generate(np.random.default_rng(1), shapes=((4, 2, 1),))
    vs = vectors.parse(text)
    assert len(vs) == 4 and vectors.check(vs) == []
