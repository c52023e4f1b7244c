"""Golden MAC test vectors: reading, checking and producing them.

A vector file is line oriented. Each record is ``key_hex, id_hex, y_hex, tag_hex``
with the 32-byte key ``k1 || k2`` and the 8-byte space id. A record does not say
where the payload ends, so a directive line ``# dims m=<m>`` sets the number of
coefficient symbols for the records that follow; the tag length gives ``l``.
Other ``#`` lines and blank lines are ignored.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import mac
from .mac import Dimensions, MacKey

_DIMS = re.compile(r"#\s*dims\b(.*)")


class VectorParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass
class Vector:
    line: int
    key: MacKey
    sid: bytes
    y: np.ndarray
    tag: np.ndarray
    dims: Dimensions


def default_path() -> Path:
    return Path(str(resources.files("spacemac") / "data" / "vectors.txt"))


def parse(text: str) -> list[Vector]:
    out = []
    m = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        d = _DIMS.match(line)
        if d:
            fields = dict(kv.split("=", 1) for kv in d.group(1).split() if "=" in kv)
            try:
                m = int(fields["m"])
            except (KeyError, ValueError):
                raise VectorParseError(no, "dims directive needs m=<int>") from None
            continue
        if line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise VectorParseError(no, f"expected 4 comma-separated fields, got {len(parts)}")
        try:
            key, sid, y, tag = (bytes.fromhex(p) for p in parts)
        except ValueError:
            raise VectorParseError(no, "field is not valid hex") from None
        if len(key) != 2 * mac.KEY_BYTES:
            raise VectorParseError(no, f"key must be {2 * mac.KEY_BYTES} bytes")
        if len(sid) != mac.ID_BYTES:
            raise VectorParseError(no, f"id must be {mac.ID_BYTES} bytes")
        if m is None:
            raise VectorParseError(no, "record before any '# dims m=...' directive")
        if len(y) <= m or not tag:
            raise VectorParseError(no, "vector too short for the declared m, or empty tag")
        dims = Dimensions(len(y) - m, m, len(tag))
        out.append(Vector(no, MacKey.from_bytes(key), sid, np.frombuffer(y, dtype=np.uint8).copy(),
                          np.frombuffer(tag, dtype=np.uint8).copy(), dims))
    return out


def check(vectors) -> list[Vector]:
    """The vectors whose recorded tag does not match a fresh computation."""
    return [v for v in vectors if not np.array_equal(mac.mac(v.key, v.sid, v.y, v.dims), v.tag)]


def generate(rng: np.random.Generator, shapes=((8, 2, 1), (16, 4, 2), (30, 6, 3), (1024, 32, 1))) -> str:
    lines = ["# SpaceMac golden vectors: key_hex, id_hex, y_hex, tag_hex"]
    for n, m, l in shapes:
        dims = Dimensions(n, m, l)
        lines.append(f"# dims n={n} m={m} l={l}")
        for i in range(4):
            key = MacKey.generate(rng)
            sid = mac.space_id(int(rng.integers(0, 2**63)))
            if i == 0:
                y = np.zeros(dims.length, dtype=np.uint8)
            else:
                y = rng.integers(0, 256, size=dims.length, dtype=np.uint8)
            tag = mac.mac(key, sid, y, dims)
            lines.append(", ".join([key.to_bytes().hex(), sid.hex(), y.tobytes().hex(), tag.tobytes().hex()]))
    return "\n".join(lines) + "\n"
