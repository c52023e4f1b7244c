"""Cooperative in-network pollution detection.

Each forwarding node ``N`` has a key ``k_N`` that ``N`` itself never learns. A
parent sending ``y`` to ``N`` attaches a *helper tag* of ``y`` under ``k_N``;
when ``N`` later sends a combination of what it received, it combines those
helper tags into a *verification tag*, which ``N``'s children check under
``k_N``. A node therefore cannot send anything outside its received span
without being caught one hop later. Source and receivers additionally share an
end-to-end key whose tag rides inside the coded payload.

Wire layout of a packet: ``helper (l) || verification (l) || payload (n+m)``,
and the first ``l`` payload symbols are the end-to-end tag.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gf, mac, rlnc
from .mac import Dimensions, MacKey
from .topology import RECEIVER, SOURCE, Topology, TopologyError


class FramingError(ValueError):
    """A packet does not have the wire layout its receiver expects."""


@dataclass(frozen=True)
class DetectionKeyring:
    node: str
    neighbor_keys: dict  # neighbor id -> MacKey (that neighbor's secret key)
    e2e_key: MacKey | None = None
    signing_key: MacKey | None = None  # the source's own key, source only

    def key_for(self, node: str) -> MacKey:
        if node == self.node and self.signing_key is not None:
            return self.signing_key
        try:
            return self.neighbor_keys[node]
        except KeyError:
            raise KeyError(f"{self.node} holds no key for {node}") from None


@dataclass
class DetectionEvent:
    detector: str
    suspect: str
    generation: bytes
    reason: str = "verification"


@dataclass
class TaggedPacket:
    helper: np.ndarray
    verification: np.ndarray
    payload: np.ndarray

    def to_bytes(self) -> bytes:
        return self.helper.tobytes() + self.verification.tobytes() + self.payload.tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes, dims: Dimensions) -> "TaggedPacket":
        l = dims.l
        if len(raw) != 2 * l + dims.length:
            raise FramingError(f"expected {2 * l + dims.length} bytes, got {len(raw)}")
        a = np.frombuffer(raw, dtype=np.uint8)
        return cls(a[:l].copy(), a[l:2 * l].copy(), a[2 * l:].copy())

    def check(self, dims: Dimensions) -> None:
        if (self.helper.shape != (dims.l,) or self.verification.shape != (dims.l,)
                or self.payload.shape != (dims.length,)):
            raise FramingError("tagged packet does not match the configured dimensions")


@dataclass
class NodeBuffer:
    """Verified packets with the helper tags that arrived with them."""

    length: int
    packets: list = field(default_factory=list)
    helpers: list = field(default_factory=list)
    senders: list = field(default_factory=list)

    def __post_init__(self):
        self.basis = gf.Basis(self.length)

    def __len__(self):
        return len(self.packets)

    def add(self, sender: str, payload: np.ndarray, helper: np.ndarray) -> bool:
        self.packets.append(payload)
        self.helpers.append(helper)
        self.senders.append(sender)
        return self.basis.insert(payload)

    def from_parent(self, parent: str) -> list[np.ndarray]:
        return [p for p, s in zip(self.packets, self.senders) if s == parent]


def e2e_dims(dims: Dimensions) -> Dimensions:
    """Dimensions of the inner vector ``w`` covered by the end-to-end tag."""
    if dims.n <= dims.l:
        raise ValueError("n must leave room for the end-to-end tag")
    return Dimensions(dims.n - dims.l, dims.m, dims.l)


def keyed_nodes(topology: Topology) -> list[str]:
    """Nodes that get a secret key: the source and every intermediate."""
    return [n for n in topology.nodes if topology.roles[n] != RECEIVER]


def bootstrap(topology: Topology, rng: np.random.Generator) -> dict[str, DetectionKeyring]:
    if not topology.is_dag():
        raise TopologyError("detection keys need a DAG topology")
    src = topology.source
    secret = {x: MacKey.generate(rng) for x in keyed_nodes(topology)}
    e2e = MacKey.generate(rng)
    rings = {}
    for node in topology.nodes:
        near = set(topology.parents(node)) | set(topology.children(node))
        keys = {x: secret[x] for x in sorted(near, key=topology.nodes.index) if x in secret}
        role = topology.roles[node]
        rings[node] = DetectionKeyring(
            node=node,
            neighbor_keys=keys,
            e2e_key=e2e if role in (SOURCE, RECEIVER) else None,
            signing_key=secret[src] if node == src else None,
        )
    return rings


def build_generation(data, sid, e2e_key: MacKey, dims: Dimensions) -> rlnc.Generation:
    """Source packets whose first ``l`` payload symbols carry the end-to-end tag."""
    data = np.asarray(data, dtype=np.uint8)
    inner = e2e_dims(dims)
    if data.shape != (dims.m, inner.n):
        raise ValueError(f"expected data of shape {(dims.m, inner.n)}, got {data.shape}")
    v = np.hstack([data, np.eye(dims.m, dtype=np.uint8)])
    tags = gf.matmul(v, mac.key_matrix(e2e_key, sid, inner).T)
    return rlnc.augment(np.hstack([tags, data]), sid)


def _helper(ring: DetectionKeyring, dest: str, topology_role: str, sid, y, dims) -> np.ndarray:
    if topology_role == RECEIVER:
        # receivers never forward, so nobody needs a helper tag for them
        return np.zeros(dims.l, dtype=np.uint8)
    return mac.mac(ring.key_for(dest), sid, y, dims)


def source_emit(g: rlnc.Generation, ring: DetectionKeyring, child: str, child_role: str,
                dims: Dimensions) -> list[TaggedPacket]:
    if ring.signing_key is None:
        raise KeyError(f"{ring.node} is not provisioned as a source")
    out = []
    for y in g.packets:
        out.append(TaggedPacket(
            helper=_helper(ring, child, child_role, g.id, y, dims),
            verification=mac.mac(ring.signing_key, g.id, y, dims),
            payload=np.array(y),
        ))
    return out


def node_emit(ring: DetectionKeyring, dest: str, dest_role: str, buffer: NodeBuffer, coeffs,
              sid, dims: Dimensions) -> TaggedPacket:
    if not len(buffer):
        raise ValueError(f"{ring.node} has nothing to send")
    coeffs = np.asarray(coeffs, dtype=np.uint8)
    y = rlnc.recode(buffer.packets, coeffs)
    return TaggedPacket(
        helper=_helper(ring, dest, dest_role, sid, y, dims),
        verification=gf.combine(coeffs, np.stack(buffer.helpers)),
        payload=y,
    )


def hop_verify(ring: DetectionKeyring, sender: str, pkt: TaggedPacket, sid, dims: Dimensions) -> bool:
    pkt.check(dims)
    return mac.verify(ring.key_for(sender), sid, pkt.payload, pkt.verification, dims)


def e2e_verify(ring: DetectionKeyring, payload: np.ndarray, sid, dims: Dimensions) -> bool:
    if ring.e2e_key is None:
        raise KeyError(f"{ring.node} holds no end-to-end key")
    l = dims.l
    return mac.verify(ring.e2e_key, sid, payload[l:], payload[:l], e2e_dims(dims))


@dataclass
class Verdict:
    accepted: bool
    innovative: bool = False
    event: DetectionEvent | None = None


def node_receive(ring: DetectionKeyring, sender: str, pkt: TaggedPacket, buffer: NodeBuffer,
                 sid, dims: Dimensions) -> Verdict:
    if not hop_verify(ring, sender, pkt, sid, dims):
        return Verdict(False, event=DetectionEvent(ring.node, sender, mac.space_id(sid)))
    return Verdict(True, buffer.add(sender, pkt.payload, pkt.helper))


def receiver_check(ring: DetectionKeyring, sender: str, pkt: TaggedPacket, buffer: NodeBuffer,
                   sid, dims: Dimensions) -> Verdict:
    if not hop_verify(ring, sender, pkt, sid, dims):
        return Verdict(False, event=DetectionEvent(ring.node, sender, mac.space_id(sid)))
    if not e2e_verify(ring, pkt.payload, sid, dims):
        return Verdict(False, event=DetectionEvent(ring.node, sender, mac.space_id(sid), "end-to-end"))
    return Verdict(True, buffer.add(sender, pkt.payload, pkt.helper))
