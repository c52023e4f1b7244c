import numpy as np
import pytest

from spacemac import detection, gf, mac, rlnc
from spacemac.detection import FramingError, NodeBuffer, TaggedPacket
from spacemac.mac import Dimensions
from spacemac.simnet import detection_example
from spacemac.topology import RECEIVER, Topology, TopologyError, chain

DIMS = Dimensions(12, 3, 1)


def setup(topo, seed=0, dims=DIMS):
    rng = np.random.default_rng(seed)
    rings = detection.bootstrap(topo, rng)
    data = rng.integers(0, 256, size=(dims.m, dims.n - dims.l), dtype=np.uint8)
    g = detection.build_generation(data, 7, rings[topo.source].e2e_key, dims)
    return rng, rings, g


def test_keyrings_follow_neighbourhood_rule():
    topo = detection_example()
    rings = detection.bootstrap(topo, np.random.default_rng(0))
    assert set(rings["D"].neighbor_keys) == {"A", "B", "C", "E"}
    assert set(rings["R1"].neighbor_keys) == {"A", "D", "E"}
    assert rings["R1"].e2e_key is not None and rings["S"].e2e_key is not None
    assert rings["D"].e2e_key is None
    assert "D" not in rings["D"].neighbor_keys
    # everyone adjacent to D holds the same k_D
    assert rings["A"].neighbor_keys["D"] == rings["E"].neighbor_keys["D"]


def test_chain_keyring():
    topo = chain(1)
    rings = detection.bootstrap(topo, np.random.default_rng(0))
    assert set(rings["0"].neighbor_keys) == {"S"}
    assert rings["0"].e2e_key is None and rings["R"].e2e_key is not None


def test_bootstrap_rejects_cycles():
    t = Topology({"S": "source", "A": "intermediate", "B": "intermediate", "R": "receiver"},
                 {("S", "A"): 1, ("A", "B"): 1, ("B", "A"): 1, ("B", "R"): 1})
    with pytest.raises(TopologyError):
        detection.bootstrap(t, np.random.default_rng(0))


def test_source_packets_carry_valid_tags():
    topo = chain(1)
    _, rings, g = setup(topo)
    for pkt in detection.source_emit(g, rings["S"], "0", "intermediate", DIMS):
        assert detection.hop_verify(rings["0"], "S", pkt, g.id, DIMS)
        assert detection.e2e_verify(rings["R"], pkt.payload, g.id, DIMS)


def relay(topo, rings, g, rng, path):
    """Push a generation down ``path`` with honest recoding; return the last buffer."""
    src = path[0]
    buf = NodeBuffer(DIMS.length)
    nxt = path[1]
    for pkt in detection.source_emit(g, rings[src], nxt, topo.roles[nxt], DIMS):
        assert detection.node_receive(rings[nxt], src, pkt, buf, g.id, DIMS).accepted
    for u, v in zip(path[1:], path[2:]):
        nbuf = NodeBuffer(DIMS.length)
        for _ in range(DIMS.m + 1):
            pkt = detection.node_emit(rings[u], v, topo.roles[v], buf, gf.random_vector(rng, len(buf)), g.id, DIMS)
            check = detection.receiver_check if topo.roles[v] == RECEIVER else detection.node_receive
            assert check(rings[v], u, pkt, nbuf, g.id, DIMS).accepted
        buf = nbuf
    return buf


def test_honest_chain_end_to_end():
    topo = chain(3)
    rng, rings, g = setup(topo)
    buf = relay(topo, rings, g, rng, ["S", "0", "1", "2", "R"])
    assert np.array_equal(rlnc.decode(buf.packets, DIMS.m), g.payloads)


def test_zero_coefficients_still_verify():
    topo = chain(2)
    rng, rings, g = setup(topo)
    buf = relay(topo, rings, g, rng, ["S", "0"])
    pkt = detection.node_emit(rings["0"], "1", "intermediate", buf, np.zeros(len(buf), np.uint8), g.id, DIMS)
    assert not pkt.payload.any() and not pkt.verification.any()
    assert detection.hop_verify(rings["1"], "0", pkt, g.id, DIMS)


def test_empty_buffer_cannot_emit():
    topo = chain(1)
    _, rings, g = setup(topo)
    with pytest.raises(ValueError):
        detection.node_emit(rings["0"], "R", RECEIVER, NodeBuffer(DIMS.length), [], g.id, DIMS)


def test_corrupted_payload_dropped_with_event():
    topo = chain(2)
    rng, rings, g = setup(topo)
    buf = relay(topo, rings, g, rng, ["S", "0"])
    pkt = detection.node_emit(rings["0"], "1", "intermediate", buf, gf.random_vector(rng, len(buf)), g.id, DIMS)
    pkt.payload[2] ^= 5
    v = detection.node_receive(rings["1"], "0", pkt, NodeBuffer(DIMS.length), g.id, DIMS)
    assert not v.accepted
    assert (v.event.detector, v.event.suspect, v.event.generation) == ("1", "0", g.id)


def test_tampered_helper_caught_one_hop_later():
    topo = chain(3)
    rng, rings, g = setup(topo)
    buf0 = relay(topo, rings, g, rng, ["S", "0"])
    buf1 = NodeBuffer(DIMS.length)
    for _ in range(DIMS.m):
        pkt = detection.node_emit(rings["0"], "1", "intermediate", buf0, gf.random_vector(rng, len(buf0)), g.id, DIMS)
        pkt.helper ^= 1
        assert detection.node_receive(rings["1"], "0", pkt, buf1, g.id, DIMS).accepted
    out = detection.node_emit(rings["1"], "2", "intermediate", buf1, [1] + [0] * (len(buf1) - 1), g.id, DIMS)
    assert not detection.node_receive(rings["2"], "1", out, NodeBuffer(DIMS.length), g.id, DIMS).accepted


def test_corrupted_e2e_tag_fails_next_hop():
    topo = chain(2)
    rng, rings, g = setup(topo)
    buf = relay(topo, rings, g, rng, ["S", "0"])
    pkt = detection.node_emit(rings["0"], "1", "intermediate", buf, gf.random_vector(rng, len(buf)), g.id, DIMS)
    pkt.payload[0] ^= 1  # first l symbols hold the end-to-end tag
    assert not detection.hop_verify(rings["1"], "0", pkt, g.id, DIMS)


def test_adjacent_colluders_stopped_by_receiver():
    # two colluders who hold each other's keys sign anything hop by hop, but not under k*
    topo = chain(2)
    rng, rings, g = setup(topo)
    y = gf.random_vector(rng, DIMS.length)
    k1 = rings["0"].key_for("1")
    pkt = TaggedPacket(np.zeros(1, np.uint8), mac.mac(k1, g.id, y, DIMS), y)
    v = detection.receiver_check(rings["R"], "1", pkt, NodeBuffer(DIMS.length), g.id, DIMS)
    assert not v.accepted and v.event.reason == "end-to-end"


def test_outside_span_forgery_rate():
    topo = chain(2)
    rng, rings, g = setup(topo, dims=Dimensions(6, 2, 1))
    dims = Dimensions(6, 2, 1)
    trials = 5000
    caught = 0
    for _ in range(trials):
        y = gf.random_vector(rng, dims.length)
        pkt = TaggedPacket(np.zeros(1, np.uint8), gf.random_vector(rng, 1), y)
        caught += not detection.hop_verify(rings["1"], "0", pkt, g.id, dims)
    p = 1 - 1 / 256
    assert caught / trials >= p - 3 * np.sqrt(p * (1 - p) / trials)


def test_wire_format_round_trip_and_framing():
    rng = np.random.default_rng(0)
    pkt = TaggedPacket(gf.random_vector(rng, 1), gf.random_vector(rng, 1), gf.random_vector(rng, DIMS.length))
    raw = pkt.to_bytes()
    assert raw[0] == pkt.helper[0] and raw[1] == pkt.verification[0] and raw[2:] == pkt.payload.tobytes()
    back = TaggedPacket.from_bytes(raw, DIMS)
    assert np.array_equal(back.payload, pkt.payload)
    with pytest.raises(FramingError):
        TaggedPacket.from_bytes(raw[:-1], DIMS)
    short = TaggedPacket(pkt.helper, pkt.verification, pkt.payload[:-1])
    with pytest.raises(FramingError):
        detection.node_receive(detection.bootstrap(chain(1), rng)["0"], "S", short, NodeBuffer(DIMS.length), 0, DIMS)


def test_build_generation_shape_check():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        detection.build_generation(np.zeros((3, 12), np.uint8), 0, mac.MacKey.generate(rng), DIMS)


def test_e2e_tag_survives_deep_recoding():
    topo = chain(6)
    rng, rings, g = setup(topo)
    buf = relay(topo, rings, g, rng, ["S", "0", "1", "2", "3", "4", "5"])
    for _ in range(10):
        y = rlnc.recode(buf.packets, gf.random_vector(rng, len(buf)))
        assert detection.e2e_verify(rings["R"], y, g.id, DIMS)
