import numpy as np
import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from hypothesis import given, settings
from hypothesis import strategies as st

from spacemac import gf, mac
from spacemac.mac import Dimensions, MacKey


def aes(key, block):
    return Cipher(algorithms.AES(key), modes.ECB()).encryptor().update(block)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_prf_matches_block_layout(rng):
    key = rng.bytes(16)
    block = (5).to_bytes(8, "big") + (3).to_bytes(4, "big") + (2).to_bytes(2, "big") + b"\0\0"
    assert mac.prf(key, 5, 3, 2) == aes(key, block)[0]


def test_prf_index_range():
    with pytest.raises(ValueError):
        mac.prf(bytes(16), 0, 0)
    with pytest.raises(ValueError):
        mac.prf(bytes(16), 0, 5, m=4)


def test_prg_is_counter_mode(rng):
    seed = rng.bytes(16)
    stream = b"".join(aes(seed, bytes(8) + i.to_bytes(8, "big")) for i in range(3))
    assert mac.prg(seed, 40).tobytes() == stream[:40]
    assert np.array_equal(mac.prg(seed, 40), mac.prg(seed, 40))


def test_prg_rejects_empty():
    with pytest.raises(ValueError):
        mac.prg(bytes(16), 0)


def test_space_id_forms():
    assert mac.space_id(1) == b"\0" * 7 + b"\1"
    assert mac.space_id(b"abcdefgh") == b"abcdefgh"
    with pytest.raises(ValueError):
        mac.space_id(b"short")


def test_key_validation():
    with pytest.raises(ValueError):
        MacKey(b"x", bytes(16))
    k = MacKey.generate(np.random.default_rng(0))
    assert MacKey.from_bytes(k.to_bytes()) == k


@pytest.mark.parametrize("n,m,l", [(20, 5, 1), (20, 5, 3), (64, 8, 4)])
def test_fast_tag_equals_definition(rng, n, m, l):
    dims = Dimensions(n, m, l)
    for _ in range(5):
        key = MacKey.generate(rng)
        y = gf.random_vector(rng, dims.length)
        assert np.array_equal(mac.mac(key, 9, y, dims), mac.mac_reference(key, 9, y, dims))


def test_zero_vector_has_zero_tag(rng):
    dims = Dimensions(10, 4, 2)
    assert not mac.mac(MacKey.generate(rng), 1, np.zeros(14, np.uint8), dims).any()


def test_verify_accepts_own_tags_and_rejects_flips(rng):
    dims = Dimensions(16, 4, 1)
    key = MacKey.generate(rng)
    for _ in range(100):
        y = gf.random_vector(rng, dims.length)
        t = mac.mac(key, 3, y, dims)
        assert mac.verify(key, 3, y, t, dims)
        assert not mac.verify(key, 3, y, t ^ 1, dims)


def test_verify_malformed_inputs(rng):
    dims = Dimensions(4, 2, 1)
    key = MacKey.generate(rng)
    with pytest.raises(ValueError):
        mac.verify(key, 0, np.zeros(5, np.uint8), np.zeros(1, np.uint8), dims)
    with pytest.raises(ValueError):
        mac.verify(key, 0, np.zeros(6, np.uint8), np.zeros(2, np.uint8), dims)


def test_combine_errors():
    with pytest.raises(ValueError):
        mac.combine([])
    with pytest.raises(ValueError):
        mac.combine([(None, np.zeros(1, np.uint8), 1), (None, np.zeros(2, np.uint8), 1)])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2**32))
def test_homomorphism(p, l, seed):
    rng = np.random.default_rng(seed)
    dims = Dimensions(12, 4, l)
    key = MacKey.generate(rng)
    ys = rng.integers(0, 256, size=(p, dims.length), dtype=np.uint8)
    alphas = gf.random_vector(rng, p)
    items = [(y, mac.mac(key, 5, y, dims), a) for y, a in zip(ys, alphas)]
    assert mac.verify(key, 5, gf.combine(alphas, ys), mac.combine(items), dims)


def test_tags_differ_per_generation(rng):
    dims = Dimensions(16, 4, 1)
    key = MacKey.generate(rng)
    y = gf.random_vector(rng, 20)
    y[16:] = [1, 2, 3, 4]
    tags = {int(mac.mac(key, sid, y, dims)[0]) for sid in range(40)}
    assert len(tags) > 10


def test_replay_and_zero_augmentation_never_win(rng):
    dims = Dimensions(8, 2, 1)
    assert mac.attack_game(mac.replay_adversary, 200, dims, rng) == 0
    assert mac.attack_game(mac.zero_augmentation_adversary, 200, dims, rng) == 0


def test_forgery_inside_queried_span_does_not_count(rng):
    dims = Dimensions(8, 2, 1)
    oracle = mac.Oracle(MacKey.generate(rng), dims)
    y = gf.random_vector(rng, 10)
    t = oracle(b"\0" * 8, y)
    assert not mac.forgery_wins(oracle, b"\0" * 8, gf.scale(3, y), gf.scale(3, t))


def test_generic_and_batched_games_agree(rng):
    dims = Dimensions(8, 2, 1)
    trials = 4000
    a = mac.attack_game(mac.random_tag_adversary(), trials, dims, rng)
    b = mac.random_tag_game(trials, dims, rng) / trials
    sigma = np.sqrt((1 / 256) * (255 / 256) / trials)
    assert abs(a - 1 / 256) < 4 * sigma
    assert abs(b - 1 / 256) < 4 * sigma
