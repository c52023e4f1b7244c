"""Locating polluters exactly once pollution has been detected.

Every edge ``P -> N`` carries ``lambda`` tags per packet, made under keys only
``P`` and the controller can derive. ``N`` learns ``delta`` of those keys and
drops anything whose visible tags are wrong; the controller checks the other
``lambda - delta`` when ``N`` reports what it received. Neither endpoint can
frame the other: ``N`` cannot forge the hidden tags on a vector it never got,
and ``P`` does not know which tags ``N`` checks. The controller then marks
edges polluted or clean and blames nodes with a polluted outgoing edge but no
polluted incoming one.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import comb

import numpy as np
from cryptography.hazmat.primitives import cmac
from cryptography.hazmat.primitives.ciphers import algorithms

from . import gf, mac, rlnc
from .mac import Dimensions, MacKey
from .topology import RECEIVER, SOURCE, Topology


@dataclass(frozen=True)
class LocatingParams:
    lam: int = 19
    delta: int = 9
    theta: int = 3

    def __post_init__(self):
        if not 1 <= self.delta < self.lam:
            raise ValueError(f"need 1 <= delta < lambda, got delta={self.delta}, lambda={self.lam}")
        if not 1 <= self.theta <= self.lam - self.delta:
            raise ValueError(f"need 1 <= theta <= lambda - delta, got theta={self.theta}")

    @property
    def subsets(self) -> int:
        return comb(self.lam, self.delta)


@dataclass(frozen=True)
class NodeSecrets:
    """The three keys a node shares with the controller; only the first feeds tag keys."""

    k1: bytes
    k2: bytes
    k3: bytes

    @classmethod
    def generate(cls, rng: np.random.Generator) -> "NodeSecrets":
        return cls(*(rng.bytes(16) for _ in range(3)))


def _cmac(key: bytes, msg: bytes) -> bytes:
    c = cmac.CMAC(algorithms.AES(key))
    c.update(msg)
    return c.finalize()


def _node_bytes(node: str) -> bytes:
    raw = str(node).encode()
    return struct.pack(">H", len(raw)) + raw


def f1(key: bytes, child: str, i: int) -> MacKey:
    """Tag key number ``i`` for the edge from the key owner to ``child``."""
    msg = b"F1" + _node_bytes(child) + struct.pack(">I", i)
    return MacKey(_cmac(key, msg + b"\x01"), _cmac(key, msg + b"\x02"))


def f2(key: bytes, parent: str, subsets: int) -> int:
    """Index in ``[0, subsets)`` of the tag subset a child checks on its edge from ``parent``."""
    digest = _cmac(key, b"F2" + _node_bytes(parent))
    return int.from_bytes(digest, "big") % subsets


def unrank_combination(index: int, n: int, k: int) -> tuple[int, ...]:
    """The ``index``-th ``k``-subset of ``range(n)`` in lexicographic order."""
    total = comb(n, k)
    if not 0 <= index < total:
        raise ValueError(f"index {index} out of range for C({n}, {k}) = {total}")
    out = []
    x = 0
    for remaining in range(k, 0, -1):
        while True:
            # subsets starting with x at this position
            c = comb(n - x - 1, remaining - 1)
            if index < c:
                break
            index -= c
            x += 1
        out.append(x)
        x += 1
    return tuple(out)


def rank_combination(subset, n: int) -> int:
    subset = sorted(subset)
    k = len(subset)
    r = 0
    prev = -1
    for pos, x in enumerate(subset):
        for y in range(prev + 1, x):
            r += comb(n - y - 1, k - pos - 1)
        prev = x
    return r


@dataclass(frozen=True)
class EdgeKeySets:
    parent: str
    child: str
    x_set: tuple  # lambda MacKeys
    y_index: tuple  # sorted positions in x_set the child checks

    @property
    def y_set(self) -> tuple:
        return tuple(self.x_set[i] for i in self.y_index)

    @property
    def hidden_index(self) -> tuple:
        seen = set(self.y_index)
        return tuple(i for i in range(len(self.x_set)) if i not in seen)

    def child_view(self) -> "EdgeKeySets":
        """What the child is given: only the ``delta`` keys it checks."""
        keys = tuple(k if i in self.y_index else None for i, k in enumerate(self.x_set))
        return EdgeKeySets(self.parent, self.child, keys, self.y_index)


def derive_edge_keys(parent_key: bytes, child_key: bytes, parent: str, child: str,
                     params: LocatingParams) -> EdgeKeySets:
    x_set = tuple(f1(parent_key, child, i) for i in range(1, params.lam + 1))
    idx = f2(child_key, parent, params.subsets)
    return EdgeKeySets(parent, child, x_set, unrank_combination(idx, params.lam, params.delta))


def tag_dims(dims: Dimensions) -> Dimensions:
    """Locating tags are one symbol each."""
    return Dimensions(dims.n, dims.m, 1)


def tag_matrix(keys, sid, dims: Dimensions) -> np.ndarray:
    d = tag_dims(dims)
    return np.vstack([mac.key_matrix(k, sid, d) for k in keys])


def locating_emit(keys: EdgeKeySets, sid, y: np.ndarray, dims: Dimensions) -> np.ndarray:
    """The ``lambda`` tags of ``y`` on this edge."""
    if any(k is None for k in keys.x_set):
        raise KeyError(f"{keys.parent} lacks the full key set for edge to {keys.child}")
    y = np.asarray(y, dtype=np.uint8)
    if y.shape != (dims.length,):
        raise ValueError(f"expected a vector of length {dims.length}")
    return gf.matvec(tag_matrix(keys.x_set, sid, dims), y)


def visible_tags_ok(keys: EdgeKeySets, sid, y: np.ndarray, tags: np.ndarray, dims: Dimensions) -> bool:
    mat = tag_matrix(keys.y_set, sid, dims)
    return bool(np.array_equal(gf.matvec(mat, y), tags[list(keys.y_index)]))


@dataclass
class LocatingStore:
    """Packets a node accepted, with their tag sets, grouped by parent and generation."""

    entries: dict = field(default_factory=dict)  # (sid, parent) -> list of (y, tags)

    def add(self, sid, parent: str, y: np.ndarray, tags: np.ndarray) -> None:
        self.entries.setdefault((mac.space_id(sid), parent), []).append((y, tags))

    def get(self, sid, parent: str) -> list:
        return self.entries.get((mac.space_id(sid), parent), [])

    def forget(self, sid) -> None:
        sid = mac.space_id(sid)
        for key in [k for k in self.entries if k[0] == sid]:
            del self.entries[key]


def locating_receive(keys: EdgeKeySets, sid, y: np.ndarray, tags: np.ndarray, dims: Dimensions,
                     store: LocatingStore | None = None) -> bool:
    """Check the visible tags; on success remember the packet for reporting."""
    from .detection import FramingError

    y = np.asarray(y, dtype=np.uint8)
    tags = np.asarray(tags, dtype=np.uint8)
    if y.shape != (dims.length,) or tags.shape != (len(keys.x_set),):
        raise FramingError("locating packet does not match the configured dimensions")
    if not visible_tags_ok(keys, sid, y, tags, dims):
        return False
    if store is not None:
        store.add(sid, keys.parent, y, tags)
    return True


@dataclass
class Report:
    generation: bytes
    reporter: str
    parent: str
    y_r: np.ndarray | None  # None marks "nothing received on this edge"
    tags: np.ndarray | None

    @property
    def empty(self) -> bool:
        return self.y_r is None

    def to_record(self, verdict: str = "") -> list[str]:
        tags = [] if self.tags is None else [f"{int(t):02x}" for t in self.tags]
        y = "" if self.y_r is None else self.y_r.tobytes().hex()
        return [self.generation.hex(), self.reporter, self.parent, y, *tags, verdict]

    @classmethod
    def from_record(cls, fields: list[str]) -> tuple["Report", str]:
        if len(fields) < 5:
            raise ValueError("report record needs at least generation, reporter, parent, y_r, verdict")
        gen, reporter, parent, y = fields[:4]
        tags, verdict = fields[4:-1], fields[-1]
        if y:
            y_r = np.frombuffer(bytes.fromhex(y), dtype=np.uint8).copy()
            t = np.array([int(x, 16) for x in tags], dtype=np.uint8)
        else:
            y_r, t = None, None
        return cls(bytes.fromhex(gen), reporter, parent, y_r, t), verdict


def make_report(reporter: str, parent: str, stored: list, sid, rng: np.random.Generator) -> Report:
    """Random combination of what ``reporter`` accepted from ``parent``, with combined tags."""
    sid = mac.space_id(sid)
    if not stored:
        return Report(sid, reporter, parent, None, None)
    alphas = rng.integers(0, 256, size=len(stored), dtype=np.uint8)
    ys = np.stack([s[0] for s in stored])
    ts = np.stack([s[1] for s in stored])
    return Report(sid, reporter, parent, gf.combine(alphas, ys), gf.combine(alphas, ts))


ACCEPTED = "accepted"
REJECTED = "rejected"
EMPTY = "empty"


@dataclass
class RoundResult:
    generation: bytes
    alerter: str
    polluted: set = field(default_factory=set)
    clean: set = field(default_factory=set)
    silent: set = field(default_factory=set)  # nodes missing a report for some incoming edge
    rejected: set = field(default_factory=set)  # nodes whose report failed the hidden-tag check
    attackers: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)  # edge -> verdict


class Controller:
    """Topology owner that checks reports and maintains the blacklist.

    DoS throttling: an alert that turns out to find no polluted edge bumps the
    alerter's counter; once the counter reaches ``tau`` further alerts from that
    node are ignored for ``cooldown`` generations, after which it resets.
    """

    def __init__(self, topology: Topology, secrets: dict, params: LocatingParams, dims: Dimensions,
                 tau: int = 3, cooldown: int = 10):
        self.topology = topology
        self.secrets = secrets
        self.params = params
        self.dims = dims
        self.tau = tau
        self.cooldown = cooldown
        self.generations: dict[bytes, rlnc.Generation] = {}
        self.processed: set[bytes] = set()
        self.blacklist: list[str] = []
        self.ctr: dict[str, int] = {}
        self.throttled_at: dict[str, int] = {}
        self.rounds: list[RoundResult] = []
        self._edge_keys: dict = {}

    def edge_keys(self, parent: str, child: str) -> EdgeKeySets:
        e = (parent, child)
        if e not in self._edge_keys:
            self._edge_keys[e] = derive_edge_keys(
                self.secrets[parent].k1, self.secrets[child].k1, parent, child, self.params)
        return self._edge_keys[e]

    def register(self, g: rlnc.Generation) -> None:
        self.generations[g.id] = g

    # -- alerts

    def throttled(self, node: str, now: int) -> bool:
        start = self.throttled_at.get(node)
        if start is None:
            return False
        if now - start >= self.cooldown:
            del self.throttled_at[node]
            self.ctr[node] = 0
            return False
        return True

    def accept_alert(self, sid, node: str, now: int = 0) -> bool:
        """Whether an alert starts a locating round."""
        sid = mac.space_id(sid)
        if sid in self.processed or node in self.blacklist:
            return False
        if self.throttled(node, now):
            return False
        self.processed.add(sid)
        return True

    # -- reports

    def check_report(self, report: Report) -> tuple[str, bool | None]:
        """Verdict on one report and, if accepted, whether its edge is polluted."""
        if report.empty:
            return EMPTY, False
        keys = self.edge_keys(report.parent, report.reporter)
        hidden = keys.hidden_index
        y = np.asarray(report.y_r, dtype=np.uint8)
        tags = np.asarray(report.tags, dtype=np.uint8)
        if y.shape != (self.dims.length,) or tags.shape != (self.params.lam,):
            return REJECTED, None
        mat = tag_matrix([keys.x_set[i] for i in hidden], report.generation, self.dims)
        valid = int(np.count_nonzero(gf.matvec(mat, y) == tags[list(hidden)]))
        if valid < self.params.theta:
            return REJECTED, None
        return ACCEPTED, not rlnc.in_source_space(self.generations[report.generation], y)

    def classify(self, sid, alerter: str, reports) -> RoundResult:
        sid = mac.space_id(sid)
        topo = self.topology
        res = RoundResult(sid, alerter)
        got = {}
        for r in reports:
            if r.generation == sid and (r.parent, r.reporter) in topo.delays:
                got.setdefault((r.parent, r.reporter), r)
        for edge in topo.edges:
            parent, child = edge
            r = got.get(edge)
            if r is None:
                res.silent.add(child)
                res.verdicts[edge] = "missing"
                continue
            verdict, polluted = self.check_report(r)
            res.verdicts[edge] = verdict
            if verdict == REJECTED:
                res.rejected.add(child)
            elif polluted:
                res.polluted.add(edge)
            else:
                res.clean.add(edge)
        blamed = set(res.silent) | set(res.rejected)
        polluted_in = {c for _, c in res.polluted}
        polluted_out = {p for p, _ in res.polluted}
        blamed |= polluted_out - polluted_in
        blamed -= {n for n in blamed if topo.roles.get(n) == SOURCE}
        res.attackers = [n for n in topo.order() if n in blamed]
        return res

    def controller_round(self, sid, alerter: str, reports, now: int = 0) -> RoundResult:
        res = self.classify(sid, alerter, reports)
        if not res.polluted and not res.attackers:
            self.ctr[alerter] = self.ctr.get(alerter, 0) + 1
            if self.ctr[alerter] >= self.tau:
                self.throttled_at.setdefault(alerter, now)
        for a in res.attackers:
            if a not in self.blacklist:
                self.blacklist.append(a)
        if res.attackers:
            self.topology = self.topology.without(res.attackers)
        self.rounds.append(res)
        return res


# -- Monte-Carlo estimates of the two framing probabilities


def child_forgery_rate(params: LocatingParams, trials: int, rng: np.random.Generator,
                       q: int = 256, chunk: int = 200_000) -> float:
    """Rate at which a child's report on a vector it never received is accepted.

    The child knows nothing about the hidden keys, and a tag that was never
    computed under a PRF-derived key is, to it, a uniform guess; so each hidden
    tag is valid iff its guess error is zero.
    """
    hidden = params.lam - params.delta
    hits = 0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        err = rng.integers(0, q, size=(k, hidden))
        hits += int(np.count_nonzero(np.count_nonzero(err == 0, axis=1) >= params.theta))
        done += k
    return hits / trials


def parent_sabotage_rate(params: LocatingParams, correct: int, trials: int, rng: np.random.Generator,
                         q: int = 256, chunk: int = 100_000) -> float:
    """Rate at which a parent gets its child's packet accepted yet the child's report rejected.

    The parent sends ``correct`` valid tags at random positions and guesses the
    rest; the child checks a PRF-chosen subset of ``delta`` positions it cannot
    predict. A report of one accepted packet (scaled by a nonzero factor) keeps
    exactly the valid/invalid pattern of the hidden tags.
    """
    lam, delta = params.lam, params.delta
    hits = 0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        # random positions of the correct tags: first `correct` entries of a random permutation
        order = np.argsort(rng.random((k, lam)), axis=1)
        ok = np.zeros((k, lam), dtype=bool)
        np.put_along_axis(ok, order[:, :correct], True, axis=1)
        ok |= rng.integers(0, q, size=(k, lam)) == 0  # lucky guesses
        # the child's subset is uniform and independent of the parent's choice
        sub = np.argsort(rng.random((k, lam)), axis=1)
        seen = np.zeros((k, lam), dtype=bool)
        np.put_along_axis(seen, sub[:, :delta], True, axis=1)
        child_ok = np.all(ok | ~seen, axis=1)
        hidden_valid = np.count_nonzero(ok & ~seen, axis=1)
        hits += int(np.count_nonzero(child_ok & (hidden_valid < params.theta)))
        done += k
    return hits / trials


def sabotage_game(params: LocatingParams, correct: int, trials: int, rng: np.random.Generator,
                  dims: Dimensions = Dimensions(4, 2, 1)) -> float:
    """:func:`parent_sabotage_rate` played with real keys, tags and controller checks."""
    hits = 0
    for _ in range(trials):
        ps, cs = NodeSecrets.generate(rng), NodeSecrets.generate(rng)
        keys = derive_edge_keys(ps.k1, cs.k1, "P", "N", params)
        sid = int(rng.integers(0, 2**63))
        g = rlnc.augment(rng.integers(0, 256, size=(dims.m, dims.n), dtype=np.uint8), sid)
        y = g.packets[int(rng.integers(0, dims.m))]
        tags = locating_emit(keys, sid, y, dims)
        bad = rng.permutation(params.lam)[correct:]
        tags[bad] = rng.integers(0, 256, size=len(bad), dtype=np.uint8)
        store = LocatingStore()
        if not locating_receive(keys.child_view(), sid, y, tags, dims, store):
            continue
        topo = Topology({"P": SOURCE, "N": RECEIVER}, {("P", "N"): 1.0})
        ctl = Controller(topo, {"P": ps, "N": cs}, params, dims)
        ctl.register(g)
        report = make_report("N", "P", store.get(sid, "P"), sid, rng)
        if report.tags is not None and not report.y_r.any():
            report = Report(report.generation, "N", "P", y, tags)  # zero draw; resend the packet itself
        verdict, _ = ctl.check_report(report)
        hits += verdict == REJECTED
    return hits / trials


def forgery_game(params: LocatingParams, trials: int, rng: np.random.Generator,
                 dims: Dimensions = Dimensions(4, 2, 1)) -> float:
    """:func:`child_forgery_rate` played with real keys: the child reports a vector
    outside the source space, with correct visible tags and guessed hidden ones."""
    hits = 0
    for _ in range(trials):
        ps, cs = NodeSecrets.generate(rng), NodeSecrets.generate(rng)
        keys = derive_edge_keys(ps.k1, cs.k1, "P", "N", params)
        sid = int(rng.integers(0, 2**63))
        g = rlnc.augment(rng.integers(0, 256, size=(dims.m, dims.n), dtype=np.uint8), sid)
        y = g.packets[0].copy()
        y[0] ^= 1 + int(rng.integers(0, 255))
        tags = rng.integers(0, 256, size=params.lam, dtype=np.uint8)
        view = keys.child_view()
        tags[list(view.y_index)] = gf.matvec(tag_matrix(view.y_set, sid, dims), y)
        topo = Topology({"P": SOURCE, "N": RECEIVER}, {("P", "N"): 1.0})
        ctl = Controller(topo, {"P": ps, "N": cs}, params, dims)
        ctl.register(g)
        verdict, polluted = ctl.check_report(Report(mac.space_id(sid), "N", "P", y, tags))
        hits += verdict == ACCEPTED and bool(polluted)
    return hits / trials
