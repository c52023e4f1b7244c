"""Discrete-event simulation of coded multicast under pollution attacks.

One :class:`Network` owns a topology, the keys of both protocols, a controller
and a virtual clock. Each call to :meth:`Network.run_generation` pushes one
generation from the source through the DAG: nodes verify, store and recode;
attackers follow their :class:`AttackerSpec`; the first detection raises an
alert, the controller asks every node for a report, waits a fixed window and
then names the attackers it can prove. Time only moves through edge and
control-channel delays.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import asdict, dataclass, field
from itertools import count
from pathlib import Path

import numpy as np

from . import detection, gf, locating, rlnc
from .detection import NodeBuffer
from .locating import Controller, LocatingParams, LocatingStore, NodeSecrets
from .mac import Dimensions, key_matrix
from .topology import RECEIVER, SOURCE, Topology, TopologyError, gen_topology

SCHEMA_VERSION = 1

BEHAVIORS = (
    "pollute_all_outgoing",
    "lie_about_incoming",
    "tamper_helper_tag",
    "forward_corrupted",
    "leak_key_to_child",
    "alert_flood",
)
DEFAULT_BEHAVIORS = frozenset({"pollute_all_outgoing", "lie_about_incoming"})
ACCEPT_ALL = frozenset({"pollute_all_outgoing", "forward_corrupted", "leak_key_to_child"})


@dataclass(frozen=True)
class AttackerSpec:
    node: str
    behaviors: frozenset = DEFAULT_BEHAVIORS
    lie_prob: float = 1.0

    def __post_init__(self):
        unknown = set(self.behaviors) - set(BEHAVIORS)
        if unknown:
            raise ValueError(f"unknown attacker behaviors: {sorted(unknown)}")
        object.__setattr__(self, "behaviors", frozenset(self.behaviors))

    def does(self, behavior: str) -> bool:
        return behavior in self.behaviors


@dataclass
class SimConfig:
    dims: Dimensions = field(default_factory=lambda: Dimensions(1024, 32, 1))
    params: LocatingParams = field(default_factory=LocatingParams)
    control_delay: tuple = (10.0, 100.0)
    window_ms: float | None = None  # report window; twice the largest control delay when unset
    tau: int = 3
    cooldown: int = 10
    audit: bool = True
    trace: bool = False

    @property
    def window(self) -> float:
        return self.window_ms if self.window_ms is not None else 2 * self.control_delay[1]


@dataclass
class GenerationOutcome:
    index: int
    start_ms: float
    end_ms: float
    alerted: bool = False
    alerter: str | None = None
    identified: list = field(default_factory=list)
    decoded: dict = field(default_factory=dict)  # receiver -> recovered the payloads
    detections: list = field(default_factory=list)  # (time, detector, suspect, reason)
    polluted_truth: set = field(default_factory=set)  # edges that delivered a polluted packet
    exposed_truth: list = field(default_factory=list)
    span_violations: int = 0
    drops: int = 0
    transmissions: int = 0

    @property
    def clean(self) -> bool:
        return not self.alerted


@dataclass
class SimResult:
    attackers: list
    generations_used: int
    sim_time_ms: float
    order: list  # attackers in the order they were blacklisted
    blacklist_trace: list  # (generation, identified) per polluted generation
    outcomes: list
    degenerate: bool = False
    false_accusations: list = field(default_factory=list)
    events: list = field(default_factory=list)

    @property
    def span_violations(self) -> int:
        return sum(o.span_violations for o in self.outcomes)

    @property
    def missed_exposed(self) -> int:
        """Polluted generations where no ground-truth exposed attacker was identified."""
        bad = 0
        for o in self.outcomes:
            if o.polluted_truth and not set(o.exposed_truth) & set(o.identified):
                bad += 1
        return bad


def exposed_attackers(topology: Topology, attackers, polluted_edges) -> list[str]:
    """Attackers with a polluted outgoing edge and no polluted incoming edge."""
    bad_in = {v for _, v in polluted_edges}
    bad_out = {u for u, _ in polluted_edges}
    return [n for n in topology.order() if n in attackers and n in bad_out and n not in bad_in]


def _seed_rngs(seed, k: int):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(k)]


class Network:
    def __init__(self, topology: Topology, attackers=(), config: SimConfig | None = None, seed=0):
        self.config = config or SimConfig()
        self.topology = topology.validate()
        self.attackers = {a.node: a for a in attackers}
        for a in self.attackers:
            if self.topology.roles.get(a) in (None, SOURCE, RECEIVER):
                raise TopologyError(f"attacker {a} must be an intermediate node")
        key_rng, self.data_rng, self.coef_rng, self.ctl_rng = _seed_rngs(seed, 4)
        self.keyrings = detection.bootstrap(self.topology, key_rng)
        self.secrets = {n: NodeSecrets.generate(key_rng) for n in self.topology.nodes}
        self.controller = Controller(self.topology, self.secrets, self.config.params, self.config.dims,
                                     self.config.tau, self.config.cooldown)
        self.clock = 0.0
        self.generation = 0
        self.events: list[dict] = []
        self._seq = count()

    # -- helpers

    @property
    def live(self) -> Topology:
        return self.controller.topology

    def _log(self, t: float, kind: str, **fields):
        if self.config.trace:
            self.events.append({"schema_version": SCHEMA_VERSION, "t": round(t, 3),
                                "generation": self.generation, "kind": kind, **fields})

    def _control_delay(self) -> float:
        lo, hi = self.config.control_delay
        return round(float(self.ctl_rng.uniform(lo, hi)), 3)

    def _push(self, t: float, kind: str, *payload):
        heapq.heappush(self._queue, (t, next(self._seq), kind, payload))

    def _is(self, node: str, behavior: str) -> bool:
        a = self.attackers.get(node)
        return a is not None and a.does(behavior)

    def _accepts_all(self, node: str) -> bool:
        """Attackers that relay pollution skip verification entirely."""
        return any(self._is(node, b) for b in ACCEPT_ALL)

    # -- per-generation key material

    def _send_matrix(self, u: str, v: str):
        """Rows giving, for a packet on edge u->v, the helper (and source signature) tags then the locating tags."""
        key = (u, v)
        mats = self._send_cache.get(key)
        if mats is None:
            dims, sid = self.config.dims, self._sid
            ring = self.keyrings[u]
            rows = []
            helper = self.live.roles[v] != RECEIVER
            if helper:
                rows.append(key_matrix(ring.key_for(v), sid, dims))
            signs = ring.signing_key is not None
            if signs:
                rows.append(key_matrix(ring.signing_key, sid, dims))
            ek = self.controller.edge_keys(u, v)
            rows.append(locating.tag_matrix(ek.x_set, sid, dims))
            mats = (np.vstack(rows), helper, signs)
            self._send_cache[key] = mats
        return mats

    def _recv_matrix(self, u: str, v: str):
        key = (u, v)
        mat = self._recv_cache.get(key)
        if mat is None:
            dims, sid = self.config.dims, self._sid
            ring = self.keyrings[v]
            ek = self.controller.edge_keys(u, v)
            rows = [key_matrix(ring.key_for(u), sid, dims),
                    locating.tag_matrix(ek.y_set, sid, dims)]
            mat = (np.vstack(rows), list(ek.y_index))
            self._recv_cache[key] = mat
        return mat

    # -- transmission

    def _send(self, t: float, u: str, v: str, y: np.ndarray, verification: np.ndarray | None):
        l = self.config.dims.l
        mat, helper_rows, signs = self._send_matrix(u, v)
        out = gf.matvec(mat, y)
        k = 0
        if helper_rows:
            helper = out[:l]
            k = l
        else:
            helper = np.zeros(l, dtype=np.uint8)
        if signs:
            verification = out[k:k + l]
            k += l
        tags = out[k:]
        if self._is(u, "tamper_helper_tag") and helper_rows:
            helper = helper ^ np.uint8(1 + int(self.coef_rng.integers(0, 255)))
        self._out.transmissions += 1
        self._push(t + self.live.delay(u, v), "packet", u, v, y, helper, verification, tags)

    def _emit(self, t: float, u: str):
        """One fresh recombination of everything ``u`` holds, to each child."""
        buf = self._buffers[u]
        if not len(buf):
            return
        n = self.config.dims.n
        polluter = self._is(u, "pollute_all_outgoing")
        for v in self.live.children(u):
            coeffs = self.coef_rng.integers(0, 256, size=len(buf), dtype=np.uint8)
            y = rlnc.recode(buf.packets, coeffs)
            if u in self.attackers:
                if polluter:
                    err = self.coef_rng.integers(0, 256, size=n, dtype=np.uint8)
                    err[int(self.coef_rng.integers(0, n))] |= 1
                    y = y ^ np.concatenate([err, np.zeros(len(y) - n, dtype=np.uint8)])
                if self._leaked.get(u) is not None:
                    # the parent handed over this node's own key, so its tags always check out
                    ver = gf.matvec(key_matrix(self._leaked[u], self._sid, self.config.dims), y)
                else:
                    ver = gf.combine(coeffs, np.stack(buf.helpers))
            else:
                ver = gf.combine(coeffs, np.stack(buf.helpers))
                if self.config.audit and not buf.basis.contains(y):
                    self._out.span_violations += 1
            self._send(t, u, v, y, ver)

    def _receive(self, t: float, u: str, v: str, y, helper, ver, tags):
        if v in self._frozen or u not in self.live.roles or v not in self.live.roles:
            return
        l = self.config.dims.l
        mat, y_index = self._recv_matrix(u, v)
        out = gf.matvec(mat, y)
        if not np.array_equal(out[l:], tags[y_index]):
            self._out.drops += 1
            self._log(t, "locating_drop", src=u, dst=v)
            return
        self._stores[v].add(self._sid, u, y, tags)
        if not rlnc.in_source_space(self._g, y):
            self._out.polluted_truth.add((u, v))
        if v in self.attackers and self._accepts_all(v):
            if self._buffers[v].add(u, y, helper):
                self._emit(t, v)
            return
        ok = bool(np.array_equal(out[:l], ver))
        reason = "verification"
        if ok and self.live.roles[v] == RECEIVER:
            ok = detection.e2e_verify(self.keyrings[v], y, self._sid, self.config.dims)
            reason = "end-to-end"
        if not ok and v in self.attackers:
            # attackers never raise alerts
            self._out.drops += 1
            return
        if not ok:
            self._out.drops += 1
            self._out.detections.append((round(t, 3), v, u, reason))
            self._log(t, "detect", detector=v, suspect=u, reason=reason)
            if v not in self._alerted:
                self._alerted.add(v)
                self._push(t + self._control_delay(), "alert", v)
            return
        if self._buffers[v].add(u, y, helper):
            self._log(t, "accept", src=u, dst=v)
            if self.live.children(v):
                self._emit(t, v)

    # -- control plane

    def _alert(self, t: float, node: str):
        if self._decision_at is not None:
            return
        if not self.controller.accept_alert(self._sid, node, now=self.generation):
            self._log(t, "alert_ignored", node=node)
            return
        self._out.alerted = True
        self._out.alerter = node
        self._log(t, "alert", node=node)
        self._decision_at = t + self.config.window
        for n in self.live.nodes:
            if self.live.roles[n] != SOURCE:
                self._push(t + self._control_delay(), "request", n)
        self._push(self._decision_at, "decide")

    def _lie(self, child: str, parent: str):
        """A colluding parent signs a clean vector for its child to report."""
        buf = self._buffers[parent]
        clean = [p for p in buf.packets if rlnc.in_source_space(self._g, p)]
        if not clean:
            return locating.Report(self._sid, child, parent, None, None)
        y, _ = rlnc.sample_space(clean, self.coef_rng)
        tags = locating.locating_emit(self.controller.edge_keys(parent, child), self._sid, y, self.config.dims)
        return locating.Report(self._sid, child, parent, y, tags)

    def _request(self, t: float, node: str):
        if node in self._frozen:
            return
        self._frozen.add(node)
        spec = self.attackers.get(node)
        for p in self.live.parents(node):
            if (spec is not None and spec.does("lie_about_incoming") and p in self.attackers
                    and self.coef_rng.random() < spec.lie_prob):
                report = self._lie(node, p)
                self._log(t, "lie", node=node, parent=p)
            else:
                report = locating.make_report(node, p, self._stores[node].get(self._sid, p), self._sid,
                                              self.coef_rng)
            self._push(t + self._control_delay(), "report", report)

    def _decide(self, t: float):
        res = self.controller.controller_round(self._sid, self._out.alerter, self._reports, now=self.generation)
        self._out.identified = list(res.attackers)
        self._log(t, "decide", identified=res.attackers,
                  polluted=sorted(f"{a}->{b}" for a, b in res.polluted))
        self._queue.clear()

    # -- generations

    def run_generation(self) -> GenerationOutcome:
        self.generation += 1
        cfg = self.config
        dims = cfg.dims
        topo = self.live
        src = topo.source
        self._sid = self.generation
        self._queue = []
        self._send_cache, self._recv_cache = {}, {}
        self._buffers = {n: NodeBuffer(dims.length) for n in topo.nodes}
        self._stores = {n: LocatingStore() for n in topo.nodes}
        self._frozen, self._alerted = set(), set()
        self._reports = []
        self._decision_at = None
        self._leaked = {}
        for a, spec in self.attackers.items():
            if a in topo.roles and spec.does("leak_key_to_child"):
                for c in topo.children(a):
                    if c in self.attackers and topo.roles[c] != RECEIVER:
                        self._leaked[c] = self.keyrings[a].key_for(c)
        start = self.clock
        self._out = GenerationOutcome(self.generation, start, start)
        self._log(start, "generation_start", sid=self._sid)

        data = self.data_rng.integers(0, 256, size=(dims.m, dims.n - dims.l), dtype=np.uint8)
        self._g = detection.build_generation(data, self._sid, self.keyrings[src].e2e_key, dims)
        self.controller.register(self._g)
        for c in topo.children(src):
            for y in self._g.packets:
                self._send(start, src, c, np.array(y), None)
        for a, spec in self.attackers.items():
            if a in topo.roles and spec.does("alert_flood"):
                self._push(start + self._control_delay(), "alert", a)

        t = start
        while self._queue:
            t, _, kind, payload = heapq.heappop(self._queue)
            if kind == "packet":
                self._receive(t, *payload)
            elif kind == "alert":
                self._alert(t, *payload)
            elif kind == "request":
                self._request(t, *payload)
            elif kind == "report":
                if t <= self._decision_at:
                    self._reports.append(payload[0])
            elif kind == "decide":
                self._decide(t)
        out = self._out
        out.end_ms = t
        self.clock = t
        out.exposed_truth = exposed_attackers(topo, self.attackers, out.polluted_truth)
        if not out.alerted:
            for r in topo.receivers:
                try:
                    got = rlnc.decode(self._buffers[r].packets, dims.m)
                    out.decoded[r] = bool(np.array_equal(got, self._g.payloads))
                except (rlnc.InsufficientRank, rlnc.InconsistentSystem):
                    out.decoded[r] = False
        self.controller.generations.pop(self._g.id, None)
        return out

    def eliminate_all(self, max_generations: int | None = None) -> SimResult:
        """Run generations until every attacker is blacklisted.

        Stops early, flagged degenerate, when a generation passes cleanly while
        attackers remain (they can no longer reach anyone) or the budget runs out.
        """
        targets = set(self.attackers)
        limit = max_generations if max_generations is not None else 3 * len(targets) + 3
        outcomes, order, trace = [], [], []
        kappa, done_at = 0, 0.0
        degenerate = False
        if not targets:
            outcomes.append(self.run_generation())
        while targets - set(order):
            if len(outcomes) >= limit:
                degenerate = True
                break
            out = self.run_generation()
            outcomes.append(out)
            if out.identified:
                trace.append((out.index, list(out.identified)))
                order.extend(a for a in out.identified if a in targets and a not in order)
            if not targets - set(order):
                kappa, done_at = len(outcomes), out.end_ms
            elif out.clean:
                degenerate = True
                break
        false = [n for n in self.controller.blacklist if n not in targets]
        return SimResult(
            attackers=sorted(targets), generations_used=kappa, sim_time_ms=round(done_at, 3), order=order,
            blacklist_trace=trace, outcomes=outcomes, degenerate=degenerate, false_accusations=false,
            events=list(self.events),
        )


def place_attackers(topology: Topology, eta: int, rng: np.random.Generator,
                    behaviors=frozenset({"pollute_all_outgoing"}), liar_fraction: float = 0.0,
                    max_tries: int = 50) -> list[AttackerSpec]:
    """Random intermediates such that each still lies on a source->receiver path
    after all the others are removed.

    Candidates are visited in random order and kept when the whole set stays
    feasible; a fresh order is tried if the walk runs out before ``eta``. Each
    attacker independently also covers for malicious parents with probability
    ``liar_fraction``.
    """
    mids = topology.intermediates
    if eta == 0:
        return []
    if eta >= len(mids):
        raise TopologyError(f"cannot place {eta} attackers among {len(mids)} intermediates")
    for _ in range(max_tries):
        chosen: list[str] = []
        for i in rng.permutation(len(mids)):
            c = mids[int(i)]
            trial = chosen + [c]
            if all(topology.on_path(a, set(trial) - {a}) for a in trial):
                chosen = trial
                if len(chosen) == eta:
                    order = sorted(chosen, key=topology.nodes.index)
                    liars = rng.random(len(order)) < liar_fraction
                    return [AttackerSpec(a, frozenset(behaviors) | ({"lie_about_incoming"} if lie else set()))
                            for a, lie in zip(order, liars)]
    raise TopologyError(f"no feasible placement of {eta} attackers after {max_tries} attempts")


@dataclass
class ExperimentRow:
    eta: int
    avg_generations: float
    avg_delay_ms: float
    degenerate_rounds: int
    max_generations: int
    kappa_within_eta: int  # rounds with kappa <= eta among non-degenerate ones
    rounds: int


def run_round(node_count: int, eta: int, config: SimConfig, seed,
              liar_fraction: float = 0.5) -> tuple[SimResult, Topology]:
    topo_rng, place_rng = _seed_rngs(seed, 2)
    for _ in range(20):
        # sparse draws may not fit eta independent attackers; draw another network
        topo = gen_topology(topo_rng, node_count)
        try:
            attackers = place_attackers(topo, eta, place_rng, liar_fraction=liar_fraction, max_tries=5)
            break
        except TopologyError:
            continue
    else:
        raise TopologyError(f"no {node_count}-node network fits {eta} attackers")
    net = Network(topo, attackers, config, seed=np.random.SeedSequence(seed).spawn(3)[2])
    return net.eliminate_all(), topo


def run_experiment(node_count: int = 50, etas=(4, 8, 12, 16, 20), rounds: int = 100, seed: int = 0,
                   config: SimConfig | None = None, trace_dir=None,
                   liar_fraction: float = 0.5) -> list[ExperimentRow]:
    config = config or SimConfig()
    rows = []
    for eta in etas:
        kappas, delays = [], []
        degenerate = 0
        within = 0
        for r in range(rounds):
            res, _ = run_round(node_count, eta, config, [seed, eta, r], liar_fraction)
            if trace_dir is not None:
                write_events(Path(trace_dir) / f"eta{eta}_round{r}.jsonl", res.events)
            if res.degenerate:
                degenerate += 1
                continue
            kappas.append(res.generations_used)
            delays.append(res.sim_time_ms)
            within += res.generations_used <= eta
        rows.append(ExperimentRow(
            eta=eta,
            avg_generations=round(float(np.mean(kappas)), 4) if kappas else float("nan"),
            avg_delay_ms=round(float(np.mean(delays)), 3) if delays else float("nan"),
            degenerate_rounds=degenerate,
            max_generations=max(kappas, default=0),
            kappa_within_eta=within,
            rounds=rounds,
        ))
    return rows


def write_events(path, events) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for e in events:
            f.write(json.dumps(e, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return x.tobytes().hex()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def row_dict(row: ExperimentRow) -> dict:
    return asdict(row)


# -- scripted scenarios


def detection_example() -> Topology:
    """The nine-node network used to explain detection keys and locating."""
    from .topology import INTERMEDIATE

    roles = {"S": SOURCE, **{x: INTERMEDIATE for x in "ABCDE"}, "R1": RECEIVER, "R2": RECEIVER}
    edges = [("S", "A"), ("S", "B"), ("S", "C"), ("A", "D"), ("B", "D"), ("C", "D"), ("A", "R1"),
             ("D", "E"), ("D", "R1"), ("E", "R1"), ("E", "R2"), ("C", "R2")]
    return Topology(roles, {e: 10.0 for e in edges}).validate()


def collusion_example() -> tuple[Topology, list[AttackerSpec]]:
    """Three attackers where A covers for its malicious parent B."""
    from .topology import INTERMEDIATE

    roles = {"S": SOURCE, **{x: INTERMEDIATE for x in "BCADFE"}, "R": RECEIVER}
    edges = [("S", "B"), ("S", "C"), ("B", "A"), ("C", "A"), ("B", "D"), ("D", "R"), ("A", "F"),
             ("F", "R"), ("A", "E"), ("C", "E"), ("E", "R")]
    topo = Topology(roles, {e: 10.0 for e in edges}).validate()
    pollute = frozenset({"pollute_all_outgoing"})
    attackers = [
        AttackerSpec("A", frozenset({"pollute_all_outgoing", "lie_about_incoming"})),
        AttackerSpec("B", pollute),
        AttackerSpec("E", pollute),
    ]
    return topo, attackers
