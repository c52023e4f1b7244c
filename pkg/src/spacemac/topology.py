"""Directed acyclic multicast topologies: one source, intermediates, receivers."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np
import yaml

SOURCE = "source"
INTERMEDIATE = "intermediate"
RECEIVER = "receiver"
ROLES = (SOURCE, INTERMEDIATE, RECEIVER)


class TopologyError(ValueError):
    pass


@dataclass
class Topology:
    roles: dict[str, str]
    delays: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(self.roles)
        for (u, v), d in self.delays.items():
            if u not in self.roles or v not in self.roles:
                raise TopologyError(f"edge {u}->{v} names an unknown node")
            self.graph.add_edge(u, v, delay=d)
        self._rank = {n: i for i, n in enumerate(self.roles)}.__getitem__

    # -- queries

    @property
    def nodes(self) -> list[str]:
        return list(self.roles)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return list(self.delays)

    @property
    def source(self) -> str:
        srcs = [n for n, r in self.roles.items() if r == SOURCE]
        if len(srcs) != 1:
            raise TopologyError(f"expected exactly one source, found {len(srcs)}")
        return srcs[0]

    @property
    def receivers(self) -> list[str]:
        return [n for n, r in self.roles.items() if r == RECEIVER]

    @property
    def intermediates(self) -> list[str]:
        return [n for n, r in self.roles.items() if r == INTERMEDIATE]

    def parents(self, node: str) -> list[str]:
        return list(self.graph.predecessors(node))

    def children(self, node: str) -> list[str]:
        return list(self.graph.successors(node))

    def delay(self, u: str, v: str) -> float:
        return self.delays[(u, v)]

    def order(self) -> list[str]:
        """Topological order, ties broken by insertion order so it is reproducible."""
        return list(nx.lexicographical_topological_sort(self.graph, key=self._rank))

    def is_dag(self) -> bool:
        return nx.is_directed_acyclic_graph(self.graph)

    def max_path_delay(self) -> float:
        return float(nx.dag_longest_path_length(self.graph, weight="delay")) if self.delays else 0.0

    def hop_distance(self, u: str, v: str) -> int | None:
        try:
            return nx.shortest_path_length(self.graph, u, v)
        except nx.NetworkXNoPath:
            return None

    def validate(self) -> "Topology":
        for n, r in self.roles.items():
            if r not in ROLES:
                raise TopologyError(f"node {n} has unknown role {r!r}")
        if not self.is_dag():
            raise TopologyError("topology has a directed cycle")
        src = self.source
        if not self.receivers:
            raise TopologyError("topology has no receiver")
        if self.parents(src):
            raise TopologyError("the source must not have parents")
        for r in self.receivers:
            if self.children(r):
                raise TopologyError(f"receiver {r} must not have children")
        reach = nx.descendants(self.graph, src) | {src}
        back = set()
        for r in self.receivers:
            back |= nx.ancestors(self.graph, r) | {r}
        stray = [n for n in self.roles if n not in reach or n not in back]
        if stray:
            raise TopologyError(f"nodes not on any source->receiver path: {stray}")
        return self

    def without(self, removed) -> "Topology":
        removed = set(removed)
        roles = {n: r for n, r in self.roles.items() if n not in removed}
        delays = {e: d for e, d in self.delays.items() if e[0] not in removed and e[1] not in removed}
        return Topology(roles, delays)

    def on_path(self, node: str, removed=()) -> bool:
        """Whether ``node`` lies on a source->receiver path avoiding ``removed``."""
        removed = set(removed) - {node}
        g = self.graph.subgraph([n for n in self.roles if n not in removed])
        src = self.source
        if node == src:
            up = True
        else:
            up = src in g and nx.has_path(g, src, node)
        if not up:
            return False
        return any(r in g and nx.has_path(g, node, r) for r in self.receivers)

    # -- serialization

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n, "role": r} for n, r in self.roles.items()],
            "edges": [{"from": u, "to": v, "delay_ms": d} for (u, v), d in self.delays.items()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        try:
            roles = {str(n["id"]): n["role"] for n in data["nodes"]}
            delays = {(str(e["from"]), str(e["to"])): float(e["delay_ms"]) for e in data["edges"]}
        except (KeyError, TypeError) as exc:
            raise TopologyError(f"malformed topology document: {exc}") from exc
        return cls(roles, delays).validate()

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    @classmethod
    def load(cls, path) -> "Topology":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))


def gen_topology(rng: np.random.Generator, node_count: int, edge_ratio: float | None = None,
                 delay_range=(10.0, 100.0), max_tries: int = 100) -> Topology:
    """Random DAG with one source ``S``, one receiver ``R`` and intermediates ``0..k-1``.

    Nodes are placed in a random topological order. Every intermediate gets one
    random earlier parent and one random later child, so it lies on an S->R path;
    random forward edges are then added until ``edges / nodes`` reaches
    ``edge_ratio`` (drawn from [1, 5] when not given).
    """
    if node_count < 3:
        raise TopologyError("need at least a source, one intermediate and a receiver")
    for _ in range(max_tries):
        ratio = float(rng.uniform(1.0, 5.0)) if edge_ratio is None else float(edge_ratio)
        k = node_count - 2
        mids = [str(i) for i in rng.permutation(k)]
        order = ["S"] + mids + ["R"]
        pos = {n: i for i, n in enumerate(order)}
        edges: set[tuple[str, str]] = set()
        for i, n in enumerate(mids, start=1):
            edges.add((order[int(rng.integers(0, i))], n))
            edges.add((n, order[int(rng.integers(i + 1, len(order)))]))
        target = int(round(ratio * node_count))
        max_edges = node_count * (node_count - 1) // 2 - 1
        target = min(target, max_edges)
        while len(edges) < target:
            a, b = sorted(int(x) for x in rng.choice(len(order), size=2, replace=False))
            u, v = order[a], order[b]
            if u == "S" and v == "R":
                continue
            edges.add((u, v))
        ordered = sorted(edges, key=lambda e: (pos[e[0]], pos[e[1]]))
        lo, hi = delay_range
        delays = {e: float(np.round(rng.uniform(lo, hi), 3)) for e in ordered}
        roles = {"S": SOURCE, **{n: INTERMEDIATE for n in sorted(mids, key=int)}, "R": RECEIVER}
        topo = Topology(roles, delays)
        try:
            return topo.validate()
        except TopologyError:
            continue
    raise TopologyError(f"no valid topology after {max_tries} attempts")


def chain(length: int, delay: float = 10.0) -> Topology:
    """S -> 0 -> 1 -> ... -> R with ``length`` intermediates."""
    names = ["S"] + [str(i) for i in range(length)] + ["R"]
    roles = {n: INTERMEDIATE for n in names}
    roles["S"] = SOURCE
    roles["R"] = RECEIVER
    return Topology(roles, {(a, b): delay for a, b in zip(names, names[1:])}).validate()
