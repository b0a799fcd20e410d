"""Weighted undirected traffic graphs for a single time window.

Node ids are dense integers assigned by interning the sorted set of endpoint
keys, so the same set of flows always yields the same ids regardless of
record order. Parallel flows between two endpoints accumulate onto one edge;
self-loops are discarded (and counted).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .ingest import FlowRecord
from .windows import TimeWindow

log = logging.getLogger("flowgraph.graph")


class WeightFeature(enum.Enum):
    """Which flow quantity an edge weight accumulates."""

    PACKETS = "packets"
    BYTES = "bytes"
    RATE = "rate"
    UNIT = "unit"


@dataclass
class EdgeData:
    weight: float
    multiplicity: int
    attack: bool


class UnionFind:
    """Disjoint sets over dense integer ids (path halving + union by size)."""

    def __init__(self, n: int) -> None:
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True


class TrafficGraph:
    """Undirected weighted graph over interned endpoint keys."""

    def __init__(self, keys: list[str]) -> None:
        self.keys = keys
        self._ids = {key: i for i, key in enumerate(keys)}
        self.edges: dict[tuple[int, int], EdgeData] = {}
        self.degrees: list[float] = [0.0] * len(keys)
        self.discarded_self_loops = 0
        self._adjacency: list[list[tuple[int, float]]] | None = None

    # -- construction ------------------------------------------------------

    def id_of(self, key: str) -> int:
        return self._ids[key]

    def add_flow(self, u: int, v: int, weight: float, attack: bool) -> None:
        if u == v:
            self.discarded_self_loops += 1
            return
        if u > v:
            u, v = v, u
        edge = self.edges.get((u, v))
        if edge is None:
            self.edges[(u, v)] = EdgeData(weight=weight, multiplicity=1, attack=attack)
        else:
            edge.weight += weight
            edge.multiplicity += 1
            edge.attack = edge.attack or attack
        self.degrees[u] += weight
        self.degrees[v] += weight
        self._adjacency = None

    # -- queries -----------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.keys)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def weighted_degree(self, node: int) -> float:
        if not 0 <= node < len(self.degrees):
            raise KeyError(f"unknown node id {node}")
        return self.degrees[node]

    def total_weight(self) -> float:
        return sum(e.weight for e in self.edges.values())

    def adjacency(self) -> list[list[tuple[int, float]]]:
        """Symmetric adjacency lists (neighbor id, edge weight), cached."""
        if self._adjacency is None:
            adj: list[list[tuple[int, float]]] = [[] for _ in self.keys]
            for (u, v), edge in self.edges.items():
                adj[u].append((v, edge.weight))
                adj[v].append((u, edge.weight))
            self._adjacency = adj
        return self._adjacency

    def weight_matrix(self) -> np.ndarray:
        n = self.node_count
        mat = np.zeros((n, n), dtype=np.float64)
        for (u, v), edge in self.edges.items():
            mat[u, v] = edge.weight
            mat[v, u] = edge.weight
        return mat

    def component_count(self) -> int:
        """Connected components by union-find; edges of weight <= 0 are ignored
        so the count matches what the Laplacian actually couples."""
        uf = UnionFind(self.node_count)
        for (u, v), edge in self.edges.items():
            if edge.weight > 0:
                uf.union(u, v)
        return uf.count


def build_graph(
    window: TimeWindow,
    weight: WeightFeature = WeightFeature.UNIT,
    *,
    normal_label: str = "Normal",
) -> TrafficGraph:
    """Build the traffic graph of one window.

    Every endpoint key seen in the window becomes a node (sorted interning,
    so ids are canonical for the record set). Each record adds its weight
    feature to the undirected edge between its endpoints; ``UNIT`` counts one
    per record. A record whose label differs from ``normal_label`` marks its
    edge as attack traffic.
    """
    key_set: set[str] = set()
    for rec in window.records:
        key_set.add(rec.src_key)
        key_set.add(rec.dst_key)
    graph = TrafficGraph(sorted(key_set))
    for rec in window.records:
        u = graph.id_of(rec.src_key)
        v = graph.id_of(rec.dst_key)
        if weight is WeightFeature.UNIT:
            w = 1.0
        elif weight is WeightFeature.PACKETS:
            w = rec.pkts
        elif weight is WeightFeature.BYTES:
            w = rec.bytes
        else:
            w = rec.rate
        graph.add_flow(u, v, w, attack=rec.label != normal_label)
    if graph.discarded_self_loops:
        log.debug(
            "window %d: discarded %d self-loop flow(s)", window.index, graph.discarded_self_loops
        )
    return graph
