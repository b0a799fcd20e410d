"""Shared fixtures and independent oracles used across the test modules."""

from __future__ import annotations

import random
from collections import deque

from flowgraph.graph import TrafficGraph, WeightFeature, build_graph
from flowgraph.ingest import FlowRecord, SchemaMapping, format_value
from flowgraph.windows import TimeWindow

SCHEMA = SchemaMapping(
    time_column="stime",
    src_columns=("saddr",),
    dst_columns=("daddr",),
    label_column="category",
    pkts_column="pkts",
    bytes_column="bytes",
    rate_column="rate",
)


def make_record(ts, src, dst, pkts=1.0, nbytes=0.0, rate=0.0, label="Normal"):
    extras = {
        "stime": format_value(float(ts)),
        "saddr": src,
        "daddr": dst,
        "pkts": format_value(float(pkts)),
        "bytes": format_value(float(nbytes)),
        "rate": format_value(float(rate)),
        "category": label,
    }
    return FlowRecord(
        timestamp=float(ts),
        src_keys=(src,),
        dst_keys=(dst,),
        pkts=float(pkts),
        bytes=float(nbytes),
        rate=float(rate),
        label=label,
        extras=extras,
    )


def graph_from_edges(edges, weight=WeightFeature.PACKETS) -> TrafficGraph:
    """Graph with one record per (src, dst, w) triple; w lands on pkts/bytes/rate alike."""
    records = tuple(make_record(0.0, a, b, pkts=w, nbytes=w, rate=w) for a, b, w in edges)
    window = TimeWindow(index=0, start=0.0, end=1.0, records=records)
    return build_graph(window, weight)


def random_edges(rng: random.Random, max_nodes=60, w_lo=0.1, w_hi=100.0):
    """Erdos-Renyi-ish weighted edge list over up to max_nodes labeled nodes."""
    n = rng.randint(2, max_nodes)
    p = rng.uniform(0.03, 0.4)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((f"h{i:02d}", f"h{j:02d}", rng.uniform(w_lo, w_hi)))
    if not edges:
        edges.append(("h00", "h01", rng.uniform(w_lo, w_hi)))
    return edges


def bfs_component_count(graph: TrafficGraph) -> int:
    """Independent component count (BFS, no union-find)."""
    n = graph.node_count
    neighbors = [[] for _ in range(n)]
    for (u, v), edge in graph.edges.items():
        if edge.weight > 0:
            neighbors[u].append(v)
            neighbors[v].append(u)
    seen = [False] * n
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        queue = deque([start])
        seen[start] = True
        while queue:
            node = queue.popleft()
            for other in neighbors[node]:
                if not seen[other]:
                    seen[other] = True
                    queue.append(other)
    return count


def set_partitions(items):
    """Every partition of ``items`` into nonempty blocks (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in set_partitions(rest):
        for i in range(len(smaller)):
            yield smaller[:i] + [smaller[i] + [first]] + smaller[i + 1:]
        yield [[first]] + smaller


def modularity_oracle(edges, blocks) -> float:
    """Modularity straight from its definition, on node keys, resolution 1."""
    m = sum(w for _, _, w in edges)
    if m <= 0:
        return 0.0
    block_of = {}
    for idx, block in enumerate(blocks):
        for key in block:
            block_of[key] = idx
    internal = [0.0] * len(blocks)
    volume = [0.0] * len(blocks)
    for a, b, w in edges:
        if block_of[a] == block_of[b]:
            internal[block_of[a]] += w
        volume[block_of[a]] += w
        volume[block_of[b]] += w
    return sum(internal[i] / m - (volume[i] / (2 * m)) ** 2 for i in range(len(blocks)))
