"""Community detection, community quality metrics, and cross-window tracking.

Both strategies are implemented here rather than pulled from a graph library
because the pipeline contract is byte-identical output for a given seed,
including across thread counts. That requires pinning the node visit order
(seeded shuffle for the greedy modularity strategy), synchronous label
updates with seeded tie-breaks for label propagation, and dense, first-seen
community renumbering. All randomness comes from a ``random.Random(seed)``
local to each call, so concurrent windows cannot interfere.
"""

from __future__ import annotations

import logging
import random
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from collections.abc import Sequence

from .errors import ConfigError
from .export import SENTINEL
from .graph import TrafficGraph, WeightFeature, build_graph
from .ingest import FlowRecord, SchemaMapping
from .windows import partition_windows

log = logging.getLogger("flowgraph.community")

STRATEGY_LOUVAIN = "louvain"
STRATEGY_LABELPROP = "labelprop"
STRATEGIES = (STRATEGY_LOUVAIN, STRATEGY_LABELPROP)

# Gains below this are treated as zero so float noise cannot flip a move.
_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class CommunityPartition:
    """A node -> community assignment for one window's graph.

    Community ids are dense, 0-based, numbered by first appearance in node id
    order. ``node_keys`` snapshots the graph's interned keys so partitions can
    be compared across windows, where integer ids are not comparable.
    """

    window_index: int
    strategy: str
    seed: int
    node_keys: tuple[str, ...]
    assignment: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]
    centers: tuple[int, ...]

    @property
    def community_count(self) -> int:
        return len(self.members)

    def member_key_set(self, community: int) -> set[str]:
        return {self.node_keys[i] for i in self.members[community]}

    def center_key(self, community: int) -> str:
        return self.node_keys[self.centers[community]]


def _renumber_dense(assignment: list[int]) -> list[int]:
    remap: dict[int, int] = {}
    out = []
    for c in assignment:
        if c not in remap:
            remap[c] = len(remap)
        out.append(remap[c])
    return out


def _one_level(
    adj: list[list[tuple[int, float]]],
    self_w: list[float],
    rng: random.Random,
    resolution: float,
) -> tuple[bool, list[int]]:
    """One local-moving pass of the greedy modularity strategy.

    Nodes are visited in a seeded shuffled order, repeatedly, until a full
    sweep moves nothing. Ties keep the current community; otherwise the
    lowest-id community among equal best gains wins.
    """
    n = len(adj)
    k = [2.0 * self_w[i] + sum(w for _, w in adj[i]) for i in range(n)]
    m2 = sum(k)
    if m2 <= 0:
        return False, list(range(n))

    node2com = list(range(n))
    com_tot = k[:]
    order = list(range(n))
    rng.shuffle(order)

    moved_any = False
    moved = True
    while moved:
        moved = False
        for i in order:
            ci = node2com[i]
            neigh_w: dict[int, float] = {}
            for j, w in adj[i]:
                cj = node2com[j]
                neigh_w[cj] = neigh_w.get(cj, 0.0) + w
            com_tot[ci] -= k[i]
            best_com = ci
            best_gain = neigh_w.get(ci, 0.0) - resolution * com_tot[ci] * k[i] / m2
            for c in sorted(neigh_w):
                if c == ci:
                    continue
                gain = neigh_w[c] - resolution * com_tot[c] * k[i] / m2
                if gain > best_gain + _GAIN_EPS:
                    best_com, best_gain = c, gain
            com_tot[best_com] += k[i]
            if best_com != ci:
                node2com[i] = best_com
                moved = True
                moved_any = True
    return moved_any, node2com


def _aggregate(
    adj: list[list[tuple[int, float]]],
    self_w: list[float],
    node2com: list[int],
    n_communities: int,
) -> tuple[list[list[tuple[int, float]]], list[float]]:
    new_self = [0.0] * n_communities
    acc: dict[tuple[int, int], float] = {}
    for i, neighbors in enumerate(adj):
        ci = node2com[i]
        new_self[ci] += self_w[i]
        for j, w in neighbors:
            if j < i:
                continue
            cj = node2com[j]
            if ci == cj:
                new_self[ci] += w
            else:
                key = (ci, cj) if ci < cj else (cj, ci)
                acc[key] = acc.get(key, 0.0) + w
    new_adj: list[list[tuple[int, float]]] = [[] for _ in range(n_communities)]
    for (a, b), w in sorted(acc.items()):
        new_adj[a].append((b, w))
        new_adj[b].append((a, w))
    return new_adj, new_self


def _louvain(adj: list[list[tuple[int, float]]], seed: int, resolution: float) -> list[int]:
    n = len(adj)
    if n == 0:
        return []
    rng = random.Random(seed)
    node_map = list(range(n))
    cur_adj = adj
    cur_self = [0.0] * n
    while True:
        moved, node2com = _one_level(cur_adj, cur_self, rng, resolution)
        node2com = _renumber_dense(node2com)
        node_map = [node2com[s] for s in node_map]
        n_communities = max(node2com) + 1 if node2com else 0
        if not moved or n_communities == len(cur_adj):
            break
        cur_adj, cur_self = _aggregate(cur_adj, cur_self, node2com, n_communities)
    return _renumber_dense(node_map)


def _label_propagation(adj: list[list[tuple[int, float]]], seed: int, max_rounds: int) -> list[int]:
    """Synchronous weighted label propagation with seeded tie-breaks.

    Every node adopts the label with the largest total incident weight among
    its neighbors, all nodes updating from the previous round's labels.
    Synchronous updates can oscillate on symmetric structures, so rounds are
    capped; isolated nodes keep their own label.
    """
    n = len(adj)
    rng = random.Random(seed)
    labels = list(range(n))
    for _ in range(max_rounds):
        new_labels = list(labels)
        for i in range(n):
            if not adj[i]:
                continue
            acc: dict[int, float] = {}
            for j, w in adj[i]:
                acc[labels[j]] = acc.get(labels[j], 0.0) + w
            best = max(acc.values())
            candidates = sorted(c for c, w in acc.items() if w >= best - _GAIN_EPS)
            new_labels[i] = candidates[0] if len(candidates) == 1 else rng.choice(candidates)
        if new_labels == labels:
            break
        labels = new_labels
    return _renumber_dense(labels)


def partition(
    graph: TrafficGraph,
    strategy: str = STRATEGY_LOUVAIN,
    seed: int = 0,
    *,
    resolution: float = 1.0,
    max_rounds: int = 100,
    window_index: int = 0,
) -> CommunityPartition:
    """Partition a window graph into communities."""
    if strategy == STRATEGY_LOUVAIN:
        assignment = _louvain(graph.adjacency(), seed, resolution)
    elif strategy == STRATEGY_LABELPROP:
        assignment = _label_propagation(graph.adjacency(), seed, max_rounds)
    else:
        raise ConfigError(f"unknown community strategy {strategy!r} (expected one of {', '.join(STRATEGIES)})")

    count = max(assignment) + 1 if assignment else 0
    members: list[list[int]] = [[] for _ in range(count)]
    for node, c in enumerate(assignment):
        members[c].append(node)
    centers = tuple(
        min(nodes, key=lambda i: (-graph.degrees[i], graph.keys[i])) for nodes in members
    )
    return CommunityPartition(
        window_index=window_index,
        strategy=strategy,
        seed=seed,
        node_keys=tuple(graph.keys),
        assignment=tuple(assignment),
        members=tuple(tuple(nodes) for nodes in members),
        centers=centers,
    )


def partition_many(
    graphs: Sequence[TrafficGraph],
    *,
    strategy: str = STRATEGY_LOUVAIN,
    seed: int = 0,
    resolution: float = 1.0,
    threads: int | None = None,
    window_indices: Sequence[int] | None = None,
) -> list[CommunityPartition]:
    """Partition many window graphs, optionally across a thread pool.

    Results come back in input order and are independent of the thread count:
    each partition call owns its RNG and no state is shared.
    """
    indices = list(window_indices) if window_indices is not None else list(range(len(graphs)))
    if len(indices) != len(graphs):
        raise ValueError("window_indices must match graphs in length")

    def job(arg: tuple[TrafficGraph, int]) -> CommunityPartition:
        g, wi = arg
        return partition(g, strategy, seed, resolution=resolution, window_index=wi)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, zip(graphs, indices)))
    return [job(arg) for arg in zip(graphs, indices)]


def modularity(graph: TrafficGraph, assignment: Sequence[int], resolution: float = 1.0) -> float:
    """Weighted modularity of an assignment; 0.0 for graphs with no weight."""
    m = graph.total_weight()
    if m <= 0:
        return 0.0
    internal: dict[int, float] = {}
    volume: dict[int, float] = {}
    for (u, v), edge in graph.edges.items():
        if assignment[u] == assignment[v]:
            c = assignment[u]
            internal[c] = internal.get(c, 0.0) + edge.weight
    for node, c in enumerate(assignment):
        volume[c] = volume.get(c, 0.0) + graph.degrees[node]
    return sum(
        internal.get(c, 0.0) / m - resolution * (vol / (2.0 * m)) ** 2
        for c, vol in volume.items()
    )


# ---------------------------------------------------------------------------
# quality metrics


@dataclass(frozen=True)
class CommunityStats:
    community_id: int
    size: int
    internal_edges: int
    internal_weight: float
    boundary_edges: int
    boundary_weight: float
    density: float
    conductance: float
    center: int
    center_key: str


@dataclass(frozen=True)
class CommunityFirstOrder:
    window_index: int
    node_count: int
    communities: tuple[CommunityStats, ...]
    community_count: int
    modularity: float


@dataclass(frozen=True)
class CommunitySecondOrder:
    window_index: int
    density_mean: float
    density_std: float
    density_min: float
    density_max: float
    conductance_mean: float
    conductance_std: float
    conductance_min: float
    conductance_max: float
    size_mean: float
    size_std: float
    size_min: float
    size_max: float
    largest_community_fraction: float
    modularity: float
    community_count: int


def gc_metrics_first_order(
    graph: TrafficGraph, part: CommunityPartition, *, resolution: float = 1.0
) -> CommunityFirstOrder:
    """Per-community structure metrics plus graph-level modularity.

    Density is the fraction of possible internal node pairs that carry an
    edge (0 for singletons). Conductance is boundary weight over total weight
    touching the community, ``b / (2 * internal + b)``, and 0 when the
    community touches no weight at all.
    """
    count = part.community_count
    internal_w = [0.0] * count
    internal_e = [0] * count
    boundary_w = [0.0] * count
    boundary_e = [0] * count
    sizes = [len(m) for m in part.members]

    for (u, v), edge in graph.edges.items():
        cu, cv = part.assignment[u], part.assignment[v]
        if cu == cv:
            internal_w[cu] += edge.weight
            internal_e[cu] += 1
        else:
            boundary_w[cu] += edge.weight
            boundary_w[cv] += edge.weight
            boundary_e[cu] += 1
            boundary_e[cv] += 1

    stats = []
    for c in range(count):
        size = sizes[c]
        pairs = size * (size - 1) / 2.0
        density = internal_e[c] / pairs if pairs > 0 else 0.0
        denom = 2.0 * internal_w[c] + boundary_w[c]
        conductance = boundary_w[c] / denom if denom > 0 else 0.0
        stats.append(
            CommunityStats(
                community_id=c,
                size=size,
                internal_edges=internal_e[c],
                internal_weight=internal_w[c],
                boundary_edges=boundary_e[c],
                boundary_weight=boundary_w[c],
                density=density,
                conductance=conductance,
                center=part.centers[c],
                center_key=part.center_key(c),
            )
        )
    return CommunityFirstOrder(
        window_index=part.window_index,
        node_count=graph.node_count,
        communities=tuple(stats),
        community_count=count,
        modularity=modularity(graph, part.assignment, resolution),
    )


def _spread(values: list[float]) -> tuple[float, float, float, float]:
    if not values:
        return (SENTINEL,) * 4
    return (
        statistics.fmean(values),
        statistics.pstdev(values),
        min(values),
        max(values),
    )


def gc_metrics_second_order(first: CommunityFirstOrder) -> CommunitySecondOrder:
    """Aggregate the per-community metrics of one window into scalars."""
    densities = [c.density for c in first.communities]
    conductances = [c.conductance for c in first.communities]
    sizes = [float(c.size) for c in first.communities]
    if first.node_count > 0 and sizes:
        largest = max(sizes) / float(first.node_count)
    else:
        largest = SENTINEL
    return CommunitySecondOrder(
        first.window_index,
        *_spread(densities),
        *_spread(conductances),
        *_spread(sizes),
        largest_community_fraction=largest,
        modularity=first.modularity,
        community_count=first.community_count,
    )


# ---------------------------------------------------------------------------
# cross-window tracking


def stability(prev_nodes: set[str], next_nodes: set[str]) -> float:
    """Overlap score in [-1, 1]: intersection minus symmetric difference,
    over the union. 1 for identical sets, -1 for disjoint ones; the sentinel
    for two empty sets, where the score is undefined."""
    union = len(prev_nodes | next_nodes)
    if union == 0:
        return SENTINEL
    inter = len(prev_nodes & next_nodes)
    return (2 * inter - union) / union


@dataclass(frozen=True)
class MatchedPair:
    prev_community: int
    next_community: int
    overlap: int
    stability: float


@dataclass(frozen=True)
class CommunityMatch:
    pairs: tuple[MatchedPair, ...]
    born: tuple[int, ...]
    died: tuple[int, ...]

    def stability_by_next(self) -> dict[int, float]:
        return {p.next_community: p.stability for p in self.pairs}


def propagate_communities(prev: CommunityPartition, cur: CommunityPartition) -> CommunityMatch:
    """Greedy max-overlap matching of communities across adjacent windows.

    Candidate pairs share at least one node key. They are taken largest
    overlap first; ties prefer the pair whose successor still contains the
    predecessor's center, then the lowest community id pair. Each community
    matches at most once. Unmatched successors are born, unmatched
    predecessors died.
    """
    prev_sets = [prev.member_key_set(c) for c in range(prev.community_count)]
    cur_sets = [cur.member_key_set(c) for c in range(cur.community_count)]
    key_to_cur: dict[str, int] = {}
    for c, keys in enumerate(cur_sets):
        for k in keys:
            key_to_cur[k] = c

    candidates: list[tuple[int, int, int, int]] = []
    for a, keys in enumerate(prev_sets):
        overlap: dict[int, int] = {}
        for k in keys:
            b = key_to_cur.get(k)
            if b is not None:
                overlap[b] = overlap.get(b, 0) + 1
        center = prev.center_key(a)
        for b, n in overlap.items():
            candidates.append((-n, 0 if center in cur_sets[b] else 1, a, b))
    candidates.sort()

    taken_prev: set[int] = set()
    taken_cur: set[int] = set()
    pairs = []
    for neg_overlap, _, a, b in candidates:
        if a in taken_prev or b in taken_cur:
            continue
        taken_prev.add(a)
        taken_cur.add(b)
        pairs.append(MatchedPair(a, b, -neg_overlap, stability(prev_sets[a], cur_sets[b])))

    born = tuple(b for b in range(cur.community_count) if b not in taken_cur)
    died = tuple(a for a in range(prev.community_count) if a not in taken_prev)
    return CommunityMatch(pairs=tuple(pairs), born=born, died=died)


# ---------------------------------------------------------------------------
# record enrichment

# Column stems appended (with the configured suffix) to enriched tables.
ROW_METRIC_COLUMNS = (
    "community",
    "community_size",
    "community_density",
    "community_conductance",
    "node_degree",
    "community_stability",
)
GRAPH_METRIC_COLUMNS = (
    "density_mean", "density_std", "density_min", "density_max",
    "conductance_mean", "conductance_std", "conductance_min", "conductance_max",
    "size_mean", "size_std", "size_min", "size_max",
    "largest_community_fraction", "modularity", "community_count",
)


@dataclass
class EnrichedTable:
    columns: list[str]
    rows: list[dict[str, object]]
    window_summaries: list[dict[str, object]] = field(default_factory=list)


def insert_graph_community_metrics(
    records: Sequence[FlowRecord],
    interval: float,
    schema: SchemaMapping,
    *,
    strategy: str = STRATEGY_LOUVAIN,
    seed: int = 0,
    name_suffix: str = "gc",
    continuity: bool = False,
    weight: WeightFeature = WeightFeature.UNIT,
    resolution: float = 1.0,
    threads: int | None = None,
    columns: Sequence[str] | None = None,
) -> EnrichedTable:
    """Annotate every record with its window's community metrics.

    The output keeps every input row, in input order, with all original
    columns untouched, and appends one column per metric, each named
    ``<metric>_<name_suffix>``. Row metrics describe the record's source
    node's community; graph metrics are shared by all rows of a window.
    Stability is the sentinel in the first window and for newborn
    communities.
    """
    windows = partition_windows(records, interval, continuity=continuity)
    graphs = [build_graph(w, weight, normal_label=schema.normal_label) for w in windows]
    partitions = partition_many(
        graphs,
        strategy=strategy,
        seed=seed,
        resolution=resolution,
        threads=threads,
        window_indices=[w.index for w in windows],
    )
    firsts = [gc_metrics_first_order(g, p, resolution=resolution) for g, p in zip(graphs, partitions)]
    seconds = [gc_metrics_second_order(f) for f in firsts]

    # Sequential fold over adjacent windows; the sentinel marks window 0 and
    # communities without a predecessor.
    stability_maps: list[dict[int, float]] = []
    born_counts = [0] * len(windows)
    died_counts = [0] * len(windows)
    for i, part in enumerate(partitions):
        if i == 0:
            stability_maps.append({})
            continue
        match = propagate_communities(partitions[i - 1], part)
        stability_maps.append(match.stability_by_next())
        born_counts[i] = len(match.born)
        died_counts[i] = len(match.died)

    if columns is not None:
        base_columns = list(columns)
    elif records:
        base_columns = list(records[0].extras)
    else:
        base_columns = []
    new_columns = [f"{stem}_{name_suffix}" for stem in (*ROW_METRIC_COLUMNS, *GRAPH_METRIC_COLUMNS)]
    clash = set(base_columns) & set(new_columns)
    if clash:
        raise ConfigError(
            f"name_suffix {name_suffix!r} collides with input column(s) {', '.join(sorted(clash))}"
        )

    sfx = lambda stem: f"{stem}_{name_suffix}"
    rows: list[dict[str, object]] = []
    summaries: list[dict[str, object]] = []
    for pos, (w, g, part, first, second) in enumerate(zip(windows, graphs, partitions, firsts, seconds)):
        stability_map = stability_maps[pos]
        graph_values = {
            sfx("density_mean"): second.density_mean,
            sfx("density_std"): second.density_std,
            sfx("density_min"): second.density_min,
            sfx("density_max"): second.density_max,
            sfx("conductance_mean"): second.conductance_mean,
            sfx("conductance_std"): second.conductance_std,
            sfx("conductance_min"): second.conductance_min,
            sfx("conductance_max"): second.conductance_max,
            sfx("size_mean"): second.size_mean,
            sfx("size_std"): second.size_std,
            sfx("size_min"): second.size_min,
            sfx("size_max"): second.size_max,
            sfx("largest_community_fraction"): second.largest_community_fraction,
            sfx("modularity"): second.modularity,
            sfx("community_count"): second.community_count,
        }
        for rec in w.records:
            node = g.id_of(rec.src_key)
            c = part.assignment[node]
            stats = first.communities[c]
            row: dict[str, object] = dict(rec.extras)
            row[sfx("community")] = c
            row[sfx("community_size")] = stats.size
            row[sfx("community_density")] = stats.density
            row[sfx("community_conductance")] = stats.conductance
            row[sfx("node_degree")] = g.degrees[node]
            row[sfx("community_stability")] = stability_map.get(c, SENTINEL)
            row.update(graph_values)
            rows.append(row)

        matched = stability_map.values()
        summaries.append(
            {
                "window_index": w.index,
                "window_start": w.start,
                "record_count": len(w.records),
                "node_count": g.node_count,
                "edge_count": g.edge_count,
                "community_count": second.community_count,
                "modularity": second.modularity,
                "density_mean": second.density_mean,
                "conductance_mean": second.conductance_mean,
                "stability_mean": statistics.fmean(matched) if matched else None,
                "born": born_counts[pos],
                "died": died_counts[pos],
            }
        )

    log.info(
        "community enrichment: %d windows, %d rows, strategy=%s seed=%d suffix=%s",
        len(windows), len(rows), strategy, seed, name_suffix,
    )
    return EnrichedTable(columns=base_columns + new_columns, rows=rows, window_summaries=summaries)
