"""Laplacian spectra of window graphs and the derived scalar features.

For a window graph with weight matrix W and diagonal weighted-degree matrix
D, the combinatorial Laplacian is L = D - W. Its sorted eigenvalue list
drives three features per (weight topology, sub-window):

* connectedness: exp(1/z - 1) where z is the number of zero eigenvalues,
  which equals the number of connected components. 1.0 when connected,
  decaying toward exp(-1) as the graph fragments.
* flooding: mean of the n_devices smallest nonzero eigenvalues, minus one.
  Star-like blasts from many hosts onto one target push the small nonzero
  part of the spectrum up sharply.
* wiriness: mean of the n_devices largest eigenvalues, a bulk measure of
  how heavily wired the densest part of the window is.

Zero detection is numeric (tolerance scaled to the largest eigenvalue) and is
cross-checked against an exact union-find component count; on disagreement
the exact count wins and the smallest eigenvalues are re-zeroed.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from collections import Counter
from dataclasses import dataclass, field
from collections.abc import Sequence

import numpy as np

from .errors import SchemaError
from .export import SENTINEL
from .graph import TrafficGraph, WeightFeature, build_graph
from .ingest import FlowRecord, SchemaMapping
from .windows import TimeWindow, partition_windows, split_midpoint

log = logging.getLogger("flowgraph.spectral")

# Weight topologies feeding the feature table, in column order.
TOPOLOGIES = (WeightFeature.PACKETS, WeightFeature.BYTES, WeightFeature.RATE)
METRIC_NAMES = ("connectedness", "flooding", "wiriness")
SUB_WINDOWS = ("mid", "end")


@dataclass(frozen=True)
class SpectralConfig:
    """Knobs for the spectral extractor.

    ``devices`` is the number of eigenvalues averaged by flooding/wiriness;
    when None it defaults to max(1, floor(sqrt(mean nonempty window node
    count))). ``node_cap`` bounds the dense eigensolver; larger windows are
    skipped with sentinel features and flagged.
    """

    devices: int | None = None
    zero_tol_rel: float = 1e-9
    zero_tol_abs: float = 1e-12
    node_cap: int = 2000

    def __post_init__(self) -> None:
        if self.devices is not None and self.devices < 1:
            raise SchemaError(f"devices must be >= 1, got {self.devices}")
        if self.node_cap < 1:
            raise SchemaError(f"node_cap must be >= 1, got {self.node_cap}")


@dataclass(frozen=True)
class LaplacianSpectrum:
    """Sorted (ascending) Laplacian eigenvalues with zeros resolved.

    ``zero_multiplicity`` is authoritative (exact component count);
    ``numeric_zero_multiplicity`` is what the tolerance rule found before the
    cross-check, kept for diagnostics.
    """

    eigenvalues: np.ndarray
    zero_multiplicity: int
    numeric_zero_multiplicity: int

    @property
    def size(self) -> int:
        return int(self.eigenvalues.size)


def laplacian_spectrum(graph: TrafficGraph, config: SpectralConfig = SpectralConfig()) -> LaplacianSpectrum:
    """Eigenvalues of L = D - W for a nonempty graph, zeros clamped.

    Anything within ``max(zero_tol_abs, zero_tol_rel * lambda_max)`` of zero
    is clamped to exactly 0.0. The zero count is then reconciled with the
    union-find component count; a mismatch is logged and the exact count
    wins, re-zeroing the smallest eigenvalues if needed.
    """
    n = graph.node_count
    if n == 0:
        raise ValueError("empty graph has no spectrum")
    weights = graph.weight_matrix()
    laplacian = np.diag(weights.sum(axis=1)) - weights
    values = np.linalg.eigvalsh(laplacian)

    lambda_max = float(values[-1]) if values.size else 0.0
    tol = max(config.zero_tol_abs, config.zero_tol_rel * max(lambda_max, 0.0))
    clamped = np.where(np.abs(values) <= tol, 0.0, values)
    if clamped[0] < 0.0:
        log.warning(
            "negative eigenvalue %g beyond tolerance %g; clamping (graph n=%d)", clamped[0], tol, n
        )
        clamped = np.maximum(clamped, 0.0)
    clamped = np.sort(clamped)

    numeric_zeros = int(np.count_nonzero(clamped == 0.0))
    exact = graph.component_count()
    if numeric_zeros != exact:
        log.warning(
            "zero multiplicity %d from eigensolver disagrees with component count %d; using the exact count",
            numeric_zeros, exact,
        )
        clamped[:exact] = 0.0
        clamped = np.sort(clamped)
    return LaplacianSpectrum(
        eigenvalues=clamped, zero_multiplicity=exact, numeric_zero_multiplicity=numeric_zeros
    )


def connectedness(zero_multiplicity: int) -> float:
    if zero_multiplicity < 1:
        raise ValueError(f"zero multiplicity must be >= 1, got {zero_multiplicity}")
    return math.exp(1.0 / zero_multiplicity - 1.0)


def flooding(spectrum: LaplacianSpectrum, n_devices: int) -> tuple[float, bool]:
    """Mean of the n_devices smallest nonzero eigenvalues, minus one.

    Returns ``(value, truncated)``; when fewer than n_devices nonzero
    eigenvalues exist the mean runs over what is there (empty mean is 0, so a
    fully disconnected graph scores -1) and the truncated flag is set.
    """
    nonzero = spectrum.eigenvalues[spectrum.zero_multiplicity:]
    take = nonzero[: n_devices]
    truncated = spectrum.zero_multiplicity + n_devices > spectrum.size
    value = float(take.mean()) if take.size else 0.0
    return value - 1.0, truncated


def wiriness(spectrum: LaplacianSpectrum, n_devices: int) -> tuple[float, bool]:
    """Mean of the n_devices largest eigenvalues (all of them if fewer exist)."""
    take = spectrum.eigenvalues[-n_devices:]
    truncated = n_devices > spectrum.size
    return float(take.mean()), truncated


@dataclass
class FeatureTable:
    columns: list[str]
    rows: list[dict[str, object]] = field(default_factory=list)


def feature_columns() -> list[str]:
    cols = ["window_index", "window_start"]
    for sub in SUB_WINDOWS:
        cols += [f"node_count_{sub}", f"edge_count_{sub}"]
    for sub in SUB_WINDOWS:
        for topo in TOPOLOGIES:
            for metric in METRIC_NAMES:
                cols.append(f"{metric}_{topo.value}_{sub}")
    cols += ["empty_mid", "empty_window", "truncated", "oversize", "label"]
    return cols


def window_label(records: Sequence[FlowRecord], normal_label: str) -> str:
    """Plurality label of a window's records.

    Ties never resolve to the benign label while an attack class is tied for
    the lead; among tied attack classes the lexicographically smallest wins.
    Empty windows are benign by definition.
    """
    if not records:
        return normal_label
    counts = Counter(r.label for r in records)
    top = max(counts.values())
    leaders = sorted(label for label, n in counts.items() if n == top)
    attacks = [label for label in leaders if label != normal_label]
    return attacks[0] if attacks else leaders[0]


def default_devices(windows: Sequence[TimeWindow]) -> int:
    """Corpus-level fallback for n_devices: sqrt of the mean node count."""
    node_counts = []
    for w in windows:
        if not w.records:
            continue
        keys = set()
        for rec in w.records:
            keys.add(rec.src_key)
            keys.add(rec.dst_key)
        node_counts.append(len(keys))
    if not node_counts:
        return 1
    mean = sum(node_counts) / len(node_counts)
    return max(1, int(math.sqrt(mean)))


def _window_row(
    window: TimeWindow,
    schema: SchemaMapping,
    config: SpectralConfig,
    n_devices: int,
) -> dict[str, object]:
    pair = split_midpoint(window)
    row: dict[str, object] = {"window_index": window.index, "window_start": window.start}
    truncated = False
    oversize = False

    for sub, sub_window in (("mid", pair.first_half), ("end", pair.full)):
        structure = build_graph(sub_window, WeightFeature.UNIT, normal_label=schema.normal_label)
        row[f"node_count_{sub}"] = structure.node_count
        row[f"edge_count_{sub}"] = structure.edge_count

        skip = structure.node_count == 0 or structure.node_count > config.node_cap
        if structure.node_count > config.node_cap:
            oversize = True
            log.warning(
                "window %d (%s): %d nodes exceed the eigensolver cap %d; emitting sentinels",
                window.index, sub, structure.node_count, config.node_cap,
            )
        for topo in TOPOLOGIES:
            if skip:
                for metric in METRIC_NAMES:
                    row[f"{metric}_{topo.value}_{sub}"] = SENTINEL
                continue
            g = build_graph(sub_window, topo, normal_label=schema.normal_label)
            spectrum = laplacian_spectrum(g, config)
            flood, t1 = flooding(spectrum, n_devices)
            wiry, t2 = wiriness(spectrum, n_devices)
            truncated = truncated or t1 or t2
            row[f"connectedness_{topo.value}_{sub}"] = connectedness(spectrum.zero_multiplicity)
            row[f"flooding_{topo.value}_{sub}"] = flood
            row[f"wiriness_{topo.value}_{sub}"] = wiry

    row["empty_mid"] = pair.first_half.is_empty
    row["empty_window"] = window.is_empty
    row["truncated"] = truncated
    row["oversize"] = oversize
    row["label"] = window_label(window.records, schema.normal_label)
    return row


def spectral_metrics_extractor(
    records: Sequence[FlowRecord],
    interval: float,
    schema: SchemaMapping,
    config: SpectralConfig = SpectralConfig(),
    *,
    continuity: bool = False,
    threads: int | None = None,
) -> FeatureTable:
    """One ML-ready feature row per time window.

    Each window is split at its midpoint; for both sub-windows and all three
    weight topologies (packets, bytes, rate) the three spectral features are
    computed, 18 feature columns in all, plus structural counts, flag
    columns, and the window's plurality label in the last column. Empty
    windows produce sentinel features with the benign label. Windows are
    independent, so rows can be computed on a thread pool; output order is
    input order either way.
    """
    for name, col in (("pkts", schema.pkts_column), ("bytes", schema.bytes_column), ("rate", schema.rate_column)):
        if not col:
            raise SchemaError(f"spectral extraction needs schema.{name}_column")

    start = time.perf_counter()
    windows = partition_windows(records, interval, continuity=continuity)
    n_devices = config.devices if config.devices is not None else default_devices(windows)
    if config.devices is None:
        log.info("n_devices not set; defaulting to %d from mean window size", n_devices)

    def job(window: TimeWindow) -> dict[str, object]:
        return _window_row(window, schema, config, n_devices)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, windows))
    else:
        rows = [job(w) for w in windows]

    log.info(
        "spectral features: %d windows x %d columns in %.2fs",
        len(rows), len(feature_columns()), time.perf_counter() - start,
    )
    return FeatureTable(columns=feature_columns(), rows=rows)
