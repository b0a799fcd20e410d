import math
import random
from itertools import combinations

import numpy as np
import pytest

from flowgraph.errors import SchemaError
from flowgraph.export import SENTINEL
from flowgraph.graph import WeightFeature, build_graph
from flowgraph.spectral import (
    SpectralConfig,
    connectedness,
    default_devices,
    feature_columns,
    flooding,
    laplacian_spectrum,
    spectral_metrics_extractor,
    wiriness,
    window_label,
)
from flowgraph.windows import TimeWindow, partition_windows

from helpers import SCHEMA, bfs_component_count, graph_from_edges, make_record, random_edges


def spectrum_of(edges):
    return laplacian_spectrum(graph_from_edges(edges))


# ---------------------------------------------------------------------------
# closed-form spectra


def test_complete_graph_k4():
    edges = [(u, v, 1.0) for u, v in combinations("abcd", 2)]
    spec = spectrum_of(edges)
    assert np.allclose(spec.eigenvalues, [0.0, 4.0, 4.0, 4.0], atol=1e-10, rtol=0)
    assert spec.zero_multiplicity == 1
    assert connectedness(spec.zero_multiplicity) == 1.0
    value, truncated = flooding(spec, 3)
    assert value == pytest.approx(3.0, abs=1e-10) and not truncated
    value, truncated = wiriness(spec, 3)
    assert value == pytest.approx(4.0, abs=1e-10) and not truncated


def test_star_k14():
    edges = [("hub", leaf, 1.0) for leaf in ("l1", "l2", "l3", "l4")]
    spec = spectrum_of(edges)
    assert np.allclose(spec.eigenvalues, [0.0, 1.0, 1.0, 1.0, 5.0], atol=1e-10, rtol=0)
    value, _ = wiriness(spec, 1)
    assert value == pytest.approx(5.0, abs=1e-10)
    value, _ = flooding(spec, 1)
    assert value == pytest.approx(0.0, abs=1e-10)
    value, _ = flooding(spec, 4)
    assert value == pytest.approx((1 + 1 + 1 + 5) / 4 - 1, abs=1e-10)


def test_two_disjoint_edges():
    spec = spectrum_of([("a", "b", 1.0), ("c", "d", 1.0)])
    assert np.allclose(spec.eigenvalues, [0.0, 0.0, 2.0, 2.0], atol=1e-10, rtol=0)
    assert spec.zero_multiplicity == 2
    assert connectedness(2) == pytest.approx(math.exp(-0.5), abs=1e-12)
    value, truncated = flooding(spec, 2)
    assert value == pytest.approx(1.0, abs=1e-10) and not truncated
    value, truncated = flooding(spec, 3)
    assert value == pytest.approx(1.0, abs=1e-10) and truncated


def test_single_node():
    records = (make_record(0, "solo", "solo"),)
    g = build_graph(TimeWindow(0, 0.0, 1.0, records), WeightFeature.UNIT)
    spec = laplacian_spectrum(g)
    assert spec.eigenvalues.tolist() == [0.0]
    assert spec.zero_multiplicity == 1
    value, truncated = flooding(spec, 1)
    assert value == -1.0 and truncated  # empty mean is 0, minus 1
    value, truncated = wiriness(spec, 1)
    assert value == 0.0 and not truncated


def test_weighted_k2_scales_per_topology():
    records = (make_record(0, "a", "b", pkts=2, nbytes=10, rate=0.5),)
    window = TimeWindow(0, 0.0, 1.0, records)
    # K2 with weight w has spectrum (0, 2w)
    for feature, w in ((WeightFeature.PACKETS, 2.0), (WeightFeature.BYTES, 10.0), (WeightFeature.RATE, 0.5)):
        spec = laplacian_spectrum(build_graph(window, feature))
        assert np.allclose(spec.eigenvalues, [0.0, 2 * w], atol=1e-12, rtol=0)
        value, _ = flooding(spec, 1)
        assert value == pytest.approx(2 * w - 1, abs=1e-12)


def test_empty_graph_has_no_spectrum():
    g = build_graph(TimeWindow(0, 0.0, 1.0, ()), WeightFeature.UNIT)
    with pytest.raises(ValueError):
        laplacian_spectrum(g)


# ---------------------------------------------------------------------------
# numeric invariants


def test_trace_identity_and_zero_multiplicity_random():
    rng = random.Random(1003)
    for _ in range(60):
        g = graph_from_edges(random_edges(rng, max_nodes=40))
        spec = laplacian_spectrum(g)
        assert float(spec.eigenvalues.sum()) == pytest.approx(sum(g.degrees), rel=1e-9)
        assert spec.zero_multiplicity == bfs_component_count(g)
        assert spec.numeric_zero_multiplicity == spec.zero_multiplicity
        assert (spec.eigenvalues >= 0.0).all()
        assert np.array_equal(spec.eigenvalues, np.sort(spec.eigenvalues))


def test_eigenvalue_scaling():
    rng = random.Random(77)
    for _ in range(20):
        edges = random_edges(rng, max_nodes=30)
        if not edges:
            continue
        factor = rng.uniform(2.0, 50.0)
        spec = spectrum_of(edges)
        scaled = spectrum_of([(a, b, w * factor) for a, b, w in edges])
        assert np.allclose(scaled.eigenvalues, factor * spec.eigenvalues, rtol=1e-8, atol=1e-9)


def test_connectedness_limits():
    assert connectedness(1) == 1.0
    assert connectedness(4) == pytest.approx(math.exp(1 / 4 - 1))
    # decays toward exp(-1) but never reaches it
    assert math.exp(-1) < connectedness(10 ** 9) < math.exp(-1) * 1.001
    with pytest.raises(ValueError):
        connectedness(0)


# ---------------------------------------------------------------------------
# window labels


def test_window_label_plurality():
    records = [make_record(0, "a", "b", label=l) for l in ("Normal", "Normal", "DDoS")]
    assert window_label(records, "Normal") == "Normal"
    records = [make_record(0, "a", "b", label=l) for l in ("Normal", "DDoS", "DDoS")]
    assert window_label(records, "Normal") == "DDoS"


def test_window_label_tie_prefers_attack():
    records = [make_record(0, "a", "b", label=l) for l in ("Normal", "DDoS")]
    assert window_label(records, "Normal") == "DDoS"


def test_window_label_attack_tie_lexicographic():
    records = [make_record(0, "a", "b", label=l) for l in ("Scan", "DDoS")]
    assert window_label(records, "Normal") == "DDoS"


def test_window_label_empty_is_normal():
    assert window_label([], "Normal") == "Normal"
    assert window_label([], "benign") == "benign"


# ---------------------------------------------------------------------------
# the extractor


def flows_with_gap():
    records = []
    rng = random.Random(5)
    for t in (0.5, 1.5, 3.0, 9.0, 31.0, 33.0):
        records.append(make_record(t, f"h{rng.randint(0, 3)}", "server",
                                   pkts=rng.randint(1, 5), nbytes=100, rate=1.0))
    return sorted(records, key=lambda r: r.timestamp)


def test_extractor_columns_fixed_order():
    cols = feature_columns()
    assert cols[0] == "window_index"
    assert cols[-1] == "label"
    assert cols[-5:-1] == ["empty_mid", "empty_window", "truncated", "oversize"]
    assert "flooding_bytes_end" in cols
    assert len(cols) == 29


def test_extractor_row_per_window_and_sentinels_on_gap():
    table = spectral_metrics_extractor(flows_with_gap(), 10.0, SCHEMA,
                                       SpectralConfig(devices=2), continuity=True)
    assert [r["window_index"] for r in table.rows] == [0, 1, 2, 3]
    gap_rows = [r for r in table.rows if r["empty_window"]]
    assert len(gap_rows) == 2
    for row in gap_rows:
        assert row["label"] == "Normal"
        assert row["connectedness_packets_end"] == SENTINEL
        assert row["flooding_rate_mid"] == SENTINEL
        assert row["node_count_end"] == 0
    # without continuity the gap disappears and indices stay consecutive
    sparse = spectral_metrics_extractor(flows_with_gap(), 10.0, SCHEMA, SpectralConfig(devices=2))
    assert [r["window_index"] for r in sparse.rows] == [0, 1]
    assert not any(r["empty_window"] for r in sparse.rows)


def test_extractor_empty_mid_flag():
    records = [make_record(8.0, "a", "b", pkts=1, nbytes=1, rate=1.0)]
    table = spectral_metrics_extractor(records, 10.0, SCHEMA, SpectralConfig(devices=1))
    row = table.rows[0]
    assert row["empty_mid"] and not row["empty_window"]
    assert row["connectedness_packets_mid"] == SENTINEL
    assert row["connectedness_packets_end"] != SENTINEL


def test_extractor_node_cap_oversize():
    records = [make_record(0.5, f"h{i}", "sink", pkts=1, nbytes=1, rate=1.0) for i in range(30)]
    table = spectral_metrics_extractor(records, 10.0, SCHEMA,
                                       SpectralConfig(devices=1, node_cap=10))
    row = table.rows[0]
    assert row["oversize"]
    assert row["flooding_packets_end"] == SENTINEL
    assert row["node_count_end"] == 31  # counts still reported


def test_extractor_requires_metric_columns():
    from flowgraph.ingest import SchemaMapping

    bare = SchemaMapping(time_column="stime", src_columns=("saddr",),
                         dst_columns=("daddr",), label_column="category")
    with pytest.raises(SchemaError):
        spectral_metrics_extractor(flows_with_gap(), 10.0, bare)


def test_extractor_thread_counts_agree():
    records = flows_with_gap()
    seq = spectral_metrics_extractor(records, 10.0, SCHEMA, SpectralConfig(devices=2), threads=1)
    par = spectral_metrics_extractor(records, 10.0, SCHEMA, SpectralConfig(devices=2), threads=4)
    assert seq.rows == par.rows


def test_default_devices_square_root_of_mean_nodes():
    records = [make_record(0.1 + i * 0.01, f"h{i}", "sink", pkts=1, nbytes=1, rate=1.0)
               for i in range(24)]
    windows = partition_windows(records, 10.0)
    assert default_devices(windows) == 5  # sqrt(25) over one window
    assert default_devices([]) == 1


def test_truncated_flag_propagates():
    # 2 nodes, ask for 5 devices
    records = [make_record(0.5, "a", "b", pkts=1, nbytes=1, rate=1.0)]
    table = spectral_metrics_extractor(records, 10.0, SCHEMA, SpectralConfig(devices=5))
    assert table.rows[0]["truncated"]
