"""flowgraph: time-windowed graph features from network flow logs.

The pipeline turns a delimited flow log into ML-ready feature tables and
graph renderings: records are parsed, partitioned into fixed-width time
windows, each window becomes a weighted undirected traffic graph, and two
metric families (community structure and Laplacian spectra) are computed
per window.
"""

from .community import (
    CommunityMatch,
    CommunityPartition,
    EnrichedTable,
    gc_metrics_first_order,
    gc_metrics_second_order,
    insert_graph_community_metrics,
    modularity,
    partition,
    propagate_communities,
    stability,
)
from .errors import ConfigError, DataError, SchemaError
from .export import SENTINEL, RenderSpec, export_dot, export_html, render_graph, write_table
from .graph import TrafficGraph, WeightFeature, build_graph
from .ingest import (
    AggregationSpec,
    FlowRecord,
    SchemaMapping,
    extract_time_series,
    parse_duration,
    parse_log,
)
from .spectral import (
    LaplacianSpectrum,
    SpectralConfig,
    connectedness,
    flooding,
    laplacian_spectrum,
    spectral_metrics_extractor,
    wiriness,
)
from .windows import SubWindowPair, TimeWindow, partition_windows, split_midpoint

__version__ = "0.1.0"

__all__ = [
    "AggregationSpec",
    "CommunityMatch",
    "CommunityPartition",
    "ConfigError",
    "DataError",
    "EnrichedTable",
    "FlowRecord",
    "LaplacianSpectrum",
    "RenderSpec",
    "SENTINEL",
    "SchemaError",
    "SchemaMapping",
    "SpectralConfig",
    "SubWindowPair",
    "TimeWindow",
    "TrafficGraph",
    "WeightFeature",
    "build_graph",
    "connectedness",
    "export_dot",
    "export_html",
    "extract_time_series",
    "flooding",
    "gc_metrics_first_order",
    "gc_metrics_second_order",
    "insert_graph_community_metrics",
    "laplacian_spectrum",
    "modularity",
    "parse_duration",
    "parse_log",
    "partition",
    "partition_windows",
    "propagate_communities",
    "render_graph",
    "spectral_metrics_extractor",
    "split_midpoint",
    "stability",
    "wiriness",
    "write_table",
]
