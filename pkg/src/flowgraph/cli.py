"""Command line interface.

Four subcommands cover the pipeline end to end:

* ``timeseries``: bucket and aggregate a flow log on a fixed time grid.
* ``community-enrich``: append per-window community metrics to every row.
* ``spectral-extract``: one row of Laplacian spectral features per window.
* ``render``: draw the traffic graph of a log as DOT or a standalone HTML page.

Settings come from flags layered over an optional YAML config file (flags
win). The config path comes from ``--config`` or the ``FLOWGRAPH_CONFIG``
environment variable. Every subcommand accepts ``--dry-run`` to validate
configuration and the input header, then exit without writing anything.

Exit codes: 0 success, 1 configuration or schema problem, 2 data problem.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from collections.abc import Sequence

import yaml

from . import report
from .community import (
    STRATEGIES,
    STRATEGY_LOUVAIN,
    insert_graph_community_metrics,
    partition,
)
from .errors import ConfigError, DataError, SchemaError
from .export import (
    COLOR_BY_COMMUNITY,
    COLOR_BY_LABEL,
    MODE_DOT,
    MODE_HTML,
    RenderSpec,
    render_graph,
    write_table,
)
from .graph import WeightFeature, build_graph
from .ingest import (
    AggregationSpec,
    SchemaMapping,
    extract_time_series,
    parse_duration,
    parse_log,
)
from .spectral import SpectralConfig, spectral_metrics_extractor
from .windows import TimeWindow

log = logging.getLogger("flowgraph.cli")

CONFIG_ENV_VAR = "FLOWGRAPH_CONFIG"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2

_CONFIG_SECTIONS = ("defaults", "schema", "timeseries", "community", "spectral", "render")
_SCHEMA_KEYS = {
    "time_column", "src_columns", "dst_columns", "label_column", "time_format",
    "pkts_column", "bytes_column", "rate_column", "normal_label",
}
_DEFAULTS_KEYS = {"delimiter", "threads"}


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems through our ConfigError path."""

    def error(self, message):  # noqa: D102 - argparse hook
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# config file


def load_config(path_text: str | None) -> dict:
    if not path_text:
        return {}
    path = Path(path_text)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path}: top level must be a mapping")
    unknown = set(data) - set(_CONFIG_SECTIONS)
    if unknown:
        raise ConfigError(
            f"config file {path}: unknown section(s) {', '.join(sorted(unknown))} "
            f"(expected {', '.join(_CONFIG_SECTIONS)})"
        )
    for name, section in data.items():
        if not isinstance(section, dict):
            raise ConfigError(f"config file {path}: section {name!r} must be a mapping")
    return data


def _section(cfg: dict, name: str, allowed: set[str]) -> dict:
    section = cfg.get(name, {})
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(
            f"config section {name!r}: unknown key(s) {', '.join(sorted(unknown))}"
        )
    return section


def _columns(value: object, key: str) -> tuple[str, ...]:
    """A column list from either a comma-joined flag or a YAML list."""
    if isinstance(value, str):
        parts = tuple(p.strip() for p in value.split(",") if p.strip())
    elif isinstance(value, (list, tuple)):
        parts = tuple(str(p) for p in value)
    else:
        raise ConfigError(f"{key}: expected a column list, got {value!r}")
    if not parts:
        raise ConfigError(f"{key}: expected at least one column")
    return parts


def _as_int(value: object, key: str) -> int:
    try:
        return int(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _as_float(value: object, key: str) -> float:
    try:
        return float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _as_bool(value: object, key: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false", "yes", "no", "1", "0"):
        return value.lower() in ("true", "yes", "1")
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _pick(flag_value, section: dict, key: str, default=None):
    return flag_value if flag_value is not None else section.get(key, default)


def build_schema(args: argparse.Namespace, cfg: dict) -> SchemaMapping:
    section = _section(cfg, "schema", _SCHEMA_KEYS)

    def required(flag_value, key: str, flag_name: str) -> object:
        value = _pick(flag_value, section, key)
        if value is None:
            raise ConfigError(f"schema.{key} is required (flag {flag_name} or config schema.{key})")
        return value

    return SchemaMapping(
        time_column=str(required(args.time_column, "time_column", "--time-column")),
        src_columns=_columns(required(args.src_columns, "src_columns", "--src-columns"), "schema.src_columns"),
        dst_columns=_columns(required(args.dst_columns, "dst_columns", "--dst-columns"), "schema.dst_columns"),
        label_column=str(required(args.label_column, "label_column", "--label-column")),
        time_format=str(_pick(args.time_format, section, "time_format", "epoch_seconds")),
        pkts_column=_pick(args.pkts_column, section, "pkts_column"),
        bytes_column=_pick(args.bytes_column, section, "bytes_column"),
        rate_column=_pick(args.rate_column, section, "rate_column"),
        normal_label=str(_pick(args.normal_label, section, "normal_label", "Normal")),
    )


def _defaults(args: argparse.Namespace, cfg: dict) -> tuple[str, int | None]:
    section = _section(cfg, "defaults", _DEFAULTS_KEYS)
    delimiter = str(_pick(args.delimiter, section, "delimiter", ","))
    if delimiter == "\\t":
        delimiter = "\t"
    if len(delimiter) != 1:
        raise ConfigError(f"delimiter must be a single character, got {delimiter!r}")
    threads = _pick(args.threads, section, "threads")
    threads = _as_int(threads, "defaults.threads") if threads is not None else None
    if threads is not None and threads < 1:
        raise ConfigError(f"defaults.threads: must be >= 1, got {threads}")
    return delimiter, threads


def _input_header(path_text: str, delimiter: str) -> list[str]:
    path = Path(path_text)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        header = next(_csv.reader(fh, delimiter=delimiter), None)
    if header is None:
        raise SchemaError(f"{path}: file is empty, expected a header row")
    return header


def _dry_run_exit(what: str) -> int:
    log.info("dry run: %s configuration and input header are valid; nothing written", what)
    return EXIT_OK


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_timeseries(args: argparse.Namespace, cfg: dict) -> int:
    schema = build_schema(args, cfg)
    delimiter, _threads = _defaults(args, cfg)
    section = _section(cfg, "timeseries", {"resolution", "sort_by", "group_by", "aggregations"})

    resolution_raw = _pick(args.resolution, section, "resolution")
    if resolution_raw is None:
        raise ConfigError("timeseries.resolution is required (flag --resolution or config timeseries.resolution)")
    resolution = parse_duration(resolution_raw)

    sort_raw = _pick(args.sort_by, section, "sort_by")
    group_raw = _pick(args.group_by, section, "group_by")
    agg_raw = _pick(args.agg, section, "aggregations")
    if agg_raw is None:
        raise ConfigError("timeseries.aggregations is required (flag --agg or config timeseries.aggregations)")
    if isinstance(agg_raw, str):
        aggregations: dict[str, str] = {}
        for part in agg_raw.split(","):
            if "=" not in part:
                raise ConfigError(f"--agg: expected column=function, got {part!r}")
            column, func = part.split("=", 1)
            aggregations[column.strip()] = func.strip()
    elif isinstance(agg_raw, dict):
        aggregations = {str(k): str(v) for k, v in agg_raw.items()}
    else:
        raise ConfigError(f"timeseries.aggregations: expected a mapping, got {agg_raw!r}")

    spec = AggregationSpec(
        sort_by=_columns(sort_raw, "timeseries.sort_by") if sort_raw is not None else (),
        group_by=_columns(group_raw, "timeseries.group_by") if group_raw is not None else (),
        aggregations=aggregations,
    )

    header = _input_header(args.input, delimiter)
    schema.validate_against(header, context=args.input)
    missing = [c for c in spec.columns_used() if c not in header]
    if missing:
        raise SchemaError(f"{args.input}: aggregation spec names missing column(s) {', '.join(sorted(set(missing)))}")
    if args.dry_run:
        return _dry_run_exit("timeseries")

    records = parse_log(args.input, schema, delimiter=delimiter, lenient=args.lenient)
    rows = extract_time_series(records, resolution, spec, schema)
    group_by = spec.group_by
    if schema.time_column not in group_by:
        group_by = (schema.time_column, *group_by)
    columns = [*group_by, *spec.aggregations]
    write_table([r.extras for r in rows], columns, args.output, delimiter=delimiter)
    return EXIT_OK


def _cmd_community(args: argparse.Namespace, cfg: dict) -> int:
    schema = build_schema(args, cfg)
    delimiter, threads = _defaults(args, cfg)
    section = _section(
        cfg, "community",
        {"window", "strategy", "seed", "suffix", "continuity", "graph_weight", "resolution", "figures"},
    )

    window_raw = _pick(args.window, section, "window")
    if window_raw is None:
        raise ConfigError("community.window is required (flag --window or config community.window)")
    interval = parse_duration(window_raw)
    strategy = str(_pick(args.strategy, section, "strategy", STRATEGY_LOUVAIN))
    if strategy not in STRATEGIES:
        raise ConfigError(f"community.strategy: unknown strategy {strategy!r} (expected one of {', '.join(STRATEGIES)})")
    seed = _as_int(_pick(args.seed, section, "seed", 0), "community.seed")
    suffix = str(_pick(args.suffix, section, "suffix", "gc"))
    continuity = _as_bool(_pick(args.continuity, section, "continuity", False), "community.continuity")
    weight_name = str(_pick(args.graph_weight, section, "graph_weight", WeightFeature.UNIT.value))
    try:
        weight = WeightFeature(weight_name)
    except ValueError:
        raise ConfigError(
            f"community.graph_weight: unknown weight {weight_name!r} "
            f"(expected one of {', '.join(w.value for w in WeightFeature)})"
        ) from None
    resolution = _as_float(_pick(args.resolution, section, "resolution", 1.0), "community.resolution")
    figures = _pick(args.figures, section, "figures")

    header = _input_header(args.input, delimiter)
    schema.validate_against(header, context=args.input)
    if args.dry_run:
        return _dry_run_exit("community-enrich")

    records = parse_log(args.input, schema, delimiter=delimiter, lenient=args.lenient)
    table = insert_graph_community_metrics(
        records,
        interval,
        schema,
        strategy=strategy,
        seed=seed,
        name_suffix=suffix,
        continuity=continuity,
        weight=weight,
        resolution=resolution,
        threads=threads,
        columns=header,
    )
    write_table(table.rows, table.columns, args.output, delimiter=delimiter)
    if figures:
        report.render_community_figures(table.window_summaries, Path(figures))
    return EXIT_OK


def _cmd_spectral(args: argparse.Namespace, cfg: dict) -> int:
    schema = build_schema(args, cfg)
    delimiter, threads = _defaults(args, cfg)
    section = _section(cfg, "spectral", {"window", "devices", "continuity", "node_cap", "figures"})

    window_raw = _pick(args.window, section, "window")
    if window_raw is None:
        raise ConfigError("spectral.window is required (flag --window or config spectral.window)")
    interval = parse_duration(window_raw)
    devices_raw = _pick(args.devices, section, "devices")
    devices = _as_int(devices_raw, "spectral.devices") if devices_raw is not None else None
    node_cap = _as_int(_pick(args.node_cap, section, "node_cap", 2000), "spectral.node_cap")
    continuity = _as_bool(_pick(args.continuity, section, "continuity", False), "spectral.continuity")
    figures = _pick(args.figures, section, "figures")
    spectral_config = SpectralConfig(devices=devices, node_cap=node_cap)

    header = _input_header(args.input, delimiter)
    schema.validate_against(header, context=args.input)
    for name, col in (("pkts", schema.pkts_column), ("bytes", schema.bytes_column), ("rate", schema.rate_column)):
        if not col:
            raise ConfigError(f"spectral extraction needs schema.{name}_column")
    if args.dry_run:
        return _dry_run_exit("spectral-extract")

    records = parse_log(args.input, schema, delimiter=delimiter, lenient=args.lenient)
    table = spectral_metrics_extractor(
        records, interval, schema, spectral_config, continuity=continuity, threads=threads
    )
    write_table(table.rows, table.columns, args.output, delimiter=delimiter)
    if figures:
        report.render_spectral_figures(table.rows, Path(figures), normal_label=schema.normal_label)
    return EXIT_OK


def _cmd_render(args: argparse.Namespace, cfg: dict) -> int:
    schema = build_schema(args, cfg)
    delimiter, _threads = _defaults(args, cfg)
    section = _section(cfg, "render", {"mode", "color_by", "title", "weight", "strategy", "seed", "out"})

    mode = str(_pick(args.mode, section, "mode", MODE_HTML))
    color_by = str(_pick(args.color_by, section, "color_by", COLOR_BY_LABEL))
    title = _pick(args.title, section, "title")
    weight_name = str(_pick(args.weight, section, "weight", WeightFeature.UNIT.value))
    try:
        weight = WeightFeature(weight_name)
    except ValueError:
        raise ConfigError(
            f"render.weight: unknown weight {weight_name!r} "
            f"(expected one of {', '.join(w.value for w in WeightFeature)})"
        ) from None
    strategy = str(_pick(args.strategy, section, "strategy", STRATEGY_LOUVAIN))
    if strategy not in STRATEGIES:
        raise ConfigError(f"render.strategy: unknown strategy {strategy!r}")
    seed = _as_int(_pick(args.seed, section, "seed", 0), "render.seed")
    out_dir = Path(_pick(args.out, section, "out", "."))
    render_spec = RenderSpec(
        mode=mode,
        color_by=color_by,
        title=str(title) if title is not None else Path(args.input).stem,
        output_dir=out_dir,
    )

    header = _input_header(args.input, delimiter)
    schema.validate_against(header, context=args.input)
    if args.dry_run:
        return _dry_run_exit("render")

    records = parse_log(args.input, schema, delimiter=delimiter, lenient=args.lenient)
    if records:
        start = min(r.timestamp for r in records)
        end = max(r.timestamp for r in records)
    else:
        start = end = 0.0
    whole = TimeWindow(index=0, start=start, end=end + 1.0, records=tuple(records))
    graph = build_graph(whole, weight, normal_label=schema.normal_label)
    part = None
    if render_spec.color_by == COLOR_BY_COMMUNITY:
        part = partition(graph, strategy, seed)
    path = render_graph(graph, render_spec, part)
    print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help=f"YAML config file (default: ${CONFIG_ENV_VAR})")
    parser.add_argument("--log-level", choices=("debug", "info", "warning", "error"), default=None)
    parser.add_argument("--delimiter", default=None, help="field delimiter (default ',', use \\t for tabs)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads for per-window work")
    parser.add_argument("--dry-run", action="store_true", help="validate configuration and input header, write nothing")
    parser.add_argument("--lenient", action="store_true", help="skip unparseable rows instead of failing")


def _add_schema_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("schema")
    group.add_argument("--time-column", default=None)
    group.add_argument("--src-columns", default=None, help="comma separated source endpoint column(s)")
    group.add_argument("--dst-columns", default=None, help="comma separated destination endpoint column(s)")
    group.add_argument("--label-column", default=None)
    group.add_argument("--time-format", default=None,
                       help="epoch_seconds, epoch_millis or datetime:<strptime pattern>")
    group.add_argument("--pkts-column", default=None)
    group.add_argument("--bytes-column", default=None)
    group.add_argument("--rate-column", default=None)
    group.add_argument("--normal-label", default=None, help="label value meaning benign traffic (default Normal)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowgraph", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    ts = sub.add_parser("timeseries", help="bucket and aggregate a flow log on a fixed time grid")
    _add_common(ts)
    _add_schema_flags(ts)
    ts.add_argument("--input", required=True)
    ts.add_argument("--output", required=True)
    ts.add_argument("--resolution", default=None, help="bucket width, e.g. 1s, 5m")
    ts.add_argument("--sort-by", default=None, help="comma separated columns ordering rows inside a bucket")
    ts.add_argument("--group-by", default=None, help="comma separated grouping columns (time is always included)")
    ts.add_argument("--agg", default=None, help="column=function list, e.g. pkts=sum,category=first")
    ts.set_defaults(handler=_cmd_timeseries)

    ce = sub.add_parser("community-enrich", help="append per-window community metrics to every row")
    _add_common(ce)
    _add_schema_flags(ce)
    ce.add_argument("--input", required=True)
    ce.add_argument("--output", required=True)
    ce.add_argument("--window", default=None, help="window width, e.g. 30s, 5m")
    ce.add_argument("--strategy", choices=STRATEGIES, default=None)
    ce.add_argument("--seed", type=int, default=None)
    ce.add_argument("--suffix", default=None, help="suffix appended to every new column (default gc)")
    ce.add_argument("--continuity", action="store_true", default=None,
                    help="materialize empty windows between populated ones")
    ce.add_argument("--graph-weight", choices=tuple(w.value for w in WeightFeature), default=None,
                    help="edge weight feature for the community graph (default unit)")
    ce.add_argument("--resolution", type=float, default=None, help="modularity resolution parameter (default 1.0)")
    ce.add_argument("--figures", default=None, help="directory for report figures (optional)")
    ce.set_defaults(handler=_cmd_community)

    se = sub.add_parser("spectral-extract", help="extract spectral features, one row per window")
    _add_common(se)
    _add_schema_flags(se)
    se.add_argument("--input", required=True)
    se.add_argument("--output", required=True)
    se.add_argument("--window", default=None, help="window width, e.g. 30s, 5m")
    se.add_argument("--devices", type=int, default=None,
                    help="how many eigenvalues the flooding/wiriness means cover")
    se.add_argument("--node-cap", type=int, default=None, help="dense eigensolver node limit (default 2000)")
    se.add_argument("--continuity", action="store_true", default=None,
                    help="materialize empty windows between populated ones")
    se.add_argument("--figures", default=None, help="directory for report figures (optional)")
    se.set_defaults(handler=_cmd_spectral)

    rd = sub.add_parser("render", help="render the traffic graph of a whole log")
    _add_common(rd)
    _add_schema_flags(rd)
    rd.add_argument("--input", required=True)
    rd.add_argument("--mode", choices=(MODE_DOT, MODE_HTML), default=None)
    rd.add_argument("--color-by", choices=(COLOR_BY_LABEL, COLOR_BY_COMMUNITY), default=None)
    rd.add_argument("--title", default=None, help="graph title (default: input file stem)")
    rd.add_argument("--weight", choices=tuple(w.value for w in WeightFeature), default=None)
    rd.add_argument("--strategy", choices=STRATEGIES, default=None,
                    help="community strategy when coloring by community")
    rd.add_argument("--seed", type=int, default=None)
    rd.add_argument("--out", default=None, help="output directory (default .)")
    rd.set_defaults(handler=_cmd_render)

    return parser


def _setup_logging(level_name: str | None) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, (level_name or "info").upper()),
        format="%(levelname)s %(name)s: %(message)s",
    )


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            raise ConfigError("a subcommand is required (see --help)")
        _setup_logging(args.log_level)
        cfg = load_config(args.config or os.environ.get(CONFIG_ENV_VAR))
        return args.handler(args, cfg)
    except ConfigError as exc:  # SchemaError included
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
