"""Flow-log ingestion: delimited traffic logs -> typed flow records -> time series.

This is the only module that parses raw text. Everything downstream
(windowing, graphs, metrics) works on :class:`FlowRecord` values whose
timestamps are float seconds; epoch-milliseconds and strptime patterns are
normalized here. Multi-column endpoints (e.g. address plus port) are joined
into a single node key with ``|``.
"""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import ConfigError, DataError, SchemaError

log = logging.getLogger("flowgraph.ingest")

NODE_KEY_SEPARATOR = "|"

TIME_FORMAT_EPOCH_SECONDS = "epoch_seconds"
TIME_FORMAT_EPOCH_MILLIS = "epoch_millis"
TIME_FORMAT_DATETIME_PREFIX = "datetime:"

AGGREGATION_FUNCTIONS = ("sum", "mean", "min", "max", "first")

_DURATION_UNITS = {"ms": 0.001, "s": 1.0, "m": 60.0, "h": 3600.0}


def parse_duration(text: str | int | float) -> float:
    """Parse a duration like ``"30s"``, ``"5m"``, ``"1.5h"``, ``"250ms"`` into seconds.

    Bare numbers (or numeric strings) are taken as seconds. The result must be
    a positive finite number of seconds.
    """
    if isinstance(text, (int, float)):
        seconds = float(text)
    else:
        raw = text.strip()
        unit = 1.0
        for suffix in sorted(_DURATION_UNITS, key=len, reverse=True):
            if raw.endswith(suffix):
                unit = _DURATION_UNITS[suffix]
                raw = raw[: -len(suffix)]
                break
        try:
            seconds = float(raw) * unit
        except ValueError:
            raise ConfigError(f"invalid duration {text!r} (expected e.g. 30s, 5m, 1.5h)") from None
    if not math.isfinite(seconds) or seconds <= 0:
        raise ConfigError(f"duration must be positive and finite, got {text!r}")
    return seconds


def _make_time_parser(time_format: str):
    if time_format == TIME_FORMAT_EPOCH_SECONDS:
        return float
    if time_format == TIME_FORMAT_EPOCH_MILLIS:
        return lambda value: float(value) / 1000.0
    if time_format.startswith(TIME_FORMAT_DATETIME_PREFIX):
        pattern = time_format[len(TIME_FORMAT_DATETIME_PREFIX):]
        if not pattern:
            raise ConfigError("schema.time_format: empty datetime pattern")

        def parse(value: str) -> float:
            # Patterns without zone info are read as UTC so runs do not depend
            # on the machine's local timezone.
            parsed = datetime.strptime(value, pattern)
            if parsed.tzinfo is None:
                parsed = parsed.replace(tzinfo=timezone.utc)
            return parsed.timestamp()

        return parse
    raise ConfigError(
        f"schema.time_format: unknown format {time_format!r} "
        f"(expected {TIME_FORMAT_EPOCH_SECONDS}, {TIME_FORMAT_EPOCH_MILLIS} "
        f"or {TIME_FORMAT_DATETIME_PREFIX}<pattern>)"
    )


@dataclass(frozen=True)
class SchemaMapping:
    """Names the columns of a flow log and how to interpret them.

    ``src_columns``/``dst_columns`` may name several columns; their values are
    joined with ``|`` to form the endpoint node key. ``pkts``/``bytes``/``rate``
    columns are optional for purely structural pipelines but required by the
    spectral extractor. ``normal_label`` is the label value that means benign
    traffic; anything else is treated as an attack class.
    """

    time_column: str
    src_columns: tuple[str, ...]
    dst_columns: tuple[str, ...]
    label_column: str
    time_format: str = TIME_FORMAT_EPOCH_SECONDS
    pkts_column: str | None = None
    bytes_column: str | None = None
    rate_column: str | None = None
    normal_label: str = "Normal"

    def __post_init__(self) -> None:
        if not self.src_columns:
            raise SchemaError("schema.src_columns: at least one source column is required")
        if not self.dst_columns:
            raise SchemaError("schema.dst_columns: at least one destination column is required")
        if not self.time_column:
            raise SchemaError("schema.time_column: required")
        if not self.label_column:
            raise SchemaError("schema.label_column: required")
        _make_time_parser(self.time_format)  # fail fast on a bad format

    def required_columns(self) -> list[str]:
        cols = [self.time_column, *self.src_columns, *self.dst_columns, self.label_column]
        for optional in (self.pkts_column, self.bytes_column, self.rate_column):
            if optional:
                cols.append(optional)
        return cols

    def validate_against(self, header: Sequence[str], context: str = "input") -> None:
        missing = [c for c in self.required_columns() if c not in header]
        if missing:
            raise SchemaError(f"{context}: header is missing column(s) {', '.join(sorted(set(missing)))}")


@dataclass
class FlowRecord:
    """One flow observation with normalized types.

    ``extras`` keeps every original column as text, in header order, so that
    enrichment can write the input back out untouched.
    """

    timestamp: float
    src_keys: tuple[str, ...]
    dst_keys: tuple[str, ...]
    pkts: float
    bytes: float
    rate: float
    label: str
    extras: dict[str, str] = field(default_factory=dict)

    @property
    def src_key(self) -> str:
        return NODE_KEY_SEPARATOR.join(self.src_keys)

    @property
    def dst_key(self) -> str:
        return NODE_KEY_SEPARATOR.join(self.dst_keys)


def _parse_metric(raw: str, column: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{column}: could not parse {raw!r} as a number") from None
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{column}: value {raw!r} must be a finite non-negative number")
    return value


def parse_log(
    path: str | Path,
    schema: SchemaMapping,
    *,
    delimiter: str = ",",
    lenient: bool = False,
) -> list[FlowRecord]:
    """Read a delimited flow log into typed records.

    Rows that fail to parse are collected and reported with their line
    numbers in a single :class:`DataError`; with ``lenient=True`` they are
    skipped with a warning instead. The header row is validated against the
    schema before any row is read.
    """
    path = Path(path)
    time_parser = _make_time_parser(schema.time_format)
    records: list[FlowRecord] = []
    failures: list[str] = []

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: file is empty, expected a header row")
        schema.validate_against(header, context=str(path))
        index = {}
        for pos, name in enumerate(header):
            index.setdefault(name, pos)  # first occurrence wins on duplicates

        t_i = index[schema.time_column]
        src_i = [index[c] for c in schema.src_columns]
        dst_i = [index[c] for c in schema.dst_columns]
        label_i = index[schema.label_column]
        pkts_i = index[schema.pkts_column] if schema.pkts_column else None
        bytes_i = index[schema.bytes_column] if schema.bytes_column else None
        rate_i = index[schema.rate_column] if schema.rate_column else None

        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != len(header):
                    raise ValueError(f"expected {len(header)} fields, found {len(row)}")
                timestamp = time_parser(row[t_i])
                if not math.isfinite(timestamp):
                    raise ValueError(f"{schema.time_column}: non-finite timestamp {row[t_i]!r}")
                src_keys = tuple(row[i] for i in src_i)
                dst_keys = tuple(row[i] for i in dst_i)
                for cols, keys in ((schema.src_columns, src_keys), (schema.dst_columns, dst_keys)):
                    for col, key in zip(cols, keys):
                        if key == "":
                            raise ValueError(f"{col}: empty endpoint value")
                record = FlowRecord(
                    timestamp=timestamp,
                    src_keys=src_keys,
                    dst_keys=dst_keys,
                    pkts=_parse_metric(row[pkts_i], schema.pkts_column) if pkts_i is not None else 0.0,
                    bytes=_parse_metric(row[bytes_i], schema.bytes_column) if bytes_i is not None else 0.0,
                    rate=_parse_metric(row[rate_i], schema.rate_column) if rate_i is not None else 0.0,
                    label=row[label_i],
                    extras=dict(zip(header, row)),
                )
            except ValueError as exc:
                failures.append(f"line {lineno}: {exc}")
                continue
            records.append(record)

    if failures:
        if lenient:
            log.warning("%s: skipped %d bad row(s); first: %s", path, len(failures), failures[0])
        else:
            shown = "; ".join(failures[:5])
            more = f" (+{len(failures) - 5} more)" if len(failures) > 5 else ""
            raise DataError(f"{path}: {len(failures)} row(s) failed to parse: {shown}{more}")
    log.info("%s: parsed %d records", path, len(records))
    return records


@dataclass(frozen=True)
class AggregationSpec:
    """How to roll records up inside each time bucket.

    ``aggregations`` maps column name to one of sum/mean/min/max/first;
    insertion order fixes output column order. ``group_by`` columns key the
    groups and must be disjoint from the aggregated columns. ``sort_by``
    orders rows within a bucket before grouping, which pins down ``first``.
    """

    sort_by: tuple[str, ...]
    group_by: tuple[str, ...]
    aggregations: dict[str, str]

    def __post_init__(self) -> None:
        overlap = set(self.group_by) & set(self.aggregations)
        if overlap:
            raise SchemaError(
                f"aggregation spec: column(s) {', '.join(sorted(overlap))} appear in both group_by and aggregations"
            )
        for column, func in self.aggregations.items():
            if func not in AGGREGATION_FUNCTIONS:
                raise SchemaError(
                    f"aggregation spec: unknown function {func!r} for column {column!r} "
                    f"(expected one of {', '.join(AGGREGATION_FUNCTIONS)})"
                )
        if not self.aggregations:
            raise SchemaError("aggregation spec: at least one aggregation is required")

    def columns_used(self) -> list[str]:
        return [*self.sort_by, *self.group_by, *self.aggregations]


def format_value(value: object) -> str:
    """Canonical text form used in all delimited output.

    Floats that are whole numbers print as integers (so the -2 sentinel
    prints as ``-2``), everything else uses ``repr`` which is the shortest
    round-trip form. Booleans print as 1/0.
    """
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isfinite(value) and value == int(value) and abs(value) < 1e16:
            return str(int(value))
        return repr(value)
    return str(value)


def _column_caster(values: Iterable[str]):
    """Sort key for a text column: numeric if every value parses, else string."""
    floats = []
    for v in values:
        try:
            floats.append(float(v))
        except ValueError:
            return None
    return floats


def extract_time_series(
    records: Sequence[FlowRecord],
    resolution: float,
    spec: AggregationSpec,
    schema: SchemaMapping,
) -> list[FlowRecord]:
    """Bucket records onto a fixed time grid and aggregate within groups.

    Timestamps are rewritten to their bucket start (``floor(t / resolution) *
    resolution``). The time column always participates in grouping; it is
    prepended to ``group_by`` when absent, otherwise a bucket could mix
    groups. Within a bucket rows are stably sorted by ``sort_by`` (numeric
    order when the whole column parses as numbers), then grouped, then each
    aggregation column is reduced. Output rows carry exactly the group_by
    columns followed by the aggregation columns and come out ordered by
    bucket, then by first appearance of the group in sort order.
    """
    if resolution <= 0 or not math.isfinite(resolution):
        raise ConfigError(f"resolution must be positive and finite, got {resolution}")
    if not records:
        return []

    known = set(records[0].extras)
    missing = [c for c in spec.columns_used() if c not in known]
    if missing:
        raise SchemaError(f"aggregation spec: column(s) {', '.join(sorted(set(missing)))} not in input")

    group_by = spec.group_by
    if schema.time_column not in group_by:
        group_by = (schema.time_column, *group_by)

    # Rewrite each row's time column to the bucket start, keep everything else.
    staged: list[tuple[int, dict[str, str]]] = []
    for rec in records:
        bucket = math.floor(rec.timestamp / resolution)
        row = dict(rec.extras)
        row[schema.time_column] = format_value(bucket * resolution)
        staged.append((bucket, row))

    sort_casters = {}
    for col in spec.sort_by:
        column_values = _column_caster(row[col] for _, row in staged)
        sort_casters[col] = column_values  # parallel list of floats, or None

    def sort_key(item: tuple[int, tuple[int, dict[str, str]]]):
        pos, (bucket, row) = item
        parts: list[object] = [bucket]
        for col in spec.sort_by:
            cast = sort_casters[col]
            parts.append(cast[pos] if cast is not None else row[col])
        return tuple(parts)

    ordered = [pair for _, pair in sorted(enumerate(staged), key=sort_key)]

    groups: dict[tuple[str, ...], list[dict[str, str]]] = {}
    for bucket, row in ordered:
        key = tuple(row[c] for c in group_by)
        groups.setdefault(key, []).append(row)

    out: list[FlowRecord] = []
    for key, rows in groups.items():
        values: dict[str, str] = dict(zip(group_by, key))
        for column, func in spec.aggregations.items():
            raw = [r[column] for r in rows]
            if func == "first":
                values[column] = raw[0]
                continue
            try:
                nums = [float(v) for v in raw]
            except ValueError as exc:
                raise SchemaError(
                    f"aggregation {func!r} on non-numeric column {column!r}: {exc}"
                ) from None
            if func == "sum":
                result = math.fsum(nums)
            elif func == "mean":
                result = math.fsum(nums) / len(nums)
            elif func == "min":
                result = min(nums)
            else:
                result = max(nums)
            values[column] = format_value(result)
        out.append(_record_from_values(values, schema))
    log.info("time series: %d records -> %d aggregated rows", len(records), len(out))
    return out


def _record_from_values(values: dict[str, str], schema: SchemaMapping) -> FlowRecord:
    """Rebuild a typed record from aggregated text columns (best effort).

    Endpoint/metric fields are populated only when the corresponding columns
    survived aggregation; the text row in ``extras`` is authoritative.
    """
    time_parser = _make_time_parser(schema.time_format)

    def metric(column: str | None) -> float:
        if column and column in values:
            try:
                return float(values[column])
            except ValueError:
                return 0.0
        return 0.0

    src = tuple(values[c] for c in schema.src_columns if c in values)
    dst = tuple(values[c] for c in schema.dst_columns if c in values)
    return FlowRecord(
        timestamp=time_parser(values[schema.time_column]),
        src_keys=src or ("",),
        dst_keys=dst or ("",),
        pkts=metric(schema.pkts_column),
        bytes=metric(schema.bytes_column),
        rate=metric(schema.rate_column),
        label=values.get(schema.label_column, ""),
        extras=values,
    )
