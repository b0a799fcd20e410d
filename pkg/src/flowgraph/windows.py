"""Half-open time windows over sorted flow records.

Windows live on a grid aligned to the epoch: a record at time ``t`` falls in
slot ``floor(t / interval)``, and window k covers ``[k*interval,
(k+1)*interval)``. The first populated slot defines window index 0.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

from .errors import ConfigError, DataError
from .ingest import FlowRecord

log = logging.getLogger("flowgraph.windows")


@dataclass(frozen=True)
class TimeWindow:
    index: int
    start: float
    end: float
    records: tuple[FlowRecord, ...]

    @property
    def interval(self) -> float:
        return self.end - self.start

    @property
    def is_empty(self) -> bool:
        return not self.records


@dataclass(frozen=True)
class SubWindowPair:
    """A window split at its midpoint: the first half and the full window."""

    first_half: TimeWindow
    full: TimeWindow


def partition_windows(
    records: Sequence[FlowRecord],
    interval: float,
    *,
    continuity: bool = False,
) -> list[TimeWindow]:
    """Partition time-sorted records into fixed-width half-open windows.

    With ``continuity=True`` empty slots between the first and last populated
    slot are materialized as empty windows; otherwise they are skipped and
    window indices stay consecutive over the populated slots. Unsorted input
    raises :class:`DataError`; no records yields no windows.
    """
    if not math.isfinite(interval) or interval <= 0:
        raise ConfigError(f"window interval must be positive and finite, got {interval}")
    recs = list(records)
    if not recs:
        return []
    for prev, cur in zip(recs, recs[1:]):
        if cur.timestamp < prev.timestamp:
            raise DataError(
                f"records are not sorted by timestamp ({cur.timestamp} after {prev.timestamp})"
            )

    slots: dict[int, list[FlowRecord]] = {}
    for rec in recs:
        slots.setdefault(math.floor(rec.timestamp / interval), []).append(rec)

    if continuity:
        slot_ids: Sequence[int] = range(min(slots), max(slots) + 1)
    else:
        slot_ids = sorted(slots)

    windows = []
    for idx, slot in enumerate(slot_ids):
        start = slot * interval
        windows.append(
            TimeWindow(index=idx, start=start, end=start + interval, records=tuple(slots.get(slot, ())))
        )
    log.debug(
        "partitioned %d records into %d windows (interval=%gs, continuity=%s)",
        len(recs), len(windows), interval, continuity,
    )
    return windows


def split_midpoint(window: TimeWindow) -> SubWindowPair:
    """Split a window into its first half and the full window.

    The first half is half-open ``[start, mid)``: a record sitting exactly on
    the midpoint belongs to the full window only.
    """
    mid = window.start + (window.end - window.start) / 2.0
    first = TimeWindow(
        index=window.index,
        start=window.start,
        end=mid,
        records=tuple(r for r in window.records if r.timestamp < mid),
    )
    return SubWindowPair(first_half=first, full=window)
