import math
import random

import pytest

from flowgraph.errors import ConfigError, DataError
from flowgraph.windows import partition_windows, split_midpoint

from helpers import make_record


def records_at(*timestamps):
    return [make_record(t, "a", "b") for t in timestamps]


def test_empty_input_no_windows():
    assert partition_windows([], 10.0) == []


def test_grid_alignment_and_membership():
    windows = partition_windows(records_at(12.0, 19.9, 20.0, 35.0), 10.0)
    assert [(w.index, w.start, w.end) for w in windows] == [(0, 10.0, 20.0), (1, 20.0, 30.0), (2, 30.0, 40.0)]
    assert [len(w.records) for w in windows] == [2, 1, 1]
    # half-open: 20.0 belongs to [20, 30), not [10, 20)
    assert windows[1].records[0].timestamp == 20.0


def test_continuity_materializes_gaps():
    records = records_at(1.0, 41.0)
    sparse = partition_windows(records, 10.0, continuity=False)
    assert [(w.index, w.start) for w in sparse] == [(0, 0.0), (1, 40.0)]
    dense = partition_windows(records, 10.0, continuity=True)
    assert [(w.index, w.start) for w in dense] == [(0, 0.0), (1, 10.0), (2, 20.0), (3, 30.0), (4, 40.0)]
    assert [w.is_empty for w in dense] == [False, True, True, True, False]


def test_unsorted_records_rejected():
    with pytest.raises(DataError):
        partition_windows(records_at(5.0, 3.0), 10.0)


def test_bad_interval_rejected():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ConfigError):
            partition_windows(records_at(1.0), bad)


def test_conservation_property():
    rng = random.Random(4242)
    for _ in range(50):
        stamps = sorted(rng.uniform(0, 500) for _ in range(rng.randint(1, 300)))
        interval = rng.choice([0.5, 3.0, 7.5, 60.0])
        continuity = rng.random() < 0.5
        windows = partition_windows(records_at(*stamps), interval, continuity=continuity)
        # every record lands in exactly one window, and in the right one
        total = 0
        for w in windows:
            assert w.end == pytest.approx(w.start + interval)
            for rec in w.records:
                assert w.start <= rec.timestamp < w.end
            total += len(w.records)
        assert total == len(stamps)
        # indices are consecutive from zero either way
        assert [w.index for w in windows] == list(range(len(windows)))
        if continuity:
            starts = [w.start for w in windows]
            diffs = [round((b - a) / interval) for a, b in zip(starts, starts[1:])]
            assert all(d == 1 for d in diffs)


def test_split_midpoint_half_open():
    window = partition_windows(records_at(10.0, 14.999, 15.0, 19.5), 10.0)[0]
    assert (window.start, window.end) == (10.0, 20.0)
    pair = split_midpoint(window)
    assert pair.full is window
    assert (pair.first_half.start, pair.first_half.end) == (10.0, 15.0)
    # the record exactly on the midpoint is NOT in the first half
    assert [r.timestamp for r in pair.first_half.records] == [10.0, 14.999]
    assert len(pair.full.records) == 4


def test_split_midpoint_empty_first_half():
    window = partition_windows(records_at(18.0, 19.0), 10.0)[0]
    pair = split_midpoint(window)
    assert pair.first_half.is_empty
    assert not pair.full.is_empty
