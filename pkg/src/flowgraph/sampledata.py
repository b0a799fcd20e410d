"""Deterministic synthetic flow trace with embedded flood and scan episodes.

Ten minutes of traffic for a small network: twenty workstations talking to
five servers at a steady rate, a thirty second flood where every host blasts
one victim (a dense star of very heavy edges), and a thirty second address
sweep from a single scanner (hundreds of fresh destinations, tiny flows).
With 30 s windows the flood lands in window 6 and the sweep in window 14.

The bundled ``data/sample_flows.csv`` is exactly the output of
``python -m flowgraph.sampledata`` with the default seed; a test regenerates
it and compares bytes, so the fixture cannot drift from the generator.
"""

from __future__ import annotations

import csv
import random
import sys
from pathlib import Path

from .ingest import format_value

DEFAULT_SEED = 20240705

HEADER = ["stime", "saddr", "daddr", "pkts", "bytes", "rate", "category"]

NORMAL_LABEL = "Normal"
FLOOD_LABEL = "DDoS"
SCAN_LABEL = "Scan"

DURATION_S = 600
FLOOD_START_S = 180
SCAN_START_S = 420
EPISODE_LENGTH_S = 30


def generate_sample_rows(seed: int = DEFAULT_SEED) -> list[list[str]]:
    """Generate the trace as formatted text rows, sorted by timestamp."""
    rng = random.Random(seed)
    hosts = [f"10.0.0.{i}" for i in range(1, 21)]
    servers = [f"10.0.1.{i}" for i in range(1, 6)]
    pool = hosts + servers
    victim = "10.0.9.9"
    scanner = hosts[6]

    raw: list[tuple[float, str, str, int, int, float, str]] = []

    for second in range(DURATION_S):
        for _ in range(6):
            ts = second + rng.random()
            src = rng.choice(hosts)
            dst = rng.choice(servers)
            pkts = rng.randint(1, 12)
            size = pkts * rng.randint(60, 1400)
            rate = round(pkts / rng.uniform(0.5, 2.0), 3)
            raw.append((ts, src, dst, pkts, size, rate, NORMAL_LABEL))

    # Flood: every machine on the network hammers one victim, so the window
    # graph contains a star over all nodes whose edges are orders of
    # magnitude heavier than normal traffic.
    for src in pool:
        for _ in range(25):
            ts = FLOOD_START_S + rng.random() * EPISODE_LENGTH_S
            pkts = rng.randint(2000, 6000)
            size = pkts * rng.randint(400, 1000)
            rate = round(pkts / rng.uniform(0.8, 1.2), 3)
            raw.append((ts, src, victim, pkts, size, rate, FLOOD_LABEL))

    # Sweep: one scanner touches hundreds of addresses never seen elsewhere,
    # each with one or two packets.
    for i in range(400):
        ts = SCAN_START_S + rng.random() * EPISODE_LENGTH_S
        dst = f"10.9.{i // 250}.{i % 250 + 1}"
        pkts = rng.randint(1, 2)
        rate = round(pkts / rng.uniform(0.5, 1.5), 3)
        raw.append((ts, scanner, dst, pkts, pkts * 60, rate, SCAN_LABEL))

    raw.sort(key=lambda row: row[0])
    return [
        [format_value(ts), src, dst, str(pkts), str(size), format_value(rate), label]
        for ts, src, dst, pkts, size, rate, label in raw
    ]


def write_sample(path: str | Path, seed: int = DEFAULT_SEED) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        writer.writerows(generate_sample_rows(seed))
    return path


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "sample_flows.csv"
    print(write_sample(target))
