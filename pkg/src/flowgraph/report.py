"""Report figures: metric-over-time PNGs rendered next to the delimited output.

matplotlib is imported lazily with the Agg backend so the pipeline never
needs a display and stays import-light when figures are not requested.
Windows whose metrics are the sentinel (empty windows) show up as gaps, and
spans of windows labeled as attack traffic are shaded.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from collections.abc import Mapping, Sequence

from .export import SENTINEL

log = logging.getLogger("flowgraph.report")

_FIGSIZE = (10.0, 4.5)
_DPI = 120


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _series(rows: Sequence[Mapping[str, object]], column: str) -> list[float]:
    out = []
    for row in rows:
        value = row.get(column)
        if value is None or (isinstance(value, float) and value == SENTINEL):
            out.append(math.nan)
        else:
            out.append(float(value))  # type: ignore[arg-type]
    return out


def _shade_attacks(ax, rows: Sequence[Mapping[str, object]], normal_label: str) -> None:
    for row in rows:
        if str(row.get("label", normal_label)) != normal_label:
            x = float(row["window_index"])  # type: ignore[arg-type]
            ax.axvspan(x - 0.5, x + 0.5, color="#d62728", alpha=0.12, lw=0)


def _finish(fig, ax, title: str, path: Path) -> Path:
    ax.set_xlabel("window index")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    return path


def render_spectral_figures(
    rows: Sequence[Mapping[str, object]],
    out_dir: str | Path,
    *,
    normal_label: str = "Normal",
) -> list[Path]:
    """Render the spectral feature table as per-metric time series figures."""
    plt = _plt()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    x = [float(r["window_index"]) for r in rows]  # type: ignore[arg-type]
    written: list[Path] = []

    for metric, log_scale in (("flooding", True), ("connectedness", False), ("wiriness", True)):
        fig, ax = plt.subplots(figsize=_FIGSIZE)
        for topo, style in (("packets", "-"), ("bytes", "--"), ("rate", ":")):
            ax.plot(x, _series(rows, f"{metric}_{topo}_end"), style, label=topo)
        if log_scale:
            ax.set_yscale("symlog")
        _shade_attacks(ax, rows, normal_label)
        written.append(_finish(fig, ax, f"{metric} per window (full window)", out_dir / f"spectral_{metric}.png"))
        plt.close(fig)

    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(x, _series(rows, "node_count_end"), "-", label="nodes")
    ax.plot(x, _series(rows, "edge_count_end"), "--", label="edges")
    _shade_attacks(ax, rows, normal_label)
    written.append(_finish(fig, ax, "graph size per window", out_dir / "spectral_graph_size.png"))
    plt.close(fig)

    log.info("rendered %d spectral figures under %s", len(written), out_dir)
    return written


def render_community_figures(
    summaries: Sequence[Mapping[str, object]],
    out_dir: str | Path,
) -> list[Path]:
    """Render per-window community summaries as time series figures."""
    plt = _plt()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    x = [float(s["window_index"]) for s in summaries]  # type: ignore[arg-type]
    written: list[Path] = []

    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(x, _series(summaries, "community_count"), "-", label="communities")
    ax.bar(x, _series(summaries, "born"), width=0.35, color="#2ca02c", alpha=0.6, label="born")
    ax.bar(x, [-v for v in _series(summaries, "died")], width=0.35, color="#d62728", alpha=0.6, label="died")
    written.append(_finish(fig, ax, "community count and turnover", out_dir / "community_counts.png"))
    plt.close(fig)

    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(x, _series(summaries, "modularity"), "-", label="modularity")
    ax.plot(x, _series(summaries, "density_mean"), "--", label="mean density")
    ax.plot(x, _series(summaries, "conductance_mean"), ":", label="mean conductance")
    written.append(_finish(fig, ax, "partition quality per window", out_dir / "community_quality.png"))
    plt.close(fig)

    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(x, _series(summaries, "stability_mean"), "-", label="mean stability")
    ax.set_ylim(-1.05, 1.05)
    written.append(_finish(fig, ax, "community stability across windows", out_dir / "community_stability.png"))
    plt.close(fig)

    log.info("rendered %d community figures under %s", len(written), out_dir)
    return written
