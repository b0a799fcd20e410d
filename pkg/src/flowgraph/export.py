"""Output side of the pipeline: delimited tables and graph renderings.

Everything here is deterministic: fixed column order, canonical number
formatting (integral floats print without a decimal point, so the -2
sentinel prints as ``-2``), LF line endings regardless of platform, nodes
and edges emitted in sorted id order.

Graph renderings come in two flavors, a Graphviz DOT document and a single
self-contained HTML file with an embedded JSON payload and a small canvas
force layout. No external assets, no network access, no layout computed at
export time; HTML files land under ``graph_representation/`` inside the
chosen output directory.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING
from collections.abc import Mapping, Sequence

from .errors import ConfigError
from .graph import TrafficGraph
from .ingest import format_value

if TYPE_CHECKING:
    from .community import CommunityPartition

log = logging.getLogger("flowgraph.export")

#: Value written for metrics that are undefined in a given window.
SENTINEL = -2.0

MODE_DOT = "dot"
MODE_HTML = "html"
COLOR_BY_LABEL = "label"
COLOR_BY_COMMUNITY = "community"

HTML_SUBDIR = "graph_representation"

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)
_ATTACK_COLOR = "#d62728"
_EDGE_COLOR = "#999999"
_NODE_COLOR = "#6baed6"


def write_table(
    rows: Sequence[Mapping[str, object]],
    column_order: Sequence[str],
    path: str | Path,
    *,
    delimiter: str = ",",
) -> Path:
    """Write rows as a delimited file with a header, in the given column order.

    Every row must carry every column; missing keys are a bug in the caller
    and surface as KeyError rather than silently empty cells.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(list(column_order))
        for row in rows:
            writer.writerow([format_value(row[col]) for col in column_order])
    log.info("wrote %d rows x %d columns to %s", len(rows), len(column_order), path)
    return path


@dataclass(frozen=True)
class RenderSpec:
    """What to render and where."""

    mode: str = MODE_HTML
    color_by: str = COLOR_BY_LABEL
    title: str = "traffic graph"
    output_dir: Path = Path(".")

    def __post_init__(self) -> None:
        if self.mode not in (MODE_DOT, MODE_HTML):
            raise ConfigError(f"render mode must be {MODE_DOT} or {MODE_HTML}, got {self.mode!r}")
        if self.color_by not in (COLOR_BY_LABEL, COLOR_BY_COMMUNITY):
            raise ConfigError(
                f"color_by must be {COLOR_BY_LABEL} or {COLOR_BY_COMMUNITY}, got {self.color_by!r}"
            )


def _slug(title: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", title).strip("-") or "graph"


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _node_palette(graph: TrafficGraph, spec: RenderSpec, partition: "CommunityPartition | None") -> list[str]:
    if spec.color_by == COLOR_BY_COMMUNITY:
        if partition is None:
            raise ConfigError("color_by=community requires a partition")
        return [_PALETTE[c % len(_PALETTE)] for c in partition.assignment]
    touched = [False] * graph.node_count
    for (u, v), edge in graph.edges.items():
        if edge.attack:
            touched[u] = True
            touched[v] = True
    return [_ATTACK_COLOR if hit else _NODE_COLOR for hit in touched]


def export_dot(
    graph: TrafficGraph,
    spec: RenderSpec,
    partition: "CommunityPartition | None" = None,
) -> str:
    """Render the graph as a Graphviz DOT document (layout left to the viewer).

    Node width grows with the square root of weighted degree; edge pen width
    with relative edge weight. In label mode attack edges and the nodes they
    touch are drawn in red; in community mode nodes are colored from a fixed
    palette keyed by community id.
    """
    fills = _node_palette(graph, spec, partition)
    max_degree = max(graph.degrees, default=0.0)
    max_weight = max((e.weight for e in graph.edges.values()), default=0.0)

    lines = [f"graph {_quote(spec.title)} {{"]
    lines.append("  node [shape=circle style=filled fixedsize=true];")
    for node, key in enumerate(graph.keys):
        share = graph.degrees[node] / max_degree if max_degree > 0 else 0.0
        width = 0.25 + 0.45 * math.sqrt(share)
        tooltip = f"degree {format_value(graph.degrees[node])}"
        lines.append(
            f"  {_quote(key)} [width={width:.3f} fillcolor={_quote(fills[node])} tooltip={_quote(tooltip)}];"
        )
    for (u, v) in sorted(graph.edges):
        edge = graph.edges[(u, v)]
        share = edge.weight / max_weight if max_weight > 0 else 0.0
        pen = 0.5 + 2.5 * share
        color = _ATTACK_COLOR if (spec.color_by == COLOR_BY_LABEL and edge.attack) else _EDGE_COLOR
        lines.append(
            f"  {_quote(graph.keys[u])} -- {_quote(graph.keys[v])} "
            f"[penwidth={pen:.3f} color={_quote(color)} tooltip={_quote('weight ' + format_value(edge.weight))}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_payload(
    graph: TrafficGraph,
    spec: RenderSpec,
    partition: "CommunityPartition | None" = None,
) -> dict:
    """JSON-ready description of the graph, nodes and edges in sorted order."""
    communities = list(partition.assignment) if partition is not None else [0] * graph.node_count
    attacked = [False] * graph.node_count
    for (u, v), edge in graph.edges.items():
        if edge.attack:
            attacked[u] = True
            attacked[v] = True
    nodes = [
        {
            "id": i,
            "key": key,
            "degree": graph.degrees[i],
            "community": communities[i],
            "attack": attacked[i],
        }
        for i, key in enumerate(graph.keys)
    ]
    edges = [
        {
            "source": u,
            "target": v,
            "weight": graph.edges[(u, v)].weight,
            "multiplicity": graph.edges[(u, v)].multiplicity,
            "attack": graph.edges[(u, v)].attack,
        }
        for (u, v) in sorted(graph.edges)
    ]
    return {
        "title": spec.title,
        "color_by": spec.color_by,
        "nodes": nodes,
        "edges": edges,
    }


def export_html(
    graph: TrafficGraph,
    spec: RenderSpec,
    partition: "CommunityPartition | None" = None,
) -> Path:
    """Write a single-file interactive view of the graph.

    The page embeds the graph as a JSON payload and runs a small canvas force
    simulation in the browser with pan, zoom, and hover details. The file is
    fully self-contained and lands under ``graph_representation/``.
    """
    payload = graph_payload(graph, spec, partition)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).replace("<", "\\u003c")
    html = _HTML_TEMPLATE.replace("__TITLE__", spec.title).replace("__PAYLOAD__", blob)
    out_dir = Path(spec.output_dir) / HTML_SUBDIR
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{_slug(spec.title)}.html"
    path.write_text(html, encoding="utf-8")
    log.info("wrote %s (%d nodes, %d edges)", path, graph.node_count, graph.edge_count)
    return path


def render_graph(
    graph: TrafficGraph,
    spec: RenderSpec,
    partition: "CommunityPartition | None" = None,
) -> Path:
    """Render per ``spec.mode`` and return the written path."""
    if spec.mode == MODE_DOT:
        out_dir = Path(spec.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{_slug(spec.title)}.dot"
        path.write_text(export_dot(graph, spec, partition), encoding="utf-8")
        log.info("wrote %s (%d nodes, %d edges)", path, graph.node_count, graph.edge_count)
        return path
    return export_html(graph, spec, partition)


_HTML_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>__TITLE__</title>
<style>
  body { margin: 0; font: 13px/1.4 system-ui, sans-serif; background: #111; color: #ddd; }
  #bar { padding: 6px 10px; background: #1c1c1c; display: flex; gap: 14px; align-items: baseline; }
  #bar b { color: #fff; }
  #hover { color: #9ecae1; min-height: 1em; }
  canvas { display: block; cursor: grab; }
</style>
</head>
<body>
<div id="bar"><b>__TITLE__</b><span id="counts"></span><span id="hover"></span></div>
<canvas id="view"></canvas>
<script id="graph-data" type="application/json">__PAYLOAD__</script>
<script>
(function () {
  "use strict";
  var data = JSON.parse(document.getElementById("graph-data").textContent);
  var palette = ["#1f77b4","#ff7f0e","#2ca02c","#d62728","#9467bd","#8c564b",
                 "#e377c2","#7f7f7f","#bcbd22","#17becf","#aec7e8","#ffbb78"];
  var canvas = document.getElementById("view");
  var ctx = canvas.getContext("2d");
  document.getElementById("counts").textContent =
    data.nodes.length + " nodes, " + data.edges.length + " edges";

  // Deterministic PRNG so the initial layout is reproducible.
  function mulberry32(a) {
    return function () {
      a |= 0; a = (a + 0x6D2B79F5) | 0;
      var t = Math.imul(a ^ (a >>> 15), 1 | a);
      t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
      return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
  }
  var rand = mulberry32(42);
  var n = data.nodes.length;
  var maxDeg = 0;
  data.nodes.forEach(function (d) { maxDeg = Math.max(maxDeg, d.degree); });
  var pos = data.nodes.map(function (d, i) {
    var angle = 2 * Math.PI * i / Math.max(1, n);
    var r = 200 + 120 * rand();
    return { x: Math.cos(angle) * r, y: Math.sin(angle) * r, vx: 0, vy: 0 };
  });

  var view = { x: 0, y: 0, scale: 1 };
  var ticks = 0, maxTicks = 300;

  function step() {
    var i, j, dx, dy, d2, f;
    for (i = 0; i < n; i++) {
      for (j = i + 1; j < n; j++) {
        dx = pos[j].x - pos[i].x; dy = pos[j].y - pos[i].y;
        d2 = dx * dx + dy * dy + 0.01;
        f = 1200 / d2;
        dx *= f; dy *= f;
        pos[i].vx -= dx; pos[i].vy -= dy;
        pos[j].vx += dx; pos[j].vy += dy;
      }
    }
    data.edges.forEach(function (e) {
      var a = pos[e.source], b = pos[e.target];
      var ex = b.x - a.x, ey = b.y - a.y;
      var dist = Math.sqrt(ex * ex + ey * ey) + 1e-6;
      var pull = 0.01 * (dist - 60);
      ex = ex / dist * pull; ey = ey / dist * pull;
      a.vx += ex; a.vy += ey; b.vx -= ex; b.vy -= ey;
    });
    for (i = 0; i < n; i++) {
      pos[i].vx -= pos[i].x * 0.001; pos[i].vy -= pos[i].y * 0.001;
      pos[i].x += pos[i].vx * 0.5; pos[i].y += pos[i].vy * 0.5;
      pos[i].vx *= 0.6; pos[i].vy *= 0.6;
    }
  }

  function radius(d) { return 3 + 9 * Math.sqrt(maxDeg > 0 ? d.degree / maxDeg : 0); }
  function nodeColor(d) {
    if (data.color_by === "community") return palette[d.community % palette.length];
    return d.attack ? "#d62728" : "#6baed6";
  }

  function draw() {
    var w = canvas.width = window.innerWidth;
    var h = canvas.height = window.innerHeight - 40;
    ctx.clearRect(0, 0, w, h);
    ctx.save();
    ctx.translate(w / 2 + view.x, h / 2 + view.y);
    ctx.scale(view.scale, view.scale);
    data.edges.forEach(function (e) {
      ctx.strokeStyle = (data.color_by === "label" && e.attack) ? "#d62728" : "#555";
      ctx.lineWidth = 0.6;
      ctx.beginPath();
      ctx.moveTo(pos[e.source].x, pos[e.source].y);
      ctx.lineTo(pos[e.target].x, pos[e.target].y);
      ctx.stroke();
    });
    data.nodes.forEach(function (d, i) {
      ctx.fillStyle = nodeColor(d);
      ctx.beginPath();
      ctx.arc(pos[i].x, pos[i].y, radius(d), 0, 2 * Math.PI);
      ctx.fill();
    });
    ctx.restore();
  }

  function frame() {
    if (ticks < maxTicks) { step(); ticks++; }
    draw();
    requestAnimationFrame(frame);
  }

  var dragging = false, lastX = 0, lastY = 0;
  canvas.addEventListener("mousedown", function (ev) { dragging = true; lastX = ev.clientX; lastY = ev.clientY; });
  window.addEventListener("mouseup", function () { dragging = false; });
  canvas.addEventListener("mousemove", function (ev) {
    if (dragging) {
      view.x += ev.clientX - lastX; view.y += ev.clientY - lastY;
      lastX = ev.clientX; lastY = ev.clientY;
      return;
    }
    var rect = canvas.getBoundingClientRect();
    var mx = (ev.clientX - rect.left - canvas.width / 2 - view.x) / view.scale;
    var my = (ev.clientY - rect.top - canvas.height / 2 - view.y) / view.scale;
    var hit = "";
    for (var i = 0; i < n; i++) {
      var dx = pos[i].x - mx, dy = pos[i].y - my;
      if (dx * dx + dy * dy < Math.pow(radius(data.nodes[i]) + 2, 2)) {
        var d = data.nodes[i];
        hit = d.key + "  degree " + d.degree + "  community " + d.community + (d.attack ? "  [attack]" : "");
        break;
      }
    }
    document.getElementById("hover").textContent = hit;
  });
  canvas.addEventListener("wheel", function (ev) {
    ev.preventDefault();
    view.scale *= ev.deltaY < 0 ? 1.1 : 0.9;
    view.scale = Math.min(20, Math.max(0.05, view.scale));
  }, { passive: false });

  frame();
})();
</script>
</body>
</html>
"""
