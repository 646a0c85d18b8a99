"""CSV and plain-SVG renderings of sweep results and single episodes."""

from __future__ import annotations

import math
from html import escape
from pathlib import Path

import numpy as np

REPORT_KINDS = ("bars", "heatmap", "map_view")
_PX = 500  # map view side in pixels
_LOW, _HIGH = np.array([247, 251, 255]), np.array([8, 48, 107])


class ReportDimensionError(ValueError):
    pass


def _num(v):
    return f"{v:.2f}"


def _svg(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n")


def parse_cell(label):
    """``"beta=0.5;omega=180"`` -> ``{"beta": "0.5", "omega": "180"}``."""
    return dict(part.split("=", 1) for part in label.split(";") if part)


def _cell_means(rows, metric):
    """Mean of ``metric`` per cell across maps, keeping first-seen cell order."""
    acc = {}
    for r in rows:
        acc.setdefault(r["cell"], []).append(float(r[metric]))
    return {cell: (float(np.nanmean(v)) if not all(math.isnan(x) for x in v) else math.nan)
            for cell, v in acc.items()}


def bar_chart(rows, metric="mean_cost", title=""):
    cells = _cell_means(rows, metric)
    if any(len(parse_cell(c)) != 1 for c in cells):
        raise ReportDimensionError("bar charts need a one-dimensional grid")
    width, height, pad = 80 + 60 * len(cells), 320, 40
    finite = [v for v in cells.values() if not math.isnan(v)]
    top = max(finite) if finite and max(finite) > 0 else 1.0
    body = [f'<text x="{pad}" y="20" font-size="14">{escape(title or metric)}</text>']
    for i, (cell, v) in enumerate(cells.items()):
        h = 0.0 if math.isnan(v) else (height - 2 * pad - 20) * v / top
        x = pad + 60 * i
        body.append(f'<rect class="bar" x="{x}" y="{_num(height - pad - h)}" width="40" '
                    f'height="{_num(h)}" fill="#3b6ea5"><title>{escape(cell)}: {v:.4g}</title></rect>')
        body.append(f'<text x="{x + 20}" y="{height - pad + 14}" font-size="10" '
                    f'text-anchor="middle">{escape(cell)}</text>')
    return _svg(width, height, body)


def _color(t):
    if math.isnan(t):
        return "#cccccc"
    r, g, b = np.rint(_LOW + (_HIGH - _LOW) * min(max(t, 0.0), 1.0)).astype(int)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(rows, metric="mean_cost", title=""):
    cells = _cell_means(rows, metric)
    parsed = {c: parse_cell(c) for c in cells}
    axes = {tuple(p) for p in parsed.values()}
    if len(axes) != 1 or len(next(iter(axes))) != 2:
        raise ReportDimensionError("heatmaps need a two-dimensional grid")
    row_axis, col_axis = next(iter(axes))
    row_vals = list(dict.fromkeys(p[row_axis] for p in parsed.values()))
    col_vals = list(dict.fromkeys(p[col_axis] for p in parsed.values()))
    finite = [v for v in cells.values() if not math.isnan(v)]
    lo, hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    span = hi - lo or 1.0
    size, left, top = 40, 90, 50
    width = left + size * len(col_vals) + 20
    height = top + size * len(row_vals) + 40
    body = [f'<text x="10" y="20" font-size="14">{escape(title or metric)}</text>']
    for j, cv in enumerate(col_vals):
        body.append(f'<text class="col-label" x="{left + size * j + size // 2}" y="{top - 6}" '
                    f'font-size="9" text-anchor="middle">{escape(cv)}</text>')
    for i, rv in enumerate(row_vals):
        body.append(f'<text class="row-label" x="{left - 6}" y="{top + size * i + size // 2 + 3}" '
                    f'font-size="9" text-anchor="end">{escape(rv)}</text>')
        for j, cv in enumerate(col_vals):
            cell = next(c for c, p in parsed.items() if p[row_axis] == rv and p[col_axis] == cv)
            v = cells[cell]
            t = math.nan if math.isnan(v) else (v - lo) / span
            body.append(f'<rect class="cell" x="{left + size * j}" y="{top + size * i}" '
                        f'width="{size}" height="{size}" fill="{_color(t)}">'
                        f'<title>{escape(cell)}: {v:.4g}</title></rect>')
    body.append(f'<text x="{left}" y="{height - 12}" font-size="10">rows: {escape(row_axis)}, '
                f'columns: {escape(col_axis)}</text>')
    return _svg(width, height, body)


def _pt(p):
    return _num(p[0] * _PX), _num((1.0 - p[1]) * _PX)


def map_view(world, path=None, trajectory=None):
    """Obstacles, hidden regions, reference path and executed positions on one canvas."""
    body = [f'<rect class="border" x="0" y="0" width="{_PX}" height="{_PX}" fill="white" '
            f'stroke="black"/>']
    for reg in world.high_cost_regions:
        x0, y0, x1, y1 = reg.bounds
        body.append(f'<rect class="region {reg.kind}" x="{_num(x0 * _PX)}" '
                    f'y="{_num((1 - y1) * _PX)}" width="{_num((x1 - x0) * _PX)}" '
                    f'height="{_num((y1 - y0) * _PX)}" fill="#9ecae1" fill-opacity="0.5"/>')
    for ob in world.obstacles:
        x0, y0, x1, y1 = ob.bounds
        body.append(f'<rect class="obstacle" x="{_num(x0 * _PX)}" y="{_num((1 - y1) * _PX)}" '
                    f'width="{_num((x1 - x0) * _PX)}" height="{_num((y1 - y0) * _PX)}" '
                    f'fill="#555555"/>')
    if path is not None:
        pts = " ".join(",".join(_pt(p)) for p in path.waypoints)
        body.append(f'<polyline class="reference" points="{pts}" fill="none" stroke="#2ca02c" '
                    f'stroke-dasharray="4 2"/>')
    if trajectory is not None:
        xy = np.asarray(trajectory, dtype=float)[:, :2]
        pts = " ".join(",".join(_pt(p)) for p in xy)
        body.append(f'<polyline class="trajectory" points="{pts}" fill="none" stroke="#d62728"/>')
    for name, p, color in (("start", world.start, "#1f77b4"), ("goal", world.goal, "#ff7f0e")):
        x, y = _pt(p)
        body.append(f'<circle class="{name}" cx="{x}" cy="{y}" r="5" fill="{color}"/>')
    return _svg(_PX, _PX, body)


def episode_positions(result):
    """Executed positions of an episode: each logged start state plus the final state."""
    pts = [(r.x, r.y) for r in result.trip_log]
    final = getattr(result, "final_state", None)
    if final is not None:
        pts.append(final.position)
    return np.array(pts, dtype=float).reshape(-1, 2)


def emit_report(table, kind, out_dir, metric="mean_cost", world=None, path=None, episode=None):
    """Write ``results.csv`` plus the SVG for ``kind``; returns the written paths."""
    if kind not in REPORT_KINDS:
        raise ValueError(f"unknown report kind {kind!r}; choose from {REPORT_KINDS}")
    if kind != "map_view" and not table.rows:
        raise ValueError("cannot report an empty results table")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if table is not None:
        table.write_csv(out / "results.csv")
        written.append(out / "results.csv")
    if kind == "bars":
        svg = bar_chart(table.rows, metric, f"{table.scenario}: {metric}")
        name = f"{table.scenario}_bars.svg"
    elif kind == "heatmap":
        svg = heatmap(table.rows, metric, f"{table.scenario}: {metric}")
        name = f"{table.scenario}_{metric}_heatmap.svg"
    else:
        if world is None:
            raise ValueError("map_view needs a world")
        traj = episode_positions(episode) if episode is not None else None
        svg = map_view(world, path, traj)
        name = f"map_{world.seed}.svg"
    (out / name).write_text(svg)
    written.append(out / name)
    return written
