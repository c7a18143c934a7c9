"""Standalone SVG figures built with the stdlib XML tree; no display server needed.

Every data mark carries a class attribute (``bar``, ``marker``, ``on-band``) and
numeric geometry, so tests can parse the file and check positions instead of
eyeballing pixels.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence
from xml.etree import ElementTree as ET

import numpy as np

from .env import Action, CameraState, TraceRow

WIDTH = 800
HEIGHT = 400
MARGIN = 60

PLOT_KINDS = ("policy-trace", "tradeoff-curve", "histogram", "bar")


class PlotError(ValueError):
    """Raised when input data does not match the requested plot kind."""


def _root(title: str) -> ET.Element:
    svg = ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "width": str(WIDTH),
            "height": str(HEIGHT),
            "viewBox": f"0 0 {WIDTH} {HEIGHT}",
        },
    )
    ET.SubElement(svg, "rect", {"x": "0", "y": "0", "width": str(WIDTH),
                                "height": str(HEIGHT), "fill": "white"})
    t = ET.SubElement(svg, "text", {"x": str(WIDTH / 2), "y": "24",
                                    "text-anchor": "middle", "font-size": "16"})
    t.text = title
    return svg


def _axes(svg: ET.Element, xlabel: str, ylabel: str) -> None:
    ET.SubElement(svg, "line", {"x1": str(MARGIN), "y1": str(HEIGHT - MARGIN),
                                "x2": str(WIDTH - MARGIN), "y2": str(HEIGHT - MARGIN),
                                "stroke": "black"})
    ET.SubElement(svg, "line", {"x1": str(MARGIN), "y1": str(MARGIN),
                                "x2": str(MARGIN), "y2": str(HEIGHT - MARGIN),
                                "stroke": "black"})
    tx = ET.SubElement(svg, "text", {"x": str(WIDTH / 2), "y": str(HEIGHT - 12),
                                     "text-anchor": "middle", "font-size": "12"})
    tx.text = xlabel
    ty = ET.SubElement(svg, "text", {"x": "18", "y": str(HEIGHT / 2), "font-size": "12",
                                     "text-anchor": "middle",
                                     "transform": f"rotate(-90 18 {HEIGHT / 2})"})
    ty.text = ylabel


def _write(svg: ET.Element, path: str | Path) -> None:
    ET.ElementTree(svg).write(Path(path), encoding="unicode", xml_declaration=True)


def _plot_x(frac: float) -> float:
    return MARGIN + frac * (WIDTH - 2 * MARGIN)

def _plot_y(frac: float) -> float:
    """frac 0 = axis bottom, 1 = top."""
    return HEIGHT - MARGIN - frac * (HEIGHT - 2 * MARGIN)


# ---------------------------------------------------------------------------
# Plot kinds
# ---------------------------------------------------------------------------

def policy_trace_svg(
    rows: Sequence[TraceRow], path: str | Path, title: str = "Policy trace"
) -> None:
    """Occupancy curve with shaded bands where the camera was on.

    Contiguous on-minutes merge into one band, so an always-on trace shows a
    single full-width rectangle.
    """
    if not rows:
        raise PlotError("empty trace")
    n = len(rows)
    svg = _root(title)
    on = np.array([r.action == Action.TURN_ON for r in rows])
    occ = np.array([r.true_occupancy for r in rows])
    # Shaded camera-on bands.
    i = 0
    while i < n:
        if on[i]:
            j = i
            while j + 1 < n and on[j + 1]:
                j += 1
            x0 = _plot_x(i / n)
            x1 = _plot_x((j + 1) / n)
            ET.SubElement(svg, "rect", {
                "class": "on-band",
                "x": f"{x0:.2f}", "y": str(MARGIN),
                "width": f"{x1 - x0:.2f}", "height": str(HEIGHT - 2 * MARGIN),
                "fill": "#cfe8cf",
            })
            i = j + 1
        else:
            i += 1
    # Occupancy polyline on top.
    pts = " ".join(
        f"{_plot_x((k + 0.5) / n):.2f},{_plot_y(occ[k]):.2f}" for k in range(n)
    )
    ET.SubElement(svg, "polyline", {"class": "occupancy", "points": pts,
                                    "fill": "none", "stroke": "#2040a0"})
    _axes(svg, "minute of trace", "occupancy")
    _write(svg, path)


def tradeoff_curve_svg(
    points: Sequence[tuple[float, float, str]],
    path: str | Path,
    title: str = "Accuracy vs energy savings",
) -> None:
    """Markers (savings %, accuracy %) with labels, joined in input order."""
    if not points:
        raise PlotError("no points")
    svg = _root(title)
    coords = [(_plot_x(s / 100.0), _plot_y(a / 100.0)) for s, a, _ in points]
    if len(coords) > 1:
        ET.SubElement(svg, "polyline", {
            "points": " ".join(f"{x:.2f},{y:.2f}" for x, y in coords),
            "fill": "none", "stroke": "#808080", "stroke-dasharray": "4 3",
        })
    for (x, y), (_, _, label) in zip(coords, points):
        ET.SubElement(svg, "circle", {"class": "marker", "cx": f"{x:.2f}",
                                      "cy": f"{y:.2f}", "r": "4", "fill": "#a03020"})
        t = ET.SubElement(svg, "text", {"x": f"{x + 6:.2f}", "y": f"{y - 6:.2f}",
                                        "font-size": "11"})
        t.text = label
    _axes(svg, "energy savings (%)", "accuracy (%)")
    _write(svg, path)


def histogram_svg(
    values: Sequence[float],
    path: str | Path,
    title: str = "High-occupancy histogram",
    xlabel: str = "bin",
) -> None:
    """One rect of class ``bar`` per bin; heights proportional to values."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise PlotError("histogram needs a 1-D nonempty value vector")
    if values.min() < 0:
        raise PlotError("histogram values must be >= 0")
    top = values.max() if values.max() > 0 else 1.0
    svg = _root(title)
    n = values.size
    slot = (WIDTH - 2 * MARGIN) / n
    for b, v in enumerate(values):
        h = (v / top) * (HEIGHT - 2 * MARGIN)
        ET.SubElement(svg, "rect", {
            "class": "bar",
            "data-bin": str(b),
            "data-value": f"{v:.6f}",
            "x": f"{MARGIN + b * slot + 0.1 * slot:.2f}",
            "y": f"{HEIGHT - MARGIN - h:.2f}",
            "width": f"{0.8 * slot:.2f}",
            "height": f"{h:.2f}",
            "fill": "#4070c0",
        })
    _axes(svg, xlabel, "normalized count")
    _write(svg, path)


def bar_chart_svg(
    labels: Sequence[str],
    values: Sequence[float],
    path: str | Path,
    title: str = "",
    ylabel: str = "percent",
) -> None:
    """Labeled single-series bar chart (rects of class ``bar``)."""
    if len(labels) != len(values) or not labels:
        raise PlotError("labels and values must be nonempty and equal length")
    values = np.asarray(values, dtype=np.float64)
    top = max(values.max(), 1e-12)
    svg = _root(title)
    n = len(labels)
    slot = (WIDTH - 2 * MARGIN) / n
    for b, (label, v) in enumerate(zip(labels, values)):
        h = max(v, 0.0) / top * (HEIGHT - 2 * MARGIN)
        ET.SubElement(svg, "rect", {
            "class": "bar",
            "data-label": label,
            "data-value": f"{v:.6f}",
            "x": f"{MARGIN + b * slot + 0.15 * slot:.2f}",
            "y": f"{HEIGHT - MARGIN - h:.2f}",
            "width": f"{0.7 * slot:.2f}",
            "height": f"{h:.2f}",
            "fill": "#c08030",
        })
        t = ET.SubElement(svg, "text", {"x": f"{MARGIN + (b + 0.5) * slot:.2f}",
                                        "y": str(HEIGHT - MARGIN + 16),
                                        "text-anchor": "middle", "font-size": "11"})
        t.text = label
    _axes(svg, "", ylabel)
    _write(svg, path)


# ---------------------------------------------------------------------------
# CSV-driven emission (CLI hook)
# ---------------------------------------------------------------------------

_EXPECTED_HEADERS = {
    "policy-trace": ["step", "timestamp", "action", "camera", "true_occupancy",
                     "observed_occupancy", "reward"],
    "tradeoff-curve": ["w_raw", "w_hat", "accuracy_pct", "savings_pct"],
    "histogram": ["street_id", "axis", "bin", "weight"],
    "bar": ["policy",
            "accuracy_avg", "accuracy_min", "accuracy_max", "accuracy_std",
            "savings_avg", "savings_min", "savings_max", "savings_std"],
}


def emit_plot(csv_path: str | Path, kind: str, out_path: str | Path) -> None:
    """Render one of the package's CSV artifacts as an SVG figure.

    The CSV header must match the schema the kind expects; anything else is a
    schema mismatch error.
    """
    if kind not in PLOT_KINDS:
        raise PlotError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    with Path(csv_path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = list(reader)
    expected = _EXPECTED_HEADERS[kind]
    if header is None or [h.strip() for h in header] != expected:
        raise PlotError(
            f"{csv_path}: header does not match {kind} schema {','.join(expected)}"
        )

    if kind == "policy-trace":
        import datetime as dt

        trace = [
            TraceRow(
                step=int(r[0]),
                timestamp=dt.datetime.fromisoformat(r[1]),
                action=Action[r[2]],
                camera=CameraState[r[3]],
                true_occupancy=float(r[4]),
                observed_occupancy=float(r[5]),
                reward=float(r[6]),
            )
            for r in rows
        ]
        policy_trace_svg(trace, out_path)
    elif kind == "tradeoff-curve":
        points = [(float(r[3]), float(r[2]), f"w={r[0]}") for r in rows]
        tradeoff_curve_svg(points, out_path)
    elif kind == "histogram":
        if not rows:
            raise PlotError(f"{csv_path}: no histogram rows")
        street = rows[0][0]
        values = [float(r[3]) for r in rows if r[0] == street]
        histogram_svg(values, out_path, title=f"{street} ({rows[0][1]})")
    else:
        if not rows:
            raise PlotError(f"{csv_path}: no aggregate rows to chart")
        means = [(r[0], float(r[1]), float(r[5])) for r in rows]
        labels = [f"{name} acc" for name, _, _ in means] + [f"{name} sav" for name, _, _ in means]
        values = [a for _, a, _ in means] + [s for _, _, s in means]
        bar_chart_svg(labels, values, out_path, title="Accuracy and savings by policy")
