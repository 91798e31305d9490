"""Minimal SVG line plots with the raw points written alongside as CSV.

The SVG is written by hand: one ``<polyline>`` per series and nothing
time-dependent, so repeated runs give identical files. The CSV is the
authoritative record; the picture is derived from it.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = 56
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _range(vals: np.ndarray) -> tuple[float, float]:
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if hi == lo:
        pad = 1.0 if lo == 0 else abs(lo) * 0.1
        return lo - pad, hi + pad
    return lo, hi


def series_csv(series: dict) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["series", "x", "y"])
    for label, (xs, ys) in series.items():
        for x, y in zip(xs, ys):
            wr.writerow([label, repr(float(x)), repr(float(y))])
    return buf.getvalue()


def render_svg(series: dict, xlabel: str = "x", ylabel: str = "y", title: str = "") -> str:
    pts = [(np.asarray(x, float), np.asarray(y, float)) for x, y in series.values()]
    allx = np.concatenate([p[0] for p in pts])
    ally = np.concatenate([p[1] for p in pts])
    finite = np.isfinite(ally)
    x0, x1 = _range(allx)
    y0, y1 = _range(ally[finite] if finite.any() else np.zeros(1))
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="11">{x0:.4g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 16}" text-anchor="end" font-size="11">{x1:.4g}</text>',
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" text-anchor="end" font-size="11">{y0:.4g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 10}" text-anchor="end" font-size="11">{y1:.4g}</text>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>')
    for i, (label, (xs, ys)) in enumerate(zip(series, pts)):
        keep = np.isfinite(ys)
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs[keep], ys[keep]))
        color = COLORS[i % len(COLORS)]
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}">'
            f"<title>{escape(str(label))}</title></polyline>"
        )
        ly = MARGIN + 14 * i
        out.append(
            f'<text x="{WIDTH - MARGIN - 4}" y="{ly}" text-anchor="end" font-size="11" fill="{color}">'
            f"{escape(str(label))}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(series: dict, path, xlabel: str = "x", ylabel: str = "y", title: str = "") -> tuple[Path, Path]:
    """Write ``path`` (SVG) and the sibling CSV of raw points; return both paths."""
    if not series or any(len(x) == 0 for x, _ in series.values()):
        raise ValueError("emit_plot needs at least one non-empty series")
    for label, (x, y) in series.items():
        if len(x) != len(y):
            raise ValueError(f"series {label!r}: x and y lengths differ")
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_svg(series, xlabel, ylabel, title))
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(series_csv(series))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write plot: {exc.strerror}", str(exc.filename or path)) from exc
    return path, csv_path


def log10_safe(x: float) -> float:
    return math.log10(x) if x > 0 else -math.inf


__all__ = ["emit_plot", "log10_safe", "render_svg", "series_csv"]
