"""Polygon CSV and SVG output."""
from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def write_points_csv(points, path, header=("x", "y")) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, y in pts.tolist():
            w.writerow([repr(x), repr(y)])


def read_points_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(a), float(b)] for a, b, *_ in rows[1:]]).reshape(-1, 2)


def _fmt(v: float) -> str:
    return f"{v:.6f}".rstrip("0").rstrip(".")


def svg_document(layers, size: int = 480, margin: float = 0.05, title: str | None = None) -> str:
    """SVG text for ``layers``, a list of ``(label, points, kind)``.

    ``kind`` is ``"polygon"``, ``"line"`` or ``"points"``. The view box is
    fitted to all layers and y is flipped so up is up.
    """
    allpts = np.vstack([np.asarray(p, dtype=np.float64).reshape(-1, 2) for _, p, _ in layers])
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    pad = margin * span
    x0, y0 = lo[0] - pad, -(hi[1] + pad)
    w = h = span + 2 * pad
    stroke = _fmt(span / 300)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="{_fmt(x0)} {_fmt(y0)} {_fmt(w)} {_fmt(h)}">'
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    for i, (label, pts, kind) in enumerate(layers):
        color = PALETTE[i % len(PALETTE)]
        p = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        coords = " ".join(f"{_fmt(x)},{_fmt(-y)}" for x, y in p.tolist())
        if kind == "points":
            r = _fmt(span / 400)
            dots = "".join(f'<circle cx="{_fmt(x)}" cy="{_fmt(-y)}" r="{r}"/>' for x, y in p.tolist())
            out.append(f'<g id="{escape(label)}" fill="{color}">{dots}</g>')
        elif kind == "line":
            out.append(f'<polyline id="{escape(label)}" points="{coords}" fill="none" '
                       f'stroke="{color}" stroke-width="{stroke}"/>')
        else:
            out.append(f'<polygon id="{escape(label)}" points="{coords}" fill="none" '
                       f'stroke="{color}" stroke-width="{stroke}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(layers, path, **kw) -> None:
    Path(path).write_text(svg_document(layers, **kw))
