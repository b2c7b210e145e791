"""Planar hull and octant transformations of limit-shape samples.

The octant is the wedge ``{(x, y): y >= x >= 0}``. Folding maps a shape
into it using the eight lattice symmetries; unfolding goes back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

EPS = 1e-12

# the dihedral group of the square, as (swap, sx, sy): (x, y) -> swap? then signs
SYMMETRIES = tuple(
    (swap, sx, sy) for swap in (False, True) for sx in (1, -1) for sy in (1, -1)
)


@dataclass(frozen=True)
class OctantBoundary:
    """Arc in the octant, from the y-axis to the diagonal.

    Folded hulls give convex arcs with non-increasing y; predicted arcs
    only promise ``y >= x >= 0`` and strictly increasing x.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        tol = 1e-9 * max(1.0, float(np.abs(v).max(initial=0.0)))
        if len(v):
            x, y = v[:, 0], v[:, 1]
            if np.any(x < -tol) or np.any(y < x - tol):
                raise UsageError("octant vertices must satisfy y >= x >= 0")
            if np.any(np.diff(x) <= 0):
                raise UsageError("octant arc must have strictly increasing x")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    @property
    def x(self):
        return self.vertices[:, 0]

    @property
    def y(self):
        return self.vertices[:, 1]

    def scaled(self, c: float) -> OctantBoundary:
        return OctantBoundary(self.vertices * c)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _chain(pts, eps):
    out = []
    for p in pts:
        while len(out) >= 2 and _cross(out[-2], out[-1], p) <= eps:
            out.pop()
        out.append(p)
    return out


def row_extremes(pts: np.ndarray) -> np.ndarray:
    """Leftmost and rightmost point of every row of equal y.

    Nothing else in a row can be a hull vertex, so this is an exact
    prefilter; it collapses lattice clouds to O(radius) points.
    """
    if len(pts) < 64:
        return pts
    order = np.lexsort((pts[:, 0], pts[:, 1]))
    p = pts[order]
    y = p[:, 1]
    first = np.r_[True, y[1:] != y[:-1]]
    last = np.r_[y[1:] != y[:-1], True]
    return p[first | last]


def _prepare(points):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise UsageError("convex hull of an empty point set")
    pts = row_extremes(pts)
    scale = max(1.0, float(np.abs(pts).max()))
    uniq = sorted(set(map(tuple, pts.tolist())))
    return uniq, EPS * scale * scale


def convex_hull(points) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, collinear vertices dropped.

    Returns an ``(m, 2)`` array starting at the lexicographically smallest
    vertex. A single point (or all-equal input) gives one vertex, a
    collinear set its two extremes.
    """
    uniq, eps = _prepare(points)
    if len(uniq) < 3:
        return np.array(uniq, dtype=np.float64).reshape(-1, 2)
    lower = _chain(uniq, eps)
    upper = _chain(reversed(uniq), eps)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and hull[0] == hull[1]:
        hull = hull[:1]
    return np.array(hull, dtype=np.float64)


def upper_hull(points) -> np.ndarray:
    """Upper chain of the hull, left to right (ties in x keep the top point)."""
    uniq, eps = _prepare(points)
    # among equal x keep the largest y only, so the chain is x-monotone
    best = {}
    for x, y in uniq:
        best[x] = y
    pts = sorted(best.items())
    upper = _chain(reversed(pts), eps)
    return np.array(upper[::-1], dtype=np.float64)


def apply_symmetry(points, sym) -> np.ndarray:
    swap, sx, sy = sym
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if swap:
        p = p[:, ::-1]
    return p * np.array([sx, sy], dtype=np.float64)


def symmetrize(points) -> np.ndarray:
    """Union of the eight lattice-symmetric copies of ``points``."""
    return np.vstack([apply_symmetry(points, s) for s in SYMMETRIES])


def _fold_points(points):
    p = np.abs(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    return np.column_stack((p.min(axis=1), p.max(axis=1)))


def _clip_to_octant(polygon):
    """Vertices of a symmetric CCW polygon inside the octant, plus the two
    points where its boundary crosses ``x = 0`` and ``y = x``."""
    n = len(polygon)
    keep = [tuple(v) for v in polygon if v[1] >= v[0] >= 0]
    for i in range(n):
        a = polygon[i]
        b = polygon[(i + 1) % n]
        # crossing of x = 0 in the upper half plane
        if (a[0] > 0) != (b[0] > 0) and (a[1] + b[1]) > 0:
            t = a[0] / (a[0] - b[0])
            keep.append((0.0, a[1] + t * (b[1] - a[1])))
        da = a[1] - a[0]
        db = b[1] - b[0]
        if (da > 0) != (db > 0) and (a[0] + b[0]) > 0:
            t = da / (da - db)
            c = a[0] + t * (b[0] - a[0])
            keep.append((c, c))
    return keep


def fold_to_octant(points) -> OctantBoundary:
    """Fold a (roughly symmetric) hull into the octant arc.

    Points go through ``(x, y) -> (|x|, |y|)`` and then onto ``y >= x``;
    the folded set is re-hulled together with its mirror images so the arc
    starts on the y-axis and ends on the diagonal.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise UsageError("cannot fold an empty point set")
    folded = np.unique(_fold_points(pts), axis=0)
    if not np.any(folded[:, 1] > 0):
        return OctantBoundary(np.zeros((1, 2)))
    hull = convex_hull(symmetrize(folded))
    cand = np.array(_clip_to_octant(hull), dtype=np.float64)
    arc = upper_hull(cand)
    arc = arc[arc[:, 1] >= arc[:, 0] - 1e-12]
    # snap the diagonal end exactly onto y = x
    last = arc[-1]
    if abs(last[1] - last[0]) <= 1e-12 * max(1.0, abs(last[0])):
        arc[-1] = (last[0], last[0])
    return OctantBoundary(arc)


def mean_transform(boundary: OctantBoundary, mu_e: float) -> OctantBoundary:
    """Scale the arc by the passage-time mean, ``(x, y) -> (mu x, mu y)``."""
    if not mu_e > 0:
        raise UsageError(f"mean_transform needs mu_e > 0, got {mu_e}")
    return boundary.scaled(float(mu_e))


def reflect_arc(boundary) -> np.ndarray:
    """Full polygon (CCW, from the positive x-axis) by reflecting the arc.

    Unlike :func:`unfold_to_full` this keeps every arc point and enforces
    no convexity.
    """
    v = boundary.vertices if isinstance(boundary, OctantBoundary) else np.asarray(boundary)
    v = np.asarray(v, dtype=np.float64).reshape(-1, 2)
    if len(v) == 0:
        raise UsageError("cannot reflect an empty boundary")
    # quarter from (y0, 0) to (0, y0): swapped arc, then the arc backwards
    quarter = np.vstack((v[:, ::-1], v[::-1][1:] if np.allclose(v[-1, 0], v[-1, 1]) else v[::-1]))
    parts = [
        quarter,
        quarter[::-1][1:] * (-1.0, 1.0),
        quarter[1:] * (-1.0, -1.0),
        quarter[::-1][1:-1] * (1.0, -1.0),
    ]
    return np.vstack(parts)


def unfold_to_full(boundary: OctantBoundary) -> np.ndarray:
    """Rebuild the full 8-fold symmetric polygon (CCW) from an octant arc."""
    v = boundary.vertices if isinstance(boundary, OctantBoundary) else np.asarray(boundary)
    if len(v) == 0:
        raise UsageError("cannot unfold an empty boundary")
    return convex_hull(symmetrize(v))


def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, dtype=np.float64) for v in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


def polyline_distance(p, line) -> float:
    line = np.asarray(line, dtype=np.float64).reshape(-1, 2)
    if len(line) == 1:
        return float(np.linalg.norm(np.asarray(p) - line[0]))
    return min(point_segment_distance(p, line[i], line[i + 1]) for i in range(len(line) - 1))


def densify(line, per_segment=32) -> np.ndarray:
    line = np.asarray(line, dtype=np.float64).reshape(-1, 2)
    if len(line) < 2:
        return line
    t = np.linspace(0.0, 1.0, per_segment, endpoint=False)[:, None]
    parts = [a + t * (b - a) for a, b in zip(line[:-1], line[1:])]
    return np.vstack(parts + [line[-1:]])


def hausdorff_polyline(a, b, per_segment=32) -> float:
    """Symmetric Hausdorff distance between two polylines, evaluated on
    ``per_segment`` samples of every segment against the exact segments."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    return max(
        max(polyline_distance(p, b) for p in densify(a, per_segment)),
        max(polyline_distance(p, a) for p in densify(b, per_segment)),
    )


def polygon_area(polygon) -> float:
    p = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def contains(polygon, points, tol=1e-12) -> np.ndarray:
    """Inside-or-on test against a CCW convex polygon (signed-area based)."""
    poly = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(poly) < 3:
        return np.array([polyline_distance(p, np.vstack([poly, poly[:1]])) <= tol for p in pts])
    a = poly
    b = np.roll(poly, -1, axis=0)
    cr = (b[None, :, 0] - a[None, :, 0]) * (pts[:, None, 1] - a[None, :, 1]) - (
        b[None, :, 1] - a[None, :, 1]
    ) * (pts[:, None, 0] - a[None, :, 0])
    return np.all(cr >= -tol, axis=1)


def mean_vertical_deviation(arc, reference, samples: int = 101) -> float:
    """Mean of ``|y_arc(x) - y_ref(x)| / y_ref(x)`` over the shared x range.

    Both inputs are x-increasing polylines; they are compared by linear
    interpolation on ``samples`` evenly spaced x values.
    """
    a = np.asarray(getattr(arc, "vertices", arc), dtype=np.float64).reshape(-1, 2)
    r = np.asarray(getattr(reference, "vertices", reference), dtype=np.float64).reshape(-1, 2)
    lo = max(a[0, 0], r[0, 0])
    hi = min(a[-1, 0], r[-1, 0])
    if hi < lo:
        raise UsageError("arcs share no x range")
    xs = np.linspace(lo, hi, samples)
    ya = np.interp(xs, a[:, 0], a[:, 1])
    yr = np.interp(xs, r[:, 0], r[:, 1])
    return float(np.mean(np.abs(ya - yr) / yr))
