"""Convex polygon domains: validation, Minkowski combination, containment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .errors import Degenerate, NotConvex, TooFewVertices

# relative cross-product threshold below which consecutive edges count as collinear
COLLINEARITY_RTOL = 1e-12
# absolute area floor (scaled by squared coordinate magnitude) for degeneracy
AREA_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Strictly convex planar polygon, vertices in CCW order.

    Instances are immutable; construct through :func:`validate` so the
    vertex list is canonical (CCW, collinear runs merged, rolled to start
    at the lexicographically smallest vertex).
    """

    vertices: np.ndarray
    label: str | None = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[1] != 2:
            raise Degenerate("vertex array must have shape (n, 2)")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        return (v + w).T @ cross / (6.0 * self.area)

    @property
    def diameter(self) -> float:
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d * d).sum(-1).max()))

    def edge_distances(self, points) -> np.ndarray:
        """Signed distance of each point to each edge line (positive inside).

        Returns an array of shape (n_points, n_edges).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        e = b - a
        lengths = np.hypot(e[:, 0], e[:, 1])
        # cross((b-a), (x-a)) / |b-a|
        dx = pts[:, None, 0] - a[None, :, 0]
        dy = pts[:, None, 1] - a[None, :, 1]
        return (e[None, :, 0] * dy - e[None, :, 1] * dx) / lengths[None, :]

    def boundary_distance(self, points) -> np.ndarray:
        """Distance to the boundary for interior points (min over edge lines)."""
        return self.edge_distances(points).min(axis=1)

    def __repr__(self):
        tag = f" {self.label!r}" if self.label else ""
        return f"ConvexPolygon({self.n_vertices} vertices{tag}, area={self.area:.6g})"


def validate(raw_points, label=None, collinearity_rtol=COLLINEARITY_RTOL) -> ConvexPolygon:
    """Canonicalize a vertex list into a strictly convex CCW polygon.

    Clockwise input is reversed; collinear runs are merged; the result is
    rolled to start at the lexicographically smallest vertex. Idempotent on
    already-valid polygons.
    """
    pts = np.asarray(raw_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise Degenerate("points must be a list of [x, y] pairs")
    if not np.all(np.isfinite(pts)):
        raise Degenerate("non-finite coordinates")
    if len(pts) < 3:
        raise TooFewVertices(f"need at least 3 points, got {len(pts)}")

    scale = max(1.0, float(np.abs(pts).max()))
    signed_area = 0.5 * float(
        np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
    )
    if abs(signed_area) < AREA_ATOL * scale * scale:
        raise Degenerate(f"polygon area {signed_area:.3g} below threshold")
    if signed_area < 0.0:
        pts = pts[::-1]

    # drop duplicate consecutive points, then merge collinear runs
    keep = [pts[0]]
    for q in pts[1:]:
        if np.hypot(*(q - keep[-1])) > 1e-14 * scale:
            keep.append(q)
    if np.hypot(*(keep[0] - keep[-1])) <= 1e-14 * scale and len(keep) > 1:
        keep.pop()
    pts = np.array(keep)
    if len(pts) < 3:
        raise Degenerate("fewer than 3 distinct points")

    while True:
        prev = np.roll(pts, 1, axis=0)
        nxt = np.roll(pts, -1, axis=0)
        e_in = pts - prev
        e_out = nxt - pts
        cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
        tol = collinearity_rtol * np.hypot(*e_in.T) * np.hypot(*e_out.T)
        if np.any(cross < -tol):
            i = int(np.argmin(cross))
            raise NotConvex(f"reflex vertex at index {i}: {pts[i]}")
        flat = np.abs(cross) <= tol
        if not flat.any():
            break
        pts = pts[~flat]
        if len(pts) < 3:
            raise Degenerate("polygon collapses after merging collinear vertices")

    start = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
    return ConvexPolygon(np.roll(pts, -start, axis=0), label=label)


def minkowski_combination(A: ConvexPolygon, B: ConvexPolygon, t: float) -> ConvexPolygon:
    """Convex combination (1-t)*A + t*B, exact for polygons.

    Computed as the convex hull of all pairwise combinations of vertices,
    which equals the Minkowski combination of the convex bodies.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return ConvexPolygon(A.vertices, label=A.label)
    if t == 1.0:
        return ConvexPolygon(B.vertices, label=B.label)
    sums = ((1.0 - t) * A.vertices[:, None, :] + t * B.vertices[None, :, :]).reshape(-1, 2)
    hull = ConvexHull(sums)
    return validate(sums[hull.vertices])


def contains(P: ConvexPolygon, x, margin: float = 0.0) -> bool:
    """True iff x lies in P with signed distance >= margin to every edge."""
    if margin < 0.0:
        raise ValueError("margin must be >= 0")
    return bool(P.boundary_distance(np.asarray(x, dtype=float)[None, :])[0] >= margin)


def contains_many(P: ConvexPolygon, points, margin: float = 0.0) -> np.ndarray:
    """Vectorized :func:`contains` for an (n, 2) array of points."""
    if margin < 0.0:
        raise ValueError("margin must be >= 0")
    return P.boundary_distance(points) >= margin


def rectangle(width: float, height: float, center=(0.0, 0.0), label=None) -> ConvexPolygon:
    cx, cy = center
    w, h = 0.5 * width, 0.5 * height
    return validate(
        [[cx - w, cy - h], [cx + w, cy - h], [cx + w, cy + h], [cx - w, cy + h]],
        label=label,
    )


def regular_polygon(n: int, circumradius: float = 1.0, center=(0.0, 0.0),
                    phase: float = 0.0, label=None) -> ConvexPolygon:
    if n < 3:
        raise TooFewVertices("regular polygon needs n >= 3")
    ang = phase + 2.0 * np.pi * np.arange(n) / n
    cx, cy = center
    pts = np.stack([cx + circumradius * np.cos(ang), cy + circumradius * np.sin(ang)], axis=1)
    return validate(pts, label=label)
