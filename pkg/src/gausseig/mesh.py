"""P1 triangulation of convex polygons with Gaussian-weighted quadrature.

Quadrature weights absorb the factor e^{-|x|^2/2}; the normalizing constant
(2*pi)^(-n/2) of the Gaussian measure is dropped throughout, since every
reported quantity is a ratio of two weighted integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from .errors import MeshFailure, ResolutionTooCoarse
from .geometry import ConvexPolygon, contains_many

# triangle-local quadrature points are the mid-edge points, in this local
# edge order: edge m joins local vertices m and (m+1) % 3
_EDGE_LOCAL = ((0, 1), (1, 2), (2, 0))


def gaussian_weight(points) -> np.ndarray:
    """Unnormalized Gaussian density e^{-|x|^2/2} at the given points."""
    pts = np.asarray(points, dtype=float)
    return np.exp(-0.5 * np.sum(pts * pts, axis=-1))


@dataclass(eq=False)
class TriMesh:
    """Conforming P1 triangle mesh of a convex polygon.

    Arrays are read-only after construction; a finished mesh can be shared
    freely. Per-triangle data: areas, constant hat-function gradients
    (grads[t, l] is the gradient of the hat of local vertex l), 3-point
    mid-edge quadrature with weights that include the Gaussian factor.
    """

    polygon: ConvexPolygon
    nodes: np.ndarray          # (N, 2)
    triangles: np.ndarray      # (T, 3) CCW node indices
    boundary_mask: np.ndarray  # (N,) bool
    h: float
    areas: np.ndarray = field(init=False)        # (T,)
    grads: np.ndarray = field(init=False)        # (T, 3, 2)
    quad_points: np.ndarray = field(init=False)  # (T, 3, 2)
    quad_weights: np.ndarray = field(init=False) # (T, 3)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_mask = np.ascontiguousarray(self.boundary_mask, dtype=bool)

        p = self.nodes[self.triangles]                  # (T, 3, 2)
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        two_area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(two_area <= 0.0):
            raise MeshFailure("triangle with non-positive area")
        self.areas = 0.5 * two_area

        # hat gradient of local vertex l: rotate opposite edge by 90 degrees
        grads = np.empty((len(self.triangles), 3, 2))
        for l in range(3):
            a = p[:, (l + 1) % 3]
            b = p[:, (l + 2) % 3]
            grads[:, l, 0] = (a[:, 1] - b[:, 1]) / two_area
            grads[:, l, 1] = (b[:, 0] - a[:, 0]) / two_area
        self.grads = grads

        qp = np.empty((len(self.triangles), 3, 2))
        for m, (i, j) in enumerate(_EDGE_LOCAL):
            qp[:, m] = 0.5 * (p[:, i] + p[:, j])
        self.quad_points = qp
        self.quad_weights = (self.areas[:, None] / 3.0) * gaussian_weight(qp)
        if np.any(self.quad_weights <= 0.0):
            raise MeshFailure("non-positive quadrature weight")

        for a in (self.nodes, self.triangles, self.boundary_mask, self.areas,
                  self.grads, self.quad_points, self.quad_weights):
            a.setflags(write=False)
        self._finder = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_interior(self) -> int:
        return int((~self.boundary_mask).sum())

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    @property
    def max_edge_length(self) -> float:
        p = self.nodes[self.triangles]
        lengths = [np.hypot(*(p[:, i] - p[:, j]).T) for i, j in _EDGE_LOCAL]
        return float(np.max(lengths))

    def _tri_finder(self):
        if self._finder is None:
            from matplotlib.tri import Triangulation

            tri = Triangulation(self.nodes[:, 0], self.nodes[:, 1], self.triangles)
            self._finder = tri.get_trifinder()
        return self._finder

    def locate(self, points):
        """Containing triangle index per point (-1 outside) and barycentric weights."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.asarray(self._tri_finder()(pts[:, 0], pts[:, 1]), dtype=np.int64)
        bary = np.zeros((len(pts), 3))
        hit = idx >= 0
        if hit.any():
            t = idx[hit]
            a, b, c = (self.nodes[self.triangles[t, k]] for k in range(3))
            d = pts[hit]
            two_area = 2.0 * self.areas[t]
            l0 = ((b[:, 0] - d[:, 0]) * (c[:, 1] - d[:, 1])
                  - (c[:, 0] - d[:, 0]) * (b[:, 1] - d[:, 1])) / two_area
            l1 = ((c[:, 0] - d[:, 0]) * (a[:, 1] - d[:, 1])
                  - (a[:, 0] - d[:, 0]) * (c[:, 1] - d[:, 1])) / two_area
            bary[hit, 0] = l0
            bary[hit, 1] = l1
            bary[hit, 2] = 1.0 - l0 - l1
        return idx, bary

    def interpolate(self, values, points, fill: float = 0.0) -> np.ndarray:
        """P1-interpolate nodal values at arbitrary points; fill outside."""
        values = np.asarray(values, dtype=float)
        idx, bary = self.locate(points)
        out = np.full(len(bary), fill)
        hit = idx >= 0
        if hit.any():
            out[hit] = np.einsum("ij,ij->i", values[self.triangles[idx[hit]]], bary[hit])
        return out


def triangulate(P: ConvexPolygon, h: float) -> TriMesh:
    """Triangulate a convex polygon at target edge length h.

    Boundary nodes are placed along each polygon edge at spacing <= h,
    interior nodes on a hexagonal lattice of pitch h clipped with margin
    h/2, and the node cloud is Delaunay-triangulated (exact cover for a
    convex domain). Raises ResolutionTooCoarse when no interior node fits.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    verts = P.vertices
    boundary_pts = []
    for a, b in zip(verts, np.roll(verts, -1, axis=0)):
        n_seg = max(1, int(np.ceil(np.hypot(*(b - a)) / h)))
        for i in range(n_seg):
            boundary_pts.append(a + (i / n_seg) * (b - a))
    boundary_pts = np.array(boundary_pts)

    interior_pts = _hex_lattice(P, h)
    if len(interior_pts) < 1:
        raise ResolutionTooCoarse(
            f"h={h} leaves no interior node (polygon area {P.area:.3g})")

    nodes = np.vstack([boundary_pts, interior_pts])
    boundary_mask = np.zeros(len(nodes), dtype=bool)
    boundary_mask[: len(boundary_pts)] = True

    try:
        dela = Delaunay(nodes)
    except Exception as exc:  # QHull failures on degenerate input
        raise MeshFailure(f"Delaunay triangulation failed: {exc}") from exc
    triangles = dela.simplices.copy()

    # enforce CCW orientation; drop zero-area slivers that QHull emits for
    # exactly collinear boundary runs (they carry no area, so coverage and
    # conformity are unaffected and the area-sum check below still guards)
    p = nodes[triangles]
    two_area = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    flip = two_area < 0.0
    triangles[flip] = triangles[flip][:, ::-1]
    scale = max(1.0, float(np.abs(nodes).max()))
    triangles = triangles[np.abs(two_area) > 1e-12 * scale * scale]

    mesh = TriMesh(P, nodes, triangles, boundary_mask, h)
    _check_mesh(mesh)
    return mesh


def _hex_lattice(P: ConvexPolygon, h: float) -> np.ndarray:
    """Hexagonal lattice of pitch h inside P with margin h/2, centered on the centroid."""
    cx, cy = P.centroid
    xmin, ymin = P.vertices.min(axis=0)
    xmax, ymax = P.vertices.max(axis=0)
    dy = h * np.sqrt(3.0) / 2.0
    j0 = int(np.floor((ymin - cy) / dy)) - 1
    j1 = int(np.ceil((ymax - cy) / dy)) + 1
    pts = []
    for j in range(j0, j1 + 1):
        y = cy + j * dy
        off = 0.5 * h if (j % 2) else 0.0
        i0 = int(np.floor((xmin - cx - off) / h)) - 1
        i1 = int(np.ceil((xmax - cx - off) / h)) + 1
        xs = cx + off + h * np.arange(i0, i1 + 1)
        pts.append(np.stack([xs, np.full_like(xs, y)], axis=1))
    pts = np.vstack(pts)
    return pts[contains_many(P, pts, margin=0.5 * h)]


def _check_mesh(mesh: TriMesh) -> None:
    area_sum = float(mesh.areas.sum())
    if abs(area_sum - mesh.polygon.area) > 1e-10 * mesh.polygon.area:
        raise MeshFailure(
            f"triangle areas sum to {area_sum}, polygon area {mesh.polygon.area}")
    bdist = mesh.polygon.boundary_distance(mesh.nodes)
    if np.any(np.abs(bdist[mesh.boundary_mask]) > 1e-10 * mesh.h):
        raise MeshFailure("boundary node off the polygon boundary")
    if np.any(bdist[mesh.interior_mask] <= 0.0):
        raise MeshFailure("interior node without positive boundary margin")
    if mesh.max_edge_length > 2.0 * mesh.h:
        raise MeshFailure(
            f"max edge length {mesh.max_edge_length:.3g} exceeds 2h = {2 * mesh.h:.3g}")


def quadrature_integrate(mesh: TriMesh, f) -> float:
    """Integrate f against the (unnormalized) Gaussian measure over the mesh.

    f is called with an (n, 2) array of quadrature points and must return
    n values; non-vectorized callables are applied pointwise.
    """
    pts = mesh.quad_points.reshape(-1, 2)
    try:
        vals = np.asarray(f(pts), dtype=float)
        if vals.shape != (len(pts),):
            raise TypeError
    except TypeError:
        vals = np.array([float(f(q)) for q in pts])
    return float(np.dot(mesh.quad_weights.ravel(), vals))


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four by connecting edge midpoints.

    The refined space contains the original P1 space (nested refinement);
    midpoints of boundary edges are marked boundary.
    """
    tris = mesh.triangles
    edges = {}
    for i, j in _EDGE_LOCAL:
        for a, b in zip(tris[:, i], tris[:, j]):
            key = (min(a, b), max(a, b))
            edges.setdefault(key, len(edges))
    n_old = mesh.n_nodes
    mid_nodes = np.empty((len(edges), 2))
    mid_boundary = np.zeros(len(edges), dtype=bool)
    scale = max(1.0, float(np.abs(mesh.nodes).max()))
    for (a, b), k in edges.items():
        mid = 0.5 * (mesh.nodes[a] + mesh.nodes[b])
        mid_nodes[k] = mid
        if mesh.boundary_mask[a] and mesh.boundary_mask[b]:
            # both endpoints on the boundary does not imply the edge is:
            # corner-cutting chords stay interior, so test the midpoint
            mid_boundary[k] = abs(
                mesh.polygon.boundary_distance(mid[None, :])[0]) <= 1e-10 * scale

    nodes = np.vstack([mesh.nodes, mid_nodes])
    boundary_mask = np.concatenate([mesh.boundary_mask, mid_boundary])

    def mid_id(a, b):
        return n_old + edges[(min(a, b), max(a, b))]

    new_tris = []
    for a, b, c in tris:
        ab, bc, ca = mid_id(a, b), mid_id(b, c), mid_id(c, a)
        new_tris += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return TriMesh(mesh.polygon, nodes, np.array(new_tris), boundary_mask, 0.5 * mesh.h)


def write_mesh_text(mesh: TriMesh, path) -> None:
    """Dump the mesh as plain text: node lines "x y flag", then triangle lines "i j k"."""
    with open(path, "w") as fh:
        for (x, y), b in zip(mesh.nodes, mesh.boundary_mask):
            fh.write(f"{float(x)!r} {float(y)!r} {int(b)}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
