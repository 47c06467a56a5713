"""Planar triangulations of simple polygons.

``mesh_polygon`` splits every polygon side into equal segments no longer
than the working spacing, fills the interior with a triangular lattice
kept at least 0.55 spacings away from the boundary, and takes the
Delaunay triangulation.  Each boundary segment then has an empty
diametral circle, so it appears as a Delaunay edge; this is verified,
not assumed.  ``refine_uniform`` splits every triangle into four, which
gives nested meshes for convergence studies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely
from scipy.spatial import Delaunay
from shapely.geometry import Polygon


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (M, 3), counterclockwise
    boundary_edges: np.ndarray  # (K, 2), interior on the left
    boundary_normals: np.ndarray  # (K, 2), outward unit
    boundary_flag: np.ndarray  # (N,) bool

    @property
    def h(self) -> float:
        """Longest edge."""
        return float(np.max(edge_lengths(self)))

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.nonzero(self.boundary_flag)[0]

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.nonzero(~self.boundary_flag)[0]

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def validate(self) -> None:
        """Raise MeshError unless orientation, boundary and loop invariants hold."""
        if np.any(self.areas() <= 0):
            raise MeshError("triangle with non-positive area")
        edges = _all_edges(self.triangles)
        key = np.sort(edges, axis=1)
        uniq, counts = np.unique(key, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        outer = {tuple(e) for e in uniq[counts == 1]}
        given = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        if outer != given:
            raise MeshError("boundary edge list does not match the single-triangle edges")
        # every boundary vertex must start and end exactly one boundary edge
        starts = np.bincount(self.boundary_edges[:, 0], minlength=len(self.vertices))
        ends = np.bincount(self.boundary_edges[:, 1], minlength=len(self.vertices))
        if np.any(starts != ends) or np.any(starts > 1):
            raise MeshError("boundary edges do not form closed simple loops")
        flag = starts > 0
        if not np.array_equal(flag, self.boundary_flag):
            raise MeshError("boundary_flag disagrees with the boundary edges")


def _all_edges(tri):
    return np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])


def edge_lengths(mesh: Mesh) -> np.ndarray:
    e = np.unique(np.sort(_all_edges(mesh.triangles), axis=1), axis=0)
    d = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
    return np.hypot(d[:, 0], d[:, 1])


def _finish(vertices, triangles) -> Mesh:
    """Orient triangles, extract oriented boundary edges and normals."""
    p = vertices[triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    triangles = triangles.copy()
    triangles[neg] = triangles[neg][:, [0, 2, 1]]
    directed = _all_edges(triangles)
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    # directed edges of a CCW triangle have the triangle on their left
    bnd = directed[counts[inv.ravel()] == 1]
    d = vertices[bnd[:, 1]] - vertices[bnd[:, 0]]
    length = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    flag = np.zeros(len(vertices), dtype=bool)
    flag[bnd.ravel()] = True
    mesh = Mesh(vertices, triangles, bnd, normals, flag)
    mesh.validate()
    return mesh


def clean_polygon(points) -> np.ndarray:
    """Validate a vertex loop and return it counterclockwise without a closing duplicate."""
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
        raise MeshError("polygon needs at least three (x, y) vertices")
    if np.allclose(p[0], p[-1]):
        p = p[:-1]
    seg = np.roll(p, -1, axis=0) - p
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(seglen <= 1e-14 * seglen.max()):
        raise MeshError("repeated consecutive vertices")
    # a vertex whose sides are collinear and fold back is degenerate
    prev = np.roll(seg, 1, axis=0)
    cross = prev[:, 0] * seg[:, 1] - prev[:, 1] * seg[:, 0]
    dot = np.sum(prev * seg, axis=1)
    if np.any((np.abs(cross) <= 1e-12 * seglen * np.roll(seglen, 1)) & (dot < 0)):
        raise MeshError("polygon folds back on itself")
    poly = Polygon(p)
    if not poly.is_valid or poly.area <= 0:
        raise MeshError(f"polygon is not simple: {shapely.is_valid_reason(poly)}")
    if not poly.exterior.is_ccw:
        p = p[::-1].copy()
    return p


def _boundary_points(p, spacing):
    pts = []
    for a, b in zip(p, np.roll(p, -1, axis=0)):
        n = max(1, math.ceil(np.hypot(*(b - a)) / spacing - 1e-9))
        t = np.arange(n)[:, None] / n
        pts.append(a + t * (b - a))
    return np.vstack(pts)


def _lattice(poly: Polygon, spacing):
    x0, y0, x1, y1 = poly.bounds
    dy = spacing * math.sqrt(3) / 2
    rows = np.arange(y0, y1 + dy, dy)
    xs, ys = [], []
    for i, y in enumerate(rows):
        x = np.arange(x0 + (0.5 * spacing if i % 2 else 0.0), x1 + spacing, spacing)
        xs.append(x)
        ys.append(np.full_like(x, y))
    x, y = np.concatenate(xs), np.concatenate(ys)
    inside = shapely.contains_xy(poly, x, y)
    x, y = x[inside], y[inside]
    far = shapely.distance(poly.exterior, shapely.points(x, y)) >= 0.55 * spacing
    return np.column_stack([x[far], y[far]])


def _delaunay_mesh(p, spacing) -> Mesh:
    poly = Polygon(p)
    bpts = _boundary_points(p, spacing)
    pts = np.vstack([bpts, _lattice(poly, spacing)])
    tri = Delaunay(pts).simplices
    cen = pts[tri].mean(axis=1)
    keep = shapely.contains_xy(poly, cen[:, 0], cen[:, 1])
    q = pts[tri]
    area = 0.5 * np.abs((q[:, 1, 0] - q[:, 0, 0]) * (q[:, 2, 1] - q[:, 0, 1]) - (q[:, 1, 1] - q[:, 0, 1]) * (q[:, 2, 0] - q[:, 0, 0]))
    keep &= area > 1e-10 * spacing**2
    tri = tri[keep]
    used = np.unique(tri)
    remap = -np.ones(len(pts), dtype=int)
    remap[used] = np.arange(len(used))
    nb = len(bpts)
    if not np.all(np.isin(np.arange(nb), used)):
        raise MeshError("a boundary point was dropped; use a smaller h")
    mesh = _finish(pts[used], remap[tri])
    # the boundary must be exactly the subdivided polygon
    seg = {tuple(sorted((remap[i], remap[(i + 1) % nb]))) for i in range(nb)}
    got = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    if seg != got:
        raise MeshError("Delaunay triangulation lost a boundary segment (sharp corner?); use a smaller h")
    return mesh


def mesh_polygon(polygon, target_h: float) -> Mesh:
    """Conforming triangulation of a simple polygon with every edge <= target_h."""
    if not target_h > 0:
        raise MeshError("target_h must be positive")
    p = clean_polygon(polygon)
    spacing = target_h
    for _ in range(20):
        mesh = _delaunay_mesh(p, spacing)
        hmax = mesh.h
        if hmax <= target_h:
            return mesh
        spacing *= 0.97 * target_h / hmax
    raise MeshError("could not reach the requested edge length")


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split each triangle into four through its edge midpoints."""
    tri = mesh.triangles
    edges = np.sort(_all_edges(tri), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    nv = len(mesh.vertices)
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    verts = np.vstack([mesh.vertices, mids])
    m = len(tri)
    m01, m12, m20 = (nv + inv[i * m:(i + 1) * m] for i in range(3))
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    new = np.vstack([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ])
    return _finish(verts, new)


def polygon_perimeter(mesh: Mesh) -> float:
    d = mesh.vertices[mesh.boundary_edges[:, 1]] - mesh.vertices[mesh.boundary_edges[:, 0]]
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def write_mesh(mesh: Mesh, path) -> None:
    """Line-based text format: header, vertices, triangles (0-based), boundary edges."""
    with open(path, "w") as fh:
        fh.write(f"vertices {len(mesh.vertices)} triangles {len(mesh.triangles)} boundary {len(mesh.boundary_edges)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for i, j in mesh.boundary_edges:
            fh.write(f"{i} {j}\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[0::2] != ["vertices", "triangles", "boundary"]:
            raise MeshError(f"bad mesh header: {' '.join(header)!r}")
        nv, nt, nb = (int(x) for x in header[1::2])
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != nv + nt + nb:
        raise MeshError("mesh file length does not match its header")
    verts = np.array([[float(x) for x in r] for r in rows[:nv]])
    tris = np.array([[int(x) for x in r] for r in rows[nv:nv + nt]], dtype=int)
    bnd = np.array([[int(x) for x in r] for r in rows[nv + nt:]], dtype=int).reshape(-1, 2)
    mesh = _finish(verts, tris)
    if {tuple(sorted(e)) for e in bnd.tolist()} != {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}:
        raise MeshError("boundary section does not match the triangles")
    return mesh


def read_polygon(path) -> np.ndarray:
    """``x y`` per line; blank lines and ``#`` comments are skipped."""
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                x, y = line.split()[:2]
                pts.append((float(x), float(y)))
    return clean_polygon(pts)


def write_polygon(points, path) -> None:
    with open(path, "w") as fh:
        for x, y in np.asarray(points, dtype=float):
            fh.write(f"{float(x)!r} {float(y)!r}\n")


def regular_polygon(n: int, radius: float = 1.0) -> np.ndarray:
    t = 2 * math.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(t), np.sin(t)])


UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
L_SHAPE = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]])
