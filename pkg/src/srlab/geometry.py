"""Convex polygonal domains, triangulations, and cube-patch bookkeeping.

Triangulation is deterministic: a fan split (from the first vertex for
triangles/quadrilaterals, from the centroid for larger polygons) followed
by uniform red refinement until the target mesh size is met. All values
are immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConvexPolygon",
    "Face",
    "TriMesh",
    "CubePatch",
    "CubeCover",
    "triangulate",
    "refine_uniform",
    "unit_square",
    "regular_ngon",
    "write_tmesh2d",
    "read_tmesh2d",
]


@dataclass(frozen=True)
class Face:
    """One flat boundary face: endpoints, outward normal, unit tangent."""

    start: np.ndarray
    end: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    def point(self, s):
        """Point at arclength-fraction s in [0, 1] from start to end."""
        s = np.asarray(s)
        return self.start + np.multiply.outer(s, self.end - self.start)


class ConvexPolygon:
    """Strictly convex polygon given by counterclockwise vertices."""

    def __init__(self, vertices):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise ValueError("vertices must be an (n, 2) array with n >= 3")
        n = len(verts)
        for i in range(n):
            a = verts[i]
            b = verts[(i + 1) % n]
            c = verts[(i + 2) % n]
            e1, e2 = b - a, c - b
            cross = e1[0] * e2[1] - e1[1] * e2[0]
            if cross <= 0:
                raise ValueError(
                    "vertices must be counterclockwise and strictly convex "
                    f"(violated at vertex {(i + 1) % n})"
                )
        self.vertices = verts
        self.vertices.setflags(write=False)
        self.faces = []
        centroid = verts.mean(axis=0)
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            t = (b - a) / np.linalg.norm(b - a)
            nrm = np.array([t[1], -t[0]])  # outward for CCW orientation
            mid = 0.5 * (a + b)
            assert nrm @ (mid - centroid) > 0
            self.faces.append(Face(a.copy(), b.copy(), nrm, t))

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def area(self) -> float:
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def diameter(self) -> float:
        v = self.vertices
        d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))

    def contains(self, points, tol: float = 1e-12):
        """Boolean mask: which points lie in the closed polygon."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.ones(len(pts), dtype=bool)
        for f in self.faces:
            inside &= (pts - f.start) @ f.normal <= tol * max(1.0, self.diameter())
        return inside if np.asarray(points).ndim == 2 else inside[0]


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangle mesh of a convex polygon.

    boundary_edges rows are (node_a, node_b, face_id); every boundary edge
    lies on exactly one polygon face.
    """

    polygon: ConvexPolygon
    nodes: np.ndarray  # (n_nodes, 2)
    triangles: np.ndarray  # (n_tris, 3), CCW
    boundary_edges: np.ndarray  # (n_bedges, 3) int

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.triangles.setflags(write=False)
        self.boundary_edges.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_corners(self) -> np.ndarray:
        """(n_tris, 3, 2) corner coordinates."""
        return self.nodes[self.triangles]

    def areas(self) -> np.ndarray:
        c = self.triangle_corners()
        e1 = c[:, 1] - c[:, 0]
        e2 = c[:, 2] - c[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.triangle_corners().mean(axis=1)

    @property
    def h(self) -> float:
        c = self.triangle_corners()
        e = np.stack(
            [c[:, 1] - c[:, 0], c[:, 2] - c[:, 1], c[:, 0] - c[:, 2]], axis=1
        )
        return float(np.sqrt((e**2).sum(axis=-1).max()))

    def validate(self):
        """Raise AssertionError on a broken mesh (conformity, areas, tags)."""
        areas = self.areas()
        assert np.all(areas > 0), "negative or zero triangle area"
        total = areas.sum()
        assert abs(total - self.polygon.area()) <= 1e-12 * self.polygon.area()
        edge_count: dict[tuple[int, int], int] = {}
        for tri in self.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                edge_count[key] = edge_count.get(key, 0) + 1
        assert max(edge_count.values()) <= 2, "non-conforming edge"
        boundary = {k for k, v in edge_count.items() if v == 1}
        tagged = {(min(a, b), max(a, b)) for a, b, _ in self.boundary_edges}
        assert boundary == tagged, "boundary edge tags do not match mesh boundary"
        scale = max(1.0, self.polygon.diameter())
        for a, b, fid in self.boundary_edges:
            f = self.polygon.faces[fid]
            for p in (self.nodes[a], self.nodes[b]):
                assert abs((p - f.start) @ f.normal) <= 1e-12 * scale, (
                    "boundary node off its parent face"
                )


def triangulate(polygon: ConvexPolygon, target_h: float) -> TriMesh:
    """Fan-triangulate `polygon` and refine uniformly until h <= target_h."""
    if target_h <= 0:
        raise ValueError("target_h must be positive")
    verts = polygon.vertices
    n = len(verts)
    if n <= 4:
        # Fan from the first vertex: a square splits into two triangles.
        nodes = verts.copy()
        tris = np.array([[0, i, i + 1] for i in range(1, n - 1)], dtype=int)
        bedges = [(i, (i + 1) % n, i) for i in range(n)]
    else:
        nodes = np.vstack([verts, polygon.centroid()])
        tris = np.array([[i, (i + 1) % n, n] for i in range(n)], dtype=int)
        bedges = [(i, (i + 1) % n, i) for i in range(n)]
    mesh = TriMesh(polygon, nodes, tris, np.asarray(bedges, dtype=int))
    while mesh.h > target_h:
        mesh = refine_uniform(mesh)
    return mesh


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Red refinement: each triangle splits into 4 congruent children."""
    nodes = list(map(tuple, mesh.nodes))
    nv = len(nodes)
    midpoint_id: dict[tuple[int, int], int] = {}

    def mid(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in midpoint_id:
            midpoint_id[key] = nv + len(midpoint_id)
            nodes.append(tuple(0.5 * (mesh.nodes[a] + mesh.nodes[b])))
        return midpoint_id[key]

    tris = []
    for i, j, k in mesh.triangles:
        mij, mjk, mki = mid(i, j), mid(j, k), mid(k, i)
        tris += [[i, mij, mki], [mij, j, mjk], [mki, mjk, k], [mij, mjk, mki]]
    bedges = []
    for a, b, fid in mesh.boundary_edges:
        m = mid(int(a), int(b))
        bedges += [(int(a), m, int(fid)), (m, int(b), int(fid))]
    return TriMesh(
        mesh.polygon,
        np.asarray(nodes, dtype=float),
        np.asarray(tris, dtype=int),
        np.asarray(bedges, dtype=int),
    )


@dataclass(frozen=True)
class CubePatch:
    """Axis-aligned square patch Q(x0, r) with its dilation chain.

    Following the cube convention Q(x0, r) has center x0 and *diameter* r,
    so the side length is r / sqrt(2).
    """

    center: np.ndarray
    r: float
    alphas: tuple = (1, 2, 4, 8)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.r <= 0:
            raise ValueError("patch diameter must be positive")

    def half_side(self, alpha: float = 1.0) -> float:
        return 0.5 * alpha * self.r / np.sqrt(2.0)

    def contains(self, points, alpha: float = 1.0):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        hs = self.half_side(alpha)
        d = np.abs(pts - self.center)
        return np.all(d <= hs, axis=1)


@dataclass(frozen=True)
class CubeCover:
    """Element lists for Q, 2Q, 4Q intersected with the domain, plus the
    boundary split of Q cap Omega into the cube part and the domain part."""

    patch: CubePatch
    elements: dict  # alpha -> sorted element index array
    boundary_cube: np.ndarray  # mesh-interior edges of the Q selection, (m, 2)
    boundary_domain: np.ndarray  # rows of mesh.boundary_edges inside Q, (m, 3)
    measures: dict = field(default_factory=dict)  # alpha -> |alphaQ cap Omega|

    @property
    def empty(self) -> bool:
        return len(self.elements[1]) == 0


def cube_polygon_cover(mesh: TriMesh, patch: CubePatch) -> CubeCover:
    """Select mesh elements per dilation by centroid membership.

    Element assignment by centroid is a first-order approximation of the
    true intersection; the selections are nested by construction.
    """
    cent = mesh.centroids()
    areas = mesh.areas()
    elements = {}
    measures = {}
    for alpha in (1, 2, 4):
        mask = patch.contains(cent, alpha)
        idx = np.flatnonzero(mask)
        elements[alpha] = idx
        measures[alpha] = float(areas[idx].sum())

    inner = set(elements[1].tolist())
    edge_owner: dict[tuple[int, int], list[int]] = {}
    for ti, tri in enumerate(mesh.triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edge_owner.setdefault((min(a, b), max(a, b)), []).append(ti)
    mesh_boundary = {
        (min(a, b), max(a, b)): row for row, (a, b, _) in enumerate(mesh.boundary_edges)
    }
    cube_part = []
    domain_part = []
    for key, owners in edge_owner.items():
        n_in = sum(1 for t in owners if t in inner)
        if n_in == 0:
            continue
        if key in mesh_boundary:
            domain_part.append(mesh.boundary_edges[mesh_boundary[key]])
        elif n_in == 1 and len(owners) == 2:
            cube_part.append(key)
    return CubeCover(
        patch,
        elements,
        np.asarray(sorted(cube_part), dtype=int).reshape(-1, 2),
        np.asarray(domain_part, dtype=int).reshape(-1, 3),
        measures,
    )


def tangential_gradient(face: Face, dg_ds):
    """Tangential gradient of a scalar field on a flat face.

    `dg_ds` is the arclength derivative of g at sample points; the result
    is the vector field (dg/ds) t.
    """
    return np.multiply.outer(np.asarray(dg_ds), face.tangent)


def face_boundary_integrand(face: Face, v, Jv):
    """Pointwise boundary term div_T([v.n] conj(v_T)) - 2 Re(conj(v_T).grad_T(v.n)).

    On a flat face with constant n and t this reduces to arclength
    derivatives of the scalar traces v.n and v.t:

        d/ds((v.n) conj(v.t)) - 2 Re(conj(v.t) d(v.n)/ds).

    `v` is (m, 2) field values at points on the face, `Jv` is (m, 2, 2)
    with Jv[:, a, b] = d v_a / d x_b. Returns real values of shape (m,).
    """
    v = np.asarray(v)
    Jv = np.asarray(Jv)
    n, t = face.normal, face.tangent
    vn = v @ n
    vt = v @ t
    dv_ds = Jv @ t  # (m, 2): arclength derivative of each component
    dvn_ds = dv_ds @ n
    dvt_ds = dv_ds @ t
    term_div = dvn_ds * np.conj(vt) + vn * np.conj(dvt_ds)
    term_grad = np.conj(vt) * dvn_ds
    return np.real(term_div - 2.0 * term_grad)


def unit_square() -> ConvexPolygon:
    return ConvexPolygon([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


def regular_ngon(n: int, radius: float = 1.0) -> ConvexPolygon:
    """Regular n-gon inscribed in the circle of the given radius."""
    angles = 2 * np.pi * np.arange(n) / n
    return ConvexPolygon(radius * np.column_stack([np.cos(angles), np.sin(angles)]))


def write_tmesh2d(mesh: TriMesh, path):
    """Write the mesh in the `tmesh2d v1` text format."""
    with open(path, "w") as fh:
        fh.write("tmesh2d\n")
        fh.write(f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for a, b, fid in mesh.boundary_edges:
            fh.write(f"{a} {b} {fid}\n")


def read_tmesh2d(path, polygon: ConvexPolygon | None = None) -> TriMesh:
    """Read a `tmesh2d v1` file. If no polygon is given, one is rebuilt
    from the boundary edges (requires the boundary to be convex)."""
    with open(path) as fh:
        header = fh.readline().strip()
        while header.startswith("#"):
            header = fh.readline().strip()
        if header != "tmesh2d":
            raise ValueError(f"not a tmesh2d file: header {header!r}")
        nn, nt, nb = map(int, fh.readline().split())
        nodes = np.array([list(map(float, fh.readline().split())) for _ in range(nn)])
        tris = np.array([list(map(int, fh.readline().split())) for _ in range(nt)])
        bedges = np.array([list(map(int, fh.readline().split())) for _ in range(nb)])
    if polygon is None:
        polygon = _polygon_from_boundary(nodes, bedges)
    return TriMesh(polygon, nodes, tris, bedges)


def _polygon_from_boundary(nodes, bedges) -> ConvexPolygon:
    n_faces = int(bedges[:, 2].max()) + 1
    corners = []
    for fid in range(n_faces):
        rows = bedges[bedges[:, 2] == fid]
        pts = nodes[np.unique(rows[:, :2])]
        face_rows = bedges[bedges[:, 2] == (fid + 1) % n_faces]
        shared = set(np.unique(rows[:, :2])) & set(np.unique(face_rows[:, :2]))
        if len(shared) != 1:
            raise ValueError("cannot reconstruct polygon corners from boundary tags")
        corners.append((fid, nodes[shared.pop()]))
    corners.sort()
    verts = np.array([c for _, c in corners])
    return ConvexPolygon(np.roll(verts, 1, axis=0))
