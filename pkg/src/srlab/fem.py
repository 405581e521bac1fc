"""Taylor-Hood (P2 velocity / P1 pressure) spaces and matrix assembly.

Velocity dofs are interleaved as 2*node + component, with P2 nodes
numbered vertices first, then edge midpoints in sorted endpoint order.
Pressure dofs coincide with mesh vertices. All matrices are assembled
once per mesh and are immutable scipy.sparse CSR matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import TriMesh
from .quadrature import segment_rule, triangle_rule

__all__ = [
    "TaylorHoodSpace",
    "BoundaryCondition",
    "AssembledSystem",
    "VolumeF",
    "DivergenceF",
    "BoundaryG",
    "build_space",
    "build_system",
    "assemble_stiffness",
    "assemble_cross_term",
    "assemble_divergence",
    "assemble_gram",
    "assemble_gradient_coupling",
    "load_vector",
]

GRAM_KINDS = (
    "velocity_mass",
    "pressure_mass",
    "H1_full",
    "H1_zero",
    "scalar_laplace_dirichlet",
    "scalar_laplace_neumann",
)


def _p2_ref(pts):
    """P2 basis values and gradients at reference points (x, y)."""
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    vals = np.stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l0 * l1,
            4 * l1 * l2,
            4 * l2 * l0,
        ],
        axis=1,
    )
    zeros = np.zeros_like(x)
    dl = {
        "l0": np.stack([-np.ones_like(x), -np.ones_like(x)], axis=1),
        "l1": np.stack([np.ones_like(x), zeros], axis=1),
        "l2": np.stack([zeros, np.ones_like(x)], axis=1),
    }
    g0 = (4 * l0 - 1)[:, None] * dl["l0"]
    g1 = (4 * l1 - 1)[:, None] * dl["l1"]
    g2 = (4 * l2 - 1)[:, None] * dl["l2"]
    g3 = 4 * (l1[:, None] * dl["l0"] + l0[:, None] * dl["l1"])
    g4 = 4 * (l2[:, None] * dl["l1"] + l1[:, None] * dl["l2"])
    g5 = 4 * (l0[:, None] * dl["l2"] + l2[:, None] * dl["l0"])
    grads = np.stack([g0, g1, g2, g3, g4, g5], axis=1)  # (nq, 6, 2)
    return vals, grads


def _p1_ref(pts):
    x, y = pts[:, 0], pts[:, 1]
    vals = np.stack([1.0 - x - y, x, y], axis=1)
    grads = np.broadcast_to(
        np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (len(pts), 3, 2)
    )
    return vals, grads


# Constant reference Hessians of the six P2 basis functions, (6, 2, 2).
_P2_HESS_REF = np.array(
    [
        [[4.0, 4.0], [4.0, 4.0]],
        [[4.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 4.0]],
        [[-8.0, -4.0], [-4.0, 0.0]],
        [[0.0, 4.0], [4.0, 0.0]],
        [[0.0, -4.0], [-4.0, -8.0]],
    ]
)


def _p2_edge_trace(s):
    """Trace of the three edge-supported P2 shapes at fractions s in [0,1],
    ordered (start vertex, end vertex, midpoint)."""
    s = np.asarray(s)
    return np.stack([2 * (s - 0.5) * (s - 1.0), s * (2 * s - 1.0), 4 * s * (1 - s)], axis=1)


@dataclass(frozen=True)
class BoundaryCondition:
    """Dirichlet (u = 0) or Neumann-type ({Du + mu Du^T} n - phi n = 0)."""

    tag: str
    mu: float = 0.0

    def __post_init__(self):
        if self.tag not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary condition tag {self.tag!r}")
        if self.tag == "neumann" and not (-1.0 < self.mu <= 1.0):
            raise ValueError("mu must lie in (-1, 1]")

    @property
    def is_dirichlet(self) -> bool:
        return self.tag == "dirichlet"


class TaylorHoodSpace:
    """P2/P1 pair on a triangle mesh with deterministic dof numbering."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        nv = mesh.n_nodes
        edge_set = set()
        for i, j, k in mesh.triangles:
            for a, b in ((i, j), (j, k), (k, i)):
                edge_set.add((min(a, b), max(a, b)))
        edges = sorted(edge_set)
        edge_id = {e: idx for idx, e in enumerate(edges)}
        self.edges = np.asarray(edges, dtype=int)
        self.n_vertices = nv
        self.n_edges = len(edges)
        self.n_pres = nv
        self.n_p2 = nv + self.n_edges
        self.n_vel = 2 * self.n_p2
        mids = 0.5 * (mesh.nodes[self.edges[:, 0]] + mesh.nodes[self.edges[:, 1]])
        self.p2_coords = np.vstack([mesh.nodes, mids])
        cells = []
        for i, j, k in mesh.triangles:
            cells.append(
                [
                    i,
                    j,
                    k,
                    nv + edge_id[(min(i, j), max(i, j))],
                    nv + edge_id[(min(j, k), max(j, k))],
                    nv + edge_id[(min(k, i), max(k, i))],
                ]
            )
        self.cells6 = np.asarray(cells, dtype=int)
        self._edge_id = edge_id

        # Element geometry: affine maps x = a + J xi.
        corners = mesh.triangle_corners()
        J = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=2)
        self.detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        self.invJ = (
            np.stack(
                [
                    np.stack([J[:, 1, 1], -J[:, 0, 1]], axis=1),
                    np.stack([-J[:, 1, 0], J[:, 0, 0]], axis=1),
                ],
                axis=1,
            )
            / self.detJ[:, None, None]
        )
        self._corner0 = corners[:, 0]
        self._J = J

        # Boundary bookkeeping.
        from collections import defaultdict

        node_faces: dict[int, set] = defaultdict(set)
        bedge_mid = []
        for a, b, fid in mesh.boundary_edges:
            m = nv + edge_id[(min(a, b), max(a, b))]
            node_faces[int(a)].add(int(fid))
            node_faces[int(b)].add(int(fid))
            node_faces[m].add(int(fid))
            bedge_mid.append(m)
        self.node_faces = {n: tuple(sorted(f)) for n, f in node_faces.items()}
        self.boundary_nodes = np.array(sorted(node_faces), dtype=int)
        self.boundary_vel_dofs = np.sort(
            np.concatenate([2 * self.boundary_nodes, 2 * self.boundary_nodes + 1])
        )
        self.boundary_vertex_ids = self.boundary_nodes[self.boundary_nodes < nv]
        self.boundary_edge_midnodes = np.asarray(bedge_mid, dtype=int)
        self._quad_cache: dict[int, tuple] = {}

    def node_normal(self, node: int) -> np.ndarray:
        """Outward normal at a boundary P2 node; corners use the bisector."""
        faces = self.node_faces[node]
        n = sum(self.mesh.polygon.faces[f].normal for f in faces)
        return n / np.linalg.norm(n)

    def quad_data(self, degree: int):
        """Per-element quadrature tables for the given rule degree.

        Returns (phys_points (ne,nq,2), weights (ne,nq) including element
        area, P2 values (nq,6), P2 physical gradients (ne,nq,6,2),
        P1 values (nq,3), P1 physical gradients (ne,3,2)).
        """
        if degree not in self._quad_cache:
            pts, w = triangle_rule(degree)
            p2v, p2g = _p2_ref(pts)
            p1v, p1g = _p1_ref(pts)
            phys = self._corner0[:, None, :] + np.einsum("eab,qb->eqa", self._J, pts)
            wts = 0.5 * self.detJ[:, None] * w[None, :]
            g2 = np.einsum("qnb,eba->eqna", p2g, self.invJ)
            g1 = np.einsum("nb,eba->ena", p1g[0], self.invJ)
            self._quad_cache[degree] = (phys, wts, p2v, g2, p1v, g1)
        return self._quad_cache[degree]

    def velocity_at_quad(self, coeffs, degree: int = 8):
        """Values (ne,nq,2) and gradients (ne,nq,2,2) of a velocity field.

        Gradient convention: grad[..., a, b] = d u_a / d x_b.
        """
        phys, wts, p2v, g2, _, _ = self.quad_data(degree)
        x = np.asarray(coeffs).reshape(self.n_p2, 2)
        xe = x[self.cells6]  # (ne, 6, 2)
        vals = np.einsum("qn,ena->eqa", p2v, xe)
        grads = np.einsum("eqnb,ena->eqab", g2, xe)
        return vals, grads, wts

    def pressure_at_quad(self, coeffs, degree: int = 8):
        phys, wts, _, _, p1v, g1 = self.quad_data(degree)
        xe = np.asarray(coeffs)[self.mesh.triangles]  # (ne, 3)
        vals = np.einsum("qn,en->eq", p1v, xe)
        grads = np.einsum("enb,en->eb", g1, xe)
        return vals, grads, wts

    def velocity_hessians(self, coeffs):
        """Per-element constant Hessians (ne, 2, 2, 2): H[e,a,:,:] for u_a."""
        hess_phys = np.einsum(
            "eca,ncd,edb->enab", self.invJ, _P2_HESS_REF, self.invJ
        )  # (ne, 6, 2, 2)
        x = np.asarray(coeffs).reshape(self.n_p2, 2)
        xe = x[self.cells6]
        return np.einsum("enab,enc->ecab", hess_phys, xe)


def build_space(mesh: TriMesh) -> TaylorHoodSpace:
    return TaylorHoodSpace(mesh)


def _scatter(space, local, rows_nodes, cols_nodes, shape):
    """Accumulate per-element local matrices (ne, nr, nc) into CSR."""
    ne = local.shape[0]
    rows = np.repeat(rows_nodes[:, :, None], local.shape[2], axis=2)
    cols = np.repeat(cols_nodes[:, None, :], local.shape[1], axis=1)
    mat = sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    )
    return mat.tocsr()


def _scalar_p2_matrices(space: TaylorHoodSpace):
    """Scalar P2 mass, stiffness, and the four gradient-product blocks."""
    cached = getattr(space, "_p2mats", None)
    if cached is not None:
        return cached
    _, wts, p2v, g2, _, _ = space.quad_data(4)
    mass_loc = np.einsum("eq,qm,qn->emn", wts, p2v, p2v)
    stiff_loc = np.einsum("eq,eqma,eqna->emn", wts, g2, g2)
    gg = np.einsum("eq,eqmc,eqnd->ecdmn", wts, g2, g2)  # G_cd
    shape = (space.n_p2, space.n_p2)
    mass = _scatter(space, mass_loc, space.cells6, space.cells6, shape)
    stiff = _scatter(space, stiff_loc, space.cells6, space.cells6, shape)
    G = {
        (c, d): _scatter(space, gg[:, c, d], space.cells6, space.cells6, shape)
        for c in range(2)
        for d in range(2)
    }
    space._p2mats = (mass, stiff, G)
    return space._p2mats


def _interleave_blocks(space, blocks, shape):
    """Place scalar blocks[(a, b)] at velocity dof rows 2p+a, cols 2q+b."""
    rows, cols, vals = [], [], []
    for (a, b), blk in blocks.items():
        coo = blk.tocoo()
        rows.append(2 * coo.row + a)
        cols.append(2 * coo.col + b)
        vals.append(coo.data)
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=shape,
    ).tocsr()


def assemble_stiffness(space: TaylorHoodSpace, mu: float):
    """A_mu with quadratic form int |grad u|^2 + mu d_k u_j d_j u_k."""
    if not (-1.0 < mu <= 1.0):
        raise ValueError("mu must lie in (-1, 1]")
    _, stiff, G = _scalar_p2_matrices(space)
    A0 = sp.kron(stiff, sp.eye(2), format="csr")
    if mu == 0.0:
        return A0
    return (A0 + mu * assemble_cross_term(space)).tocsr()


def assemble_cross_term(space: TaylorHoodSpace):
    """D with x*Dx = int d_a u_b d_b u_a; entries int d_b N_p d_a N_q."""
    _, _, G = _scalar_p2_matrices(space)
    blocks = {(a, b): G[(b, a)] for a in range(2) for b in range(2)}
    return _interleave_blocks(space, blocks, (space.n_vel, space.n_vel))


def assemble_divergence(space: TaylorHoodSpace):
    """B with (Bx)_q = int q_h div(u_h); rows pressure, cols velocity."""
    _, wts, _, g2, p1v, _ = space.quad_data(4)
    shape = (space.n_pres, space.n_vel)
    rows, cols, vals = [], [], []
    for a in range(2):
        loc = np.einsum("eq,qm,eqn->emn", wts, p1v, g2[..., a])
        coo = _scatter(
            space, loc, space.mesh.triangles, space.cells6, (space.n_pres, space.n_p2)
        ).tocoo()
        rows.append(coo.row)
        cols.append(2 * coo.col + a)
        vals.append(coo.data)
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=shape,
    ).tocsr()


def assemble_gradient_coupling(space: TaylorHoodSpace):
    """C with C[(p,a), q] = int N_p d_a L_q (velocity rows, P1 columns).

    Realizes the pairing (v, grad chi) for scalar potentials chi in the
    linear nodal space.
    """
    _, wts, p2v, _, _, g1 = space.quad_data(4)
    rows, cols, vals = [], [], []
    for a in range(2):
        # g1 is constant over quadrature points; loc shape (ne, 6, 3)
        loc = np.einsum("eq,qm,en->emn", wts, p2v, g1[..., a])
        coo = _scatter(
            space, loc, space.cells6, space.mesh.triangles, (space.n_p2, space.n_pres)
        ).tocoo()
        rows.append(2 * coo.row + a)
        cols.append(coo.col)
        vals.append(coo.data)
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.n_vel, space.n_pres),
    ).tocsr()


def _eliminate(mat, dofs):
    """Zero the given rows and columns and set unit diagonal (symmetric)."""
    m = mat.tolil(copy=True)
    m[dofs, :] = 0.0
    m[:, dofs] = 0.0
    for d in dofs:
        m[d, d] = 1.0
    return m.tocsr()


def assemble_gram(space: TaylorHoodSpace, kind: str):
    if kind not in GRAM_KINDS:
        raise ValueError(f"unknown gram kind {kind!r}")
    if kind in ("velocity_mass", "H1_full", "H1_zero"):
        mass, stiff, _ = _scalar_p2_matrices(space)
        if kind == "velocity_mass":
            return sp.kron(mass, sp.eye(2), format="csr")
        K1 = sp.kron(mass + stiff, sp.eye(2), format="csr")
        if kind == "H1_full":
            return K1
        return _eliminate(K1, space.boundary_vel_dofs)
    if kind == "pressure_mass":
        _, wts, _, _, p1v, _ = space.quad_data(4)
        loc = np.einsum("eq,qm,qn->emn", wts, p1v, p1v)
        return _scatter(
            space, loc, space.mesh.triangles, space.mesh.triangles,
            (space.n_pres, space.n_pres),
        )
    # scalar P1 Laplacians
    _, wts, _, _, _, g1 = space.quad_data(4)
    loc = np.einsum("eq,ema,ena->emn", wts, g1, g1)
    L = _scatter(
        space, loc, space.mesh.triangles, space.mesh.triangles,
        (space.n_pres, space.n_pres),
    )
    if kind == "scalar_laplace_dirichlet":
        return _eliminate(L, space.boundary_vertex_ids)
    return L


@dataclass(frozen=True)
class VolumeF:
    """Volume right-hand side f; callable points (n,2) -> values (n,2)."""

    f: object

    def label(self) -> str:
        return "volume"


@dataclass(frozen=True)
class DivergenceF:
    """Divergence-form right-hand side div(F), realized weakly as
    -int F : grad(v); callable points (n,2) -> values (n,2,2)."""

    F: object

    def label(self) -> str:
        return "divergence_form"


@dataclass(frozen=True)
class BoundaryG:
    """Natural boundary data g; callable (points (n,2), face_id) -> (n,2)."""

    g: object

    def label(self) -> str:
        return "boundary"


def load_vector(space: TaylorHoodSpace, rhs, bc: BoundaryCondition | None = None):
    """Assemble the load vector of a single right-hand-side part."""
    if isinstance(rhs, (VolumeF, DivergenceF)):
        phys, wts, p2v, g2, _, _ = space.quad_data(8)
        load = np.zeros(space.n_vel, dtype=complex)
        flat = phys.reshape(-1, 2)
        if isinstance(rhs, VolumeF):
            fv = np.asarray(rhs.f(flat)).reshape(phys.shape[0], phys.shape[1], 2)
            loc = np.einsum("eq,qn,eqa->ena", wts, p2v, fv)
        else:
            Fv = np.asarray(rhs.F(flat)).reshape(phys.shape[0], phys.shape[1], 2, 2)
            loc = -np.einsum("eq,eqab,eqnb->ena", wts, Fv, g2)
        for a in range(2):
            np.add.at(load, 2 * space.cells6 + a, loc[..., a])
    elif isinstance(rhs, BoundaryG):
        if bc is not None and bc.is_dirichlet:
            raise ValueError("boundary data cannot be combined with a Dirichlet condition")
        load = np.zeros(space.n_vel, dtype=complex)
        s, w = segment_rule(6)
        trace = _p2_edge_trace(s)  # (nq, 3)
        nv = space.n_vertices
        for a, b, fid in space.mesh.boundary_edges:
            a, b, fid = int(a), int(b), int(fid)
            mid = nv + space._edge_id[(min(a, b), max(a, b))]
            pa, pb = space.mesh.nodes[a], space.mesh.nodes[b]
            pts = pa + np.multiply.outer(s, pb - pa)
            length = np.linalg.norm(pb - pa)
            gv = np.asarray(rhs.g(pts, fid))  # (nq, 2)
            loc = length * np.einsum("q,qn,qc->nc", w, trace, gv)
            for c in range(2):
                for ln, node in enumerate((a, b, mid)):
                    load[2 * node + c] += loc[ln, c]
    else:
        raise TypeError(f"unsupported right-hand side {type(rhs).__name__}")
    if bc is not None and bc.is_dirichlet:
        load[space.boundary_vel_dofs] = 0.0
    return load


@dataclass(frozen=True)
class AssembledSystem:
    """All matrices for one (mesh, mu) pair, reused across resolvent values."""

    space: TaylorHoodSpace
    mu: float
    M_v: sp.csr_matrix
    M_q: sp.csr_matrix
    A0: sp.csr_matrix
    D: sp.csr_matrix
    B: sp.csr_matrix
    K1: sp.csr_matrix
    K10: sp.csr_matrix
    L_dirichlet: sp.csr_matrix
    L_neumann: sp.csr_matrix
    C: sp.csr_matrix = field(repr=False, default=None)

    @property
    def A_mu(self):
        if self.mu == 0.0:
            return self.A0
        return (self.A0 + self.mu * self.D).tocsr()

    @property
    def A_dir(self):
        return _eliminate(self.A0, self.space.boundary_vel_dofs)


def build_system(space: TaylorHoodSpace, mu: float = 0.0) -> AssembledSystem:
    if not (-1.0 < mu <= 1.0):
        raise ValueError("mu must lie in (-1, 1]")
    return AssembledSystem(
        space=space,
        mu=mu,
        M_v=assemble_gram(space, "velocity_mass"),
        M_q=assemble_gram(space, "pressure_mass"),
        A0=assemble_stiffness(space, 0.0),
        D=assemble_cross_term(space),
        B=assemble_divergence(space),
        K1=assemble_gram(space, "H1_full"),
        K10=assemble_gram(space, "H1_zero"),
        L_dirichlet=assemble_gram(space, "scalar_laplace_dirichlet"),
        L_neumann=assemble_gram(space, "scalar_laplace_neumann"),
        C=assemble_gradient_coupling(space),
    )
