import numpy as np
import pytest

from srlab.fem import (
    BoundaryCondition,
    BoundaryG,
    DivergenceF,
    VolumeF,
    assemble_cross_term,
    assemble_divergence,
    assemble_gradient_coupling,
    assemble_gram,
    assemble_stiffness,
    build_space,
    build_system,
    load_vector,
)
from srlab.geometry import refine_uniform, triangulate, unit_square


@pytest.fixture(scope="module")
def coarse_space():
    return build_space(triangulate(unit_square(), np.sqrt(2.0)))


@pytest.fixture(scope="module")
def fine_space():
    return build_space(refine_uniform(triangulate(unit_square(), np.sqrt(2.0))))


def interp_velocity(space, fx, fy):
    x, y = space.p2_coords[:, 0], space.p2_coords[:, 1]
    coeffs = np.zeros(space.n_vel)
    coeffs[0::2] = fx(x, y)
    coeffs[1::2] = fy(x, y)
    return coeffs


def test_dof_counts(coarse_space, fine_space):
    assert coarse_space.n_vertices == 4
    assert coarse_space.n_edges == 5
    assert coarse_space.n_vel == 18
    assert coarse_space.n_pres == 4
    assert fine_space.n_vertices == 9
    assert fine_space.n_edges == 16
    assert fine_space.n_vel == 50
    assert fine_space.n_pres == 9


def test_boundary_normals(fine_space):
    for node in fine_space.boundary_nodes:
        n = fine_space.node_normal(int(node))
        assert abs(np.linalg.norm(n) - 1) < 1e-14
    # corner (0,0) of the unit square: bisector of (0,-1) and (-1,0)
    corner = int(np.argmin(np.sum(fine_space.p2_coords**2, axis=1)))
    assert np.allclose(fine_space.node_normal(corner), -np.sqrt(0.5) * np.ones(2))


def test_stiffness_mu_zero_is_component_laplacian(fine_space):
    A0 = assemble_stiffness(fine_space, 0.0)
    u = interp_velocity(fine_space, lambda x, y: x * y, lambda x, y: 0 * x)
    # int |grad(xy)|^2 over unit square = int x^2 + y^2 = 2/3
    assert u @ (A0 @ u) == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_stiffness_shear_field(fine_space):
    u = interp_velocity(fine_space, lambda x, y: y, lambda x, y: 0 * x)
    for mu in (-0.9, -0.5, 0.0, 0.4, 0.9, 1.0):
        A = assemble_stiffness(fine_space, mu)
        assert u @ (A @ u) == pytest.approx(1.0, abs=1e-12)


def test_stiffness_constant_field(fine_space):
    u = interp_velocity(fine_space, lambda x, y: 1 + 0 * x, lambda x, y: 2 + 0 * x)
    A = assemble_stiffness(fine_space, 0.4)
    assert abs(u @ (A @ u)) < 1e-12


def test_stiffness_mu_range(fine_space):
    with pytest.raises(ValueError):
        assemble_stiffness(fine_space, -1.0)
    with pytest.raises(ValueError):
        assemble_stiffness(fine_space, 1.5)


def test_cross_term_consistency(fine_space):
    A0 = assemble_stiffness(fine_space, 0.0)
    D = assemble_cross_term(fine_space)
    for mu in (-0.5, 0.3, 0.9):
        A = assemble_stiffness(fine_space, mu)
        diff = (A - (A0 + mu * D)).tocoo()
        assert np.all(np.abs(diff.data) < 1e-12) if diff.nnz else True


def test_coercivity(fine_space):
    rng = np.random.default_rng(0)
    A0 = assemble_stiffness(fine_space, 0.0)
    D = assemble_cross_term(fine_space)
    for mu in (-0.9, -0.5, 0.0, 0.4, 0.9):
        A = A0 + mu * D
        for _ in range(40):
            x = rng.standard_normal(fine_space.n_vel)
            lhs = x @ (A @ x)
            rhs = (1 - abs(mu)) * (x @ (A0 @ x))
            assert lhs >= rhs - 1e-10 * (x @ x)


def test_divergence_matrix(fine_space):
    B = assemble_divergence(fine_space)
    const = interp_velocity(fine_space, lambda x, y: 1 + 0 * x, lambda x, y: 1 + 0 * x)
    assert np.max(np.abs(B @ const)) < 1e-13
    sol = interp_velocity(fine_space, lambda x, y: x, lambda x, y: -y)
    assert np.max(np.abs(B @ sol)) < 1e-13
    expand = interp_velocity(fine_space, lambda x, y: x, lambda x, y: y)
    assert np.sum(B @ expand) == pytest.approx(2.0, abs=1e-12)


def test_structural_zero(fine_space):
    # two dofs with disjoint supports never interact
    A = assemble_stiffness(fine_space, 0.3).tocsr()
    cells = fine_space.cells6
    support = {n: set() for n in range(fine_space.n_p2)}
    for e, cell in enumerate(cells):
        for n in cell:
            support[n].add(e)
    found = False
    for p in range(fine_space.n_p2):
        for q in range(p + 1, fine_space.n_p2):
            if not (support[p] & support[q]):
                assert A[2 * p, 2 * q] == 0.0
                found = True
                break
        if found:
            break
    assert found


def test_gram_kinds(fine_space):
    Mq = assemble_gram(fine_space, "pressure_mass")
    ones = np.ones(fine_space.n_pres)
    assert ones @ (Mq @ ones) == pytest.approx(1.0, abs=1e-13)
    Ln = assemble_gram(fine_space, "scalar_laplace_neumann")
    assert np.max(np.abs(Ln @ ones)) < 1e-13
    Mv = assemble_gram(fine_space, "velocity_mass")
    u = interp_velocity(fine_space, lambda x, y: x, lambda x, y: 0 * x)
    assert u @ (Mv @ u) == pytest.approx(1.0 / 3.0, abs=1e-12)
    with pytest.raises(ValueError):
        assemble_gram(fine_space, "nope")


def test_h1_zero_elimination(fine_space):
    K10 = assemble_gram(fine_space, "H1_zero")
    d = fine_space.boundary_vel_dofs
    sub = K10[d][:, d].toarray()
    assert np.allclose(sub, np.eye(len(d)))
    rows = K10[d].toarray()
    rows[np.arange(len(d)), d] = 0.0
    assert np.max(np.abs(rows)) == 0.0


def test_load_zero(fine_space):
    load = load_vector(fine_space, VolumeF(lambda p: np.zeros_like(p)))
    assert np.max(np.abs(load)) == 0.0


def test_load_divergence_identity(fine_space):
    # F = Id: -int Id : grad v = -int div v = -(B^T 1) paired entrywise
    B = assemble_divergence(fine_space)
    load = load_vector(
        fine_space, DivergenceF(lambda p: np.broadcast_to(np.eye(2), (len(p), 2, 2)))
    )
    ref = -B.T @ np.ones(fine_space.n_pres)
    assert np.max(np.abs(load - ref)) < 1e-12


def test_load_boundary_normal(fine_space):
    load = load_vector(
        fine_space,
        BoundaryG(lambda pts, fid: np.broadcast_to(
            fine_space.mesh.polygon.faces[fid].normal, (len(pts), 2)
        )),
    )
    u = 0.5 * interp_velocity(fine_space, lambda x, y: x, lambda x, y: y)
    # divergence theorem: int_bdry n.(x,y)/2 = int div (x,y)/2 = |Omega|
    assert np.real(u @ load) == pytest.approx(1.0, abs=1e-12)


def test_load_boundary_rejects_dirichlet(fine_space):
    with pytest.raises(ValueError):
        load_vector(
            fine_space,
            BoundaryG(lambda pts, fid: np.zeros((len(pts), 2))),
            BoundaryCondition("dirichlet"),
        )


def test_load_dirichlet_zeroes_boundary_rows(fine_space):
    load = load_vector(
        fine_space,
        VolumeF(lambda p: np.ones((len(p), 2))),
        BoundaryCondition("dirichlet"),
    )
    assert np.max(np.abs(load[fine_space.boundary_vel_dofs])) == 0.0


def test_gradient_coupling_vs_divergence(fine_space):
    # for a P1 potential vanishing on the boundary, C chi = -B^T chi
    C = assemble_gradient_coupling(fine_space)
    B = assemble_divergence(fine_space)
    chi = np.zeros(fine_space.n_pres)
    interior = np.setdiff1d(
        np.arange(fine_space.n_pres), fine_space.boundary_vertex_ids
    )
    chi[interior] = 1.7
    assert np.max(np.abs(C @ chi + B.T @ chi)) < 1e-12


def test_boundary_condition_validation():
    with pytest.raises(ValueError):
        BoundaryCondition("robin")
    with pytest.raises(ValueError):
        BoundaryCondition("neumann", mu=-1.0)
    BoundaryCondition("neumann", mu=1.0)


def test_build_system(fine_space):
    sys = build_system(fine_space, mu=0.3)
    assert (sys.A_mu - (sys.A0 + 0.3 * sys.D)).nnz == 0 or np.max(
        np.abs((sys.A_mu - (sys.A0 + 0.3 * sys.D)).data)
    ) < 1e-14
    for M in (sys.M_v, sys.M_q):
        d = (M - M.T).tocoo()
        assert np.max(np.abs(d.data)) < 1e-14 if d.nnz else True
        vals = np.linalg.eigvalsh(M.toarray())
        assert vals.min() > 0


def test_velocity_hessians(fine_space):
    u = interp_velocity(fine_space, lambda x, y: x**2, lambda x, y: x * y)
    H = fine_space.velocity_hessians(u)
    assert np.allclose(H[:, 0, 0, 0], 2.0)
    assert np.allclose(H[:, 0, 0, 1], 0.0)
    assert np.allclose(H[:, 1, 0, 1], 1.0)
    assert np.allclose(H[:, 1, 1, 0], 1.0)
