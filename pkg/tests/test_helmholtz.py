import numpy as np
import pytest

from srlab.fem import build_space, build_system, BoundaryCondition
from srlab.geometry import triangulate, unit_square
from srlab.helmholtz import (
    HelmholtzProjector,
    project_P,
    project_Q,
    solenoidal_basis,
)
from srlab.solver import SectorSample, solve_resolvent


@pytest.fixture(scope="module")
def sys3():
    space = build_space(triangulate(unit_square(), np.sqrt(2.0) / 8))
    return build_system(space, mu=0.3)


def m_norm(system, v):
    return float(np.sqrt(np.real(np.vdot(v, system.M_v @ v))))


def random_field(system, seed=0):
    rng = np.random.default_rng(seed)
    n = system.space.n_vel
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def bubble_field(space):
    x, y = space.p2_coords[:, 0], space.p2_coords[:, 1]
    px = 2 * x * (1 - x) ** 2 - 2 * x**2 * (1 - x)
    py = 2 * y * (1 - y) ** 2 - 2 * y**2 * (1 - y)
    c = np.zeros(space.n_vel)
    c[0::2] = x**2 * (1 - x) ** 2 * py
    c[1::2] = -px * y**2 * (1 - y) ** 2
    return c


def test_idempotence(sys3):
    f = random_field(sys3)
    scale = m_norm(sys3, f)
    for flavor in ("neumann", "dirichlet"):
        proj = HelmholtzProjector(sys3, flavor)
        pf = proj.apply(f)
        assert m_norm(sys3, proj.apply(pf) - pf) <= 1e-9 * scale


def test_project_q_constant(sys3):
    c = np.zeros(sys3.space.n_vel)
    c[0::2] = 1.0
    qc = project_Q(sys3, c)
    assert m_norm(sys3, qc - c) <= 1e-10 * m_norm(sys3, c)


def test_gradients_annihilated(sys3):
    # Q annihilates lifted gradients of zero-trace potentials,
    # P annihilates lifted gradients of arbitrary potentials
    rng = np.random.default_rng(1)
    for flavor, fn in (("dirichlet", project_Q), ("neumann", project_P)):
        proj = HelmholtzProjector(sys3, flavor)
        h = rng.standard_normal(proj._W.shape[1])
        gradh = proj._W @ h
        assert m_norm(sys3, fn(sys3, gradh, projector=proj)) <= 1e-10 * m_norm(
            sys3, gradh
        )


def test_p_preserves_solenoidal_fields_under_refinement():
    prev = None
    for lvl in (2, 3, 4):
        space = build_space(triangulate(unit_square(), np.sqrt(2.0) / 2**lvl))
        system = build_system(space)
        f = bubble_field(space)
        defect = m_norm(system, project_P(system, f) - f) / m_norm(system, f)
        if prev is not None:
            assert np.log2(prev / defect) >= 1.0
        prev = defect


def test_basis_invariants(sys3):
    dims = {}
    for flavor in ("L2_sigma", "calL2_sigma"):
        basis = solenoidal_basis(sys3, flavor)
        assert np.abs(sys3.B @ basis.Z).max() < 1e-10
        assert np.abs(basis.gram - np.eye(basis.dim)).max() < 1e-10
        dims[flavor] = basis.dim
        if flavor == "L2_sigma":
            space = sys3.space
            for node in space.boundary_nodes:
                n = space.node_normal(int(node))
                tr = n[0] * basis.Z[2 * node] + n[1] * basis.Z[2 * node + 1]
                assert np.abs(tr).max() < 1e-10
    assert dims["calL2_sigma"] >= 2
    assert dims["calL2_sigma"] - dims["L2_sigma"] >= 1


def test_constants_in_calL2_only(sys3):
    c = np.zeros(sys3.space.n_vel)
    c[0::2] = 1.0
    cal = solenoidal_basis(sys3, "calL2_sigma")
    coeff = cal.Z.T @ (sys3.M_v @ c)
    assert m_norm(sys3, cal.Z @ coeff - c) < 1e-10 * m_norm(sys3, c)
    sig = solenoidal_basis(sys3, "L2_sigma")
    coeff = sig.Z.T @ (sys3.M_v @ c)
    assert m_norm(sys3, sig.Z @ coeff - c) > 0.1 * m_norm(sys3, c)


def test_orthogonality_of_complement(sys3):
    f = random_field(sys3, seed=2)
    pf = project_P(sys3, f)
    Z = solenoidal_basis(sys3, "L2_sigma").Z
    assert np.abs(Z.T @ (sys3.M_v @ (f - pf))).max() <= 1e-9 * m_norm(sys3, f)


def test_basis_flavor_validation(sys3):
    with pytest.raises(ValueError):
        solenoidal_basis(sys3, "bogus")
    with pytest.raises(ValueError):
        HelmholtzProjector(sys3, "bogus")


@pytest.mark.parametrize(
    "bc", [BoundaryCondition("dirichlet"), BoundaryCondition("neumann", 0.3)]
)
def test_pressure_absorption(sys3, bc):
    f = random_field(sys3, seed=3)
    proj = HelmholtzProjector(sys3, "dirichlet")
    qf = proj.apply(f)
    lam = SectorSample(2 + 1j)
    sol_f = solve_resolvent(sys3, bc, lam, np.asarray(sys3.M_v @ f))
    sol_qf = solve_resolvent(sys3, bc, lam, np.asarray(sys3.M_v @ qf))
    assert m_norm(sys3, sol_f.u - sol_qf.u) <= 1e-8 * m_norm(sys3, sol_f.u)
    # pressures differ by the scalar potential of (Id - Q) f
    chi = np.zeros(sys3.space.n_pres, dtype=complex)
    interior = np.setdiff1d(
        np.arange(sys3.space.n_pres), sys3.space.boundary_vertex_ids
    )
    chi[interior] = proj.potential(f)
    diff = sol_qf.phi - sol_f.phi - chi
    if bc.is_dirichlet:
        # the mean-zero gauge shifts the potential by a constant
        m = sys3.M_q @ np.ones(sys3.space.n_pres)
        diff = diff - (m @ diff) / m.sum()
    scale = max(np.linalg.norm(sol_f.phi), 1.0)
    assert np.linalg.norm(diff) <= 1e-8 * scale
