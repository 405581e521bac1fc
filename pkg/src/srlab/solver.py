"""Direct solves of the discrete complex Stokes resolvent saddle problem.

The block system is assembled complex symmetric,

    [ lam M + A   -B^T ] [u  ]   [F]
    [   -B          0  ] [phi] = [0],

so the adjoint solve reuses the same factorization through conjugation.
Dirichlet conditions are imposed by symmetric elimination of boundary
velocity dofs plus one Lagrange multiplier pinning the pressure mean.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import AssembledSystem, BoundaryCondition, BoundaryG, load_vector

__all__ = [
    "SectorSample",
    "ResolventSolution",
    "ResolventOperator",
    "solve_resolvent",
    "residual_report",
]

DENSE_CUTOFF = 3000
CONDITION_LIMIT = 1e14


@dataclass(frozen=True)
class SectorSample:
    """A resolvent parameter lam in the open sector of half-angle theta."""

    lam: complex
    theta: float = np.pi / 2

    def __post_init__(self):
        if self.lam == 0:
            raise ValueError("lam must be nonzero")
        if not (0 <= self.theta < np.pi):
            raise ValueError("theta must lie in [0, pi)")
        if self.theta == 0:
            if not (self.lam.imag == 0 and self.lam.real > 0):
                raise ValueError("theta = 0 requires lam on the positive real axis")
        elif abs(np.angle(complex(self.lam))) >= self.theta:
            raise ValueError("lam outside the sector")

    def conjugate(self) -> "SectorSample":
        return SectorSample(np.conj(complex(self.lam)), self.theta)


@dataclass
class ResolventSolution:
    u: np.ndarray
    phi: np.ndarray
    lam: SectorSample
    bc: BoundaryCondition
    rhs_label: str
    residual_momentum: float
    residual_divergence: float
    warnings: list = field(default_factory=list)


class _Factorization:
    """Shared LU of a complex symmetric matrix with a conjugate solve."""

    def __init__(self, K: sp.spmatrix):
        self.n = K.shape[0]
        if self.n < DENSE_CUTOFF:
            import scipy.linalg as sla

            self._lu = sla.lu_factor(K.toarray())
            self._solve = lambda b: sla.lu_solve(self._lu, b)
        else:
            lu = spla.splu(K.tocsc())
            self._solve = lu.solve
        self._K = K.tocsr()

    def solve(self, b):
        return self._solve(b)

    def solve_conj(self, b):
        """Solve conj(K) x = b; equals the adjoint solve for symmetric K."""
        return np.conj(self._solve(np.conj(b)))

    def condition_estimate(self) -> float:
        op = spla.LinearOperator(
            (self.n, self.n), matvec=self._solve, dtype=complex
        )
        try:
            inv_norm = spla.onenormest(op)
            return float(inv_norm * spla.norm(self._K, 1))
        except Exception:
            return np.nan


class ResolventOperator:
    """The discrete resolvent map F -> (u, phi) for one (bc, lam) pair.

    Factorizes once; solves for many right-hand sides (and adjoints) are
    cheap. Instances are independent across lam and safe to use from
    separate threads.
    """

    def __init__(self, system: AssembledSystem, bc: BoundaryCondition, lam: SectorSample):
        self.system = system
        self.bc = bc
        self.lam = lam
        space = system.space
        self.n_vel = space.n_vel
        self.n_pres = space.n_pres
        lam_c = complex(lam.lam)
        if bc.is_dirichlet:
            keep = np.ones(self.n_vel, dtype=bool)
            keep[space.boundary_vel_dofs] = False
            Pk = sp.diags(keep.astype(float))
            S = Pk @ (lam_c * system.M_v + system.A0) @ Pk + sp.diags(
                (~keep).astype(float)
            )
            Bt = system.B @ Pk
            m = np.asarray(system.M_q @ np.ones(self.n_pres)).reshape(-1, 1)
            K = sp.bmat(
                [
                    [S, -Bt.T, None],
                    [-Bt, None, -m],
                    [None, -m.T, None],
                ],
                format="csr",
            )
            self._keep = keep
            self._B = Bt
            self.n_extra = 1
        else:
            S = lam_c * system.M_v + system.A_mu
            K = sp.bmat([[S, -system.B.T], [-system.B, None]], format="csr")
            self._keep = None
            self._B = system.B
            self.n_extra = 0
        self._S = S.tocsr()
        self._fact = _Factorization(K)
        self.warnings: list[str] = []
        h = space.mesh.h
        if abs(lam_c) > 1.0 / h**2:
            self.warnings.append(
                f"abs(lam)={abs(lam_c):.3g} exceeds 1/h^2={1.0 / h**2:.3g}; "
                "the mesh does not resolve the boundary layer"
            )

    def check_conditioning(self):
        est = self._fact.condition_estimate()
        if est > CONDITION_LIMIT:
            msg = f"estimated condition number {est:.3g} exceeds {CONDITION_LIMIT:.0e}"
            self.warnings.append(msg)
            warnings.warn(msg, stacklevel=2)
        return est

    def _pack(self, Fv, Fp=None):
        Fv = np.asarray(Fv, dtype=complex)
        if self._keep is not None:
            Fv = Fv * self._keep
        rest = np.zeros(self.n_pres + self.n_extra, dtype=complex)
        if Fp is not None:
            rest[: self.n_pres] = Fp
        return np.concatenate([Fv, rest])

    def solve(self, Fv, Fp=None):
        """Velocity (and optional pressure) load -> (u, phi) coefficients."""
        x = self._fact.solve(self._pack(Fv, Fp))
        return x[: self.n_vel], x[self.n_vel : self.n_vel + self.n_pres]

    def solve_adjoint(self, Gv, Gp=None):
        """Solve the adjoint block system for block loads."""
        x = self._fact.solve_conj(self._pack(Gv, Gp))
        return x[: self.n_vel], x[self.n_vel : self.n_vel + self.n_pres]

    def residuals(self, u, phi, Fv):
        Fv = np.asarray(Fv, dtype=complex)
        if self._keep is not None:
            Fv = Fv * self._keep
        mom = self._S @ u - self._B.T @ phi - Fv
        denom = max(np.linalg.norm(Fv), 1e-300)
        res_mom = float(np.linalg.norm(mom) / denom)
        res_div = float(
            np.linalg.norm(self._B @ u) / max(np.linalg.norm(u), 1e-300)
        )
        return res_mom, res_div


def _assemble_load(system, bc, rhs):
    parts = rhs if isinstance(rhs, (list, tuple)) else [rhs]
    if isinstance(rhs, np.ndarray):
        return np.asarray(rhs, dtype=complex), "vector"
    load = np.zeros(system.space.n_vel, dtype=complex)
    labels = []
    for part in parts:
        if bc.is_dirichlet and isinstance(part, BoundaryG):
            raise ValueError("boundary data cannot be combined with a Dirichlet condition")
        load += load_vector(system.space, part, bc)
        labels.append(part.label())
    return load, "+".join(labels)


def solve_resolvent(
    system: AssembledSystem,
    bc: BoundaryCondition,
    lam: SectorSample,
    rhs,
    operator: ResolventOperator | None = None,
) -> ResolventSolution:
    """Solve the resolvent problem for one lam and one right-hand side."""
    op = operator if operator is not None else ResolventOperator(system, bc, lam)
    Fv, label = _assemble_load(system, bc, rhs)
    u, phi = op.solve(Fv)
    res_mom, res_div = op.residuals(u, phi, Fv)
    sol = ResolventSolution(
        u=u,
        phi=phi,
        lam=lam,
        bc=bc,
        rhs_label=label,
        residual_momentum=res_mom,
        residual_divergence=res_div,
        warnings=list(op.warnings),
    )
    if bc.is_dirichlet:
        m = system.M_q @ np.ones(system.space.n_pres)
        mean = abs(m @ phi)
        norm_phi = np.linalg.norm(phi)
        if norm_phi > 0 and mean > 1e-12 * norm_phi:
            sol.warnings.append(f"pressure mean {mean:.3g} not zero")
    return sol


def residual_report(solution: ResolventSolution, system: AssembledSystem, rhs):
    """Recompute block residuals of a solution against a right-hand side."""
    op = ResolventOperator(system, solution.bc, solution.lam)
    Fv, _ = _assemble_load(system, solution.bc, rhs)
    return op.residuals(solution.u, solution.phi, Fv)
