"""Verification experiments: lambda sweeps with decay fits, boundary
identity checks, H2-type ratio tables, and localized estimates.

Each sweep point is an independent factorize+measure; records are
assembled sorted by |lambda| and written to CSV/JSON with a leading
comment line so identical configs reproduce byte-identical artifacts.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fem import (
    AssembledSystem,
    BoundaryCondition,
    DivergenceF,
    VolumeF,
    load_vector,
)
from .geometry import (
    ConvexPolygon,
    CubePatch,
    cube_polygon_cover,
    face_boundary_integrand,
    triangulate,
)
from .helmholtz import (
    DENSE_BASIS_LIMIT,
    HelmholtzProjector,
    ImplicitSolenoidalProjector,
    solenoidal_basis,
)
from .norms import (
    DecayFit,
    OperatorSpec,
    _input_gram,
    broken_h2_seminorm,
    fit_decay_exponent,
    lp_norm,
    operator_norm,
)
from .quadrature import segment_rule, triangle_rule
from .solver import ResolventOperator, SectorSample

__all__ = [
    "SweepRecord",
    "IdentityReport",
    "LocalizedReport",
    "EquivalenceReport",
    "default_lambda_grid",
    "sweep_pressure_decay",
    "sweep_pressure_dual",
    "check_uniform_resolvent",
    "check_grisvard",
    "check_h2_estimate",
    "check_localized",
    "check_lemma_equivalence",
    "write_sweep_csv",
    "write_report_csv",
    "write_fit_json",
]

MU_H2_LIMIT = np.sqrt(2.0) - 1.0

CSV_COLUMNS = (
    "abs_lambda",
    "arg_lambda",
    "h",
    "C_pressure",
    "C_velocity",
    "C_gradient",
    "Cp_p3",
    "Cp_p4",
    "resolved",
)


@dataclass
class SweepRecord:
    """One lambda sweep: per-sample measured functionals, sorted by |lambda|.

    Each sample is a dict with at least abs_lambda and resolved; measured
    functionals use the CSV column names (missing ones stay absent)."""

    domain_id: str
    bc_tag: str
    mu: float
    arg_lambda: float
    h: float
    samples: list = field(default_factory=list)

    def __post_init__(self):
        self.samples = sorted(self.samples, key=lambda s: s["abs_lambda"])
        for s in self.samples:
            for key, val in s.items():
                if key not in ("abs_lambda", "resolved") and val is not None:
                    if float(val) < 0:
                        raise ValueError(f"negative measured value {key}={val}")

    def resolved_samples(self):
        return [s for s in self.samples if s["resolved"]]

    def series(self, key):
        """(abs_lambda, value) pairs of one functional over resolved samples."""
        return [
            (s["abs_lambda"], s[key]) for s in self.resolved_samples() if key in s
        ]


@dataclass(frozen=True)
class IdentityReport:
    """Volume-vs-boundary evaluation of the divergence identity."""

    descriptor: str
    lhs: float
    rhs: float

    @property
    def residual_abs(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def residual_rel(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return 0.0 if scale == 0.0 else self.residual_abs / scale

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else np.inf
        return self.lhs / self.rhs

    @property
    def id(self) -> str:
        return self.descriptor


@dataclass(frozen=True)
class LocalizedReport:
    """One localized inequality evaluated on a cube patch."""

    patch: CubePatch
    inequality_id: str
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0
        return self.lhs / self.rhs

    @property
    def id(self) -> str:
        return self.inequality_id


@dataclass(frozen=True)
class EquivalenceReport:
    """Paired exponents of the two dual-norm formulations.

    The pressure map should grow like |lambda|^alpha while the velocity
    map decays like |lambda|^(1-alpha); gap measures the consistency."""

    alpha_pressure_growth: float
    alpha_velocity_decay: float
    fit_pressure: DecayFit
    fit_velocity: DecayFit

    @property
    def gap(self) -> float:
        return abs(self.alpha_pressure_growth - (1.0 - self.alpha_velocity_decay))


def default_lambda_grid(log10_min=0.0, log10_max=4.0, count=17):
    return np.logspace(log10_min, log10_max, count)


def _default_basis(system: AssembledSystem, bc: BoundaryCondition):
    flavor = "L2_sigma" if bc.is_dirichlet else "calL2_sigma"
    if system.space.n_vel <= DENSE_BASIS_LIMIT:
        return solenoidal_basis(system, flavor)
    return ImplicitSolenoidalProjector(system, flavor)


def _domain_id(system: AssembledSystem) -> str:
    return f"poly{len(system.space.mesh.polygon.vertices)}"


_OUTPUT_COLUMNS = {
    "phi": "C_pressure",
    "lam_u": "C_velocity",
    "sqrt_lam_grad_u": "C_gradient",
}


def sweep_pressure_decay(
    system: AssembledSystem,
    bc: BoundaryCondition,
    lam_grid=None,
    arg_lambda: float = 0.0,
    theta: float = np.pi / 2,
    basis=None,
    outputs=("phi", "lam_u", "sqrt_lam_grad_u"),
    seed: int = 0,
    domain_id: str | None = None,
):
    """Operator-norm sweep over a solenoidal input basis; fits the decay
    exponent of C_pressure(lambda) on the resolved window.

    Neumann conditions measure over the divergence-free basis, Dirichlet
    over the trace-constrained one. Returns (SweepRecord, DecayFit)."""
    if lam_grid is None:
        lam_grid = default_lambda_grid()
    if basis is None:
        basis = _default_basis(system, bc)
    h = system.space.mesh.h
    cut = (1.0 / h**2) * (1.0 + 1e-9)
    samples = []
    for a in sorted(float(a) for a in np.asarray(lam_grid)):
        lam = SectorSample(a * np.exp(1j * arg_lambda), theta)
        op = ResolventOperator(system, bc, lam)
        row = {"abs_lambda": a, "resolved": a <= cut}
        for out in outputs:
            spec = OperatorSpec(out, bc, lam)
            res = operator_norm(spec, basis, system, seed=seed, operator=op)
            row[_OUTPUT_COLUMNS[out]] = res.value
        samples.append(row)
    record = SweepRecord(
        domain_id=domain_id if domain_id is not None else _domain_id(system),
        bc_tag=bc.tag,
        mu=system.mu,
        arg_lambda=arg_lambda,
        h=h,
        samples=samples,
    )
    fit = fit_decay_exponent(record.series("C_pressure"), h=h)
    return record, fit


def sweep_pressure_dual(
    system: AssembledSystem,
    bc: BoundaryCondition,
    lam_grid=None,
    arg_lambda: float = 0.0,
    theta: float = np.pi / 2,
    basis=None,
    seed: int = 0,
    domain_id: str | None = None,
):
    """Sweep of sup ||phi|| / ||F||_{H^-1} over the solenoidal basis.

    The fitted alpha_hat is the decay exponent of the values; the growth
    exponent of interest is its negative. Requires an explicit basis
    (the dual input Gram is dense)."""
    if lam_grid is None:
        lam_grid = default_lambda_grid()
    if basis is None:
        flavor = "L2_sigma" if bc.is_dirichlet else "calL2_sigma"
        basis = solenoidal_basis(system, flavor)
    # no-slip loads act on zero-trace test fields, natural-condition loads
    # on the full H1 space; the dual norm follows the test space
    dual = "H1_zero_dual" if bc.is_dirichlet else "H1_full_dual"
    h = system.space.mesh.h
    cut = (1.0 / h**2) * (1.0 + 1e-9)
    spec0 = OperatorSpec("phi", bc, SectorSample(1.0, theta), input_norm=dual)
    gram = _input_gram(spec0, basis, system)
    samples = []
    for a in sorted(float(a) for a in np.asarray(lam_grid)):
        lam = SectorSample(a * np.exp(1j * arg_lambda), theta)
        spec = OperatorSpec("phi", bc, lam, input_norm=dual)
        res = operator_norm(spec, basis, system, seed=seed, input_gram=gram)
        samples.append(
            {"abs_lambda": a, "resolved": a <= cut, "C_pressure": res.value}
        )
    record = SweepRecord(
        domain_id=domain_id if domain_id is not None else _domain_id(system),
        bc_tag=bc.tag,
        mu=system.mu,
        arg_lambda=arg_lambda,
        h=h,
        samples=samples,
    )
    fit = fit_decay_exponent(record.series("C_pressure"), h=h)
    return record, fit


def _bubble_curl(pts):
    """Curl of the biquartic bubble: solenoidal with zero boundary trace."""
    x, y = pts[:, 0], pts[:, 1]
    bx = x**2 * (1 - x) ** 2
    by = y**2 * (1 - y) ** 2
    dbx = 2 * x * (1 - x) ** 2 - 2 * x**2 * (1 - x)
    dby = 2 * y * (1 - y) ** 2 - 2 * y**2 * (1 - y)
    return np.stack([bx * dby, -dbx * by], axis=-1)


def _default_tensor(pts):
    x, y = pts[:, 0], pts[:, 1]
    F = np.empty(pts.shape[:-1] + (2, 2))
    F[..., 0, 0] = np.sin(np.pi * x) * np.cos(np.pi * y)
    F[..., 0, 1] = x * y
    F[..., 1, 0] = x**2 - y
    F[..., 1, 1] = np.cos(np.pi * x)
    return F


def _callable_lp(space, fn, p, tensor=False):
    """L^p norm of a pointwise-evaluable field over the mesh."""
    phys, wts, _, _, _, _ = space.quad_data(8)
    vals = np.asarray(fn(phys.reshape(-1, 2)))
    shape = phys.shape[:2] + ((2, 2) if tensor else (2,))
    vals = vals.reshape(shape)
    axes = (-2, -1) if tensor else (-1,)
    mag2 = np.sum(np.abs(vals) ** 2, axis=axes)
    return float(np.sum(wts * mag2 ** (p / 2.0)) ** (1.0 / p))


def check_uniform_resolvent(
    system: AssembledSystem,
    bc: BoundaryCondition,
    lam_grid=None,
    p_list=(2, 3, 4),
    f=None,
    F=None,
    arg_lambda: float = 0.0,
    theta: float = np.pi / 2,
    domain_id: str | None = None,
) -> SweepRecord:
    """Per-lambda solution-norm ratios for one fixed representative load.

    Records |lam| ||u||_p / ||f||_p and |lam|^(1/2) ||grad u||_p / ||f||_p
    for each p, plus the divergence-form triple
    (|lam|^(1/2)||u||_p + ||grad u||_p + ||phi||_p) / ||F||_p.
    A vanishing F yields an empty record rather than 0/0 ratios."""
    if lam_grid is None:
        lam_grid = default_lambda_grid()
    space = system.space
    f = f if f is not None else VolumeF(_bubble_curl)
    F = F if F is not None else DivergenceF(_default_tensor)
    f_norms = {p: _callable_lp(space, f.f, p) for p in p_list}
    F_norms = {p: _callable_lp(space, F.F, p, tensor=True) for p in p_list}
    h = space.mesh.h
    record = SweepRecord(
        domain_id=domain_id if domain_id is not None else _domain_id(system),
        bc_tag=bc.tag,
        mu=system.mu,
        arg_lambda=arg_lambda,
        h=h,
        samples=[],
    )
    if max(F_norms.values()) == 0.0 or max(f_norms.values()) == 0.0:
        return record
    load_f = load_vector(space, f, bc)
    load_F = load_vector(space, F, bc)
    cut = (1.0 / h**2) * (1.0 + 1e-9)
    samples = []
    for a in sorted(float(a) for a in np.asarray(lam_grid)):
        lam = SectorSample(a * np.exp(1j * arg_lambda), theta)
        op = ResolventOperator(system, bc, lam)
        u1, _ = op.solve(load_f)
        u2, phi2 = op.solve(load_F)
        row = {"abs_lambda": a, "resolved": a <= cut}
        for p in p_list:
            vel = a * lp_norm(space, u1, p) / f_norms[p]
            grad = np.sqrt(a) * lp_norm(space, u1, p, kind="velocity_gradient")
            grad /= f_norms[p]
            triple = (
                np.sqrt(a) * lp_norm(space, u2, p)
                + lp_norm(space, u2, p, kind="velocity_gradient")
                + lp_norm(space, phi2, p, kind="pressure")
            ) / F_norms[p]
            row[f"vel_p{p}"] = vel
            row[f"grad_p{p}"] = grad
            row[f"div_p{p}"] = triple
        if 2 in p_list:
            row["C_velocity"] = row["vel_p2"]
            row["C_gradient"] = row["grad_p2"]
            row["C_pressure"] = row["div_p2"]
        if 3 in p_list:
            row["Cp_p3"] = row["vel_p3"]
        if 4 in p_list:
            row["Cp_p4"] = row["vel_p4"]
        samples.append(row)
    record.samples = sorted(samples, key=lambda s: s["abs_lambda"])
    return record


def _as_field_pair(v, Jv):
    """Accepts (callable, callable) or sympy expressions; returns callables."""
    if Jv is not None:
        return v, Jv
    import sympy as sp

    x, y = sp.symbols("x y")
    exprs = list(v)
    J = [[sp.diff(e, var) for var in (x, y)] for e in exprs]
    vf = sp.lambdify((x, y), exprs, "numpy")
    Jf = sp.lambdify((x, y), J, "numpy")

    def v_call(pts):
        out = vf(pts[:, 0], pts[:, 1])
        return np.stack(
            [np.broadcast_to(o, pts.shape[:1]) for o in out], axis=-1
        ).astype(complex)

    def J_call(pts):
        rows = Jf(pts[:, 0], pts[:, 1])
        out = np.empty(pts.shape[:1] + (2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                out[:, i, j] = np.broadcast_to(rows[i][j], pts.shape[:1])
        return out

    return v_call, J_call


def check_grisvard(
    polygon: ConvexPolygon,
    v,
    Jv=None,
    quad_order: int = 8,
    target_h: float = 0.05,
    descriptor: str = "field",
) -> IdentityReport:
    """Evaluate both sides of the volume/boundary divergence identity.

    LHS integrates |div v|^2 - sum_jk (d_j v_k)(conj d_k v_j) over the
    polygon; RHS sums facewise arclength-derivative terms. `v` is either
    a pair of callables (values, Jacobians) or a sequence of two sympy
    expressions in x, y from which the Jacobian is derived."""
    v_call, J_call = _as_field_pair(v, Jv)
    mesh = triangulate(polygon, target_h)
    pts, w = triangle_rule(quad_order)
    corners = mesh.nodes[mesh.triangles]  # (ne, 3, 2)
    J = np.stack(
        [corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=-1
    )
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    phys = corners[:, None, 0, :] + np.einsum("eab,qb->eqa", J, pts)
    wts = 0.5 * detJ[:, None] * w[None, :]
    flat = phys.reshape(-1, 2)
    Jv_vals = np.asarray(J_call(flat))
    div = Jv_vals[:, 0, 0] + Jv_vals[:, 1, 1]
    cross = np.einsum("nij,nji->n", Jv_vals, np.conj(Jv_vals))
    lhs = float(np.sum(wts.ravel() * (np.abs(div) ** 2 - np.real(cross))))

    s, sw = segment_rule(8)
    rhs = 0.0
    for face in polygon.faces:
        n_panels = max(1, int(np.ceil(face.length / target_h)))
        for k in range(n_panels):
            a = face.start + (face.end - face.start) * (k / n_panels)
            b = face.start + (face.end - face.start) * ((k + 1) / n_panels)
            seg_pts = a + np.multiply.outer(s, b - a)
            length = np.linalg.norm(b - a)
            vals = np.asarray(v_call(seg_pts))
            Jvals = np.asarray(J_call(seg_pts))
            integrand = face_boundary_integrand(face, vals, Jvals)
            rhs += length * float(np.sum(sw * integrand))
    return IdentityReport(descriptor=descriptor, lhs=lhs, rhs=rhs)


def _trig_field(space):
    x, y = space.p2_coords[:, 0], space.p2_coords[:, 1]
    c = np.zeros(space.n_vel)
    c[0::2] = np.sin(np.pi * y)
    c[1::2] = np.sin(np.pi * x)
    return c


def _bubble_field(space):
    vals = _bubble_curl(space.p2_coords)
    c = np.zeros(space.n_vel)
    c[0::2] = vals[:, 0]
    c[1::2] = vals[:, 1]
    return c


def check_h2_estimate(
    system: AssembledSystem,
    lam_grid=None,
    f_fields=None,
    theta: float = np.pi / 2,
    seed: int = 0,
):
    """Ratio table for the second-order energy bound under the natural
    boundary condition.

    Per (lambda, f): [|lam| |grad u|^2 + broken-H2(u)^2 + |grad phi|^2]
    over [|f|^2 + |lam|^2 |u|^2]. The coefficient parameter must lie in
    (-1, sqrt(2) - 1); values outside that range are rejected."""
    mu = system.mu
    if not (-1.0 < mu < MU_H2_LIMIT):
        raise ValueError(
            f"mu = {mu} outside the admissible range (-1, sqrt(2)-1)"
        )
    if lam_grid is None:
        lam_grid = default_lambda_grid(0.0, 1.5, 7)
    space = system.space
    bc = BoundaryCondition("neumann", mu)
    if f_fields is None:
        proj = HelmholtzProjector(system, "neumann")
        rng = np.random.default_rng(seed)
        rand = np.real(proj.apply(rng.standard_normal(space.n_vel)))
        f_fields = [
            ("bubble_curl", _bubble_field(space)),
            ("trig", _trig_field(space)),
            ("random_solenoidal", rand),
        ]
    rows = []
    for a in sorted(float(a) for a in np.asarray(lam_grid)):
        lam = SectorSample(a, theta)
        op = ResolventOperator(system, bc, lam)
        for name, fvec in f_fields:
            f_norm = lp_norm(space, fvec, 2.0)
            if f_norm == 0.0:
                continue
            u, phi = op.solve(system.M_v @ np.asarray(fvec, dtype=complex))
            num = (
                a * lp_norm(space, u, 2.0, kind="velocity_gradient") ** 2
                + broken_h2_seminorm(space, u) ** 2
                + lp_norm(space, phi, 2.0, kind="pressure_gradient") ** 2
            )
            den = f_norm**2 + a**2 * lp_norm(space, u, 2.0) ** 2
            rows.append({"abs_lambda": a, "field": name, "ratio": num / den})
    return rows


def _pointwise_triple(space, u, phi, a):
    """|lam||u| + sqrt|lam|(|grad u| + |phi|) at quadrature points."""
    vals, grads, wts = space.velocity_at_quad(u, degree=8)
    pvals, _, _ = space.pressure_at_quad(phi, degree=8)
    g = (
        a * np.sqrt(np.sum(np.abs(vals) ** 2, axis=-1))
        + np.sqrt(a) * np.sqrt(np.sum(np.abs(grads) ** 2, axis=(-2, -1)))
        + np.sqrt(a) * np.abs(pvals)
    )
    return g, wts


def check_localized(
    system: AssembledSystem,
    lam: SectorSample,
    patch: CubePatch,
    f: VolumeF,
) -> list:
    """Evaluate the three localized inequalities on a patch away from the
    support of the load.

    Requires the load's support elements to be disjoint from the
    8-dilated patch so the equation is homogeneous near the patch."""
    space = system.space
    bc = BoundaryCondition("neumann", system.mu)
    phys, wts, _, _, _, _ = space.quad_data(8)
    fv = np.asarray(f.f(phys.reshape(-1, 2))).reshape(phys.shape[:2] + (2,))
    support = np.flatnonzero(np.max(np.abs(fv), axis=(1, 2)) > 0)
    dilated = np.flatnonzero(patch.contains(space.mesh.centroids(), 8.0))
    if np.intersect1d(support, dilated).size:
        raise ValueError("load support overlaps the 8-dilated patch")

    op = ResolventOperator(system, bc, lam)
    u, phi = op.solve(load_vector(space, f, bc))
    cover = cube_polygon_cover(space.mesh, patch)
    Q, Q2 = cover.elements[1], cover.elements[2]
    a = abs(complex(lam.lam))
    r = patch.r
    global_scale = lp_norm(space, u, 2.0)

    def nsq(coeffs, region, kind="velocity"):
        return lp_norm(space, coeffs, 2.0, region=region, kind=kind) ** 2

    if global_scale == 0.0 or cover.empty:
        return [
            LocalizedReport(patch, iid, 0.0, 0.0)
            for iid in ("caccioppoli", "local_h2", "reverse_holder")
        ]

    cac_lhs = a * nsq(u, Q) + nsq(u, Q, "velocity_gradient")
    cac_rhs = (1.0 / r**2) * ((1.0 / a) * nsq(phi, Q2, "pressure") + nsq(u, Q2))

    h2_lhs = (
        a * nsq(u, Q, "velocity_gradient")
        + broken_h2_seminorm(space, u, region=Q) ** 2
        + nsq(phi, Q, "pressure_gradient")
    )
    h2_rhs = a**2 * nsq(u, Q2) + (1.0 / r**2) * (
        nsq(u, Q2, "velocity_gradient") + nsq(phi, Q2, "pressure")
    )

    g, gw = _pointwise_triple(space, u, phi, a)
    mean4 = (np.sum(gw[Q] * g[Q] ** 4) / cover.measures[1]) ** 0.25
    mean2 = (np.sum(gw[Q2] * g[Q2] ** 2) / cover.measures[2]) ** 0.5
    return [
        LocalizedReport(patch, "caccioppoli", float(cac_lhs), float(cac_rhs)),
        LocalizedReport(patch, "local_h2", float(h2_lhs), float(h2_rhs)),
        LocalizedReport(patch, "reverse_holder", float(mean4), float(mean2)),
    ]


def check_lemma_equivalence(
    system: AssembledSystem,
    lam_grid=None,
    theta: float = np.pi / 2,
    seed: int = 0,
) -> EquivalenceReport:
    """Paired dual-norm exponent fits under the no-slip condition.

    Fits the growth of sup |phi| / |F|_{H^-1} and the decay of
    sup |u|_{H^-1} / |F|_{H^-1}; the two exponents should sum to 1."""
    if lam_grid is None:
        lam_grid = default_lambda_grid()
    bc = BoundaryCondition("dirichlet")
    basis = solenoidal_basis(system, "L2_sigma")
    h = system.space.mesh.h
    cut = (1.0 / h**2) * (1.0 + 1e-9)
    spec0 = OperatorSpec(
        "phi", bc, SectorSample(1.0, theta), input_norm="H1_zero_dual"
    )
    gram = _input_gram(spec0, basis, system)
    vals_p, vals_u = [], []
    for a in sorted(float(a) for a in np.asarray(lam_grid)):
        if a > cut:
            continue
        lam = SectorSample(a, theta)
        op = ResolventOperator(system, bc, lam)
        for out, acc in (("phi", vals_p), ("u_h_minus1", vals_u)):
            spec = OperatorSpec(out, bc, lam, input_norm="H1_zero_dual")
            res = operator_norm(
                spec, basis, system, seed=seed, operator=op, input_gram=gram
            )
            acc.append((a, res.value))
    fit_p = fit_decay_exponent(vals_p)
    fit_u = fit_decay_exponent(vals_u)
    return EquivalenceReport(
        alpha_pressure_growth=-fit_p.alpha_hat,
        alpha_velocity_decay=fit_u.alpha_hat,
        fit_pressure=fit_p,
        fit_velocity=fit_u,
    )


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return repr(float(x))


def write_sweep_csv(path, record: SweepRecord, comment: str = ""):
    """Write a sweep as CSV with the fixed column set; missing
    functionals become empty fields. First line is a comment."""
    lines = [f"# {comment}".rstrip(), ",".join(CSV_COLUMNS)]
    for s in record.samples:
        row = dict(s)
        row.setdefault("arg_lambda", record.arg_lambda)
        row.setdefault("h", record.h)
        lines.append(",".join(_fmt(row.get(col)) for col in CSV_COLUMNS))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report_csv(path, reports, comment: str = ""):
    """Write identity or localized reports as id,lhs,rhs,ratio rows."""
    lines = [f"# {comment}".rstrip(), "id,lhs,rhs,ratio"]
    for rep in reports:
        lines.append(
            f"{rep.id},{_fmt(rep.lhs)},{_fmt(rep.rhs)},{_fmt(rep.ratio)}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_fit_json(path, fit: DecayFit, comment: str = ""):
    """Write a fit summary as JSON preceded by a comment line."""
    payload = {
        "alpha_hat": fit.alpha_hat,
        "r2": fit.r2,
        "window_min": fit.window_min,
        "window_max": fit.window_max,
        "n_samples": fit.n_samples,
    }
    with open(path, "w") as fh:
        fh.write(f"# {comment}".rstrip() + "\n")
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
