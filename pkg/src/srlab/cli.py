"""Command-line front end.

Builds domains and meshes, runs single solves, convergence studies,
operator-norm sweeps with exponent fits, and the identity/inequality
checkers, all driven by a single JSON config file. Every artifact starts
with a comment line recording the config hash and tool version so runs
are traceable; identical config + seed gives byte-identical outputs.

Exit codes: 0 success, 2 config/validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .experiments import (
    MU_H2_LIMIT,
    check_grisvard,
    check_h2_estimate,
    check_lemma_equivalence,
    check_localized,
    sweep_pressure_decay,
    sweep_pressure_dual,
    write_fit_json,
    write_report_csv,
    write_sweep_csv,
)
from .fem import BoundaryCondition, VolumeF, BoundaryG, build_space, build_system
from .geometry import (
    CubePatch,
    read_tmesh2d,
    regular_ngon,
    triangulate,
    unit_square,
    write_tmesh2d,
)
from .manufactured import dirichlet_square_case, neumann_square_case
from .norms import lp_norm
from .solver import SectorSample, solve_resolvent

__all__ = ["ExperimentConfig", "load_config", "run", "main"]

FIT_SUBCOMMANDS = ("sweep", "check-equivalence")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated run description parsed from a JSON config file."""

    experiment_id: str
    domain: str
    bc_tag: str
    mu: float
    theta: float
    log10_min: float
    log10_max: float
    count: int
    rays: tuple
    level: int
    seed: int
    out_dir: str
    extras: dict = field(default_factory=dict)
    config_hash: str = ""

    @property
    def bc(self) -> BoundaryCondition:
        return BoundaryCondition(self.bc_tag, self.mu)

    def lambda_grid(self) -> np.ndarray:
        return np.logspace(self.log10_min, self.log10_max, self.count)


def _config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def load_config(path, subcommand: str, out_override=None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    grid = raw.get("lambda", {})
    known = {
        "experiment", "domain", "bc", "mu", "theta", "lambda",
        "level", "seed", "out_dir", "load", "patch", "dual",
    }
    extras = {k: raw[k] for k in ("load", "patch", "dual") if k in raw}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    cfg = ExperimentConfig(
        experiment_id=str(raw.get("experiment", "run")),
        domain=str(raw.get("domain", "unit_square")),
        bc_tag=str(raw.get("bc", "dirichlet")),
        mu=float(raw.get("mu", 0.0)),
        theta=float(raw.get("theta", 2 * np.pi / 3)),
        log10_min=float(grid.get("log10_min", 0.0)),
        log10_max=float(grid.get("log10_max", 2.0)),
        count=int(grid.get("count", 9)),
        rays=tuple(float(r) for r in grid.get("rays", [0.0])),
        level=int(raw.get("level", 3)),
        seed=int(raw.get("seed", 0)),
        out_dir=str(out_override or raw.get("out_dir", ".")),
        extras=extras,
        config_hash=_config_hash(raw),
    )
    _validate(cfg, subcommand)
    return cfg


def _validate(cfg: ExperimentConfig, subcommand: str):
    if cfg.bc_tag not in ("dirichlet", "neumann"):
        raise ConfigError(f"unknown boundary condition {cfg.bc_tag!r}")
    if not (-1.0 < cfg.mu <= 1.0):
        raise ConfigError("mu must lie in (-1, 1]")
    if subcommand == "check-h2" and not (cfg.mu < MU_H2_LIMIT):
        raise ConfigError(
            f"mu = {cfg.mu} outside the admissible range (-1, sqrt(2)-1) "
            "for the second-order energy check"
        )
    if subcommand == "check-equivalence" and cfg.bc_tag != "dirichlet":
        raise ConfigError("the equivalence check requires the no-slip condition")
    if subcommand in ("check-h2", "check-local") and cfg.bc_tag != "neumann":
        raise ConfigError(f"{subcommand} requires the natural boundary condition")
    if not (0 < cfg.theta < np.pi):
        raise ConfigError("theta must lie in (0, pi)")
    for r in cfg.rays:
        if not (-cfg.theta < r < cfg.theta):
            raise ConfigError(f"ray angle {r} outside (-theta, theta)")
    if not cfg.rays:
        raise ConfigError("at least one ray angle is required")
    if cfg.count < 1:
        raise ConfigError("lambda grid count must be positive")
    if subcommand in FIT_SUBCOMMANDS and cfg.count < 5:
        raise ConfigError("fit experiments need a lambda grid with count >= 5")
    if cfg.level < 0:
        raise ConfigError("refinement level must be nonnegative")
    if cfg.log10_max < cfg.log10_min:
        raise ConfigError("lambda grid log10_max must be >= log10_min")


def build_mesh(cfg: ExperimentConfig):
    """Mesh the configured domain at the configured refinement level."""
    if cfg.domain == "unit_square":
        return triangulate(unit_square(), np.sqrt(2.0) / 2**cfg.level)
    if cfg.domain.startswith("ngon:"):
        parts = cfg.domain.split(":")
        if len(parts) != 3:
            raise ConfigError("ngon preset must be 'ngon:<n>:<radius>'")
        try:
            n, radius = int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad ngon preset {cfg.domain!r}") from exc
        if n < 3 or radius <= 0:
            raise ConfigError("ngon preset needs n >= 3 and radius > 0")
        return triangulate(regular_ngon(n, radius), 2.0 * radius / 2**cfg.level)
    if not os.path.exists(cfg.domain):
        raise ConfigError(f"domain {cfg.domain!r} is neither a preset nor a file")
    return read_tmesh2d(cfg.domain)


def _comment(cfg: ExperimentConfig) -> str:
    return f"srlab {__version__} config {cfg.config_hash} seed {cfg.seed}"


def _out_path(cfg: ExperimentConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, f"{cfg.experiment_id}_{name}")


def _write_json(path, payload, comment):
    with open(path, "w") as fh:
        fh.write(f"# {comment}\n")
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _resolve_threads(flag_value) -> int:
    n = flag_value
    if n is None:
        env = os.environ.get("SRL_THREADS", "")
        n = int(env) if env.strip() else 0
    if n == 0:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError("thread count must be >= 0")
    return n


def _load_field(cfg: ExperimentConfig):
    """Pointwise volume load selected by the config `load` key."""
    spec = cfg.extras.get("load", "zero")
    if spec == "zero":
        return VolumeF(lambda p: np.zeros((len(p), 2)))
    if spec == "bubble_curl":
        from .experiments import _bubble_curl

        return VolumeF(_bubble_curl)
    if isinstance(spec, dict) and spec.get("kind") == "bump":
        center = np.asarray(spec.get("center", [0.5, 0.5]), dtype=float)
        radius = float(spec.get("radius", 0.1))
        if radius <= 0:
            raise ConfigError("bump load radius must be positive")

        def f(pts):
            d2 = np.sum((pts - center) ** 2, axis=1) / radius**2
            vals = np.zeros((len(pts), 2))
            inside = d2 < 1.0
            w = np.exp(-1.0 / (1.0 - d2[inside]))
            vals[inside, 0] = w
            vals[inside, 1] = -w
            return vals

        return VolumeF(f)
    raise ConfigError(f"unknown load spec {spec!r}")


def _patch(cfg: ExperimentConfig) -> CubePatch:
    spec = cfg.extras.get("patch")
    if not isinstance(spec, dict) or "center" not in spec or "r" not in spec:
        raise ConfigError("check-local needs patch: {center: [x, y], r: ...}")
    return CubePatch(np.asarray(spec["center"], dtype=float), float(spec["r"]))


def cmd_mesh(cfg: ExperimentConfig, threads: int, verbose: bool) -> int:
    mesh = build_mesh(cfg)
    path = _out_path(cfg, "mesh.tmesh2d")
    write_tmesh2d(mesh, path)
    with open(path) as fh:
        body = fh.read()
    with open(path, "w") as fh:
        fh.write(f"# {_comment(cfg)}\n" + body)
    if verbose:
        print(f"wrote {path}: {mesh.n_nodes} nodes, "
              f"{mesh.n_triangles} triangles, h = {mesh.h:.5g}", file=sys.stderr)
    return 0


def cmd_solve(cfg: ExperimentConfig, threads: int, verbose: bool) -> int:
    mesh = build_mesh(cfg)
    space = build_space(mesh)
    system = build_system(space, mu=cfg.mu)
    lam = SectorSample(10**cfg.log10_min * np.exp(1j * cfg.rays[0]), cfg.theta)
    sol = solve_resolvent(system, cfg.bc, lam, _load_field(cfg))
    payload = {
        "abs_lambda": abs(complex(lam.lam)),
        "arg_lambda": cfg.rays[0],
        "h": mesh.h,
        "u_l2": lp_norm(space, sol.u, 2.0),
        "grad_u_l2": lp_norm(space, sol.u, 2.0, kind="velocity_gradient"),
        "phi_l2": lp_norm(space, sol.phi, 2.0, kind="pressure"),
        "residual_momentum": sol.residual_momentum,
        "residual_divergence": sol.residual_divergence,
    }
    _write_json(_out_path(cfg, "solve.json"), payload, _comment(cfg))
    return 0


def _manufactured_errors(space, sol, case, gauge_pressure: bool):
    phys, wts = space.quad_data(8)[0], space.quad_data(8)[1]
    uv, _, _ = space.velocity_at_quad(sol.u)
    pv, _, _ = space.pressure_at_quad(sol.phi)
    flat = phys.reshape(-1, 2)
    ue = case.u(flat).reshape(phys.shape[0], phys.shape[1], 2)
    pe = case.phi(flat).reshape(phys.shape[0], phys.shape[1])
    if gauge_pressure:
        pv = pv - (np.sum(wts * pv) - np.sum(wts * pe)) / np.sum(wts)
    eu = np.sqrt(np.sum(wts[..., None] * np.abs(uv - ue) ** 2))
    ep = np.sqrt(np.sum(wts * np.abs(pv - pe) ** 2))
    return float(eu), float(ep)


def cmd_convergence(cfg: ExperimentConfig, threads: int, verbose: bool) -> int:
    if cfg.domain != "unit_square":
        raise ConfigError("the manufactured study runs on the unit_square preset")
    if cfg.bc_tag == "dirichlet":
        case = dirichlet_square_case()
    else:
        case = neumann_square_case(mu=cfg.mu)
    bc = BoundaryCondition(cfg.bc_tag, case.mu)
    levels = [cfg.level + k for k in range(3)]
    rows = []
    for lvl in levels:
        mesh = triangulate(unit_square(), np.sqrt(2.0) / 2**lvl)
        space = build_space(mesh)
        system = build_system(space, mu=case.mu)
        rhs = [VolumeF(case.f)]
        if cfg.bc_tag == "neumann":
            rhs.append(BoundaryG(case.g))
        sol = solve_resolvent(system, bc, SectorSample(case.lam, cfg.theta), rhs)
        eu, ep = _manufactured_errors(space, sol, case, cfg.bc_tag == "dirichlet")
        rows.append({"level": lvl, "h": mesh.h, "err_u_l2": eu, "err_phi_l2": ep})
        if verbose:
            print(f"level {lvl}: err_u {eu:.3e} err_phi {ep:.3e}", file=sys.stderr)
    orders_u = [
        np.log2(rows[i]["err_u_l2"] / rows[i + 1]["err_u_l2"]) for i in range(2)
    ]
    orders_p = [
        np.log2(rows[i]["err_phi_l2"] / rows[i + 1]["err_phi_l2"]) for i in range(2)
    ]
    payload = {
        "case": case.name,
        "rows": rows,
        "orders_u": orders_u,
        "orders_phi": orders_p,
        "min_order_u": min(orders_u),
        "min_order_phi": min(orders_p),
    }
    _write_json(_out_path(cfg, "convergence.json"), payload, _comment(cfg))
    return 0


def cmd_sweep(cfg: ExperimentConfig, threads: int, verbose: bool) -> int:
    mesh = build_mesh(cfg)
    space = build_space(mesh)
    system = build_system(space, mu=cfg.mu)
    dual = bool(cfg.extras.get("dual", False))
    runner = sweep_pressure_dual if dual else sweep_pressure_decay

    def one_ray(ray):
        return runner(
            system,
            cfg.bc,
            lam_grid=cfg.lambda_grid(),
            arg_lambda=ray,
            theta=cfg.theta,
            seed=cfg.seed,
        )

    if threads > 1 and len(cfg.rays) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_ray, cfg.rays))
    else:
        results = [one_ray(r) for r in cfg.rays]

    for k, (record, fit) in enumerate(results):
        write_sweep_csv(_out_path(cfg, f"ray{k}.csv"), record, _comment(cfg))
        write_fit_json(_out_path(cfg, f"ray{k}_fit.json"), fit, _comment(cfg))
        if verbose:
            print(
                f"ray {cfg.rays[k]:+.4f}: alpha_hat {fit.alpha_hat:.4f} "
                f"r2 {fit.r2:.4f}", file=sys.stderr,
            )
    return 0


def cmd_check_grisvard(cfg: ExperimentConfig, threads: int, verbose: bool) -> int:
    import sympy as sp

    x, y = sp.symbols("x y")
    bx, by = (x * (1 - x)) ** 2, (y * (1 - y)) ** 2
    cases = [
        ("linear_radial", (2 * x, 2 * y)),
        ("shear", (y, sp.Integer(0))),
        ("bubble_curl", (bx * sp.diff(by, y), -sp.diff(bx, x) * by)),
    ]
    mesh = build_mesh(cfg)
    polygon = mesh.polygon
    reports = [
        check_grisvard(polygon, expr, target_h=mesh.h, descriptor=name)
        for name, expr in cases
    ]
    write_report_csv(_out_path(cfg, "grisvard.csv"), reports, _comment(cfg))
    if verbose:
        for rep in reports:
            print(f"{rep.id}: lhs {rep.lhs:.6g} rhs {rep.rhs:.6g}", file=sys.stderr)
    return 0


def cmd_check_h2(cfg: ExperimentConfig, threads: int, verbose: bool) -> int:
    mesh = build_mesh(cfg)
    system = build_system(build_space(mesh), mu=cfg.mu)
    rows = check_h2_estimate(
        system, lam_grid=cfg.lambda_grid(), theta=cfg.theta, seed=cfg.seed
    )
    lines = [f"# {_comment(cfg)}", "abs_lambda,field,ratio"]
    for row in rows:
        lines.append(
            f"{row['abs_lambda']!r},{row['field']},{row['ratio']!r}"
        )
    path = _out_path(cfg, "h2.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if verbose:
        ratios = [row["ratio"] for row in rows]
        print(
            f"{len(rows)} ratios, max {max(ratios):.4g}, "
            f"median {np.median(ratios):.4g}", file=sys.stderr,
        )
    return 0


def cmd_check_local(cfg: ExperimentConfig, threads: int, verbose: bool) -> int:
    mesh = build_mesh(cfg)
    system = build_system(build_space(mesh), mu=cfg.mu)
    patch = _patch(cfg)
    load = _load_field(cfg)
    for a in cfg.lambda_grid():
        lam = SectorSample(float(a) * np.exp(1j * cfg.rays[0]), cfg.theta)
        reports = check_localized(system, lam, patch, load)
        write_report_csv(
            _out_path(cfg, f"local_lam{float(a):g}.csv"), reports, _comment(cfg)
        )
        if verbose:
            for rep in reports:
                print(f"lam {a:g} {rep.id}: ratio {rep.ratio:.4g}", file=sys.stderr)
    return 0


def cmd_check_equivalence(cfg: ExperimentConfig, threads: int, verbose: bool) -> int:
    mesh = build_mesh(cfg)
    system = build_system(build_space(mesh), mu=cfg.mu)
    report = check_lemma_equivalence(
        system, lam_grid=cfg.lambda_grid(), theta=cfg.theta, seed=cfg.seed
    )
    payload = {
        "alpha_pressure_growth": report.alpha_pressure_growth,
        "alpha_velocity_decay": report.alpha_velocity_decay,
        "gap": report.gap,
        "fit_pressure": {"alpha_hat": report.fit_pressure.alpha_hat,
                         "r2": report.fit_pressure.r2},
        "fit_velocity": {"alpha_hat": report.fit_velocity.alpha_hat,
                         "r2": report.fit_velocity.r2},
    }
    _write_json(_out_path(cfg, "equivalence.json"), payload, _comment(cfg))
    if verbose:
        print(f"gap {report.gap:.4f}", file=sys.stderr)
    return 0


_HANDLERS = {
    "mesh": cmd_mesh,
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "sweep": cmd_sweep,
    "check-grisvard": cmd_check_grisvard,
    "check-h2": cmd_check_h2,
    "check-local": cmd_check_local,
    "check-equivalence": cmd_check_equivalence,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srlab",
        description="Mixed finite-element laboratory for the Stokes resolvent",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (0 = auto); overrides SRL_THREADS")
        p.add_argument("--verbose", action="store_true")
    return parser


def run(subcommand: str, cfg: ExperimentConfig, threads: int = 1,
        verbose: bool = False) -> int:
    return _HANDLERS[subcommand](cfg, threads, verbose)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config, args.subcommand, out_override=args.out)
        threads = _resolve_threads(args.threads)
        return run(args.subcommand, cfg, threads=threads, verbose=args.verbose)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
