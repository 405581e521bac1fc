import json

import numpy as np
import pytest

from srlab import __version__
from srlab.cli import (
    ConfigError,
    ExperimentConfig,
    _resolve_threads,
    build_mesh,
    load_config,
    main,
)
from srlab.geometry import read_tmesh2d


def write_cfg(tmp_path, name="cfg.json", **overrides):
    cfg = {
        "experiment": "t",
        "domain": "unit_square",
        "bc": "dirichlet",
        "mu": 0.0,
        "level": 2,
        "lambda": {"log10_min": 0.0, "log10_max": 0.0, "count": 1},
        "seed": 0,
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_artifact_json(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# srlab")
    return json.loads("\n".join(lines[1:])), lines[0]


def test_load_config_defaults(tmp_path):
    cfg = load_config(write_cfg(tmp_path), "solve")
    assert cfg.experiment_id == "t"
    assert cfg.bc_tag == "dirichlet"
    assert cfg.rays == (0.0,)
    assert len(cfg.config_hash) == 12


def test_config_hash_stable(tmp_path):
    p = write_cfg(tmp_path)
    h1 = load_config(p, "solve").config_hash
    h2 = load_config(p, "solve").config_hash
    assert h1 == h2
    p2 = write_cfg(tmp_path, name="cfg2.json", seed=1)
    assert load_config(p2, "solve").config_hash != h1


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, typo=1), "solve")


def test_bad_bc_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, bc="slip"), "solve")


def test_mu_range_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, bc="neumann", mu=1.5), "solve")


def test_h2_mu_boundary(tmp_path):
    ok = write_cfg(tmp_path, name="ok.json", bc="neumann", mu=0.41)
    assert load_config(ok, "check-h2").mu == 0.41
    bad = write_cfg(tmp_path, name="bad.json", bc="neumann", mu=0.42)
    with pytest.raises(ConfigError):
        load_config(bad, "check-h2")


def test_ray_outside_sector_rejected(tmp_path):
    cfg = write_cfg(
        tmp_path,
        theta=1.0,
        **{"lambda": {"log10_min": 0, "log10_max": 2, "count": 5, "rays": [1.5]}},
    )
    with pytest.raises(ConfigError):
        load_config(cfg, "solve")


def test_fit_needs_five_points(tmp_path):
    cfg = write_cfg(
        tmp_path, **{"lambda": {"log10_min": 0, "log10_max": 2, "count": 3}}
    )
    with pytest.raises(ConfigError):
        load_config(cfg, "sweep")
    # non-fit subcommands accept short grids
    load_config(cfg, "solve")


def test_bad_ngon_preset(tmp_path):
    with pytest.raises(ConfigError):
        build_mesh(load_config(write_cfg(tmp_path, domain="ngon:2:1.0"), "solve"))
    with pytest.raises(ConfigError):
        build_mesh(load_config(write_cfg(tmp_path, domain="ngon:8"), "solve"))


def test_ngon_preset_mesh(tmp_path):
    cfg = load_config(write_cfg(tmp_path, domain="ngon:8:1.0", level=1), "solve")
    mesh = build_mesh(cfg)
    assert len(mesh.polygon.vertices) == 8


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("SRL_THREADS", raising=False)
    assert _resolve_threads(2) == 2
    assert _resolve_threads(0) >= 1
    monkeypatch.setenv("SRL_THREADS", "3")
    assert _resolve_threads(None) == 3
    # the flag wins over the environment
    assert _resolve_threads(1) == 1
    with pytest.raises(ConfigError):
        _resolve_threads(-1)


def test_unknown_subcommand():
    assert main(["frobnicate", "--config", "x.json"]) == 2


def test_missing_config():
    assert main(["solve", "--config", "/nonexistent/cfg.json"]) == 2


def test_mesh_subcommand(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["mesh", "--config", cfg, "--out", str(out)]) == 0
    path = out / "t_mesh.tmesh2d"
    first = path.read_text().splitlines()[0]
    assert first.startswith(f"# srlab {__version__} config ")
    mesh = read_tmesh2d(path)
    assert mesh.n_triangles > 0


def test_solve_zero_load(tmp_path):
    cfg = write_cfg(tmp_path, load="zero")
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    payload, comment = read_artifact_json(out / "t_solve.json")
    assert payload["u_l2"] == 0.0
    assert payload["phi_l2"] == 0.0
    assert payload["residual_momentum"] == 0.0
    assert f"srlab {__version__}" in comment


def test_solve_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, load="bubble_curl")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["solve", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["solve", "--config", cfg, "--out", str(out2)]) == 0
    a = (out1 / "t_solve.json").read_bytes()
    b = (out2 / "t_solve.json").read_bytes()
    assert a == b


def test_convergence_subcommand(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["convergence", "--config", cfg, "--out", str(out)]) == 0
    payload, _ = read_artifact_json(out / "t_convergence.json")
    assert payload["min_order_u"] >= 2.5
    assert payload["min_order_phi"] >= 1.5


def test_sweep_subcommand(tmp_path):
    cfg = write_cfg(
        tmp_path,
        bc="neumann",
        level=3,
        **{"lambda": {"log10_min": -1.0, "log10_max": 1.0, "count": 5}},
    )
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--threads", "1"]) == 0
    csv_lines = (out / "t_ray0.csv").read_text().splitlines()
    assert csv_lines[1].startswith("abs_lambda,arg_lambda,h,")
    assert len(csv_lines) == 7
    payload, _ = read_artifact_json(out / "t_ray0_fit.json")
    assert payload["n_samples"] == 5


def test_check_grisvard_subcommand(tmp_path):
    cfg = write_cfg(tmp_path, level=3)
    out = tmp_path / "out"
    assert main(["check-grisvard", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "t_grisvard.csv").read_text().splitlines()
    assert lines[1] == "id,lhs,rhs,ratio"
    rows = {ln.split(",")[0]: ln.split(",") for ln in lines[2:]}
    assert abs(float(rows["linear_radial"][1]) - 8.0) <= 1e-10
    assert abs(float(rows["shear"][1])) <= 1e-12


def test_check_local_subcommand(tmp_path):
    cfg = write_cfg(
        tmp_path,
        bc="neumann",
        level=3,
        **{
            "lambda": {"log10_min": 1.0, "log10_max": 1.0, "count": 1},
            "patch": {"center": [0.2, 0.2], "r": 0.05},
            "load": {"kind": "bump", "center": [0.9, 0.9], "radius": 0.05},
        },
    )
    out = tmp_path / "out"
    assert main(["check-local", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "t_local_lam10.csv").read_text().splitlines()
    ids = [ln.split(",")[0] for ln in lines[2:]]
    assert ids == ["caccioppoli", "local_h2", "reverse_holder"]


def test_check_local_requires_patch(tmp_path):
    cfg = write_cfg(
        tmp_path,
        bc="neumann",
        **{"lambda": {"log10_min": 1.0, "log10_max": 1.0, "count": 1}},
    )
    assert main(["check-local", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_check_equivalence_requires_dirichlet(tmp_path):
    cfg = write_cfg(
        tmp_path,
        bc="neumann",
        **{"lambda": {"log10_min": 0, "log10_max": 2, "count": 5}},
    )
    assert main(["check-equivalence", "--config", cfg]) == 2
