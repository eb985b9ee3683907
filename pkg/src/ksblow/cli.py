"""Command-line entry point.

Subcommands::

    ksblow validate       --config cfg.json
    ksblow simulate       --config cfg.json [--out DIR] [--threads K]
    ksblow verify-lemmas  --config cfg.json [--out DIR]
    ksblow blowup         --config cfg.json [--out DIR] [--threads K]
    ksblow weak-residual  --config cfg.json [--out DIR]

Exit codes are a stable contract: 0 ok, 1 config error, 2 infeasible,
3 solver failure, 4 lemma-check failure, 5 parameter-selection failure.

Every emitted file is declared in the run manifest with its sha256 hash;
identical configs reproduce byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import (build_testfunction, blowup_indicator, select_blowup_params,
                       verify_integral_bound, verify_ode_inequality, y_functional)
from .config import RunConfig, config_to_dict, load_config
from .errors import (ConfigError, KsblowError, ParameterError, SelectionError,
                     SolverError)
from .params import (SystemParams, TestFnParams, default_testfn_params,
                     delta_lower_bound, validate)
from .signal import SignalProfile
from .solver import (SolverConfig, build_mesh, measured_c_sub, proper_sweep,
                     solve_regularized)
from .transform import RadialDensity, w0_from_density, write_csv
from .weakform import field_library, weak_residual

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3
EXIT_LEMMA = 4
EXIT_SELECTION = 5


import math as _math


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not _math.isfinite(obj):
        return None  # keep the documents strict JSON
    return obj


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (int, float, np.floating))
                              and not isinstance(v, bool) else str(v) for v in row) + "\n")


def _manifest(out_dir: Path, command: str, cfg: RunConfig, runs, failure=None) -> None:
    files = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            files[str(path.relative_to(out_dir))] = _sha256(path)
    payload = {
        "command": command,
        "config": config_to_dict(cfg),
        "files": files,
        "runs": runs,
    }
    if failure is not None:
        payload["failure"] = failure
    _write_json(out_dir / "manifest.json", payload)


def _resolve_out(cfg: RunConfig, out_flag) -> Path:
    directory = out_flag or cfg.output_directory
    if directory is None:
        raise ConfigError("no output directory: set output.directory or pass --out")
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _prepare_run(cfg: RunConfig):
    if cfg.solver is None:
        raise ConfigError("missing solver section")
    params = validate(cfg.system)
    sec = cfg.solver
    density = RadialDensity.plateau(params.c0, 1.0)
    if sec.s_max < 4.0 * density.r_max ** params.n:
        raise ConfigError(
            f"solver.s_max must be >= 4 * support^n = {4.0 * density.r_max ** params.n}")
    mesh = build_mesh(sec.s_max, sec.N, sec.ratio)
    w0 = w0_from_density(density, params.n, mesh.nodes)
    profile = SignalProfile.from_params(params)
    base = SolverConfig(epsilon=sec.epsilon if sec.epsilon is not None else 0.5,
                        t_end=sec.t_end, output_times=sec.output_times,
                        cfl_safety=sec.cfl_safety, max_dt=sec.max_dt,
                        limiter=sec.limiter)
    return params, profile, mesh, w0, base


def _indicator_series(traj, beta=1.0):
    s = traj.mesh.nodes
    probe = (s > 0.0) & (s <= traj.mesh.s_max / 2.0)
    weights = s[probe] ** (-beta)
    return [(t, float(np.max(w[probe] * weights))) for t, w in
            zip(traj.times, traj.snapshots)]


def _emit_run(traj, run_dir: Path) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    for k, t in enumerate(traj.times):
        write_csv(traj.mass_function(k), run_dir / f"snapshot_t{t:g}.csv")
    _write_rows(run_dir / "indicator_beta1.csv", "t,indicator",
                _indicator_series(traj))


def cmd_validate(cfg_path: str) -> int:
    cfg = load_config(cfg_path)
    params = validate(cfg.system)
    bound = repr(params.delta_bound) if params.f0 > 0 else "undefined (f0 = 0)"
    print(f"n = {params.n}, alpha = {params.alpha}, f0 = {params.f0}")
    print(f"f0 threshold  = {params.threshold!r}")
    print(f"delta bound   = {bound}")
    print(f"feasible      = {params.feasible}")
    return EXIT_OK if params.feasible else EXIT_INFEASIBLE


def cmd_simulate(cfg_path: str, out_flag=None, threads: int = 1) -> int:
    cfg = load_config(cfg_path)
    out_dir = _resolve_out(cfg, out_flag)
    params, profile, mesh, w0, base = _prepare_run(cfg)
    sec = cfg.solver
    runs = []
    try:
        if sec.eps_list:
            trajectories, report = proper_sweep(params, w0, base, sec.eps_list,
                                                profile=profile, threads=threads)
            for traj in trajectories:
                _emit_run(traj, out_dir / f"eps_{traj.epsilon:g}")
                runs.append(traj.metadata)
            _write_json(out_dir / "sweep_report.json", {
                "eps_list": list(report.eps_list),
                "pair_violations": list(report.pair_violations),
                "max_violation": report.max_violation,
                "failures": [{"epsilon": e, "message": m} for e, m in report.failures],
            })
            if report.failures:
                _manifest(out_dir, "simulate", cfg, runs,
                          failure={"kind": "solver", "detail": report.failures})
                return EXIT_SOLVER
        else:
            if sec.epsilon is None:
                raise ConfigError("solver.epsilon (or eps_list) is required for simulate")
            traj = solve_regularized(params, w0, base, profile)
            _emit_run(traj, out_dir)
            runs.append(traj.metadata)
    except SolverError as exc:
        _manifest(out_dir, "simulate", cfg, runs,
                  failure={"kind": "solver", "detail": str(exc)})
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _manifest(out_dir, "simulate", cfg, runs)
    return EXIT_OK


def _default_lemma_grid(system: SystemParams, count: int, seed: int):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = system.n
        alpha = float(np.clip(system.alpha + rng.uniform(-0.3, 0.3), 2.05, n - 0.05))
        R = float(np.clip(system.R + rng.uniform(-0.1, 0.1), 0.15, 0.9))
        rho = float(np.clip(system.rho + rng.uniform(-0.03, 0.03), 0.01, 0.45 * R))
        thr = SystemParams(n, alpha, 1.0, R, rho, system.c0).threshold
        f0 = system.f0 * rng.uniform(0.8, 1.5)
        if f0 <= thr:
            f0 = thr * rng.uniform(1.2, 2.0)
        bound = delta_lower_bound(n, alpha, f0)
        if bound >= 1.0:
            continue
        delta = float(bound + (1.0 - bound) * rng.uniform(0.3, 0.9))
        xi = float(rng.uniform(4.0 - 4.0 / n + 0.1, 4.0))
        gamma = float(4.0 / (R - rho) * 2.0 ** rng.uniform(0.5, 4.0))
        out.append({"n": n, "alpha": alpha, "f0": f0, "R": R, "rho": rho,
                    "xi": xi, "delta": delta, "gamma": gamma})
    return out


def cmd_verify_lemmas(cfg_path: str, out_flag=None) -> int:
    cfg = load_config(cfg_path)
    out_dir = _resolve_out(cfg, out_flag)
    sweep = cfg.lemma_sweep
    if sweep is not None and sweep.tuples:
        grid = [dict(t) for t in sweep.tuples]
    else:
        count = sweep.count if sweep is not None else 100
        seed = sweep.seed if sweep is not None else 20240808
        if count <= 0:
            raise ConfigError("lemma_sweep grid is empty")
        grid = _default_lemma_grid(cfg.system, count, seed)
    if not grid:
        raise ConfigError("lemma_sweep grid is empty")

    rows = []
    failing = []
    scan_written = False
    for item in grid:
        system = SystemParams(n=int(item["n"]), alpha=item["alpha"], f0=item["f0"],
                              R=item["R"], rho=item["rho"], c0=cfg.system.c0)
        row = {key: item[key] for key in ("n", "alpha", "f0", "R", "rho",
                                          "xi", "delta", "gamma")}
        try:
            system = validate(system)
            feasible = system.feasible
            tf = build_testfunction(system, item["xi"], item["delta"], item["gamma"])
            if not scan_written:
                # full margin scan for the first constructible tuple
                from .analysis import default_verification_profile, l_phi_rate, margin_grid

                profile = default_verification_profile(tf)
                scan = margin_grid(tf, profile)
                margins = l_phi_rate(tf, profile, scan) - tf.k0 * tf.gamma ** (2.0 / tf.n)
                _write_rows(out_dir / "margin_scan.csv", "s,margin",
                            list(zip(scan, margins)))
                scan_written = True
            ode = verify_ode_inequality(tf)
            bound = verify_integral_bound(tf)
            row.update(constructed=True, feasible=feasible,
                       margin=ode.min_margin, margin_ok=ode.passed,
                       integral=bound.numeric, integral_bound=bound.bound,
                       integral_ok=bound.passed)
            row["pass"] = bool(feasible and ode.passed and bound.passed)
        except ParameterError as exc:
            row.update(constructed=False, feasible=False, margin=float("nan"),
                       margin_ok=False, integral=float("nan"),
                       integral_bound=float("nan"), integral_ok=False)
            row["pass"] = False
            row["error"] = str(exc)
        rows.append(row)
        if not row["pass"]:
            failing.append(row)

    header = ("n,alpha,f0,R,rho,xi,delta,gamma,constructed,feasible,"
              "margin,margin_ok,integral,integral_bound,pass")
    _write_rows(out_dir / "lemma_checks.csv", header, [
        (r["n"], r["alpha"], r["f0"], r["R"], r["rho"], r["xi"], r["delta"], r["gamma"],
         r["constructed"], r["feasible"], r["margin"], r["margin_ok"],
         r["integral"], r["integral_bound"], r["pass"]) for r in rows])
    _manifest(out_dir, "verify-lemmas", cfg,
              runs=[{"tuples": len(rows), "failures": len(failing)}])
    if failing:
        for row in failing:
            print(f"FAIL: {row}", file=sys.stderr)
        return EXIT_LEMMA
    return EXIT_OK


def cmd_blowup(cfg_path: str, out_flag=None, threads: int = 1) -> int:
    cfg = load_config(cfg_path)
    out_dir = _resolve_out(cfg, out_flag)
    params = validate(cfg.system)
    if not params.feasible:
        print(f"infeasible: f0 = {params.f0} <= threshold {params.threshold!r}",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    if cfg.blowup is None:
        raise ConfigError("missing blowup section")
    params_, profile, mesh, w0, base = _prepare_run(cfg)
    blow = cfg.blowup
    t1 = blow.t0 + blow.eta / 2.0
    if not any(abs(t - t1) <= 1e-12 * max(1.0, t1) for t in base.output_times):
        raise ConfigError(f"output_times must contain t0 + eta/2 = {t1}")

    sec = cfg.solver
    runs = []
    try:
        if sec.eps_list:
            trajectories, sweep_report = proper_sweep(params, w0, base, sec.eps_list,
                                                      profile=profile, threads=threads)
            if not trajectories:
                raise SolverError(f"all sweep runs failed: {sweep_report.failures}")
            traj = trajectories[-1]
            runs.extend(t.metadata for t in trajectories)
        else:
            if sec.epsilon is None:
                raise ConfigError("solver.epsilon (or eps_list) is required for blowup")
            traj = solve_regularized(params, w0, base, profile)
            runs.append(traj.metadata)
    except SolverError as exc:
        _manifest(out_dir, "blowup", cfg, runs,
                  failure={"kind": "solver", "detail": str(exc)})
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    c_sub = blow.c_sub_override if blow.c_sub_override is not None \
        else measured_c_sub(traj, w0)

    tf_section = cfg.test_function
    if tf_section is not None and tf_section.delta is not None:
        xi, delta = tf_section.xi, tf_section.delta
    else:
        seed_defaults = default_testfn_params(params)
        xi = tf_section.xi if tf_section is not None else seed_defaults.xi
        delta = seed_defaults.delta
    tf_seed = TestFnParams(xi=xi, delta=delta, gamma=8.0 / (params.R - params.rho))

    try:
        selection = select_blowup_params(
            blow.t0, blow.eta, params.c0, c_sub, params, tf_seed,
            w_probe=lambda s: traj.w_at(s, t1))
    except SelectionError as exc:
        _manifest(out_dir, "blowup", cfg, runs,
                  failure={"kind": "selection", "failing": exc.failing,
                           "detail": str(exc)})
        print(f"parameter selection failure: {exc}", file=sys.stderr)
        return EXIT_SELECTION

    tf = build_testfunction(params, xi, delta, selection.gamma)
    y_rep = y_functional(traj, tf, selection.kappa, t1)
    report = blowup_indicator(traj, blow.betas, y_report=y_rep)

    _emit_run(traj, out_dir / "run")
    _write_rows(out_dir / "y_t.csv", "t,y,z",
                list(zip(y_rep.times, y_rep.y, y_rep.z)))
    payload = report.to_json_dict()
    payload["selection"] = {
        "kappa": selection.kappa, "s0": selection.s0, "gamma": selection.gamma,
        "c_sub": c_sub, "xi": xi, "delta": delta,
        "diagnostics": selection.diagnostics,
    }
    _write_json(out_dir / "blowup_report.json", payload)
    _manifest(out_dir, "blowup", cfg, runs)
    return EXIT_OK


def cmd_weak_residual(cfg_path: str, out_flag=None) -> int:
    cfg = load_config(cfg_path)
    out_dir = _resolve_out(cfg, out_flag)
    params, profile, mesh, w0, base = _prepare_run(cfg)
    sec = cfg.solver
    if sec.epsilon is None:
        raise ConfigError("solver.epsilon is required for weak-residual")
    wr = cfg.weak_residual
    runs = []

    def residuals_for(n_cells, max_dt, times):
        mesh_k = build_mesh(sec.s_max, n_cells, sec.ratio)
        w0_k = w0_from_density(RadialDensity.plateau(params.c0, 1.0), params.n,
                               mesh_k.nodes)
        cfg_k = SolverConfig(epsilon=sec.epsilon, t_end=sec.t_end, output_times=times,
                             cfl_safety=sec.cfl_safety, max_dt=max_dt,
                             limiter=sec.limiter)
        traj = solve_regularized(params, w0_k, cfg_k, profile)
        runs.append(traj.metadata)
        library = field_library(sec.s_max, sec.t_end, epsilon=sec.epsilon,
                                constant_window=wr.constant_window)
        unknown = [name for name in wr.fields if name not in library]
        if unknown:
            raise ConfigError(f"unknown weak_residual fields: {unknown}")
        return {name: weak_residual(traj, library[name], profile) for name in wr.fields}

    try:
        base_res = residuals_for(sec.N, sec.max_dt, sec.output_times)
        rows = [(name, rep.residual, rep.scale, rep.relative)
                for name, rep in base_res.items()]
        payload = {"base": {name: {"residual": rep.residual, "scale": rep.scale,
                                   "terms": rep.terms} for name, rep in base_res.items()}}
        if wr.refine:
            times = list(sec.output_times)
            dense = sorted(set(times) | {0.5 * (a + b) for a, b in zip(times, times[1:])})
            fine_res = residuals_for(2 * sec.N,
                                     sec.max_dt / 2.0 if sec.max_dt else None,
                                     tuple(dense))
            payload["refined"] = {name: {"residual": rep.residual, "scale": rep.scale}
                                  for name, rep in fine_res.items()}
            payload["orders"] = {
                name: float(np.log2(max(base_res[name].residual, 1e-300)
                                    / max(fine_res[name].residual, 1e-300)))
                for name in base_res}
    except SolverError as exc:
        _manifest(out_dir, "weak-residual", cfg, runs,
                  failure={"kind": "solver", "detail": str(exc)})
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    _write_rows(out_dir / "residuals.csv", "field,residual,scale,relative", rows)
    _write_json(out_dir / "residuals.json", payload)
    _manifest(out_dir, "weak-residual", cfg, runs)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ksblow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "simulate", "verify-lemmas", "blowup", "weak-residual"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        if name != "validate":
            p.add_argument("--out", default=None)
        if name in ("simulate", "blowup"):
            p.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.config)
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, args.threads)
        if args.command == "verify-lemmas":
            return cmd_verify_lemmas(args.config, args.out)
        if args.command == "blowup":
            return cmd_blowup(args.config, args.out, args.threads)
        if args.command == "weak-residual":
            return cmd_weak_residual(args.config, args.out)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KsblowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
