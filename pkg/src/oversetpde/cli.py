"""Experiment runner: build problems from JSON configs, run, audit, report.

Usage:  oversetpde run <config.json> [--out DIR] [--seed N]

Each run writes ``diagnostics.csv`` (fixed column schema) and
``summary.json`` (metrics and pass/fail verdicts) into the output
directory and prints one line per verdict.  Exit status: 0 when every
verdict passes, 2 on a verdict failure, 1 on configuration or numerical
errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import coupling as cpl
from . import diagnostics as diag
from .config import ConfigError
from .exact import exact_scalar, exact_system_1d, gaussian
from .geometry import AlignmentError
from .linalg import eig_sym, hyperbolic_system
from .sbp import build_grid_1d, build_periodic_line
from .solver1d import Problem1D, SimulationDiverged, run_pair, run_simulation
from .solver2d import Problem2D

DEFAULT_TOLERANCES = {
    "energy_rate": 1e-11,
    "energy_rate_2d": 1e-10,
    "conservation": 1e-11,
    "conservation_2d": 1e-10,
    "energy_total": 1e-9,
    "growth_factor": 1.001,
}


# ---------------------------------------------------------------------------
# problem assembly
# ---------------------------------------------------------------------------


def _build_problem(cfg: dict, rng) -> tuple:
    """Returns (problem, ic_profile, oracle_or_None)."""
    mode = cfg["mode"]
    eta = float(cfg.get("eta", 0.5))
    negative = bool(cfg.get("negative_demo", False))
    if mode in ("scalar1d-char", "system1d-char", "system1d-penalty"):
        a = cfgmod.system_matrix(cfg)
        geom = cfgmod.geometry_1d(cfg)
        profile = cfgmod.initial_condition(cfg, a.shape[0], two_d=False, rng=rng)
        oracle = _oracle_1d(cfg, a)
        if mode == "system1d-penalty":
            cb, cc, _ = cfgmod.interface_couplings(cfg, two_d=False)
            prob = Problem1D(
                "penalty",
                hyperbolic_system(a),
                geom,
                (cb, cc),
                eta=eta,
                allow_uncertified=negative,
            )
        else:
            kind = "scalar-char" if mode == "scalar1d-char" else "system-char"
            prob = Problem1D(
                kind,
                hyperbolic_system(a),
                geom,
                strong_injection=bool(cfg.get("strong_injection", False)),
            )
        return prob, profile, oracle
    if mode in cfgmod.MODE_2D:
        a1, a2 = cfgmod.system_pair(cfg)
        with_points = mode == "system2d-overlap"
        geom = cfgmod.geometry_2d(cfg, with_points=with_points)
        cb, cc, _ = cfgmod.interface_couplings(cfg, two_d=True)
        overlap = cfgmod.overlap_coupling(cfg) if with_points else None
        prob = Problem2D(
            "penalty",
            (a1, a2),
            geom,
            (cb, cc),
            overlap=overlap,
            eta=eta,
            allow_uncertified=negative,
        )
        profile = cfgmod.initial_condition(cfg, a1.shape[0], two_d=True, rng=rng)
        return prob, profile, None
    if mode == "single-domain-ref":
        system = cfg["system"]
        g = cfg["geometry"]
        order = g.get("order", 4)
        if "A1" in system:
            a1, a2 = cfgmod.system_pair(cfg)
            nx = round((g["d"] - g["a"]) / g["h_u"])
            block = build_grid_1d((g["a"], g["d"]), nx + 1, order)
            yline = build_periodic_line(g["ly"], round(g["ly"] / g["h_y"]), order)
            prob = Problem2D("single", (a1, a2), block, yline=yline)
            profile = cfgmod.initial_condition(cfg, a1.shape[0], two_d=True, rng=rng)
            return prob, profile, None
        a = cfgmod.system_matrix(cfg)
        nx = round((g["d"] - g["a"]) / g["h_u"])
        block = build_grid_1d((g["a"], g["d"]), nx + 1, order)
        prob = Problem1D("single", hyperbolic_system(a), block)
        profile = cfgmod.initial_condition(cfg, a.shape[0], two_d=False, rng=rng)
        return prob, profile, _oracle_1d(cfg, a)
    raise ConfigError(f"config.mode: {mode!r} is not a simulation mode")


def _oracle_1d(cfg: dict, a: np.ndarray):
    """Exact translating solution, available for 1D gaussian initial data."""
    ic = cfg["ic"]
    if ic["type"] != "gaussian":
        return None
    g = gaussian(float(ic["x0"]), float(ic["sigma"]))
    weights = np.asarray(ic.get("weights", [1.0] * a.shape[0]), dtype=float)
    if a.shape[0] == 1:
        alpha = a[0, 0]
        return lambda x, t: exact_scalar(x, t, alpha, g)[:, None] * weights[0]
    dec = eig_sym(a)
    return lambda x, t: exact_system_1d(x, t, dec, g, weights)


def _reference_problem(cfg: dict, rng):
    """Single-domain problem and initial state matching the main run."""
    mode = cfg["mode"]
    g = cfg["geometry"]
    order = g.get("order", 4)
    if mode in cfgmod.MODE_2D:
        a1, a2 = cfgmod.system_pair(cfg)
        nx = round((g["d"] - g["a"]) / g["h_u"])
        block = build_grid_1d((g["a"], g["d"]), nx + 1, order)
        yline = build_periodic_line(g["ly"], round(g["ly"] / g["h_y"]), order)
        prob = Problem2D("single", (a1, a2), block, yline=yline)
        profile = cfgmod.initial_condition(cfg, a1.shape[0], two_d=True, rng=rng)
        return prob, prob.initial_state(profile)
    a = cfgmod.system_matrix(cfg)
    nx = round((g["d"] - g["a"]) / g["h_u"])
    block = build_grid_1d((g["a"], g["d"]), nx + 1, order)
    prob = Problem1D("single", hyperbolic_system(a), block)
    profile = cfgmod.initial_condition(cfg, a.shape[0], two_d=False, rng=rng)
    return prob, prob.initial_state(profile)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _domain_energy(problem, y0) -> float:
    """||w0||^2 over the full domain: u blocks plus the v outer block."""
    if problem.mode == "single":
        return diag.energy_breakdown(problem, y0)["normU"] ** 2
    yl = getattr(problem, "yline", None)
    fields = problem.fields(y0)
    total = 0.0
    for blk, q in [
        (problem.blocks[0], fields[0]),
        (problem.blocks[1], fields[1]),
        (problem.blocks[3], fields[3]),
    ]:
        total += diag._norm_sq(blk, yl, q)
    return total


def run_experiment(cfg: dict, seed: int | None = None) -> dict:
    """Run one simulation config; returns summary with 'series' attached."""
    rng = np.random.default_rng(seed)
    problem, profile, oracle = _build_problem(cfg, rng)
    y0 = problem.initial_state(profile)
    t_final = float(cfg["t_final"])
    cfl = float(cfg.get("cfl", 0.5))
    dt = float(cfg["dt"]) if "dt" in cfg else problem.dt_stable(cfl)

    reference = cfg.get("reference", "none")
    if reference == "single-domain":
        return run_equivalence(cfg, seed)
    series = diag.DiagnosticsSeries(problem.system.n)
    max_stage_rate = [-np.inf]

    def stage_monitor(t, y):
        max_stage_rate[0] = max(max_stage_rate[0], diag.energy_rate(problem, y))

    monitor = stage_monitor if bool(cfg.get("monitor_stages", True)) else None

    use_oracle = oracle if reference == "oracle" else None
    if reference == "oracle" and oracle is None:
        raise ConfigError("config.reference: no exact oracle available for this setup")

    def recorder(step, t, y):
        series.append(diag.collect(problem, t, y, oracle=use_oracle))

    y_final, t_end = run_simulation(
        problem, y0, t_final, dt=dt, recorder=recorder, stage_monitor=monitor
    )
    return _summarize(cfg, problem, y0, y_final, t_end, dt, series, max_stage_rate[0], seed)


def _summarize(cfg, problem, y0, y_final, t_end, dt, series, max_stage_rate, seed) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(cfg.get("tolerances", {}))
    two_d = getattr(problem, "yline", None) is not None and problem.mode != "single"
    e0 = diag.composite_energy(problem, y0)
    e_final = diag.composite_energy(problem, y_final)
    e_domain = _domain_energy(problem, y0)
    flux_cols = [f"fluxIn_{k + 1}" for k in range(problem.system.n)]
    flux_cols += [f"fluxOut_{k + 1}" for k in range(problem.system.n)]
    flux_scale = max(float(np.nanmax(np.abs(series.column(c)))) for c in flux_cols)
    cons_scale = max(1.0, e0, flux_scale)
    max_residual = float(np.nanmax(series.column("consResidual")))
    e_series = series.column("E")
    growth = float(np.nanmax(e_series) / e0) if e0 > 0 else 1.0
    max_dedt = float(np.nanmax(series.column("dEdt")))
    if max_stage_rate == -np.inf:
        max_stage_rate = max_dedt

    metrics = {
        "E0": e0,
        "E_final": e_final,
        "E_domain0": e_domain,
        "dt": dt,
        "steps": len(series) - 1,
        "max_dEdt": max_dedt,
        "max_stage_dEdt": max_stage_rate,
        "max_consResidual": max_residual,
        "conservation_scale": cons_scale,
        "flux_scale": flux_scale,
        "growth_factor": growth,
    }
    verdicts = {}
    negative = bool(cfg.get("negative_demo", False))
    rate_tol = tol["energy_rate_2d"] if two_d else tol["energy_rate"]
    cons_tol = tol["conservation_2d"] if two_d else tol["conservation"]
    if problem.mode != "single":
        para = np.abs(
            np.array([r.get("parasitic_c", np.nan) for r in series.records], dtype=float)
        ) + np.abs(np.array([r.get("parasitic_b", np.nan) for r in series.records], dtype=float))
        metrics["max_parasitic"] = float(np.nanmax(para))
    if negative:
        pb = series.column("P_b")
        metrics["min_P_b"] = float(np.nanmin(pb)) if not np.all(np.isnan(pb)) else None
        verdicts["demo_energy_growth"] = growth > tol["growth_factor"]
        verdicts["demo_parasitic_nonzero"] = metrics["max_parasitic"] > 1e-8 * max(1.0, e0)
    elif problem.mode == "penalty":
        verdicts["energy_bounded"] = (
            max_stage_rate <= rate_tol * max(e0, 1e-30)
            and e_final <= e0 * (1.0 + tol["energy_total"])
        )
        verdicts["conservative"] = max_residual <= cons_tol * cons_scale
    elif problem.mode in ("scalar-char", "system-char"):
        bu = series.records[-1]["normU"] ** 2
        bv = series.records[-1]["normV"] ** 2
        metrics["normU_final_sq"] = bu
        metrics["normV_final_sq"] = bv
        verdicts["energy_bounded"] = (
            bu <= e_domain * (1.0 + tol["energy_total"])
            and bv <= e_domain * (1.0 + tol["energy_total"])
        )
    else:
        verdicts["energy_bounded"] = e_final <= e0 * (1.0 + tol["energy_total"])
        verdicts["conservative"] = max_residual <= cons_tol * cons_scale

    err_u = series.column("errU")
    if not np.all(np.isnan(err_u)):
        metrics["errU_final"] = float(err_u[-1])
        metrics["errV_final"] = float(series.column("errV")[-1])

    return {
        "mode": cfg["mode"],
        "seed": seed,
        "metrics": metrics,
        "verdicts": verdicts,
        "pass": all(verdicts.values()),
        "series": series,
    }


def run_equivalence(cfg: dict, seed: int | None = None) -> dict:
    """Simulation with a lockstep single-domain reference run."""
    rng = np.random.default_rng(seed)
    problem, profile, _ = _build_problem(cfg, rng)
    ref_prob, ref_y0 = _reference_problem(cfg, np.random.default_rng(seed))
    y0 = problem.initial_state(profile)
    cfl = float(cfg.get("cfl", 0.5))
    dt = float(cfg["dt"]) if "dt" in cfg else min(problem.dt_stable(cfl), ref_prob.dt_stable(cfl))
    series = diag.DiagnosticsSeries(problem.system.n)

    def recorder(step, t, ys):
        series.append(diag.collect(problem, t, ys[0], reference=(ref_prob, ys[1])))

    ys, t_end = run_pair([problem, ref_prob], [y0, ref_y0], float(cfg["t_final"]), dt, recorder)
    return _summarize(cfg, problem, y0, ys[0], t_end, dt, series, -np.inf, seed)


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------


def _refine(cfg: dict, factor: float) -> dict:
    out = json.loads(json.dumps(cfg))
    g = out["geometry"]
    for key in ("h_u", "h_v", "h_y"):
        if key in g:
            g[key] = g[key] / factor
    return out


def convergence_study(cfg: dict, seed: int | None = None) -> dict:
    """Run the base config over refinement levels and fit observed orders."""
    base = cfg["base"]
    levels = cfg["levels"]
    if len(levels) < 3:
        raise ConfigError("config.levels: need at least 3 levels")
    solver = cfg.get("solver", "pde")
    reference = base.get("reference", "oracle")
    rows = []
    for factor in levels:
        level_cfg = _refine(base, float(factor))
        if solver == "oracle":
            rng = np.random.default_rng(seed)
            problem, profile, oracle = _build_problem(level_cfg, rng)
            if oracle is None:
                raise ConfigError("config.solver: oracle mode needs an exact solution")
            t = float(level_cfg["t_final"])
            y = problem.initial_state(lambda x: oracle(x, t))
            err_u, err_v = diag.oracle_error(problem, y, t, oracle)
            summary = {"metrics": {"errU_final": err_u, "errV_final": err_v}}
        elif reference == "single-domain":
            summary = run_equivalence(level_cfg, seed)
        else:
            summary = run_experiment(level_cfg, seed)
        m = summary["metrics"]
        if "errU_final" not in m:
            raise ConfigError("config.base: study runs must produce equivalence errors")
        h = level_cfg["geometry"]["h_u"]
        rows.append({"h": h, "errU": m["errU_final"], "errV": m["errV_final"],
                     "err": m["errU_final"] + m["errV_final"]})
    errs = np.array([r["err"] for r in rows])
    floor = bool(np.all(errs < 1e-11))
    ratios = []
    for k in range(len(errs) - 1):
        step = np.log2(levels[k + 1] / levels[k])
        ratios.append(float(np.log2(errs[k] / errs[k + 1]) / step) if not floor else None)
    observed = None if floor else float(np.mean([r for r in ratios if r is not None]))
    order = cfg["base"]["geometry"].get("order", 4)
    min_order = cfg.get("min_order", order - 0.5)
    verdicts = {"equivalence_order": True if floor else observed >= min_order}
    return {
        "mode": "convergence-study",
        "levels": list(levels),
        "table": rows,
        "orders": ratios,
        "observed_order": "floor" if floor else observed,
        "min_order": min_order,
        "verdicts": verdicts,
        "pass": all(verdicts.values()),
    }


# ---------------------------------------------------------------------------
# coupling certification mode
# ---------------------------------------------------------------------------


def certify_coupling(cfg: dict) -> dict:
    a = cfgmod.system_matrix(cfg)
    beta = float(cfg["beta"])
    spec = cfg.get("coupling", "upwind")
    tol_ = float(cfg.get("tol", 1e-12))
    if spec == "upwind":
        coupling = cpl.make_upwind_coupling(a, beta, tol_)
    else:
        coupling = cpl.InterfaceCoupling.from_dict(
            {"A_n": a.tolist(), "beta": beta, "SigmaU": spec["SigmaU"], "SigmaV": spec["SigmaV"]},
            tol_,
        )
    verdict = coupling.verdict
    out = {
        "mode": "certify-coupling",
        "coupling": coupling.as_dict(),
        "verdicts": {"certified": verdict.passed},
        "reason": verdict.reason,
        "pass": verdict.passed,
    }
    if verdict.witness is not None:
        out["witness"] = verdict.witness.tolist()
    return out


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def run(config_path, out_dir=None, seed: int | None = None) -> int:
    """Run a config file; write artifacts; return the process exit code."""
    try:
        cfg = cfgmod.load_config(config_path)
        out = Path(out_dir) if out_dir else Path(config_path).parent / "out"
        out.mkdir(parents=True, exist_ok=True)
        mode = cfg["mode"]
        if mode == "certify-coupling":
            summary = certify_coupling(cfg)
        elif mode == "convergence-study":
            summary = convergence_study(cfg, seed)
        elif cfg.get("reference", "none") == "single-domain":
            summary = run_equivalence(cfg, seed)
        else:
            summary = run_experiment(cfg, seed)
    except (ConfigError, AlignmentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    series = summary.pop("series", None)
    if series is not None:
        series.to_csv(out / "diagnostics.csv")
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, default=_json_default)
        fh.write("\n")
    for name, ok in summary["verdicts"].items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    return 0 if summary["pass"] else 2


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oversetpde", description="overset-grid experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run one experiment config")
    runp.add_argument("config", help="path to the JSON experiment config")
    runp.add_argument("--out", default=None, help="output directory (default: <config dir>/out)")
    runp.add_argument("--seed", type=int, default=None, help="seed for randomized initial data")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, args.seed)
    parser.error(f"unknown command {args.command}")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
