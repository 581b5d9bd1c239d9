"""Command line interface: certify, loadflow, simulate, compare, proptest.

Reports go to stdout as JSON; diagnostics go to stderr as one JSON object per
line.  Exit status is 0 only on full success, 1 when a check or run fails and
2 for unusable input.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import certificates as cert
from . import controllers as ctl
from . import loadflow
from .dynamics import SimulationError, simulate, steady_state_metrics
from .generate import check_implication, random_certified_network
from .output import write_plots, write_trajectory_csv
from .scenario import ScenarioError, ScenarioFile, parse_scenario

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
VOLTAGE_BAND = 0.05


def _diag(level: str, message: str, **extra):
    print(json.dumps({"level": level, "message": message, **extra}, default=str), file=sys.stderr)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _emit(report: dict):
    print(json.dumps(report, indent=2, default=_jsonable))


def out_dir(arg: str | None) -> Path:
    d = Path(arg or os.environ.get("ADHOCGRID_OUT_DIR", "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_certify(sc: ScenarioFile) -> tuple[int, dict]:
    rated = sc.rated_powers()
    report, sol = cert.certify(sc.graph, sc.v_ref, sc.v_min, p_rated=rated, tolerance=sc.lf_tolerance)
    out = {
        "command": "certify",
        "scenario": sc.to_dict(),
        "p_rated_W": rated,
        **report.to_dict(),
        "equilibrium": sol.to_dict(),
        "note": "design rules are sufficient for every topology and tight for a single source and load",
    }
    if sc.graph.n_l:
        z = loadflow.effective_impedance(sc.graph)
        out["effective_impedance"] = {"z_inf_star_ohm": z.z_inf_star, "z_row_sum_ohm": z.z_row_sum,
                                      "certificate_norm": "max diagonal entry Z_kk"}
    return (EXIT_OK if report.passed else EXIT_FAIL), out


def cmd_loadflow(sc: ScenarioFile, controller: str | None = None, rated: bool = False) -> tuple[int, dict]:
    g = sc.graph.with_load_powers(sc.rated_powers()) if rated else sc.graph
    kind = sc.kind(controller)
    if isinstance(kind, ctl.DroopOnly):
        u = [sc.graph.buses[k].u0 or sc.v_ref for k in g.source_idx]
        sol = loadflow.solve_droop_equilibrium(g, u, sc.lf_tolerance, sc.lf_max_iter)
        variant = "droop: fixed setpoints behind droop resistance"
    else:
        sol = loadflow.solve_equilibrium(g, sc.v_ref, sc.lf_tolerance, sc.lf_max_iter)
        variant = "source buses pinned to v_ref"
    out = {"command": "loadflow", "scenario": sc.to_dict(), "variant": variant, **sol.to_dict()}
    if not sol.converged:
        _diag("error", sol.message, residual_norm_W=sol.residual_norm)
    return (EXIT_OK if sol.converged else EXIT_FAIL), out


def _run(sc: ScenarioFile, kind):
    return simulate(sc.graph, kind, sc.v_ref, sc.events, sc.sim, c_u=sc.gains.get("c_u", 1.0))


def _settle_time(traj, t_from: float) -> float | None:
    bad = np.nonzero((traj.t >= t_from) & (np.abs(traj.v_bar - traj.v_ref) >= VOLTAGE_BAND))[0]
    if len(bad) == 0:
        return t_from
    if bad[-1] == len(traj.t) - 1:
        return None
    return float(traj.t[bad[-1] + 1])


def _summarize(sc: ScenarioFile, traj, lam) -> dict:
    summary = {"status": traj.status, "message": traj.message, "steps": traj.steps,
               "rejections": traj.rejections, "samples": len(traj)}
    try:
        summary["metrics"] = steady_state_metrics(traj, min(sc.metrics_window, traj.t[-1] - traj.t[0]), lam)
    except ValueError as exc:
        summary["metrics"] = None
        summary["metrics_error"] = str(exc)
    t_last = max([0.0] + [e.time for e in sc.events])
    summary["voltage_settle_time_s"] = _settle_time(traj, t_last)
    summary["terminal"] = {"P_W": traj.P[-1], "v_bar_V": float(traj.v_bar[-1])}
    return summary


def _write_run(sc, traj, d: Path, plots: bool) -> dict:
    d.mkdir(parents=True, exist_ok=True)
    files = {"csv": str(write_trajectory_csv(traj, sc.graph, d / "trajectory.csv"))}
    if plots:
        files["plots"] = [str(p) for p in write_plots(traj, sc.graph, d, sc.labels)]
    return files


def cmd_simulate(sc: ScenarioFile, out: Path, controller: str | None = None, plots: bool = True) -> tuple[int, dict]:
    kind = sc.kind(controller)
    warn = ctl.lambda_warning(kind, sc.graph.n_s)
    if warn:
        _diag("warning", warn)
    traj = _run(sc, kind)
    files = _write_run(sc, traj, out, plots and sc.plots)
    report = {"command": "simulate", "scenario": sc.to_dict(), "controller": kind.name,
              "targets": ctl.steady_state_targets(kind), **_summarize(sc, traj, _lam_for(sc, kind)),
              "files": files}
    if not traj.ok:
        report["partial"] = True
        _diag("error", traj.message, status=traj.status, t=float(traj.t[-1]))
    return (EXIT_OK if traj.ok else EXIT_FAIL), report


def _lam_for(sc, kind):
    return kind.lam_vector(sc.graph.n_s) if isinstance(kind, ctl.Multipurpose) else sc.lam


def cmd_compare(sc: ScenarioFile, out: Path, plots: bool = True, parallel: bool = True) -> tuple[int, dict]:
    kinds = {"standard": sc.kind("standard"), "multipurpose": sc.kind("multipurpose")}
    if parallel and len(os.sched_getaffinity(0)) > 1:
        with ProcessPoolExecutor(max_workers=2) as pool:
            futures = {name: pool.submit(_run, sc, k) for name, k in kinds.items()}
            trajs = {name: f.result() for name, f in futures.items()}
    else:
        trajs = {name: _run(sc, k) for name, k in kinds.items()}
    lam = sc.lam
    report = {"command": "compare", "scenario": sc.to_dict(), "strategies": {}}
    for name, traj in trajs.items():
        entry = _summarize(sc, traj, lam)
        entry["targets"] = ctl.steady_state_targets(kinds[name])
        entry["files"] = _write_run(sc, traj, out / name, plots and sc.plots)
        report["strategies"][name] = entry
    ok = all(t.ok for t in trajs.values())
    if not ok:
        _diag("error", "at least one run failed", statuses={k: t.status for k, t in trajs.items()})
    (out / "comparison.json").write_text(json.dumps(report, indent=2, default=_jsonable) + "\n")
    return (EXIT_OK if ok else EXIT_FAIL), report


def cmd_proptest(seed: int, count: int) -> tuple[int, dict]:
    rng = np.random.default_rng(seed)
    failures = []
    for j in range(count):
        case = random_certified_network(rng)
        ok, msg = check_implication(case)
        if not ok:
            failures.append({"case": j, "n": case.graph.n, "m": case.graph.m, "reason": msg})
    report = {"command": "proptest", "seed": seed, "count": count, "failures": failures}
    return (EXIT_OK if not failures else EXIT_FAIL), report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adhocgrid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("--scenario", required=True, help="scenario JSON path or bundled name")
        p.add_argument("--out", help="output directory (default $ADHOCGRID_OUT_DIR or ./out)")

    p = sub.add_parser("certify", help="topology-free and topology-aware stability checks")
    scenario_args(p)
    p = sub.add_parser("loadflow", help="solve the equilibrium load flow")
    scenario_args(p)
    p.add_argument("--controller", help="override controller kind")
    p.add_argument("--rated", action="store_true", help="use rated (post-event) load powers")
    p = sub.add_parser("simulate", help="integrate one scenario, write CSV and plots")
    scenario_args(p)
    p.add_argument("--controller", help="override controller kind")
    p.add_argument("--no-plots", action="store_true")
    p = sub.add_parser("compare", help="standard vs multipurpose secondary control")
    scenario_args(p)
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--sequential", action="store_true", help="run the two simulations one after the other")
    p = sub.add_parser("proptest", help="random certified networks must be stable")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1000)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "proptest":
            code, report = cmd_proptest(args.seed, args.count)
        else:
            sc = parse_scenario(args.scenario)
            if args.command == "certify":
                code, report = cmd_certify(sc)
            elif args.command == "loadflow":
                code, report = cmd_loadflow(sc, args.controller, args.rated)
            elif args.command == "simulate":
                code, report = cmd_simulate(sc, out_dir(args.out), args.controller, not args.no_plots)
            else:
                code, report = cmd_compare(sc, out_dir(args.out), not args.no_plots, not args.sequential)
    except ScenarioError as exc:
        _diag("error", str(exc), kind="scenario")
        return EXIT_INPUT
    except (ValueError, SimulationError) as exc:
        _diag("error", str(exc), kind=type(exc).__name__)
        return EXIT_FAIL
    _emit(report)
    return code


if __name__ == "__main__":
    sys.exit(main())
