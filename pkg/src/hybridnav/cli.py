"""Command-line entry point: ``hybridnav validate|run|audit``.

Exit codes: 0 success, 1 infeasible scenario or failed audit, 2 unreadable
scenario or bad arguments.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import export
from .scenarios import Scenario, ScenarioError, load
from .sensor import SensorConfig
from .simulator import HybridTrajectory, audit, run
from .world import FeasibilityReport, nearest_obstacle, validate

log = logging.getLogger("hybridnav")

GAP_COLUMN_TOL = 1e-9


def feasibility(sc: Scenario) -> FeasibilityReport:
    """Separation and parameter checks plus start-state admissibility."""
    p = sc.params
    rep = validate(sc.world, p.gamma, p.gamma_a, p.gamma_s, p.epsilon)
    for k, xi in enumerate(sc.initial_states):
        gap = nearest_obstacle(sc.world, xi.x).distance - sc.world.r_a
        if gap < 0:
            rep.violations.append(f"initial state {k}: x0={xi.x.tolist()} lies within r_a of an obstacle (gap {gap:.4g})")
        if sc.world.workspace is not None and not sc.world.workspace.contains(xi.x[None], tol=0.0)[0]:
            rep.violations.append(f"initial state {k}: x0 outside the workspace")
    rep.ok = not rep.violations
    return rep


def _sim_overrides(args) -> dict:
    return {
        "dt_max": args.dt,
        "t_max": args.tmax,
        "convergence_radius": args.convergence_radius,
        "seed": args.seed,
        "pipeline": getattr(args, "pipeline", None),
    }


def _sensor(sc: Scenario, args) -> SensorConfig | None:
    cfg = sc.sensor
    if args.angular_resolution is not None or args.sensing_radius is not None:
        base = cfg or SensorConfig(1.0)
        cfg = SensorConfig(
            args.sensing_radius if args.sensing_radius is not None else base.sensing_radius,
            args.angular_resolution if args.angular_resolution is not None else base.angular_resolution,
        )
    return cfg


def simulate_one(scenario_path: str, index: int, overrides: dict, sensor: SensorConfig | None):
    """Run a single start of a scenario; returns ``(trajectory, summary, wall seconds)``."""
    sc = load(scenario_path)
    sim = sc.sim_config(**overrides)
    t0 = time.perf_counter()
    traj = run(sc.world, sc.params, sim, sc.initial_states[index], sensor=sensor)
    wall = time.perf_counter() - t0
    rep = audit(traj, sc.world, sc.params, convergence_radius=sim.convergence_radius,
                event_tolerance=sim.event_tolerance)
    summary = {
        "run": index,
        "x0": sc.initial_states[index].x.tolist(),
        "m0": sc.initial_states[index].m,
        "pipeline": sim.pipeline,
        "outcome": {"kind": traj.outcome.kind, "t_final": traj.outcome.t_final, "message": traj.outcome.message},
        "switch_times": [{"kind": k, "t": t} for k, t in traj.switch_times()],
        "lemma1": [
            {"t": c.t, "j": c.j, "obstacle": c.obstacle_index, "samples": c.samples, "found": c.found,
             "witness": None if c.witness is None else c.witness.tolist()}
            for c in traj.lemma1
        ],
        "audit": rep.to_dict(),
    }
    return traj, summary, wall


def _print_report(rep: FeasibilityReport, stream) -> None:
    print(json.dumps(export._jsonable(rep.to_dict()), indent=2), file=stream)


def cmd_validate(args) -> int:
    sc = load(args.scenario)
    rep = feasibility(sc)
    _print_report(rep, sys.stdout)
    for w in rep.warnings:
        log.warning(w)
    for v in rep.violations:
        print(f"infeasible: {v}", file=sys.stderr)
    return 0 if rep.ok else 1


def cmd_run(args) -> int:
    sc = load(args.scenario)
    rep = feasibility(sc)
    if not rep.ok:
        for v in rep.violations:
            print(f"infeasible: {v}", file=sys.stderr)
        return 1
    sensor = _sensor(sc, args)
    if args.pipeline == "sensed":
        if sensor is None:
            print("sensed pipeline needs a sensor section or --angular-resolution/--sensing-radius", file=sys.stderr)
            return 2
        sensor.check(sc.params)
    overrides = _sim_overrides(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = len(sc.initial_states)
    jobs = [(str(args.scenario), k, overrides, sensor) for k in range(n)]
    if args.jobs > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(simulate_one, *zip(*jobs)))
    else:
        results = [simulate_one(*job) for job in jobs]

    summaries = []
    curves = {}
    for k, (traj, summary, wall) in enumerate(results):
        stem = f"run_{k:02d}"
        export.write_csv(traj, out / f"{stem}.csv")
        export.write_json(summary, out / f"{stem}.audit.json")
        summaries.append(summary)
        curves[f"run {k}"] = traj.samples
        a = summary["audit"]
        print(f"{stem}: {summary['outcome']['kind']} t={summary['outcome']['t_final']:.3f}s "
              f"jumps={a['jump_count']} min_gap={a['min_gap']:.3e} audit={'pass' if a['passed'] else 'FAIL'} "
              f"({wall:.2f}s wall)")
    export.distance_plot(curves, sc.world, sc.params.gamma, out / "distance.svg")
    export.trajectory_plot(curves, sc.world, out / "trajectories.svg")
    passed = all(s["audit"]["passed"] and s["outcome"]["kind"] == "converged" for s in summaries)
    export.write_json({
        "scenario": sc.name,
        "pipeline": args.pipeline,
        "feasibility": rep.to_dict(),
        "runs": summaries,
        "passed": passed,
    }, out / "audit.json")
    return 0 if passed else 1


def cmd_audit(args) -> int:
    sc = load(args.scenario)
    sim = sc.sim_config(convergence_radius=args.convergence_radius)
    samples = export.read_csv(args.trajectory)
    if not samples:
        print(f"{args.trajectory}: no samples", file=sys.stderr)
        return 2
    rep = audit(HybridTrajectory(samples=samples), sc.world, sc.params,
                convergence_radius=sim.convergence_radius, event_tolerance=sim.event_tolerance)
    residual = float(max(abs(a - s.gap) for a, s in zip(export.recomputed_gaps(samples, sc.world), samples)))
    gap_ok = residual <= GAP_COLUMN_TOL
    report = {
        "trajectory": str(args.trajectory),
        "scenario": sc.name,
        "audit": rep.to_dict(),
        "gap_column": {"max_residual": residual, "ok": gap_ok},
        "passed": rep.passed and gap_ok,
    }
    print(json.dumps(export._jsonable(report), indent=2, sort_keys=True))
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridnav", description="Hybrid feedback navigation among convex obstacles.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check scenario feasibility")
    p.add_argument("scenario", type=Path)
    p.set_defaults(func=cmd_validate)

    def sim_flags(p):
        p.add_argument("--dt", type=float, help="maximum integration step [s]")
        p.add_argument("--tmax", type=float, help="simulated time limit [s]")
        p.add_argument("--convergence-radius", type=float, help="stop once |x| is below this [m]")
        p.add_argument("--seed", type=int, help="seed for the sampling-based checks")

    p = sub.add_parser("run", help="simulate every initial state of a scenario")
    p.add_argument("scenario", type=Path)
    p.add_argument("--pipeline", choices=("exact", "sensed"), default="exact")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    sim_flags(p)
    p.add_argument("--angular-resolution", type=int, help="number of sensor rays")
    p.add_argument("--sensing-radius", type=float)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for multi-start scenarios")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="re-audit a stored trajectory CSV")
    p.add_argument("trajectory", type=Path)
    p.add_argument("scenario", type=Path)
    p.add_argument("--convergence-radius", type=float)
    p.set_defaults(func=cmd_audit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
