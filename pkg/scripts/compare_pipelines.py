"""Switch times of the exact and sensed pipelines, side by side.

    python scripts/compare_pipelines.py study1 --rays 4096
"""
import argparse
import time

from hybridnav.scenarios import corpus_path, load
from hybridnav.sensor import SensorConfig
from hybridnav.simulator import run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario", help="bundled scenario name or path to a YAML file")
    ap.add_argument("--rays", type=int, default=None, help="override the sensor ray count")
    args = ap.parse_args()
    path = corpus_path(args.scenario) if "/" not in args.scenario else args.scenario
    sc = load(path)
    sensor = sc.sensor
    if args.rays:
        sensor = SensorConfig(sensor.sensing_radius, args.rays)
    for k, xi0 in enumerate(sc.initial_states):
        t0 = time.perf_counter()
        ex = run(sc.world, sc.params, sc.sim_config(pipeline="exact"), xi0)
        t1 = time.perf_counter()
        se = run(sc.world, sc.params, sc.sim_config(pipeline="sensed"), xi0, sensor=sensor)
        t2 = time.perf_counter()
        a, b = ex.switch_times(), se.switch_times()
        same = [ka for ka, _ in a] == [kb for kb, _ in b]
        worst = max((abs(ta - tb) for (_, ta), (_, tb) in zip(a, b)), default=0.0) if same else float("nan")
        print(f"start {k}: exact {ex.outcome.kind} {a} ({t1 - t0:.1f}s)")
        print(f"         sensed {se.outcome.kind} {b} ({t2 - t1:.1f}s) same_kinds={same} max_dt={worst:.2e}")


if __name__ == "__main__":
    main()
