"""Rerun both simulation studies and write their artifacts.

    python scripts/reproduce_studies.py --out results/ [--pipeline sensed] [--jobs 4]

Each study lands in its own subdirectory (CSV per start, audit JSON, SVG figures).
"""
import argparse
import sys
import time
from pathlib import Path

from hybridnav.cli import main as cli
from hybridnav.scenarios import corpus_path


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--pipeline", choices=("exact", "sensed"), default="exact")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--studies", nargs="+", default=["study1", "study2"])
    args = ap.parse_args()
    worst = 0
    for name in args.studies:
        t0 = time.perf_counter()
        code = cli(["run", str(corpus_path(name)), "--out", str(args.out / name),
                    "--pipeline", args.pipeline, "--jobs", str(args.jobs)])
        print(f"{name}: exit {code}, {time.perf_counter() - t0:.1f}s -> {args.out / name}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
