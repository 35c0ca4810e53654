"""Time the compiled and pure-Python scoring kernels on the same lattice.

    python benchmarks/bench_kernels.py --size 256 --template 48 --reps 3
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from edgematch import kernels
from edgematch.edges import compute_gradients
from edgematch.pose import PoseGrid
from edgematch.search import level_models
from edgematch.similarity import ScoreParams
from edgematch.synth import Placement, SceneSpec, compose_scene


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256, help="square scene side in pixels")
    ap.add_argument("--template", type=int, default=48)
    ap.add_argument("--step", type=float, default=3.0, help="x/y step (px) and theta step (deg)")
    ap.add_argument("--neighborhood", type=int, default=3)
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args(argv)

    c = args.size / 2
    spec = SceneSpec((args.size, args.size), "L-bracket", args.template, Placement(c, c, 30.0),
                     clutter_segments=20, clutter_seed=1)
    scene, truth = compose_scene(spec)
    model = level_models([truth.template], 1)[0]
    field = compute_gradients(scene)
    grid = PoseGrid.from_degrees((0, args.size - 1, args.step), (0, args.size - 1, args.step),
                                 (0, 90, args.step))
    params = ScoreParams(args.neighborhood)
    print(f"{grid.nx * grid.ny * grid.nt} poses x {model.n} model points, "
          f"window {args.neighborhood}")

    results = {}
    for name in sorted(kernels.KERNELS):
        prep = kernels.PreparedSearch(model, field, grid, params, name)
        times = []
        for _ in range(args.reps):
            t0 = time.perf_counter()
            scores, _ = prep.score()
            times.append(time.perf_counter() - t0)
        results[name] = scores
        print(f"{name:>9}: median {1000 * statistics.median(times):9.1f} ms")
    if len(results) == 2:
        same = np.array_equal(results["compiled"], results["python"])
        print(f"bit-identical scores: {same}")
        return 0 if same else 1
    print("compiled kernel not built; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
