"""Command line: ``edgematch detect | synth | bench | make-suite``.

Exit codes: 0 found, 1 error, 2 searched but nothing reached --min-score,
3 serial and parallel backends disagreed during a benchmark.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
import time
from pathlib import Path

from . import kernels
from .edges import EdgeThresholds, EmptyModelError
from .image import ImageSizeError, PnmParseError, build_pyramid, load_pgm, save_pgm, save_ppm
from .pose import PoseGrid, transform_point
from .search import Backend, Detection, NoDetection, SearchConfig, coarse_to_fine, level_models
from .similarity import ScoreParams
from .synth import GeometryError, Illumination, Occluder, Placement, SceneSpec, compose_scene, uniforms

EXIT_FOUND, EXIT_ERROR, EXIT_NO_DETECTION, EXIT_MISMATCH = 0, 1, 2, 3
BENCH_HEADER = ["sample", "backend", "workers", "run", "elapsed_ms"]


class CliError(Exception):
    pass


def _add_search_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("search")
    g.add_argument("--step-x", type=float, default=3.0, help="x step in pixels (default 3)")
    g.add_argument("--step-y", type=float, default=3.0, help="y step in pixels (default 3)")
    g.add_argument("--step-theta-deg", type=float, default=3.0)
    g.add_argument("--theta-min-deg", type=float, default=0.0)
    g.add_argument("--theta-max-deg", type=float, default=90.0)
    g.add_argument("--levels", type=int, default=3, help="pyramid levels (default 3)")
    g.add_argument("--neighborhood", type=int, default=3, help="odd voting window size (default 3)")
    g.add_argument("--polarity", choices=("signed", "ignore"), default="signed")
    g.add_argument("--low", type=float, default=None, help="low edge threshold (default 0.5 * high)")
    g.add_argument("--high", type=float, default=None,
                   help="high edge threshold (default 0.3 * max template gradient, per level)")
    g.add_argument("--min-score", type=float, default=0.5)
    g.add_argument("--topk", type=int, default=5)
    g.add_argument("--refine-radius", type=int, default=2)
    g.add_argument("--polish", type=int, default=0, help="extra level-0 refinement passes")
    g.add_argument("--refine-neighborhood", type=int, default=None,
                   help="voting window below the top level (default: --neighborhood)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgematch",
                                     description="Edge-orientation template matching")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="find a template in a search image")
    p.add_argument("--template", required=True, help="template PGM")
    p.add_argument("--image", required=True, help="search image PGM")
    _add_search_args(p)
    p.add_argument("--backend", choices=("serial", "parallel"), default="serial")
    p.add_argument("--workers", type=int, default=0, help="parallel threads (0 = all cores)")
    p.add_argument("--out", help="write the result JSON here (always printed to stdout)")
    p.add_argument("--overlay", help="write a PPM with the detected model drawn in red")

    p = sub.add_parser("synth", help="render a synthetic scene from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-image", required=True)
    p.add_argument("--out-truth", required=True)
    p.add_argument("--out-template", help="also write the rendered template PGM")

    p = sub.add_parser("bench", help="time serial vs parallel search on a fixture suite")
    p.add_argument("--suite", required=True,
                   help="directory of NAME.template.pgm / NAME.scene.pgm pairs")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV output path")
    _add_search_args(p)

    p = sub.add_parser("make-suite", help="write a seeded synthetic benchmark suite")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--samples", type=int, default=7)
    p.add_argument("--width", type=int, default=812)
    p.add_argument("--height", type=int, default=617)
    p.add_argument("--template-size", type=int, default=96)
    p.add_argument("--seed", type=int, default=2017)
    return parser


# --- helpers -----------------------------------------------------------------

def _read_pgm(path: str):
    try:
        return load_pgm(Path(path).read_bytes())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None
    except PnmParseError as exc:
        raise CliError(f"{path}: {exc}") from None


def _write(path: str, data: bytes | str):
    try:
        if isinstance(data, str):
            Path(path).write_text(data)
        else:
            Path(path).write_bytes(data)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}") from None


def make_config(args, width: int, height: int) -> SearchConfig:
    if args.step_x <= 0 or args.step_y <= 0 or args.step_theta_deg <= 0:
        raise CliError("steps must be positive")
    if args.theta_max_deg < args.theta_min_deg:
        raise CliError("--theta-max-deg must be >= --theta-min-deg")
    thresholds = None
    if args.high is not None:
        low = 0.5 * args.high if args.low is None else args.low
        thresholds = EdgeThresholds(low, args.high)
    elif args.low is not None:
        raise CliError("--low needs --high")
    refine = None
    if args.refine_neighborhood is not None:
        refine = ScoreParams(args.refine_neighborhood, args.polarity)
    # translation ranges clamped to the image
    grid = PoseGrid.from_degrees((0.0, width - 1.0, args.step_x), (0.0, height - 1.0, args.step_y),
                                 (args.theta_min_deg, args.theta_max_deg, args.step_theta_deg))
    return SearchConfig(grid, num_levels=args.levels,
                        score_params=ScoreParams(args.neighborhood, args.polarity),
                        min_score=args.min_score, topk=args.topk,
                        refine_radius=args.refine_radius, thresholds=thresholds,
                        polish_passes=args.polish, refine_params=refine)


def prepare(template, image, config: SearchConfig):
    """Pyramids and per-level models; everything a timed search reuses."""
    tp = build_pyramid(template, config.num_levels)
    wp = build_pyramid(image, config.num_levels)
    return tp, wp, level_models(tp, config.num_levels, config.thresholds)


def run_search(tp, wp, models, config: SearchConfig, backend: Backend):
    return coarse_to_fine(tp, wp, config, backend, models=models)


def result_dict(result: Detection | NoDetection, n_model_points: int, elapsed_ms: float,
                backend: Backend) -> dict:
    det = result.best if isinstance(result, NoDetection) else result
    return {
        "pose": {"x": det.pose.ux, "y": det.pose.uy, "theta_deg": math.degrees(det.pose.theta)},
        "score": det.score,
        "n_model_points": n_model_points,
        "elapsed_ms": elapsed_ms,
        "backend": backend.kind,
        "level_trace": [{"level": e.level, "x": e.pose.ux, "y": e.pose.uy,
                         "theta_deg": math.degrees(e.pose.theta), "score": e.score}
                        for e in det.level_trace],
    }


def overlay_points(model, pose) -> list[tuple[int, int]]:
    pts = []
    for x, y in zip(model.x, model.y):
        px, py = transform_point(pose, (x, y))
        pts.append((int(math.floor(px + 0.5)), int(math.floor(py + 0.5))))
    return pts


# --- commands ----------------------------------------------------------------

def cmd_detect(args) -> int:
    template = _read_pgm(args.template)
    image = _read_pgm(args.image)
    config = make_config(args, image.width, image.height)
    backend = Backend(args.backend, args.workers)
    tp, wp, models = prepare(template, image, config)
    t0 = time.perf_counter()
    result = run_search(tp, wp, models, config, backend)
    elapsed = (time.perf_counter() - t0) * 1000.0
    doc = result_dict(result, models[0].n, elapsed, backend)
    text = json.dumps(doc, indent=2)
    print(text)
    if args.out:
        _write(args.out, text + "\n")
    if args.overlay:
        det = result.best if isinstance(result, NoDetection) else result
        _write(args.overlay, save_ppm(image, overlay_points(models[0], det.pose), (255, 0, 0)))
    if isinstance(result, NoDetection):
        print(f"no detection: best score {result.score:.4f} < {result.min_score}", file=sys.stderr)
        return EXIT_NO_DETECTION
    return EXIT_FOUND


def cmd_synth(args) -> int:
    try:
        spec = SceneSpec.from_json(Path(args.spec).read_text())
    except OSError as exc:
        raise CliError(f"cannot read {args.spec}: {exc.strerror or exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid scene spec {args.spec}: {exc}") from None
    scene, truth = compose_scene(spec)
    _write(args.out_image, save_pgm(scene))
    _write(args.out_truth, json.dumps(truth.to_dict(), indent=2) + "\n")
    if args.out_template:
        _write(args.out_template, save_pgm(truth.template))
    return EXIT_FOUND


def find_suite(directory: str) -> list[tuple[str, Path, Path]]:
    d = Path(directory)
    if not d.is_dir():
        raise CliError(f"suite directory {directory} does not exist")
    samples = []
    for tpl in sorted(d.glob("*.template.pgm")):
        name = tpl.name[: -len(".template.pgm")]
        scene = d / f"{name}.scene.pgm"
        if scene.exists():
            samples.append((name, tpl, scene))
    return samples


def _same_outcome(a, b) -> bool:
    da = a.best if isinstance(a, NoDetection) else a
    db = b.best if isinstance(b, NoDetection) else b
    return type(a) is type(b) and da.pose == db.pose and da.score == db.score


def cmd_bench(args) -> int:
    samples = find_suite(args.suite)
    if not samples:
        raise CliError(f"no NAME.template.pgm / NAME.scene.pgm pairs in {args.suite}")
    if args.reps < 1 or args.warmup < 0:
        raise CliError("--reps must be >= 1 and --warmup >= 0")
    backends = [Backend("serial"), Backend("parallel", args.workers)]
    rows = []
    summaries = []
    for name, tpl_path, scene_path in samples:
        template, scene = _read_pgm(str(tpl_path)), _read_pgm(str(scene_path))
        config = make_config(args, scene.width, scene.height)
        tp, wp, models = prepare(template, scene, config)
        outcomes = [run_search(tp, wp, models, config, b) for b in backends]
        if not _same_outcome(*outcomes):
            a, b = (o.best if isinstance(o, NoDetection) else o for o in outcomes)
            print(f"{name}: backends disagree: serial {a.pose} score {a.score!r}, "
                  f"parallel {b.pose} score {b.score!r}", file=sys.stderr)
            return EXIT_MISMATCH
        times = {}
        for backend in backends:
            for _ in range(args.warmup):
                run_search(tp, wp, models, config, backend)
            times[backend.kind] = []
            for run in range(args.reps):
                t0 = time.perf_counter()
                run_search(tp, wp, models, config, backend)
                ms = (time.perf_counter() - t0) * 1000.0
                times[backend.kind].append(ms)
                rows.append([name, backend.kind, backend.workers, run, f"{ms:.3f}"])
        ser = statistics.median(times["serial"])
        par = statistics.median(times["parallel"])
        summaries.append((name, ser, par))
        print(f"{name}: serial {ser:.1f} ms, parallel {par:.1f} ms "
              f"({backends[1].workers} workers), speedup {ser / par:.2f}x, "
              f"time saved {100.0 * (1.0 - par / ser):.1f}%")
    try:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(BENCH_HEADER)
            w.writerows(rows)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    speedups = [s / p for _, s, p in summaries]
    print(f"median speedup over {len(summaries)} samples: {statistics.median(speedups):.2f}x "
          f"(kernel: {kernels.IMPLEMENTATION})")
    return EXIT_FOUND


_SUITE_SHAPES = ("rectangle", "ring", "cross", "L-bracket", "rectangle", "cross", "ring")


def suite_specs(n: int, width: int, height: int, size: int, seed: int) -> list[tuple[str, SceneSpec]]:
    """Seeded scenes mixing clutter, occlusion and lighting, one template per scene."""
    specs = []
    half = size * 0.75
    for i in range(n):
        u = uniforms(seed + i, 8)
        tid = _SUITE_SHAPES[i % len(_SUITE_SHAPES)]
        ux = round(half + u[0] * (width - 2 * half))
        uy = round(half + u[1] * (height - 2 * half))
        theta = round(u[2] * 90.0)
        occ = None
        if i % 3 == 1:
            occ = Occluder(int(ux - size // 2 - 4), int(uy - size // 2 - 4), int(size * 0.35),
                           size + 8, 200.0)
        illum = Illumination(0.6 + 0.9 * float(u[3]), float(-20 + 40 * u[4]), 1.0 if i % 2 else 0.8)
        spec = SceneSpec((width, height), tid, size, Placement(ux, uy, theta),
                         clutter_segments=15, clutter_seed=seed * 31 + i, occluder=occ,
                         illumination=illum, noise_sigma=2.0, noise_seed=seed * 17 + i)
        specs.append((f"s{i + 1}_{tid}", spec))
    return specs


def cmd_make_suite(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, spec in suite_specs(args.samples, args.width, args.height, args.template_size, args.seed):
        scene, truth = compose_scene(spec)
        _write(str(out / f"{name}.scene.pgm"), save_pgm(scene))
        _write(str(out / f"{name}.template.pgm"), save_pgm(truth.template))
        _write(str(out / f"{name}.spec.json"), spec.to_json() + "\n")
        _write(str(out / f"{name}.truth.json"), json.dumps(truth.to_dict(), indent=2) + "\n")
        print(f"wrote {name}")
    return EXIT_FOUND


COMMANDS = {"detect": cmd_detect, "synth": cmd_synth, "bench": cmd_bench,
            "make-suite": cmd_make_suite}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 means "no detection" here
        return EXIT_ERROR if exc.code else EXIT_FOUND
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
    except (EmptyModelError, ImageSizeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
