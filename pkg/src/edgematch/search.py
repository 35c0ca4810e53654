"""Exhaustive pose-lattice search, coarse-to-fine refinement and execution backends.

Every pose is scored independently with a fixed point-summation order, and winners
are chosen by (highest score, lowest linear index). That ordering is a total order,
so partitioning the lattice across threads cannot change the result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .edges import EdgeModel, EdgeThresholds, EmptyModelError, GradientField, compute_gradients, \
    extract_edge_model
from .image import Image, build_pyramid
from .kernels import PreparedSearch
from .pose import Pose, PoseGrid, grid_size, pose_at
from .similarity import ScoreParams

CHUNK = 1 << 14
MIN_THETA_STEP = math.radians(0.25)
MIN_TRANSLATION_STEP = 0.25


@dataclass(frozen=True)
class Backend:
    kind: str = "serial"
    worker_count: int = 0

    def __post_init__(self):
        if self.kind not in ("serial", "parallel"):
            raise ValueError(f"backend kind must be 'serial' or 'parallel', got {self.kind!r}")
        if self.worker_count < 0:
            raise ValueError("worker_count must be >= 0")

    @property
    def workers(self) -> int:
        if self.kind == "serial":
            return 1
        return self.worker_count or os.cpu_count() or 1

    def __str__(self):
        return self.kind


SERIAL = Backend("serial")


@dataclass(frozen=True)
class TraceEntry:
    level: int
    pose: Pose  # in that level's pixel coordinates
    score: float


@dataclass(frozen=True)
class Detection:
    pose: Pose
    score: float
    level_trace: tuple[TraceEntry, ...] = ()
    grid_index: int = 0
    n_inbounds: int = 0


@dataclass(frozen=True)
class NoDetection:
    """Search finished but nothing reached ``min_score``; ``best`` is what came closest."""

    best: Detection
    min_score: float

    @property
    def score(self) -> float:
        return self.best.score


@dataclass(frozen=True)
class SearchConfig:
    grid: PoseGrid  # level-0 coordinates
    num_levels: int = 1
    score_params: ScoreParams = field(default_factory=ScoreParams)
    min_score: float = 0.5
    topk: int = 5
    refine_radius: int = 2
    thresholds: EdgeThresholds | None = None  # None: relative to each level's max magnitude
    polish_passes: int = 0  # extra level-0 refinements, each halving all steps
    refine_params: ScoreParams | None = None  # scoring below the top level; None: score_params

    def __post_init__(self):
        if self.num_levels < 1:
            raise ValueError("num_levels must be >= 1")
        if self.topk < 1:
            raise ValueError("topk must be >= 1")
        if self.refine_radius < 1:
            raise ValueError("refine_radius must be >= 1")
        if not 0 <= self.min_score <= 1:
            raise ValueError("min_score must lie in [0, 1]")
        if self.polish_passes < 0:
            raise ValueError("polish_passes must be >= 0")


# --- reductions --------------------------------------------------------------

def _chunk_topk(scores: np.ndarray, offset: int, k: int) -> list[tuple[float, int]]:
    if len(scores) > k:
        kth = np.partition(scores, len(scores) - k)[len(scores) - k]
        cand = np.flatnonzero(scores >= kth)
    else:
        cand = np.arange(len(scores))
    order = np.lexsort((cand, -scores[cand]))[:k]
    return [(float(scores[cand[j]]), int(cand[j]) + offset) for j in order]


def merge_topk(parts, k: int) -> list[tuple[float, int]]:
    """Combine candidate lists by (score desc, index asc); associative and commutative."""
    merged = [c for part in parts for c in part]
    merged.sort(key=lambda c: (-c[0], c[1]))
    return merged[:k]


def _ranges(size: int, pieces: int):
    pieces = max(1, min(pieces, size))
    bounds = np.linspace(0, size, pieces + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _map_chunks(prep: PreparedSearch, backend: Backend, fn):
    size = prep.size
    if backend.kind == "serial":
        return [fn(a, b) for a, b in _ranges(size, math.ceil(size / CHUNK))]
    workers = backend.workers
    pieces = max(4 * workers, math.ceil(size / CHUNK))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(*r), _ranges(size, pieces)))


def _topk(prep: PreparedSearch, backend: Backend, k: int) -> list[tuple[float, int]]:
    def chunk(a, b):
        scores, _ = prep.score(a, b)
        return _chunk_topk(scores, a, k)

    return merge_topk(_map_chunks(prep, backend, chunk), k)


# --- public search operations -------------------------------------------------

def search_topk(model: EdgeModel, field: GradientField, grid: PoseGrid,
                params: ScoreParams = ScoreParams(), backend: Backend = SERIAL, k: int = 1,
                kernel: str | None = None) -> list[tuple[float, int]]:
    """The ``k`` best (score, grid index) pairs, best first, ties to the lower index."""
    return _topk(PreparedSearch(model, field, grid, params, kernel), backend, k)


def exhaustive_search(model: EdgeModel, field: GradientField, grid: PoseGrid,
                      params: ScoreParams = ScoreParams(), backend: Backend = SERIAL,
                      kernel: str | None = None) -> Detection:
    prep = PreparedSearch(model, field, grid, params, kernel)
    (score, index), = _topk(prep, backend, 1)
    _, inb = prep.score(index, index + 1)
    pose = pose_at(grid, index)
    return Detection(pose, score, (TraceEntry(model.source_level, pose, score),), index, int(inb[0]))


def score_map(model: EdgeModel, field: GradientField, grid: PoseGrid,
              params: ScoreParams = ScoreParams(), max_poses: int = 20_000_000,
              backend: Backend = SERIAL, kernel: str | None = None) -> np.ndarray:
    """Score of every lattice pose, indexed like ``pose_at``."""
    size = grid_size(grid)
    if size > max_poses:
        raise MemoryError(f"score map needs {size} poses, allowed {max_poses}")
    prep = PreparedSearch(model, field, grid, params, kernel)
    parts = _map_chunks(prep, backend, lambda a, b: prep.score(a, b)[0])
    return np.concatenate(parts) if parts else np.empty(0)


# --- coarse to fine -----------------------------------------------------------

def level_models(template_pyr: list[Image], num_levels: int,
                 thresholds: EdgeThresholds | None = None) -> list[EdgeModel]:
    models = []
    for level in range(num_levels):
        fld = compute_gradients(template_pyr[level])
        thr = thresholds if thresholds is not None else EdgeThresholds.relative(fld)
        try:
            models.append(extract_edge_model(fld, thr, level))
        except EmptyModelError as exc:
            raise EmptyModelError(exc.max_magnitude, level) from None
    return models


def finer_translation(pose: Pose, coarse_centroid, fine_centroid) -> tuple[float, float]:
    """Translation one level down that puts the finer model where the coarse one was.

    Doubling plus a correction for the half-pixel offset of 2x2 block centres and for
    the two models' centroids not coinciding exactly.
    """
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    ox = 2.0 * coarse_centroid[0] + 0.5 - fine_centroid[0]
    oy = 2.0 * coarse_centroid[1] + 0.5 - fine_centroid[1]
    return (2.0 * pose.ux + 0.5 - (c * ox - s * oy),
            2.0 * pose.uy + 0.5 - (s * ox + c * oy))


def _window(center: float, step: float, radius: int, lo: float, hi: float) -> tuple[float, float]:
    jmin = max(-radius, math.ceil((lo - center) / step - 1e-9))
    jmax = min(radius, math.floor((hi - center) / step + 1e-9))
    if jmin > jmax:
        v = min(max(center, lo), hi)
        return v, v
    return center + jmin * step, center + jmax * step


def coarse_to_fine(template_pyr: list[Image], working_pyr: list[Image], config: SearchConfig,
                   backend: Backend = SERIAL, kernel: str | None = None,
                   models: list[EdgeModel] | None = None) -> Detection | NoDetection:
    """Exhaustive search on the top pyramid level, then per-candidate local refinement.

    Each of the ``topk`` top-level candidates is refined independently down to level 0
    inside a +-``refine_radius`` step window. Steps halve at each finer level, counted
    in that level's pixels. ``polish_passes`` then repeats the level-0 window with halved
    steps. ``refine_params`` (if set) scores everything below the top level, which lets a
    wide voting window find the object and a narrow one pin it down.
    """
    L = config.num_levels
    if len(template_pyr) < L or len(working_pyr) < L:
        raise ValueError(f"both pyramids need {L} levels, got {len(template_pyr)} and {len(working_pyr)}")
    if models is None:
        models = level_models(template_pyr, L, config.thresholds)
    fields = [compute_gradients(working_pyr[k]) for k in range(L)]
    params = config.score_params
    rparams = config.refine_params or params
    g = config.grid
    scale = 2 ** (L - 1)
    top = PoseGrid(g.x0 / scale, g.x1 / scale, g.dx / scale,
                   g.y0 / scale, g.y1 / scale, g.dy / scale, g.t0, g.t1, g.dt)
    chains = []
    for score, index in search_topk(models[L - 1], fields[L - 1], top, params, backend,
                                    config.topk, kernel):
        pose = pose_at(top, index)
        chains.append({"index": index, "pose": pose, "score": score,
                       "trace": [TraceEntry(L - 1, pose, score)]})

    # steps are halved in each finer level's own pixels (a quarter, physically)
    sx, sy, st = top.dx, top.dy, g.dt
    r = config.refine_radius

    def refine(ch, k, ux, uy):
        f = 2 ** k
        xa, xb = _window(ux, sx, r, g.x0 / f, g.x1 / f)
        ya, yb = _window(uy, sy, r, g.y0 / f, g.y1 / f)
        ta, tb = _window(ch["pose"].theta, st, r, g.t0, g.t1)
        local = PoseGrid(xa, xb, sx, ya, yb, sy, ta, tb, st)
        det = exhaustive_search(models[k], fields[k], local, rparams, backend, kernel)
        ch["pose"], ch["score"] = det.pose, det.score
        ch["trace"].append(TraceEntry(k, det.pose, det.score))

    for k in range(L - 2, -1, -1):
        sx = max(sx / 2, 1.0)
        sy = max(sy / 2, 1.0)
        st = min(st, max(st / 2, MIN_THETA_STEP))
        for ch in chains:
            ux, uy = finer_translation(ch["pose"], models[k + 1].centroid_abs, models[k].centroid_abs)
            refine(ch, k, ux, uy)
    for _ in range(config.polish_passes):
        sx = min(sx, max(sx / 2, MIN_TRANSLATION_STEP))
        sy = min(sy, max(sy / 2, MIN_TRANSLATION_STEP))
        st = min(st, max(st / 2, MIN_THETA_STEP))
        for ch in chains:
            refine(ch, 0, ch["pose"].ux, ch["pose"].uy)

    best_rank = min(range(len(chains)), key=lambda i: (-chains[i]["score"], i))
    best = chains[best_rank]
    _, inb = PreparedSearch(models[0], fields[0], PoseGrid.single(best["pose"]), params, kernel).score()
    det = Detection(best["pose"], best["score"], tuple(best["trace"]), best["index"], int(inb[0]))
    if det.score >= config.min_score:
        return det
    return NoDetection(det, config.min_score)


def detect(template: Image, working: Image, config: SearchConfig, backend: Backend = SERIAL,
           kernel: str | None = None) -> Detection | NoDetection:
    """Build both pyramids and run :func:`coarse_to_fine`."""
    tp = build_pyramid(template, config.num_levels)
    wp = build_pyramid(working, config.num_levels)
    return coarse_to_fine(tp, wp, config, backend, kernel)

