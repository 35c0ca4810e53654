import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgematch.edges import EdgeThresholds, compute_gradients, extract_edge_model
from edgematch.image import Image, build_pyramid
from edgematch.pose import Pose, PoseGrid, grid_size, pose_at
from edgematch.search import (Backend, Detection, NoDetection, SearchConfig, coarse_to_fine,
                              detect, exhaustive_search, finer_translation, level_models,
                              merge_topk, score_map, search_topk)
from edgematch.similarity import ScoreParams, pose_score
from edgematch.synth import Placement, SceneSpec, compose_scene, expected_model_pose, render_template
from oracle import brute_force_search, model_points


def model_of(tid="cross", size=16):
    f = compute_gradients(render_template(tid, size))
    return extract_edge_model(f, EdgeThresholds.relative(f))


def noisy_field(seed, size=28):
    rng = np.random.default_rng(seed)
    return compute_gradients(Image(rng.uniform(0, 255, (size, size))))


SMALL = PoseGrid(0, 27, 1, 0, 27, 1, 0.0, math.radians(30), math.radians(15))


def test_single_pose_grid_returns_that_pose():
    model = model_of()
    f = noisy_field(0)
    pose = Pose(10, 12, 0.2)
    det = exhaustive_search(model, f, PoseGrid.single(pose))
    assert det.pose == pose and det.grid_index == 0
    assert det.score == pose_score(model, pose, f).value


def test_self_match_found_exactly():
    img = render_template("L-bracket", 24)
    f = compute_gradients(img)
    model = extract_edge_model(f, EdgeThresholds.relative(f))
    cx, cy = model.centroid_abs
    grid = PoseGrid(cx - 3, cx + 3, 1, cy - 3, cy + 3, 1, -0.2, 0.2, 0.1)
    det = exhaustive_search(model, f, grid, ScoreParams(1))
    assert det.score == pytest.approx(1.0)
    assert (det.pose.ux, det.pose.uy) == (cx, cy) and abs(det.pose.theta) < 1e-12


def test_ties_go_to_lowest_index():
    z = np.zeros((10, 10))
    from edgematch.edges import GradientField
    det = exhaustive_search(model_of(), GradientField(z, z, z), PoseGrid(0, 9, 1, 0, 9, 1, 0, 0, 1))
    assert det.score == 0.0 and det.grid_index == 0


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("nb", [1, 3])
def test_matches_brute_force(seed, nb):
    model = model_of(("cross", "ring", "rectangle", "L-bracket")[seed])
    f = noisy_field(seed)
    det = exhaustive_search(model, f, SMALL, ScoreParams(nb))
    best, index = brute_force_search(model_points(model), f.gx, f.gy, f.mag, SMALL.xs(), SMALL.ys(),
                                     SMALL.thetas(), nb)
    assert abs(det.score - best) <= 1e-9
    assert det.grid_index == index


def test_score_map_agrees_with_pose_score():
    model = model_of()
    f = noisy_field(3)
    grid = PoseGrid(2, 20, 3, 4, 22, 3, 0, 1, 0.5)
    m = score_map(model, f, grid)
    assert m.shape == (grid_size(grid),)
    for i in range(0, len(m), 7):
        assert m[i] == pose_score(model, pose_at(grid, i), f).value
    det = exhaustive_search(model, f, grid)
    assert det.grid_index == int(np.argmax(m)) and det.score == m.max()


def test_score_map_size_guard():
    with pytest.raises(MemoryError, match="1000"):
        score_map(model_of(), noisy_field(0), PoseGrid(0, 9, 1, 0, 9, 1, 0, 9, 1), max_poses=999)


@pytest.mark.parametrize("backend", [Backend("parallel", 2), Backend("parallel", 4),
                                     Backend("parallel", 0)])
def test_backends_identical(backend):
    model = model_of("ring")
    f = noisy_field(9, 40)
    grid = PoseGrid(0, 39, 0.5, 0, 39, 0.5, 0, 1.5, 0.1)
    assert exhaustive_search(model, f, grid, backend=backend) == exhaustive_search(model, f, grid)
    assert np.array_equal(score_map(model, f, grid, backend=backend), score_map(model, f, grid))
    assert search_topk(model, f, grid, backend=backend, k=7) == search_topk(model, f, grid, k=7)


def test_backend_validation():
    with pytest.raises(ValueError):
        Backend("gpu")
    with pytest.raises(ValueError):
        Backend("parallel", -1)
    assert Backend("serial", 8).workers == 1


@settings(max_examples=50)
@given(st.lists(st.lists(st.tuples(st.sampled_from([0.0, 0.5, 1.0]), st.integers(0, 50)),
                         max_size=6), max_size=5), st.integers(1, 8))
def test_merge_topk_order_independent(parts, k):
    parts = [sorted(set(p), key=lambda c: (-c[0], c[1])) for p in parts]
    a = merge_topk(parts, k)
    b = merge_topk(parts[::-1], k)
    assert a == b
    assert a == sorted(a, key=lambda c: (-c[0], c[1]))


def test_config_validation():
    g = PoseGrid.single(Pose(0, 0, 0))
    for bad in ({"num_levels": 0}, {"topk": 0}, {"refine_radius": 0}, {"min_score": 1.5},
                {"polish_passes": -1}):
        with pytest.raises(ValueError):
            SearchConfig(g, **bad)


def test_finer_translation_identity_at_zero_rotation():
    # centroids consistent with a 2x2 box downsample map back without correction terms
    assert finer_translation(Pose(10, 20, 0.0), (5.0, 5.0), (10.5, 10.5)) == (20.5, 40.5)


# --- coarse to fine ---------------------------------------------------------------

def rotated_scene(theta_deg, tid="L-bracket", size=40, canvas=(128, 112), clutter=0, seed=0):
    spec = SceneSpec(canvas, tid, size, Placement(61.0, 55.0, theta_deg),
                     clutter_segments=clutter, clutter_seed=seed)
    img, truth = compose_scene(spec)
    return img, truth, render_template(tid, size)


def test_single_level_matches_exhaustive():
    img, _, tpl = rotated_scene(20.0)
    grid = PoseGrid.from_degrees((0, 127, 3), (0, 111, 3), (0, 90, 5))
    cfg = SearchConfig(grid, num_levels=1, min_score=0.0)
    model = level_models([tpl], 1)[0]
    want = exhaustive_search(model, compute_gradients(img), grid)
    got = detect(tpl, img, cfg)
    assert isinstance(got, Detection)
    assert (got.pose, got.score, got.grid_index) == (want.pose, want.score, want.grid_index)


def test_min_score_gate():
    img, _, tpl = rotated_scene(20.0)
    grid = PoseGrid.from_degrees((0, 127, 3), (0, 111, 3), (0, 90, 5))
    res = detect(tpl, img, SearchConfig(grid, num_levels=1, min_score=1.0))
    assert isinstance(res, NoDetection)
    assert res.score < 1.0 and res.min_score == 1.0


@pytest.mark.parametrize("theta_deg", [0.0, 30.0, 55.0])
def test_rotated_template_recovered(theta_deg):
    spec = SceneSpec((128, 120), "cross", 48, Placement(64.0, 60.0, theta_deg))
    img, truth = compose_scene(spec)
    tpl = truth.template
    grid = PoseGrid.from_degrees((0, 127, 8), (0, 119, 8), (0, 90, 4))
    cfg = SearchConfig(grid, num_levels=2, score_params=ScoreParams(3),
                       refine_params=ScoreParams(1), polish_passes=2)
    det = detect(tpl, img, cfg)
    assert isinstance(det, Detection)
    want = expected_model_pose(truth.pose, level_models([tpl], 1)[0], tpl.width)
    assert abs(det.pose.ux - want.ux) <= 1 and abs(det.pose.uy - want.uy) <= 1
    assert abs(det.pose.theta_deg - want.theta_deg) <= 1
    assert [e.level for e in det.level_trace] == [1, 0, 0, 0]


def test_refine_params_default_is_score_params():
    img, _, tpl = rotated_scene(25.0, clutter=8, seed=1)
    grid = PoseGrid.from_degrees((0, 127, 4), (0, 111, 4), (0, 90, 4))
    a = detect(tpl, img, SearchConfig(grid, num_levels=2, min_score=0))
    b = detect(tpl, img, SearchConfig(grid, num_levels=2, min_score=0, refine_params=ScoreParams()))
    assert a == b


def test_refinement_steps_halve_per_level():
    img, _, tpl = rotated_scene(25.0)
    grid = PoseGrid.from_degrees((0, 127, 8), (0, 111, 8), (0, 90, 4))
    det = detect(tpl, img, SearchConfig(grid, num_levels=2, min_score=0))
    top, fine = det.level_trace
    # top lattice: multiples of 4 level-1 px; level 0 window steps by 2 px and 2 degrees
    assert top.pose.ux % 4 == 0 and top.pose.uy % 4 == 0
    ox, oy = finer_translation(top.pose, *(m.centroid_abs for m in level_models(
        build_pyramid(tpl, 2), 2)[::-1]))
    assert ((fine.pose.ux - ox) / 2) % 1 == pytest.approx(0, abs=1e-9)
    assert ((fine.pose.theta_deg - top.pose.theta_deg) / 2) % 1 == pytest.approx(0, abs=1e-9)


def test_flat_scene_is_no_detection():
    tpl = render_template("cross", 32)
    flat = Image(np.full((96, 96), 128.0))
    grid = PoseGrid.from_degrees((0, 95, 3), (0, 95, 3), (0, 90, 3))
    res = detect(tpl, flat, SearchConfig(grid, num_levels=2))
    assert isinstance(res, NoDetection)
    assert res.score == 0.0


def test_more_candidates_never_hurt():
    img, _, tpl = rotated_scene(33.0, tid="ring", clutter=25, seed=4)
    grid = PoseGrid.from_degrees((0, 127, 3), (0, 111, 3), (0, 90, 3))
    tp, wp = build_pyramid(tpl, 3), build_pyramid(img, 3)
    scores = [coarse_to_fine(tp, wp, SearchConfig(grid, num_levels=3, topk=k, min_score=0)).score
              for k in (1, 2, 4, 8)]
    assert all(b >= a for a, b in zip(scores, scores[1:]))


def test_pyramid_too_short_rejected():
    tpl = render_template("cross", 32)
    grid = PoseGrid.single(Pose(0, 0, 0))
    with pytest.raises(ValueError, match="levels"):
        coarse_to_fine([tpl], [tpl], SearchConfig(grid, num_levels=2))


def test_reported_score_is_the_pose_score():
    img, _, tpl = rotated_scene(12.0, clutter=10, seed=2)
    grid = PoseGrid.from_degrees((0, 127, 3), (0, 111, 3), (0, 90, 3))
    det = detect(tpl, img, SearchConfig(grid, num_levels=2, min_score=0))
    det = det.best if isinstance(det, NoDetection) else det
    model = level_models([tpl], 1)[0]
    assert det.score == pose_score(model, det.pose, compute_gradients(img)).value
