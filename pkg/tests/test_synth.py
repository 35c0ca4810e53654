import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgematch.synth import (GROUND, INK, TEMPLATE_IDS, GeometryError, Illumination, Occluder,
                             Placement, SceneSpec, compose_scene, normals, render_template,
                             splitmix64, template_center, template_edge_pixels, uniforms)

MASK = (1 << 64) - 1


def splitmix_reference(seed, count):
    out, state = [], seed
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_splitmix_known_values():
    assert splitmix64(0, 3).tolist() == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


@settings(max_examples=30)
@given(st.integers(0, MASK), st.integers(1, 20))
def test_splitmix_matches_sequential_reference(seed, count):
    assert splitmix64(seed, count).tolist() == splitmix_reference(seed, count)


def test_splitmix_offset_continues_stream():
    assert splitmix64(5, 4, offset=6).tolist() == splitmix64(5, 10).tolist()[6:]


def test_uniforms_range_and_normals_moments():
    u = uniforms(11, 20000)
    assert u.min() >= 0.0 and u.max() < 1.0
    n = normals(11, 20001)
    assert len(n) == 20001
    assert abs(n.mean()) < 0.03 and abs(n.std() - 1) < 0.03


def test_rectangle_template():
    img = render_template("rectangle", 32)
    assert img.shape == (32, 32)
    assert img.data[16, 4] == INK and img.data[16, 5] == INK and img.data[16, 6] == GROUND
    assert img.data[16, 16] == GROUND
    assert set(np.unique(img.data)) == {INK, GROUND}


def test_rectangle_is_not_square():
    ys, xs = np.nonzero(render_template("rectangle", 32).data == INK)
    assert xs.max() - xs.min() != ys.max() - ys.min()


@pytest.mark.parametrize("tid", TEMPLATE_IDS)
def test_templates_deterministic(tid):
    assert render_template(tid, 40) == render_template(tid, 40)


def test_template_errors():
    with pytest.raises(ValueError, match=">= 16"):
        render_template("ring", 8)
    with pytest.raises(ValueError, match="unknown"):
        render_template("star", 32)


def test_edge_pixels_straddle_strokes():
    img = render_template("cross", 32)
    xs, ys = template_edge_pixels(img)
    vals = set(img.data[ys, xs].tolist())
    assert vals == {INK, GROUND}


def spec(**kw):
    base = dict(canvas=(96, 80), template_id="L-bracket", template_size=32,
                true_pose=Placement(48, 40, 0.0))
    base.update(kw)
    return SceneSpec(**base)


def test_identity_composition_copies_template():
    s = spec()
    scene, truth = compose_scene(s)
    cx, cy = template_center(32)
    x0, y0 = int(48 - cx), int(40 - cy)
    assert np.array_equal(scene.data[y0:y0 + 32, x0:x0 + 32], render_template("L-bracket", 32).data)
    mask = np.ones(scene.shape, bool)
    mask[y0:y0 + 32, x0:x0 + 32] = False
    assert np.all(scene.data[mask] == GROUND)
    assert truth.occluded_fraction == 0.0


def test_seeded_determinism():
    s = spec(true_pose=Placement(47.3, 41.8, 23.0), clutter_segments=12, clutter_seed=99,
             noise_sigma=3.0, noise_seed=7, illumination=Illumination(1.3, -5, 0.8))
    a, ta = compose_scene(s)
    b, tb = compose_scene(s)
    assert a == b and ta.to_dict() == tb.to_dict()


def test_different_seeds_differ():
    a, _ = compose_scene(spec(clutter_segments=5, clutter_seed=1))
    b, _ = compose_scene(spec(clutter_segments=5, clutter_seed=2))
    assert a != b


def test_left_half_occluder():
    occ = Occluder(0, 0, 48, 80)  # template centre column 48 splits it in half
    _, truth = compose_scene(spec(template_id="rectangle", occluder=occ))
    assert truth.occluded_fraction == pytest.approx(0.5, abs=0.05)


def test_occluder_fill_lands_in_scene():
    scene, _ = compose_scene(spec(occluder=Occluder(10, 10, 5, 5, fill=123.0)))
    assert np.all(scene.data[10:15, 10:15] == 123.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 10), st.floats(-100, 100), st.integers(0, 1000))
def test_affine_illumination_hook(gain, bias, seed):
    base = spec(true_pose=Placement(48, 40, 17.0), clutter_segments=6, clutter_seed=seed,
                occluder=Occluder(30, 30, 10, 10, 90.0))
    lit = spec(true_pose=Placement(48, 40, 17.0), clutter_segments=6, clutter_seed=seed,
               occluder=Occluder(30, 30, 10, 10, 90.0), illumination=Illumination(gain, bias, 1.0))
    a, _ = compose_scene(base)
    b, _ = compose_scene(lit)
    assert np.array_equal(b.data, gain * a.data + bias)


def test_gamma_map():
    v = np.array([0.0, 51.0, 255.0])
    assert np.allclose(Illumination(2.0, 10.0, 2.0).apply(v), 2 * (v / 255) ** 2 * 255 + 10)


def test_clutter_free_ground_is_illuminated_ground():
    s = spec(template_id="cross", true_pose=Placement(48, 40, 30.0),
             illumination=Illumination(0.5, 20.0, 1.0))
    scene, truth = compose_scene(s)
    ground = 0.5 * GROUND + 20.0
    # everything outside the stamped template's bounding circle is ground
    yy, xx = np.mgrid[0:80, 0:96]
    far = np.hypot(xx - 48, yy - 40) > 32 * math.sqrt(2) / 2 + 1
    assert np.all(scene.data[far] == ground)


def test_out_of_canvas_is_geometry_error():
    with pytest.raises(GeometryError):
        compose_scene(spec(true_pose=Placement(5, 40, 0)))


def test_rejects_bad_illumination():
    with pytest.raises(ValueError):
        Illumination(gain=0.0)
    with pytest.raises(ValueError):
        Illumination(gamma=-1.0)


def test_spec_json_round_trip():
    s = spec(true_pose=Placement(47.25, 41.5, 12.5), clutter_segments=3, clutter_seed=2**63 + 5,
             occluder=Occluder(1, 2, 3, 4, 50.0), illumination=Illumination(1.5, -2.0, 0.9),
             noise_sigma=1.25, noise_seed=17)
    assert SceneSpec.from_json(s.to_json()) == s


def test_spec_json_field_names():
    d = spec().to_dict()
    assert set(d) == {"canvas", "template_id", "template_size", "true_pose", "clutter_segments",
                      "clutter_seed", "occluder", "illumination", "noise_sigma", "noise_seed"}
    assert set(d["true_pose"]) == {"ux", "uy", "theta_deg"}


def test_truth_dict():
    _, truth = compose_scene(spec(true_pose=Placement(48, 40, 90.0)))
    d = truth.to_dict()
    assert d["pose"] == {"x": 48.0, "y": 40.0, "theta_deg": pytest.approx(90.0)}
    assert d["template_center"] == [16.0, 16.0]
