"""Seeded synthetic templates and scenes with known poses.

Random numbers come from SplitMix64 in counter mode: the i-th draw (i = 1, 2, ...)
of a stream seeded with ``seed`` is ``mix(seed + i * 0x9E3779B97F4A7C15)`` where

    mix(z): z = (z ^ z >> 30) * 0xBF58476D1CE4E5B9
            z = (z ^ z >> 27) * 0x94D049BB133111EB
            return z ^ z >> 31

(all arithmetic modulo 2**64). Uniforms are ``(draw >> 11) * 2**-53``; normals use
Box-Muller on consecutive uniform pairs ``(u1, u2)`` as
``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` then ``... * sin(2 pi u2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .edges import EdgeModel
from .image import Image
from .pose import Pose

GROUND = 200.0
INK = 40.0
STROKE = 2
TEMPLATE_IDS = ("rectangle", "ring", "L-bracket", "cross")

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class GeometryError(ValueError):
    pass


def splitmix64(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Draws ``offset+1 .. offset+count`` of the stream as uint64."""
    with np.errstate(over="ignore"):
        i = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + i * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def uniforms(seed: int, count: int, offset: int = 0) -> np.ndarray:
    return (splitmix64(seed, count, offset) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def normals(seed: int, count: int) -> np.ndarray:
    pairs = (count + 1) // 2
    u = uniforms(seed, 2 * pairs).reshape(pairs, 2)
    rad = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
    ang = 2.0 * math.pi * u[:, 1]
    return np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1).ravel()[:count]


# --- templates -----------------------------------------------------------------

def template_center(size: int) -> tuple[float, float]:
    """Template pixel that a scene pose translates to; integer so unrotated stamps are exact."""
    return (float(size // 2), float(size // 2))


def render_template(template_id: str, size: int) -> Image:
    """Dark 2-px strokes on a light ground, hard edged."""
    if template_id not in TEMPLATE_IDS:
        raise ValueError(f"unknown template_id {template_id!r}; expected one of {TEMPLATE_IDS}")
    if size < 16:
        raise ValueError(f"template size must be >= 16, got {size}")
    m = size // 8
    y, x = np.mgrid[0:size, 0:size]
    if template_id == "rectangle":
        x0, x1 = m, size - 1 - m
        y0, y1 = m + size // 8, size - 1 - m - size // 8
        inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        core = (x >= x0 + STROKE) & (x <= x1 - STROKE) & (y >= y0 + STROKE) & (y <= y1 - STROKE)
        shape = inside & ~core
    elif template_id == "ring":
        c = (size - 1) / 2.0
        r_out = size / 2.0 - m
        d = np.hypot(x - c, y - c)
        shape = (d <= r_out) & (d > r_out - STROKE)
    elif template_id == "L-bracket":
        bottom = size - 1 - m
        arm = m + (size - 2 * m) * 2 // 3
        vertical = (x >= m) & (x < m + STROKE) & (y >= m) & (y <= bottom)
        horizontal = (y > bottom - STROKE) & (y <= bottom) & (x >= m) & (x <= arm)
        shape = vertical | horizontal
    else:
        c = size // 2
        vertical = (x >= c - 1) & (x <= c) & (y >= m) & (y <= size - 1 - m)
        horizontal = (y >= c - 1) & (y <= c) & (x >= m) & (x <= size - 1 - m)
        shape = vertical | horizontal
    return Image(np.where(shape, INK, GROUND))


def template_edge_pixels(template: Image) -> tuple[np.ndarray, np.ndarray]:
    """Pixels whose 3x3 neighbourhood mixes shape and ground (both sides of every edge)."""
    shape = template.data != GROUND
    p = np.pad(shape, 1, mode="edge")
    h, w = shape.shape
    win = [p[dy:dy + h, dx:dx + w] for dy in range(3) for dx in range(3)]
    any_shape = np.logical_or.reduce(win)
    all_shape = np.logical_and.reduce(win)
    ys, xs = np.nonzero(any_shape & ~all_shape)
    return xs, ys


# --- scene specification --------------------------------------------------------

class Placement(NamedTuple):
    """Scene position of the template centre and its rotation in degrees."""

    ux: float
    uy: float
    theta_deg: float

    def to_pose(self) -> Pose:
        return Pose.from_degrees(self.ux, self.uy, self.theta_deg)


@dataclass(frozen=True)
class Occluder:
    x: int
    y: int
    w: int
    h: int
    fill: float = GROUND

    def contains(self, px, py):
        return (px >= self.x) & (px < self.x + self.w) & (py >= self.y) & (py < self.y + self.h)


@dataclass(frozen=True)
class Illumination:
    gain: float = 1.0
    bias: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.gain > 0 and self.gamma > 0):
            raise ValueError("illumination gain and gamma must be positive")

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.gamma == 1.0:
            # exact affine map so gain/bias invariance can be checked without rounding slack
            return self.gain * v + self.bias
        return self.gain * (v / 255.0) ** self.gamma * 255.0 + self.bias


@dataclass(frozen=True)
class SceneSpec:
    canvas: tuple[int, int]
    template_id: str
    template_size: int
    true_pose: Placement
    clutter_segments: int = 0
    clutter_seed: int = 0
    occluder: Occluder | None = None
    illumination: Illumination = field(default_factory=Illumination)
    noise_sigma: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "canvas", tuple(int(v) for v in self.canvas))
        object.__setattr__(self, "true_pose", Placement(*self.true_pose))
        if self.template_id not in TEMPLATE_IDS:
            raise ValueError(f"unknown template_id {self.template_id!r}")
        if self.clutter_segments < 0 or self.noise_sigma < 0:
            raise ValueError("clutter_segments and noise_sigma must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["canvas"] = list(self.canvas)
        d["true_pose"] = self.true_pose._asdict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> SceneSpec:
        d = dict(d)
        tp = d["true_pose"]
        d["true_pose"] = Placement(float(tp["ux"]), float(tp["uy"]), float(tp["theta_deg"]))
        d["canvas"] = tuple(d["canvas"])
        if d.get("occluder") is not None:
            d["occluder"] = Occluder(**d["occluder"])
        if d.get("illumination") is not None:
            d["illumination"] = Illumination(**d["illumination"])
        else:
            d.pop("illumination", None)
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> SceneSpec:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    pose: Pose
    occluded_fraction: float
    template: Image

    def to_dict(self) -> dict:
        return {"pose": {"x": self.pose.ux, "y": self.pose.uy, "theta_deg": self.pose.theta_deg},
                "occluded_fraction": self.occluded_fraction,
                "template_center": list(template_center(self.template.width))}


# --- composition ------------------------------------------------------------------

def _draw_clutter(canvas: np.ndarray, count: int, seed: int):
    h, w = canvas.shape
    u = uniforms(seed, 6 * count).reshape(count, 6) if count else np.empty((0, 6))
    for x0, y0, x1, y1, val, wid in u:
        x0, x1 = x0 * (w - 1), x1 * (w - 1)
        y0, y1 = y0 * (h - 1), y1 * (h - 1)
        value = val * 255.0
        width = 1 if wid < 0.5 else 2
        steps = int(math.ceil(max(abs(x1 - x0), abs(y1 - y0)))) + 1
        t = np.linspace(0.0, 1.0, steps)
        px = np.floor(x0 + t * (x1 - x0) + 0.5).astype(np.int64)
        py = np.floor(y0 + t * (y1 - y0) + 0.5).astype(np.int64)
        canvas[py, px] = value
        if width == 2:
            canvas[py, np.minimum(px + 1, w - 1)] = value
            canvas[np.minimum(py + 1, h - 1), px] = value


def _forward(pose: Pose, center, xs, ys):
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    tx = xs - center[0]
    ty = ys - center[1]
    return c * tx - s * ty + pose.ux, s * tx + c * ty + pose.uy


def _stamp(canvas: np.ndarray, template: Image, pose: Pose):
    h, w = canvas.shape
    th, tw = template.shape
    center = template_center(tw)
    cx, cy = _forward(pose, center, np.array([0.0, tw - 1, 0.0, tw - 1]),
                      np.array([0.0, 0.0, th - 1, th - 1]))
    if cx.min() < 0 or cy.min() < 0 or cx.max() > w - 1 or cy.max() > h - 1:
        raise GeometryError(
            f"template at pose ({pose.ux}, {pose.uy}, {pose.theta_deg:.3f} deg) leaves the "
            f"{w}x{h} canvas")
    xa, xb = int(math.floor(cx.min())), int(math.ceil(cx.max()))
    ya, yb = int(math.floor(cy.min())), int(math.ceil(cy.max()))
    Y, X = np.mgrid[ya:yb + 1, xa:xb + 1].astype(np.float64)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    dx, dy = X - pose.ux, Y - pose.uy
    qx = np.floor(c * dx + s * dy + center[0] + 0.5).astype(np.int64)
    qy = np.floor(-s * dx + c * dy + center[1] + 0.5).astype(np.int64)
    ok = (qx >= 0) & (qx < tw) & (qy >= 0) & (qy < th)
    vals = np.full(X.shape, GROUND)
    vals[ok] = template.data[qy[ok], qx[ok]]
    mask = vals != GROUND
    region = canvas[ya:yb + 1, xa:xb + 1]
    region[mask] = vals[mask]


def occluded_fraction(template: Image, pose: Pose, occluder: Occluder | None) -> float:
    if occluder is None:
        return 0.0
    xs, ys = template_edge_pixels(template)
    fx, fy = _forward(pose, template_center(template.width), xs.astype(float), ys.astype(float))
    px = np.floor(fx + 0.5)
    py = np.floor(fy + 0.5)
    return float(np.count_nonzero(occluder.contains(px, py))) / len(xs)


def compose_scene(spec: SceneSpec) -> tuple[Image, GroundTruth]:
    w, h = spec.canvas
    template = render_template(spec.template_id, spec.template_size)
    pose = spec.true_pose.to_pose()
    canvas = np.full((h, w), GROUND)
    _draw_clutter(canvas, spec.clutter_segments, spec.clutter_seed)
    _stamp(canvas, template, pose)
    occ = spec.occluder
    if occ is not None:
        canvas[max(occ.y, 0):max(occ.y + occ.h, 0), max(occ.x, 0):max(occ.x + occ.w, 0)] = occ.fill
    canvas = spec.illumination.apply(canvas)
    if spec.noise_sigma > 0:
        canvas = canvas + spec.noise_sigma * normals(spec.noise_seed, w * h).reshape(h, w)
    truth = GroundTruth(pose, occluded_fraction(template, pose, occ), template)
    return Image(canvas), truth


def expected_model_pose(truth_pose: Pose, model: EdgeModel, template_size: int) -> Pose:
    """Pose of the model centroid implied by a template-centre pose."""
    center = template_center(template_size)
    off = (model.centroid_abs[0] - center[0], model.centroid_abs[1] - center[1])
    c, s = math.cos(truth_pose.theta), math.sin(truth_pose.theta)
    return Pose(c * off[0] - s * off[1] + truth_pose.ux,
                s * off[0] + c * off[1] + truth_pose.uy, truth_pose.theta)
