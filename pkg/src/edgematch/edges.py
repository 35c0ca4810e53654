"""Sobel gradients and sparse oriented edge models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import Image, ImageSizeError


class EmptyModelError(ValueError):
    """No edge pixel survived extraction."""

    def __init__(self, max_magnitude: float, level: int | None = None):
        where = "" if level is None else f" at pyramid level {level}"
        super().__init__(f"no edge points survived{where}; max gradient magnitude is "
                         f"{max_magnitude:.6g}, lower the thresholds")
        self.max_magnitude = max_magnitude
        self.level = level


@dataclass(frozen=True, eq=False)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    mag: np.ndarray

    @property
    def width(self) -> int:
        return self.gx.shape[1]

    @property
    def height(self) -> int:
        return self.gx.shape[0]

    def unit_components(self, eps_mag: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        """(gx/mag, gy/mag) with zeros wherever mag < eps_mag."""
        ok = self.mag >= eps_mag
        safe = np.where(ok, self.mag, 1.0)
        ux = np.where(ok, self.gx / safe, 0.0)
        uy = np.where(ok, self.gy / safe, 0.0)
        return np.ascontiguousarray(ux), np.ascontiguousarray(uy)


@dataclass(frozen=True)
class EdgePoint:
    x_rel: float
    y_rel: float
    dx: float
    dy: float
    mag: float


@dataclass(frozen=True)
class EdgeThresholds:
    low: float
    high: float

    def __post_init__(self):
        if not 0 <= self.low <= self.high:
            raise ValueError(f"thresholds need 0 <= low <= high, got low={self.low} high={self.high}")

    @classmethod
    def relative(cls, field: GradientField, high_frac: float = 0.3, low_frac: float = 0.5) -> EdgeThresholds:
        """high = high_frac * max magnitude, low = low_frac * high."""
        high = high_frac * float(field.mag.max())
        return cls(low_frac * high, high)


@dataclass(frozen=True, eq=False)
class EdgeModel:
    """Template edge points stored column-wise; positions are centroid-relative."""

    x: np.ndarray
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    mag: np.ndarray
    centroid_abs: tuple[float, float]
    source_level: int = 0

    def __post_init__(self):
        if len(self.x) < 1:
            raise ValueError("an edge model needs at least one point")
        for name in ("x", "y", "dx", "dy", "mag"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.x)

    def __len__(self):
        return self.n

    @property
    def points(self) -> list[EdgePoint]:
        return [EdgePoint(*map(float, v)) for v in zip(self.x, self.y, self.dx, self.dy, self.mag)]

    def absolute_positions(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x + self.centroid_abs[0], self.y + self.centroid_abs[1]


def model_point_count(model: EdgeModel) -> int:
    return model.n


def compute_gradients(image: Image) -> GradientField:
    """3x3 Sobel with integer weights, y axis pointing down; the outer ring is zero."""
    h, w = image.shape
    if w < 3 or h < 3:
        raise ImageSizeError(f"gradients need an image of at least 3x3, got {w}x{h}")
    a = image.data
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    # column differences and row differences, weighted 1-2-1 across
    dcol = a[:, 2:] - a[:, :-2]
    gx[1:-1, 1:-1] = dcol[:-2] + 2.0 * dcol[1:-1] + dcol[2:]
    drow = a[2:, :] - a[:-2, :]
    gy[1:-1, 1:-1] = drow[:, :-2] + 2.0 * drow[:, 1:-1] + drow[:, 2:]
    mag = np.sqrt(gx * gx + gy * gy)
    for arr in (gx, gy, mag):
        arr.setflags(write=False)
    return GradientField(gx, gy, mag)


# neighbour offsets (ox, oy) along the gradient for the four direction bins
_BIN_OFFSETS = ((1, 0), (1, 1), (0, 1), (-1, 1))


def direction_bins(field: GradientField) -> np.ndarray:
    """Quantize gradient angles (mod 180) to 0/45/90/135 degree bins 0..3.

    A boundary angle goes to the lower bin; 157.5 and above wraps to bin 0.
    """
    ang = np.degrees(np.arctan2(field.gy, field.gx)) % 180.0
    bins = np.zeros(ang.shape, dtype=np.int8)
    bins[(ang > 22.5) & (ang <= 67.5)] = 1
    bins[(ang > 67.5) & (ang <= 112.5)] = 2
    bins[(ang > 112.5) & (ang < 157.5)] = 3
    return bins


def non_maximum_suppression(field: GradientField) -> np.ndarray:
    """Boolean mask of pixels that are a maximum along their quantized gradient direction.

    A pixel must beat its backward neighbour strictly and match-or-beat its forward one,
    so a plateau two pixels wide yields one thin line.
    """
    mag = field.mag
    h, w = mag.shape
    padded = np.pad(mag, 1)
    bins = direction_bins(field)
    keep = np.zeros((h, w), dtype=bool)
    for b, (ox, oy) in enumerate(_BIN_OFFSETS):
        fwd = padded[1 + oy:1 + oy + h, 1 + ox:1 + ox + w]
        bwd = padded[1 - oy:1 - oy + h, 1 - ox:1 - ox + w]
        keep |= (bins == b) & (mag > bwd) & (mag >= fwd)
    return keep


def hysteresis(candidates: np.ndarray, mag: np.ndarray, thresholds: EdgeThresholds) -> np.ndarray:
    weak = candidates & (mag >= thresholds.low)
    strong = weak & (mag >= thresholds.high)
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return weak
    seeded = np.zeros(count + 1, dtype=bool)
    seeded[np.unique(labels[strong])] = True
    seeded[0] = False
    return seeded[labels]


def extract_edge_model(field: GradientField, thresholds: EdgeThresholds, level: int = 0) -> EdgeModel:
    """NMS + dual-threshold hysteresis; kept pixels become centroid-relative unit-direction points."""
    keep = hysteresis(non_maximum_suppression(field), field.mag, thresholds)
    ys, xs = np.nonzero(keep)  # row-major order
    if len(xs) == 0:
        raise EmptyModelError(float(field.mag.max(initial=0.0)), level)
    mag = field.mag[ys, xs]
    dx = field.gx[ys, xs] / mag
    dy = field.gy[ys, xs] / mag
    cx = float(xs.mean())
    cy = float(ys.mean())
    return EdgeModel(xs - cx, ys - cy, dx, dy, mag, (cx, cy), level)
