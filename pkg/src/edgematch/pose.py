"""Rigid 2D poses and the discrete pose lattice searched by the matcher.

Angles are radians here. Rotation follows ``[[cos, -sin], [sin, cos]]`` applied in
raster coordinates (x right, y down).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Pose:
    ux: float
    uy: float
    theta: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.ux, self.uy, self.theta)):
            raise ValueError(f"pose components must be finite: {self}")

    @classmethod
    def from_degrees(cls, ux: float, uy: float, theta_deg: float) -> Pose:
        return cls(ux, uy, math.radians(theta_deg))

    @property
    def theta_deg(self) -> float:
        return math.degrees(self.theta)


def transform_point(pose: Pose, t: tuple[float, float]) -> tuple[float, float]:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    tx, ty = t
    return (c * tx - s * ty + pose.ux, s * tx + c * ty + pose.uy)


def rotate_direction(pose: Pose, d: tuple[float, float]) -> tuple[float, float]:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    rx = c * d[0] - s * d[1]
    ry = s * d[0] + c * d[1]
    norm = math.hypot(rx, ry)
    return (rx / norm, ry / norm)


def _axis_count(start: float, end: float, step: float) -> int:
    return int(math.floor((end - start) / step + 1e-9)) + 1


@dataclass(frozen=True)
class PoseGrid:
    """Inclusive ranges with positive steps for x, y and theta (radians)."""

    x0: float
    x1: float
    dx: float
    y0: float
    y1: float
    dy: float
    t0: float
    t1: float
    dt: float

    def __post_init__(self):
        for name in ("x0", "x1", "dx", "y0", "y1", "dy", "t0", "t1", "dt"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"pose grid {name} must be finite")
            object.__setattr__(self, name, v)
        if not (self.dx > 0 and self.dy > 0 and self.dt > 0):
            raise ValueError("pose grid steps must be positive")
        if not (self.x0 <= self.x1 and self.y0 <= self.y1 and self.t0 <= self.t1):
            raise ValueError("pose grid ranges must satisfy start <= end")

    @classmethod
    def single(cls, pose: Pose) -> PoseGrid:
        return cls(pose.ux, pose.ux, 1.0, pose.uy, pose.uy, 1.0, pose.theta, pose.theta, 1.0)

    @classmethod
    def from_degrees(cls, x: tuple[float, float, float], y: tuple[float, float, float],
                     theta_deg: tuple[float, float, float]) -> PoseGrid:
        t0, t1, dt = (math.radians(v) for v in theta_deg)
        return cls(*x, *y, t0, t1, dt)

    @property
    def nx(self) -> int:
        return _axis_count(self.x0, self.x1, self.dx)

    @property
    def ny(self) -> int:
        return _axis_count(self.y0, self.y1, self.dy)

    @property
    def nt(self) -> int:
        return _axis_count(self.t0, self.t1, self.dt)

    def xs(self) -> np.ndarray:
        return self.x0 + np.arange(self.nx) * self.dx

    def ys(self) -> np.ndarray:
        return self.y0 + np.arange(self.ny) * self.dy

    def thetas(self) -> np.ndarray:
        return self.t0 + np.arange(self.nt) * self.dt

    def __len__(self):
        return grid_size(self)


def grid_size(grid: PoseGrid) -> int:
    return grid.nx * grid.ny * grid.nt


def pose_at(grid: PoseGrid, index: int) -> Pose:
    """Linear index -> pose, theta slowest and x fastest."""
    size = grid_size(grid)
    if not 0 <= index < size:
        raise IndexError(f"pose index {index} out of range for grid of size {size}")
    nx, ny = grid.nx, grid.ny
    it, rem = divmod(index, nx * ny)
    iy, ix = divmod(rem, nx)
    return Pose(grid.x0 + ix * grid.dx, grid.y0 + iy * grid.dy, grid.t0 + it * grid.dt)
