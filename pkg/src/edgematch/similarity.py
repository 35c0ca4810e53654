"""Normalized edge-orientation similarity with neighbourhood-max voting.

The score of a pose is the mean over all model points of the best normalized dot
product between the rotated model direction and the working-image gradient within
a small window around the projected point. Projections falling outside the image
vote 0 but still count in the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

from .edges import EdgeModel, GradientField
from .kernels import PreparedSearch
from .pose import Pose, PoseGrid

POLARITIES = ("signed", "ignore")


@dataclass(frozen=True)
class ScoreParams:
    neighborhood: int = 3
    polarity: str = "signed"
    eps_mag: float = 1e-9

    def __post_init__(self):
        if self.neighborhood < 1 or self.neighborhood % 2 == 0:
            raise ValueError(f"neighborhood must be odd and >= 1, got {self.neighborhood}")
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}, got {self.polarity!r}")
        if not self.eps_mag > 0:
            raise ValueError("eps_mag must be positive")


@dataclass(frozen=True)
class PoseScore:
    value: float
    n_inbounds: int


def point_vote(direction: tuple[float, float], field: GradientField, cx: int, cy: int,
               params: ScoreParams) -> float:
    """Best normalized dot product of ``direction`` with gradients in the window at (cx, cy)."""
    r = (params.neighborhood - 1) // 2
    dx, dy = direction
    best = None
    for y in range(max(cy - r, 0), min(cy + r, field.height - 1) + 1):
        for x in range(max(cx - r, 0), min(cx + r, field.width - 1) + 1):
            m = field.mag[y, x]
            v = (dx * field.gx[y, x] + dy * field.gy[y, x]) / m if m >= params.eps_mag else 0.0
            if params.polarity == "ignore":
                v = abs(v)
            if best is None or v > best:
                best = v
    return 0.0 if best is None else float(best)


def pose_score(model: EdgeModel, pose: Pose, field: GradientField,
               params: ScoreParams = ScoreParams(), kernel: str | None = None) -> PoseScore:
    if model.n < 1:
        raise ValueError("cannot score an empty model")
    prep = PreparedSearch(model, field, PoseGrid.single(pose), params, kernel)
    out, inb = prep.score()
    return PoseScore(float(out[0]), int(inb[0]))
