"""Kernel selection and the shared pose-scoring preparation.

``IMPLEMENTATION`` is ``"compiled"`` when the Cython extension imported, otherwise
``"python"``. Both kernels take the same arguments; see ``PreparedSearch``.
"""

from __future__ import annotations

import math

import numpy as np

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

KERNELS = {"python": _pykernel.score_range}
if _ckernel is not None:
    KERNELS["compiled"] = _ckernel.score_range

IMPLEMENTATION = "compiled" if _ckernel is not None else "python"


def get_kernel(name: str | None = None):
    name = name or IMPLEMENTATION
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel {name!r} is not available (have: {sorted(KERNELS)})") from None


def rotated_model(model, thetas) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-angle rotated positions and unit directions, each shaped (len(thetas), n)."""
    nt = len(thetas)
    rx = np.empty((nt, model.n))
    ry = np.empty((nt, model.n))
    rdx = np.empty((nt, model.n))
    rdy = np.empty((nt, model.n))
    for k, t in enumerate(thetas):
        c, s = math.cos(t), math.sin(t)
        rx[k] = c * model.x - s * model.y
        ry[k] = s * model.x + c * model.y
        ex = c * model.dx - s * model.dy
        ey = s * model.dx + c * model.dy
        norm = np.hypot(ex, ey)
        rdx[k] = ex / norm
        rdy[k] = ey / norm
    return rx, ry, rdx, rdy


class PreparedSearch:
    """Model, field and grid flattened into the arrays the kernels consume."""

    def __init__(self, model, field, grid, params, kernel: str | None = None):
        self.grid = grid
        self.size = grid.nx * grid.ny * grid.nt
        self.tables = rotated_model(model, grid.thetas())
        self.xs = np.ascontiguousarray(grid.xs(), dtype=np.float64)
        self.ys = np.ascontiguousarray(grid.ys(), dtype=np.float64)
        self.ux, self.uy = field.unit_components(params.eps_mag)
        self.radius = (params.neighborhood - 1) // 2
        self.ignore = params.polarity == "ignore"
        self.kernel = get_kernel(kernel)

    def score(self, start: int = 0, stop: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        stop = self.size if stop is None else stop
        out = np.empty(stop - start)
        inb = np.empty(stop - start, dtype=np.int64)
        if stop > start:
            self.kernel(*self.tables, self.xs, self.ys, self.ux, self.uy,
                        self.radius, self.ignore, start, stop, out, inb)
        return out, inb
