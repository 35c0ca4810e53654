"""Pure-numpy pose scoring, used when the compiled extension is unavailable.

Vectorized across poses; per pose the arithmetic (and the point summation order)
matches the compiled loop exactly, so both produce bit-identical scores.
"""

from __future__ import annotations

import numpy as np

_BLOCK = 1 << 15


def score_range(rx, ry, rdx, rdy, xs, ys, ux, uy, radius, ignore_polarity,
                start, stop, out, inbounds):
    nx = len(xs)
    nxy = nx * len(ys)
    H, W = ux.shape
    n = rx.shape[1]
    for b0 in range(start, stop, _BLOCK):
        b1 = min(stop, b0 + _BLOCK)
        idx = np.arange(b0, b1)
        it = idx // nxy
        iy = (idx % nxy) // nx
        ix = idx % nx
        tx = xs[ix]
        ty = ys[iy]
        acc = np.zeros(len(idx))
        inb = np.zeros(len(idx), dtype=np.int64)
        for i in range(n):
            fx = np.floor(rx[it, i] + tx + 0.5)
            fy = np.floor(ry[it, i] + ty + 0.5)
            ok = (fx >= 0) & (fy >= 0) & (fx < W) & (fy < H)
            if not ok.any():
                continue
            cx = fx[ok].astype(np.int64)
            cy = fy[ok].astype(np.int64)
            ddx = rdx[it[ok], i]
            ddy = rdy[it[ok], i]
            best = np.full(len(cx), -np.inf)
            for oy in range(-radius, radius + 1):
                y = cy + oy
                yin = (y >= 0) & (y < H)
                for ox in range(-radius, radius + 1):
                    x = cx + ox
                    m = yin & (x >= 0) & (x < W)
                    xc = np.clip(x, 0, W - 1)
                    yc = np.clip(y, 0, H - 1)
                    v = ddx * ux[yc, xc] + ddy * uy[yc, xc]
                    if ignore_polarity:
                        v = np.abs(v)
                    best = np.where(m & (v > best), v, best)
            acc[ok] = acc[ok] + best
            inb[ok] += 1
        out[b0 - start:b1 - start] = acc / n
        inbounds[b0 - start:b1 - start] = inb
