# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pose-scoring loop. Mirrors ``_pykernel.score_range`` operation for operation."""

from libc.math cimport floor, fabs, INFINITY


def score_range(const double[:, ::1] rx, const double[:, ::1] ry,
                const double[:, ::1] rdx, const double[:, ::1] rdy,
                const double[::1] xs, const double[::1] ys,
                const double[:, ::1] ux, const double[:, ::1] uy,
                int radius, bint ignore_polarity,
                Py_ssize_t start, Py_ssize_t stop,
                double[::1] out, long[::1] inbounds):
    """Score poses ``start..stop-1`` of the (theta, y, x) lattice into ``out``/``inbounds``."""
    cdef Py_ssize_t n = rx.shape[1]
    cdef Py_ssize_t nx = xs.shape[0]
    cdef Py_ssize_t nxy = nx * ys.shape[0]
    cdef Py_ssize_t H = ux.shape[0]
    cdef Py_ssize_t W = ux.shape[1]
    cdef Py_ssize_t idx, it, iy, ix, i, cx, cy, x, y, xa, xb, ya, yb, inb
    cdef double tx, ty, fx, fy, ddx, ddy, v, best, acc
    with nogil:
        for idx in range(start, stop):
            it = idx // nxy
            iy = (idx % nxy) // nx
            ix = idx % nx
            tx = xs[ix]
            ty = ys[iy]
            acc = 0.0
            inb = 0
            for i in range(n):
                fx = floor(rx[it, i] + tx + 0.5)
                fy = floor(ry[it, i] + ty + 0.5)
                if fx < 0 or fy < 0 or fx >= W or fy >= H:
                    continue
                cx = <Py_ssize_t>fx
                cy = <Py_ssize_t>fy
                inb += 1
                ddx = rdx[it, i]
                ddy = rdy[it, i]
                xa = cx - radius if cx >= radius else 0
                xb = cx + radius if cx + radius < W else W - 1
                ya = cy - radius if cy >= radius else 0
                yb = cy + radius if cy + radius < H else H - 1
                best = -INFINITY
                for y in range(ya, yb + 1):
                    for x in range(xa, xb + 1):
                        v = ddx * ux[y, x] + ddy * uy[y, x]
                        if ignore_polarity:
                            v = fabs(v)
                        if v > best:
                            best = v
                acc = acc + best
            out[idx - start] = acc / n
            inbounds[idx - start] = inb
