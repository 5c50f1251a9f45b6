# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, exp, floor, sqrt

cnp.import_array()

cdef double EPS = 1e-12


cdef inline bint _in_band(double x, double width) noexcept nogil:
    return x >= 0.0 and x <= width


cdef inline double _reduce(double dy, double ax, double bx,
                           double width, double height) noexcept nogil:
    """Minimum image of ``dy`` when both x coordinates are in the band."""
    if (dy >= 0.5 * height or dy < -0.5 * height) and _in_band(ax, width) \
            and _in_band(bx, width):
        dy -= height * floor(dy / height + 0.5)
    return dy


def social_repulsion(double[:, ::1] pos, double[:, ::1] dirs, double[:, ::1] robots,
                     double V0, double sigma, double cos_phi, double c,
                     double cutoff, double width, double height):
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t m = robots.shape[0]
    out_arr = np.zeros((n, 2))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double px, py, ex, ey, qx, qy, d, d2, f, cut2 = cutoff * cutoff
    cdef double k = V0 / sigma
    with nogil:
        # Each crowd pair once; the magnitude is shared, the weights are not.
        for i in range(n):
            px = pos[i, 0]
            py = pos[i, 1]
            ex = dirs[i, 0]
            ey = dirs[i, 1]
            for j in range(i + 1, n):
                qx = px - pos[j, 0]
                if qx >= cutoff or qx <= -cutoff:
                    continue
                qy = _reduce(py - pos[j, 1], px, pos[j, 0], width, height)
                d2 = qx * qx + qy * qy
                if d2 >= cut2:
                    continue
                d = sqrt(d2)
                if d <= EPS:
                    continue
                f = k * exp(-d / sigma) / d
                if -(ex * qx + ey * qy) >= cos_phi * d:
                    out[i, 0] += f * qx
                    out[i, 1] += f * qy
                else:
                    out[i, 0] += c * f * qx
                    out[i, 1] += c * f * qy
                if dirs[j, 0] * qx + dirs[j, 1] * qy >= cos_phi * d:
                    out[j, 0] -= f * qx
                    out[j, 1] -= f * qy
                else:
                    out[j, 0] -= c * f * qx
                    out[j, 1] -= c * f * qy
            for j in range(m):
                qx = px - robots[j, 0]
                if qx >= cutoff or qx <= -cutoff:
                    continue
                qy = _reduce(py - robots[j, 1], px, robots[j, 0], width, height)
                d2 = qx * qx + qy * qy
                if d2 >= cut2:
                    continue
                d = sqrt(d2)
                if d <= EPS:
                    continue
                f = k * exp(-d / sigma) / d
                if -(ex * qx + ey * qy) >= cos_phi * d:
                    out[i, 0] += f * qx
                    out[i, 1] += f * qy
                else:
                    out[i, 0] += c * f * qx
                    out[i, 1] += c * f * qy
    return out_arr


cdef inline void _separate(double[:, ::1] a, Py_ssize_t i,
                           double[:, ::1] b, Py_ssize_t j,
                           double contact, double width, double height) noexcept nogil:
    cdef double dx = b[j, 0] - a[i, 0]
    cdef double dy = _reduce(b[j, 1] - a[i, 1], a[i, 0], b[j, 0], width, height)
    cdef double dist = sqrt(dx * dx + dy * dy)
    cdef double ux, uy, half
    if dist >= contact:
        return
    if dist < EPS:
        ux = 0.0
        uy = 1.0
    else:
        ux = dx / dist
        uy = dy / dist
    half = 0.5 * (contact - dist)
    a[i, 0] -= ux * half
    a[i, 1] -= uy * half
    b[j, 0] += ux * half
    b[j, 1] += uy * half


def resolve_pairs(double[:, ::1] robots, double[:, ::1] crowd,
                  double r_robot, double r_crowd, double width, double height):
    cdef Py_ssize_t nr = robots.shape[0]
    cdef Py_ssize_t nc = crowd.shape[0]
    cdef Py_ssize_t i, j
    cdef double rr = 2.0 * r_robot
    cdef double rc = r_robot + r_crowd
    with nogil:
        for i in range(nr):
            for j in range(i + 1, nr):
                _separate(robots, i, robots, j, rr, width, height)
        for i in range(nr):
            for j in range(nc):
                _separate(robots, i, crowd, j, rc, width, height)


def contact_matrix(double[:, ::1] robots, double[:, ::1] crowd,
                   double contact, double width, double height):
    cdef Py_ssize_t nr = robots.shape[0]
    cdef Py_ssize_t nc = crowd.shape[0]
    out_arr = np.zeros((nr, nc), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, c2 = contact * contact
    with nogil:
        for i in range(nr):
            for j in range(nc):
                dx = crowd[j, 0] - robots[i, 0]
                dy = _reduce(crowd[j, 1] - robots[i, 1], robots[i, 0], crowd[j, 0],
                             width, height)
                if dx * dx + dy * dy < c2:
                    out[i, j] = 1
    return out_arr.view(np.bool_)


cdef inline void _wall_point(double[:, ::1] walls, Py_ssize_t w, double px, double py,
                             double *qx, double *qy) noexcept nogil:
    cdef double lo = walls[w, 2], hi = walls[w, 3]
    if walls[w, 0] == 0.0:
        qx[0] = min(max(px, lo), hi)
        qy[0] = walls[w, 1]
    else:
        qx[0] = walls[w, 1]
        qy[0] = min(max(py, lo), hi)


def wall_repulsion(double[:, ::1] pos, double[:, ::1] walls, double strength,
                   double rng):
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t nw = walls.shape[0]
    out_arr = np.zeros((n, 2))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, w
    cdef double px, py, qx, qy, bx = 0.0, by = 0.0, d, best, mag
    with nogil:
        for i in range(n):
            px = pos[i, 0]
            py = pos[i, 1]
            best = INFINITY
            for w in range(nw):
                _wall_point(walls, w, px, py, &qx, &qy)
                d = sqrt((px - qx) * (px - qx) + (py - qy) * (py - qy))
                if d < best:
                    best = d
                    bx = qx
                    by = qy
            if best > EPS and best < INFINITY:
                mag = (strength / rng) * exp(-best / rng) / best
                out[i, 0] = mag * (px - bx)
                out[i, 1] = mag * (py - by)
    return out_arr


def resolve_walls(double[:, ::1] pos, double radius, double[:, ::1] walls):
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t nw = walls.shape[0]
    cdef Py_ssize_t i, w
    cdef double along, sd, qx, qy, vx, vy, d, s
    with nogil:
        for w in range(nw):
            for i in range(n):
                if walls[w, 0] == 0.0:
                    along = pos[i, 0]
                    sd = walls[w, 4] * (pos[i, 1] - walls[w, 1])
                else:
                    along = pos[i, 1]
                    sd = walls[w, 4] * (pos[i, 0] - walls[w, 1])
                if along >= walls[w, 2] and along <= walls[w, 3]:
                    if sd < radius:
                        if walls[w, 0] == 0.0:
                            pos[i, 1] += (radius - sd) * walls[w, 4]
                        else:
                            pos[i, 0] += (radius - sd) * walls[w, 4]
                else:
                    _wall_point(walls, w, pos[i, 0], pos[i, 1], &qx, &qy)
                    vx = pos[i, 0] - qx
                    vy = pos[i, 1] - qy
                    d = sqrt(vx * vx + vy * vy)
                    if d < radius:
                        s = (radius - d) / max(d, EPS)
                        pos[i, 0] += vx * s
                        pos[i, 1] += vy * s


def clearance_scan(double[:, ::1] cand, double[:, ::1] placed, double[:, ::1] robots,
                   double sep_crowd, double sep_robot, double width, double height):
    cdef Py_ssize_t nc = cand.shape[0]
    cdef Py_ssize_t np_ = placed.shape[0]
    cdef Py_ssize_t nr = robots.shape[0]
    cdef Py_ssize_t i, j, best_i = -1, first = -1
    cdef double cx, cy, dx, dy, g, gap, best = -INFINITY
    with nogil:
        for i in range(nc):
            cx = cand[i, 0]
            cy = cand[i, 1]
            gap = INFINITY
            for j in range(np_):
                dx = placed[j, 0] - cx
                if dx >= sep_crowd + gap or dx <= -(sep_crowd + gap):
                    continue
                dy = _reduce(placed[j, 1] - cy, cx, placed[j, 0], width, height)
                g = sqrt(dx * dx + dy * dy) - sep_crowd
                if g < gap:
                    gap = g
            for j in range(nr):
                dx = robots[j, 0] - cx
                dy = _reduce(robots[j, 1] - cy, cx, robots[j, 0], width, height)
                g = sqrt(dx * dx + dy * dy) - sep_robot
                if g < gap:
                    gap = g
            if gap > best:
                best = gap
                best_i = i
            if gap >= 0.0:
                first = i
                break
    return first, best_i, best
