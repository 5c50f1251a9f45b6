"""NumPy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``PLATOONSIM_PURE_PYTHON`` is set.  Semantics match ``_kernels.pyx``; results
agree to floating-point summation order.
"""

import math

import numpy as np

EPS = 1e-12

# Pairs further apart than contact + this margin before resolution starts are
# never visited by the fallback pass.  One correction moves a body at most
# half a contact distance, so only long chains of corrections could bring a
# skipped pair into contact within the same pass.
_PAIR_MARGIN = 1.0


def _min_image(d, in_a, in_b, height):
    """Reduce ``d[..., 1]`` in place to the minimum image where both are in the band."""
    both = in_a & in_b
    dy = d[..., 1]
    dy[both] -= height * np.floor(dy[both] / height + 0.5)


def social_repulsion(pos, dirs, robots, V0, sigma, cos_phi, c, cutoff, width, height):
    """Summed anisotropic exponential repulsion on each crowd agent.

    Sources are the other crowd agents and every robot position.  A source
    in the agent's field of view (``e . (-q_hat) >= cos_phi``) has weight 1,
    otherwise ``c``.  Sources at or beyond ``cutoff`` and coincident sources
    contribute nothing.
    """
    n = len(pos)
    out = np.zeros((n, 2))
    if n == 0:
        return out
    src = np.concatenate([pos, robots]) if len(robots) else pos
    q = pos[:, None, :] - src[None, :, :]
    in_pos = (pos[:, 0] >= 0.0) & (pos[:, 0] <= width)
    in_src = (src[:, 0] >= 0.0) & (src[:, 0] <= width)
    _min_image(q, in_pos[:, None], in_src[None, :], height)
    d = np.hypot(q[..., 0], q[..., 1])
    active = (d < cutoff) & (d > EPS)
    idx = np.arange(n)
    active[idx, idx] = False
    ii, jj = np.nonzero(active)
    if len(ii) == 0:
        return out
    qa = q[ii, jj]
    da = d[ii, jj]
    mag = (V0 / sigma) * np.exp(-da / sigma)
    facing = -(dirs[ii, 0] * qa[:, 0] + dirs[ii, 1] * qa[:, 1]) >= cos_phi * da
    w = np.where(facing, 1.0, c)
    f = (w * mag / da)[:, None] * qa
    np.add.at(out, ii, f)
    return out


def _separate(a, b, contact, width, height):
    """Move ``a`` and ``b`` apart along the minimum image, half the overlap each."""
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    if 0.0 <= a[0] <= width and 0.0 <= b[0] <= width:
        dy -= height * math.floor(dy / height + 0.5)
    dist = math.sqrt(dx * dx + dy * dy)
    if dist >= contact:
        return
    if dist < EPS:
        ux, uy = 0.0, 1.0
    else:
        ux, uy = dx / dist, dy / dist
    half = 0.5 * (contact - dist)
    a[0] -= ux * half
    a[1] -= uy * half
    b[0] += ux * half
    b[1] += uy * half


def resolve_pairs(robots, crowd, r_robot, r_crowd, width, height):
    """One in-place overlap pass: robot-robot pairs then robot-crowd pairs.

    Pairs are visited in ascending ``(i, j)`` order and each is re-checked on
    the current (partially corrected) positions.
    """
    nr, nc = len(robots), len(crowd)
    if nr == 0:
        return
    groups = [(robots, 2.0 * r_robot, True)]
    if nc:
        groups.append((crowd, r_robot + r_crowd, False))
    for other, contact, same in groups:
        q = other[None, :, :] - robots[:, None, :]
        in_r = (robots[:, 0] >= 0.0) & (robots[:, 0] <= width)
        in_o = (other[:, 0] >= 0.0) & (other[:, 0] <= width)
        _min_image(q, in_r[:, None], in_o[None, :], height)
        close = np.hypot(q[..., 0], q[..., 1]) < contact + _PAIR_MARGIN
        if same:
            close = np.triu(close, k=1)
        for i, j in zip(*np.nonzero(close)):
            _separate(robots[i], other[j], contact, width, height)


def contact_matrix(robots, crowd, contact, width, height):
    """Boolean ``(n_r, n_c)`` matrix of strict overlaps (``d < contact``)."""
    if len(robots) == 0 or len(crowd) == 0:
        return np.zeros((len(robots), len(crowd)), dtype=bool)
    q = crowd[None, :, :] - robots[:, None, :]
    in_r = (robots[:, 0] >= 0.0) & (robots[:, 0] <= width)
    in_c = (crowd[:, 0] >= 0.0) & (crowd[:, 0] <= width)
    _min_image(q, in_r[:, None], in_c[None, :], height)
    return np.hypot(q[..., 0], q[..., 1]) < contact


def _wall_points(pos, wall):
    axis, coord, lo, hi, _ = wall
    q = np.empty_like(pos)
    if axis == 0.0:
        q[:, 0] = np.clip(pos[:, 0], lo, hi)
        q[:, 1] = coord
    else:
        q[:, 0] = coord
        q[:, 1] = np.clip(pos[:, 1], lo, hi)
    return q


def wall_repulsion(pos, walls, strength, rng):
    """Exponential push from the single nearest wall point of each body.

    ``walls`` rows are ``(axis, coord, lo, hi, normal)`` with axis 0 for
    horizontal and 1 for vertical walls.
    """
    n = len(pos)
    out = np.zeros((n, 2))
    if n == 0 or len(walls) == 0:
        return out
    best = np.full(n, np.inf)
    bq = np.zeros((n, 2))
    for wall in walls:
        q = _wall_points(pos, wall)
        d = np.sqrt((pos[:, 0] - q[:, 0]) ** 2 + (pos[:, 1] - q[:, 1]) ** 2)
        closer = d < best
        best[closer] = d[closer]
        bq[closer] = q[closer]
    ok = (best > EPS) & np.isfinite(best)
    mag = (strength / rng) * np.exp(-best[ok] / rng) / best[ok]
    out[ok] = mag[:, None] * (pos[ok] - bq[ok])
    return out


def resolve_walls(pos, radius, walls):
    """Push every disk out of every wall it penetrates, in place.

    Within a wall's span the disk moves along the wall normal until tangent;
    beyond an endpoint it moves radially away from the endpoint.
    """
    if len(pos) == 0:
        return
    for wall in walls:
        axis, coord, lo, hi, normal = wall
        a, b = (0, 1) if axis == 0.0 else (1, 0)
        along = pos[:, a]
        sd = normal * (pos[:, b] - coord)
        span = (along >= lo) & (along <= hi)
        hit = span & (sd < radius)
        pos[hit, b] += (radius - sd[hit]) * normal
        off = np.flatnonzero(~span)
        if len(off):
            q = _wall_points(pos[off], wall)
            v = pos[off] - q
            d = np.sqrt(v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1])
            inside = d < radius
            if np.any(inside):
                s = (radius - d[inside]) / np.maximum(d[inside], EPS)
                pos[off[inside]] += v[inside] * s[:, None]


def clearance_scan(cand, placed, robots, sep_crowd, sep_robot, width, height):
    """Scan candidate centres for the first one clear of every body.

    Clearance is the smallest ``distance - sep`` over placed bodies and
    robots.  Returns ``(first_clear, best, best_gap)``; ``first_clear`` is -1
    when no candidate is clear, and ``best`` is then the candidate with the
    largest clearance.
    """
    gap = np.full(len(cand), np.inf)
    in_c = (cand[:, 0] >= 0.0) & (cand[:, 0] <= width)
    for other, sep in ((placed, sep_crowd), (robots, sep_robot)):
        if len(other):
            d = other[None, :, :] - cand[:, None, :]
            in_o = (other[:, 0] >= 0.0) & (other[:, 0] <= width)
            _min_image(d, in_c[:, None], in_o[None, :], height)
            gap = np.minimum(gap, np.hypot(d[..., 0], d[..., 1]).min(axis=1) - sep)
    ok = np.flatnonzero(gap >= 0.0)
    if len(ok):
        i = int(ok[0])
        return i, i, float(gap[i])
    i = int(np.argmax(gap))
    return -1, i, float(gap[i])
