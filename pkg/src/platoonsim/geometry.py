"""World geometry: regions, periodic wrapping, walls and placement sampling.

Frame: the crowd region is ``[0, W] x [0, H]``, the start region extends to
``x -> -inf`` left of ``x = 0`` and the goal region extends to ``x -> +inf``
right of ``x = goal_x_min``.  Inside the periodic band ``0 <= x <= W`` the
``y`` coordinate is periodic with period ``H``; outside it the corridor is
bounded by solid horizontal walls.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

# Distances below this are treated as coincident.
EPS = 1e-12

# Per-agent retry cap for rejection sampling.
MAX_PLACEMENT_TRIES = 10_000


class PlacementFailed(RuntimeError):
    """Rejection sampling could not place an agent without overlap."""


@dataclass(frozen=True)
class Wall:
    """An axis-aligned wall line, segment or half-line.

    ``axis`` is ``"h"`` for a horizontal wall at ``y = coord`` spanning
    ``x in [lo, hi]`` or ``"v"`` for a vertical wall at ``x = coord``
    spanning ``y in [lo, hi]``.  ``normal`` is +1 or -1 and gives the side of
    free space along the wall's normal axis.  Bounds may be infinite.
    """

    axis: str
    coord: float
    lo: float
    hi: float
    normal: int

    def nearest(self, pos: np.ndarray) -> np.ndarray:
        """Nearest wall point for each row of ``pos`` (shape ``(n, 2)``)."""
        pos = np.atleast_2d(pos)
        q = np.empty_like(pos, dtype=float)
        if self.axis == "h":
            q[:, 0] = np.clip(pos[:, 0], self.lo, self.hi)
            q[:, 1] = self.coord
        else:
            q[:, 0] = self.coord
            q[:, 1] = np.clip(pos[:, 1], self.lo, self.hi)
        return q

    def in_span(self, pos: np.ndarray) -> np.ndarray:
        along = pos[:, 0] if self.axis == "h" else pos[:, 1]
        return (along >= self.lo) & (along <= self.hi)

    def signed_distance(self, pos: np.ndarray) -> np.ndarray:
        """Signed distance to the wall line, positive on the free side."""
        across = pos[:, 1] if self.axis == "h" else pos[:, 0]
        return self.normal * (across - self.coord)

    @property
    def normal_vector(self) -> np.ndarray:
        if self.axis == "h":
            return np.array([0.0, float(self.normal)])
        return np.array([float(self.normal), 0.0])


def wall_table(walls) -> np.ndarray:
    """Pack walls into ``(axis, coord, lo, hi, normal)`` rows for the kernels."""
    rows = [(0.0 if w.axis == "h" else 1.0, w.coord, w.lo, w.hi, float(w.normal))
            for w in walls]
    return np.array(rows, dtype=float).reshape(-1, 5)


@dataclass(frozen=True)
class Environment:
    """Regions, periodic band and walls of the corridor world.

    ``crowd_exit`` enables counter-flow removal at ``x = start_x_max``;
    ``crowd_confinement`` lists the x positions of vertical walls that act
    on crowd agents only.
    """

    width: float = 10.0
    height: float = 5.0
    goal_x_min: float = 5.0
    start_x_max: float = 0.0
    crowd_exit: bool = False
    crowd_confinement: tuple[float, ...] | None = None
    walls: tuple[Wall, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("crowd region must have positive extent")
        if self.start_x_max != 0.0:
            raise ValueError("start region must border the crowd region at x = 0")
        if not self.start_x_max < self.goal_x_min:
            raise ValueError("start and goal regions must have disjoint closures")
        if not self.goal_x_min < self.width:
            raise ValueError("goal region must overlap the crowd region interior")
        w, h = self.width, self.height
        if self.crowd_confinement is None:
            object.__setattr__(self, "crowd_confinement", (0.0, w))
        walls = (
            Wall("h", h, -math.inf, self.start_x_max, -1),
            Wall("h", 0.0, -math.inf, self.start_x_max, +1),
            Wall("h", h, w, math.inf, -1),
            Wall("h", 0.0, w, math.inf, +1),
        )
        object.__setattr__(self, "walls", walls)

    @classmethod
    def for_scenario(cls, scenario, width: float = 10.0, **kwargs) -> "Environment":
        """Standard corridor with crowd confinement matching ``scenario``.

        Counter-flow crowds leave through ``x = 0`` and are walled at
        ``x = width``; the other crowds are walled on both sides.
        """
        from .crowd import Scenario

        if Scenario(scenario) is Scenario.COUNTER_FLOW:
            return cls(width=width, crowd_exit=True,
                       crowd_confinement=(width,), **kwargs)
        return cls(width=width, crowd_exit=False,
                   crowd_confinement=(0.0, width), **kwargs)

    @property
    def band(self) -> tuple[float, float]:
        return (0.0, self.width)

    @property
    def crowd_area(self) -> float:
        return self.width * self.height

    @property
    def crowd_walls(self) -> tuple[Wall, ...]:
        """Solid walls plus the crowd-only confinement lines."""
        extra = tuple(
            Wall("v", x, -math.inf, math.inf, +1 if x <= 0.5 * self.width else -1)
            for x in self.crowd_confinement
        )
        return self.walls + extra

    @functools.cached_property
    def wall_array(self) -> np.ndarray:
        return wall_table(self.walls)

    @functools.cached_property
    def crowd_wall_array(self) -> np.ndarray:
        return wall_table(self.crowd_walls)

    def in_band(self, x):
        return (x >= 0.0) & (x <= self.width)


def wrap_position(p, env: Environment) -> np.ndarray:
    """Map ``y`` into ``[0, H)`` for points inside the periodic band."""
    p = np.array(p, dtype=float)
    if env.in_band(p[0]):
        y = p[1] % env.height
        # A tiny negative y rounds to exactly H under the modulo.
        p[1] = 0.0 if y >= env.height else y
    return p


def wrap_positions(pos: np.ndarray, env: Environment) -> None:
    """In-place vectorised :func:`wrap_position` for an ``(n, 2)`` array."""
    if len(pos) == 0:
        return
    mask = env.in_band(pos[:, 0])
    y = np.mod(pos[mask, 1], env.height)
    y[y >= env.height] = 0.0
    pos[mask, 1] = y


def displacement(a, b, env: Environment) -> np.ndarray:
    """Vector from ``a`` to ``b`` using the minimum image inside the band."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    if env.in_band(a[0]) and env.in_band(b[0]):
        d[1] -= env.height * math.floor(d[1] / env.height + 0.5)
    return d


def displacements(origin, targets: np.ndarray, env: Environment) -> np.ndarray:
    """Minimum-image vectors from one point to every row of ``targets``."""
    origin = np.asarray(origin, dtype=float)
    d = targets - origin
    if len(d) and env.in_band(origin[0]):
        mask = env.in_band(targets[:, 0])
        dy = d[mask, 1]
        d[mask, 1] = dy - env.height * np.floor(dy / env.height + 0.5)
    return d


def closest_boundary_point(p, env: Environment, r_s: float):
    """Relative position of the nearest solid-wall point within ``r_s``.

    Returns ``None`` when no wall point is strictly closer than ``r_s``.
    Periodic seams and crowd confinement lines are not boundaries.
    """
    p = np.asarray(p, dtype=float).reshape(1, 2)
    best, best_d = None, r_s
    for wall in env.walls:
        q = wall.nearest(p)[0]
        d = math.hypot(q[0] - p[0, 0], q[1] - p[0, 1])
        if d < best_d:
            best, best_d = q - p[0], d
    return best


def segment_intersects_disk(a, b, center, radius: float) -> bool:
    """True iff the closed segment ``ab`` passes strictly within ``radius``."""
    a = np.asarray(a, dtype=float)
    ab = np.asarray(b, dtype=float) - a
    ac = np.asarray(center, dtype=float) - a
    denom = ab @ ab
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, (ac @ ab) / denom))
    closest = ab * t - ac
    return bool(math.hypot(closest[0], closest[1]) < radius)


def segment_hits_any_disk(b: np.ndarray, centers: np.ndarray, radius: float) -> bool:
    """Vectorised :func:`segment_intersects_disk` for the segment ``0 -> b``."""
    if len(centers) == 0:
        return False
    denom = b @ b
    if denom == 0.0:
        t = np.zeros(len(centers))
    else:
        t = np.clip(centers @ b / denom, 0.0, 1.0)
    gap = t[:, None] * b - centers
    return bool(np.any(np.hypot(gap[:, 0], gap[:, 1]) < radius))


def region_contains_disk(x_min: float, center, radius: float,
                         env: Environment | None = None) -> bool:
    """Whether a disk lies wholly in the right half-corridor ``x >= x_min``.

    The boundary is closed, so a tangent disk counts.  In the periodic band
    the top and bottom edges are a seam, not a boundary, so only the ``x``
    test applies there.
    """
    cx, cy = float(center[0]), float(center[1])
    if cx - radius < x_min:
        return False
    if env is None or env.in_band(cx):
        return True
    return cy - radius >= 0.0 and cy + radius <= env.height


def sample_positions(region, n: int, min_sep: float, rng: np.random.Generator,
                     existing: np.ndarray | None = None, period_y: float | None = None,
                     max_tries: int = MAX_PLACEMENT_TRIES) -> np.ndarray:
    """Rejection-sample ``n`` disk centres inside ``region``.

    ``region`` is ``(x0, y0, x1, y1)``; each disk of diameter ``min_sep`` is
    kept wholly inside it and at least ``min_sep`` from every previously
    placed centre (including ``existing``).  With ``period_y`` set, ``y`` is
    periodic: centres cover the whole of ``[y0, y1)`` and separation uses the
    minimum image.  Raises :class:`PlacementFailed` when one agent exhausts
    ``max_tries`` draws.
    """
    x0, y0, x1, y1 = region
    r = 0.5 * min_sep
    if period_y is None:
        lo = np.array([x0 + r, y0 + r])
        span = np.array([x1 - x0 - min_sep, y1 - y0 - min_sep])
    else:
        lo = np.array([x0 + r, y0])
        span = np.array([x1 - x0 - min_sep, y1 - y0])
    if n > 0 and np.any(span < 0):
        raise PlacementFailed("region narrower than one disk")
    placed = np.empty((0, 2)) if existing is None else np.asarray(existing, float).reshape(-1, 2)
    out = np.empty((n, 2))
    sep2 = min_sep * min_sep
    pool = np.empty((len(placed) + n, 2))
    pool[: len(placed)] = placed
    count = len(placed)
    for i in range(n):
        for _ in range(max_tries):
            cand = lo + span * rng.random(2)
            if count == 0:
                break
            d = pool[:count] - cand
            if period_y is not None:
                d[:, 1] -= period_y * np.floor(d[:, 1] / period_y + 0.5)
            if np.min(np.einsum("ij,ij->i", d, d)) >= sep2:
                break
        else:
            raise PlacementFailed(
                f"could not place agent {i + 1} of {n} after {max_tries} tries")
        out[i] = cand
        pool[count] = cand
        count += 1
    return out
