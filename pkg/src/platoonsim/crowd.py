"""Social-force crowd agents.

Each agent relaxes toward ``v0 * e`` with time constant ``tau`` and is pushed
away from peers, robots and the nearest wall by exponential potentials.
Sources outside an agent's field of view are down-weighted by ``c``.
Robots enter the pairwise sum exactly like peers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import (
    EPS,
    MAX_PLACEMENT_TRIES,
    Environment,
    PlacementFailed,
    wrap_positions,
)


class Scenario(str, enum.Enum):
    PASSIVE = "passive"
    COUNTER_FLOW = "counter_flow"
    PERPENDICULAR_FLOW = "perpendicular_flow"


_DIRECTIONS = {
    Scenario.PASSIVE: (0.0, 0.0),
    Scenario.COUNTER_FLOW: (-1.0, 0.0),
    Scenario.PERPENDICULAR_FLOW: (0.0, 1.0),
}


def desired_direction(scenario) -> np.ndarray:
    return np.array(_DIRECTIONS[Scenario(scenario)])


@dataclass(frozen=True)
class CrowdParams:
    """Social-force constants.

    ``fov_half_angle`` is in degrees.  ``cutoff_sigmas`` bounds the pairwise
    interaction range in units of ``pair_range``.  The defaults are calibrated
    (a softer ``pair_strength`` and a stronger anisotropy than the textbook
    pedestrian values, which :meth:`reference` returns) so that robots feel
    the crowd push back while flow still inverts near density 0.4.
    """

    desired_speed: float = 1.34
    relaxation_time: float = 0.5
    pair_strength: float = 0.85
    pair_range: float = 0.3
    wall_strength: float = 10.0
    wall_range: float = 0.2
    fov_half_angle: float = 100.0
    out_of_view_weight: float = 0.05
    speed_cap_factor: float = 1.3
    comfort_diameter: float = 0.3
    cutoff_sigmas: float = 5.0

    def __post_init__(self):
        for name in ("desired_speed", "relaxation_time", "pair_strength", "pair_range",
                     "wall_strength", "wall_range", "fov_half_angle",
                     "out_of_view_weight", "speed_cap_factor", "comfort_diameter",
                     "cutoff_sigmas"):
            if not getattr(self, name) > 0:
                raise ValueError(f"crowd parameter {name} must be positive")
        if not self.out_of_view_weight < 1:
            raise ValueError("out_of_view_weight must be below 1")

    @classmethod
    def reference(cls, **overrides) -> "CrowdParams":
        """Uncalibrated pedestrian values (V0 = 2.1, c = 0.5)."""
        return cls(**{"pair_strength": 2.1, "out_of_view_weight": 0.5, **overrides})

    @property
    def cos_phi(self) -> float:
        return math.cos(math.radians(self.fov_half_angle))

    @property
    def cutoff(self) -> float:
        return self.cutoff_sigmas * self.pair_range

    @property
    def max_speed(self) -> float:
        return self.speed_cap_factor * self.desired_speed

    @property
    def comfort_radius(self) -> float:
        return 0.5 * self.comfort_diameter


@dataclass
class CrowdAgent:
    id: int
    pos: np.ndarray
    vel: np.ndarray
    desired_dir: np.ndarray
    comfort_radius: float = 0.15


@dataclass
class Crowd:
    """Struct-of-arrays crowd state; row order is the processing order."""

    ids: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    dirs: np.ndarray

    @classmethod
    def empty(cls) -> "Crowd":
        return cls(np.empty(0, dtype=np.int64), np.empty((0, 2)),
                   np.empty((0, 2)), np.empty((0, 2)))

    @classmethod
    def at_rest(cls, pos, scenario, first_id: int = 0) -> "Crowd":
        pos = np.array(pos, dtype=float).reshape(-1, 2)
        n = len(pos)
        dirs = np.tile(desired_direction(scenario), (n, 1))
        return cls(np.arange(first_id, first_id + n, dtype=np.int64), pos,
                   np.zeros((n, 2)), dirs)

    @classmethod
    def from_agents(cls, agents: list[CrowdAgent]) -> "Crowd":
        if not agents:
            return cls.empty()
        return cls(np.array([a.id for a in agents], dtype=np.int64),
                   np.array([a.pos for a in agents], dtype=float),
                   np.array([a.vel for a in agents], dtype=float),
                   np.array([a.desired_dir for a in agents], dtype=float))

    def agents(self, comfort_radius: float = 0.15) -> list[CrowdAgent]:
        return [CrowdAgent(int(i), p.copy(), v.copy(), e.copy(), comfort_radius)
                for i, p, v, e in zip(self.ids, self.pos, self.vel, self.dirs)]

    def copy(self) -> "Crowd":
        return Crowd(self.ids.copy(), self.pos.copy(), self.vel.copy(), self.dirs.copy())

    def __len__(self):
        return len(self.ids)

    @property
    def next_id(self) -> int:
        return int(self.ids.max()) + 1 if len(self.ids) else 0


def social_force(agent: CrowdAgent, peers, robot_positions, wall_point,
                 params: CrowdParams, env: Environment) -> np.ndarray:
    """Total social force on one agent, evaluated term by term.

    ``peers`` and ``robot_positions`` are sequences of absolute positions
    (the agent itself excluded); ``wall_point`` is the nearest wall point or
    ``None``.  This is the scalar reference for the vectorised path used by
    :func:`step_crowd`.
    """
    p = np.asarray(agent.pos, dtype=float)
    e = np.asarray(agent.desired_dir, dtype=float)
    force = (params.desired_speed * e - np.asarray(agent.vel, dtype=float)) / params.relaxation_time
    k = params.pair_strength / params.pair_range
    in_band = env.in_band(p[0])
    for src in list(peers) + list(robot_positions):
        src = np.asarray(src, dtype=float)
        q = p - src
        if in_band and env.in_band(src[0]):
            q[1] -= env.height * math.floor(q[1] / env.height + 0.5)
        d = math.hypot(q[0], q[1])
        if d <= EPS or d >= params.cutoff:
            continue
        w = 1.0 if -(e @ q) >= params.cos_phi * d else params.out_of_view_weight
        force += w * k * math.exp(-d / params.pair_range) * q / d
    if wall_point is not None:
        n = p - np.asarray(wall_point, dtype=float)
        d = math.hypot(n[0], n[1])
        if d > EPS:
            force += (params.wall_strength / params.wall_range) * math.exp(-d / params.wall_range) * n / d
    return force


def nearest_wall_point(p, env: Environment):
    """Nearest point over all crowd walls (solid and confinement) to ``p``."""
    p = np.asarray(p, dtype=float).reshape(1, 2)
    best, best_d = None, math.inf
    for wall in env.crowd_walls:
        q = wall.nearest(p)[0]
        d = math.hypot(q[0] - p[0, 0], q[1] - p[0, 1])
        if d < best_d:
            best, best_d = q, d
    return best


def crowd_forces(crowd: Crowd, robot_pos: np.ndarray, params: CrowdParams,
                 env: Environment) -> np.ndarray:
    """Vectorised :func:`social_force` for every agent (state at one instant)."""
    n = len(crowd)
    if n == 0:
        return np.empty((0, 2))
    robots = np.ascontiguousarray(robot_pos, dtype=float).reshape(-1, 2)
    force = (params.desired_speed * crowd.dirs - crowd.vel) / params.relaxation_time
    force += kernels.social_repulsion(
        np.ascontiguousarray(crowd.pos), np.ascontiguousarray(crowd.dirs), robots,
        params.pair_strength, params.pair_range, params.cos_phi,
        params.out_of_view_weight, params.cutoff, env.width, env.height)
    force += kernels.wall_repulsion(np.ascontiguousarray(crowd.pos), env.crowd_wall_array,
                                    params.wall_strength, params.wall_range)
    return force


def cap_speed(vel: np.ndarray, v_max: float) -> np.ndarray:
    speed = np.hypot(vel[:, 0], vel[:, 1])
    scale = np.ones_like(speed)
    over = speed > v_max
    scale[over] = v_max / speed[over]
    return vel * scale[:, None]


def integrate_crowd(crowd: Crowd, force: np.ndarray, params: CrowdParams,
                    dt: float) -> Crowd:
    """Velocity/position update from precomputed forces (no wrapping)."""
    out = crowd.copy()
    if len(out) == 0:
        return out
    out.vel = cap_speed(out.vel + force * dt, params.max_speed)
    out.pos = out.pos + out.vel * dt
    return out


def step_crowd(crowd: Crowd, robot_pos, params: CrowdParams, env: Environment,
               dt: float) -> Crowd:
    """Advance a crowd by one step in isolation from robot overlap handling.

    Forces are evaluated on the current state for all agents before any
    agent moves.  Crowd-crowd overlaps are left alone; walls (including the
    crowd confinement lines) are enforced.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    robots = np.asarray(robot_pos, dtype=float).reshape(-1, 2)
    force = crowd_forces(crowd, robots, params, env)
    out = integrate_crowd(crowd, force, params, dt)
    wrap_positions(out.pos, env)
    kernels.resolve_walls(out.pos, params.comfort_radius, env.crowd_wall_array)
    wrap_positions(out.pos, env)
    return out


RESPAWN_BATCH = 500


def respawn_counter_flow(crowd: Crowd, env: Environment, rng: np.random.Generator,
                         params: CrowdParams, robot_pos=None,
                         robot_radius: float = 0.15,
                         on_exhausted: str = "raise") -> tuple[Crowd, int]:
    """Replace agents wholly inside the start region with fresh ones.

    New agents get new ids, zero velocity and a position sampled uniformly in
    the part of the crowd region that overlaps the goal region, clear of all
    comfort zones and robot bodies.  When ``MAX_PLACEMENT_TRIES`` candidates
    all collide, ``on_exhausted="raise"`` raises :class:`PlacementFailed` and
    ``"closest"`` keeps the candidate with the largest clearance instead
    (crowd overlap is legal, so a jammed spawn area stays usable).
    """
    if on_exhausted not in ("raise", "closest"):
        raise ValueError(f"unknown on_exhausted policy {on_exhausted!r}")
    r = params.comfort_radius
    gone = crowd.pos[:, 0] + r <= env.start_x_max
    count = int(np.count_nonzero(gone))
    if count == 0:
        return crowd, 0
    keep = ~gone
    out = Crowd(crowd.ids[keep], crowd.pos[keep], crowd.vel[keep], crowd.dirs[keep])
    robots = np.empty((0, 2)) if robot_pos is None else np.asarray(robot_pos, float).reshape(-1, 2)
    lo = np.array([env.goal_x_min + r, r])
    span = np.array([env.width - r, env.height - r]) - lo
    next_id = max(crowd.next_id, 0)
    placed = np.ascontiguousarray(out.pos)
    robots = np.ascontiguousarray(robots)
    for _ in range(count):
        best, best_gap, tries = None, -np.inf, 0
        while tries < MAX_PLACEMENT_TRIES:
            b = min(RESPAWN_BATCH, MAX_PLACEMENT_TRIES - tries)
            cand = lo + span * rng.random((b, 2))
            ok, i, gap = kernels.clearance_scan(cand, placed, robots, 2 * r,
                                                r + robot_radius, env.width, env.height)
            if ok >= 0:
                best = cand[ok]
                break
            if gap > best_gap:
                best, best_gap = cand[i], gap
            tries += b
        else:
            if on_exhausted == "raise":
                raise PlacementFailed(
                    f"counter-flow respawn failed after {MAX_PLACEMENT_TRIES} tries")
        placed = np.vstack([placed, best])
    dirs = np.tile(desired_direction(Scenario.COUNTER_FLOW), (count, 1))
    out = Crowd(
        np.concatenate([out.ids, np.arange(next_id, next_id + count, dtype=np.int64)]),
        placed,
        np.concatenate([out.vel, np.zeros((count, 2))]),
        np.concatenate([out.dirs, dirs]),
    )
    return out, count


def mean_flow_velocity(vel: np.ndarray, scenario) -> float:
    """Mean velocity component along the scenario's desired direction."""
    e = desired_direction(scenario)
    if not np.any(e):
        raise ValueError("the passive scenario has no flow direction")
    vel = np.asarray(vel, dtype=float).reshape(-1, 2)
    if len(vel) == 0:
        raise ValueError("mean flow of an empty crowd is undefined")
    return float(np.mean(vel @ e))


