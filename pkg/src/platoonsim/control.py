"""Robot sensing and the greedy, platoon and adaptive-platoon strategies.

Every strategy feeds an artificial potential field: a unit attraction
toward the robot's individual goal plus inverse-square repulsion from sensed
robots, crowd agents and the nearest wall point.  The desired velocity is
the force times the sampling time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Environment, closest_boundary_point, displacements, segment_hits_any_disk

# Interaction terms closer than this are skipped.
MIN_SEPARATION = 1e-6


class Strategy(str, enum.Enum):
    GREEDY = "greedy"
    PLATOON = "platoon"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class RobotParams:
    """Robot hardware and controller constants (angles in degrees)."""

    diameter: float = 0.3
    v_max: float = 0.6
    sensing_range: float = 1.5
    k_goal: float = 3.5
    k_robot: float = 0.2
    k_crowd: float = 0.1
    k_boundary: float = 0.1
    pause_range: float = 0.6
    adopt_range: float = 0.6
    drop_angle: float = 20.0
    adopt_angle: float = 5.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"robot parameter {name} must be positive")
        if not self.pause_range < self.sensing_range:
            raise ValueError("pause_range must be below sensing_range")
        if not self.adopt_range < self.sensing_range:
            raise ValueError("adopt_range must be below sensing_range")

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter


@dataclass
class SensorSnapshot:
    """What one robot perceives, relative to itself.

    Neighbours are ordered by ascending distance, ties by id.
    """

    neighbor_ids: np.ndarray
    neighbor_rel: np.ndarray
    crowd_rel: np.ndarray
    boundary_rel: np.ndarray | None = None

    @classmethod
    def empty(cls) -> "SensorSnapshot":
        return cls(np.empty(0, dtype=np.int64), np.empty((0, 2)), np.empty((0, 2)))

    def rel(self, robot_id: int) -> np.ndarray | None:
        hit = np.flatnonzero(self.neighbor_ids == robot_id)
        return self.neighbor_rel[hit[0]] if len(hit) else None

    @property
    def neighbors(self) -> list[tuple[int, np.ndarray]]:
        return list(zip(self.neighbor_ids.tolist(), self.neighbor_rel))


@dataclass(frozen=True)
class StrategyState:
    """Per-robot strategy memory.

    ``follower`` is the fixed follower of a platoon robot; adaptive robots
    learn theirs through notifications instead.
    """

    kind: Strategy
    leader: int | None = None
    follower: int | None = None
    paused: bool = False
    goal_dir: tuple[float, float] = (1.0, 0.0)

    @classmethod
    def initial(cls, kind, robot_id: int, n_robots: int) -> "StrategyState":
        kind = Strategy(kind)
        if kind is Strategy.GREEDY:
            return cls(kind)
        leader = robot_id - 1 if robot_id > 1 else None
        follower = robot_id + 1 if kind is Strategy.PLATOON and robot_id < n_robots else None
        return cls(kind, leader=leader, follower=follower)


def build_snapshot(robot_id: int, robot_pos: np.ndarray, crowd_pos: np.ndarray,
                   env: Environment, params: RobotParams) -> SensorSnapshot:
    """Sense robots and crowd strictly within range, plus the nearest wall."""
    me = robot_pos[robot_id - 1]
    r_s = params.sensing_range
    rel = displacements(me, robot_pos, env)
    dist = np.hypot(rel[:, 0], rel[:, 1])
    mask = dist < r_s
    mask[robot_id - 1] = False
    idx = np.flatnonzero(mask)
    order = idx[np.lexsort((idx, dist[idx]))]
    crowd_rel = np.empty((0, 2))
    if len(crowd_pos):
        c = displacements(me, crowd_pos, env)
        crowd_rel = c[np.hypot(c[:, 0], c[:, 1]) < r_s]
    return SensorSnapshot(order + 1, rel[order], crowd_rel,
                          closest_boundary_point(me, env, r_s))


def _repulsion(rel: np.ndarray) -> np.ndarray:
    if len(rel) == 0:
        return np.zeros(2)
    d = np.hypot(rel[:, 0], rel[:, 1])
    keep = d >= MIN_SEPARATION
    return (rel[keep] / (d[keep] ** 3)[:, None]).sum(axis=0)


def apf_force(snapshot: SensorSnapshot, goal, params: RobotParams) -> np.ndarray:
    """Artificial potential field force for one robot.

    A zero or missing ``goal`` drops the attraction term.
    """
    force = np.zeros(2)
    if goal is not None:
        g = np.asarray(goal, dtype=float)
        norm = math.hypot(g[0], g[1])
        if norm > 0.0:
            force += params.k_goal * g / norm
    force -= params.k_robot * _repulsion(snapshot.neighbor_rel)
    force -= params.k_crowd * _repulsion(snapshot.crowd_rel)
    if snapshot.boundary_rel is not None:
        force -= params.k_boundary * _repulsion(np.reshape(snapshot.boundary_rel, (1, 2)))
    return force


def clamp_velocity(v, v_max: float) -> np.ndarray:
    """Scale ``v`` down onto the speed limit if it exceeds it."""
    v = np.asarray(v, dtype=float)
    speed = math.hypot(v[0], v[1])
    if speed <= v_max:
        return v.copy()
    return v * (v_max / speed)


def greedy_goal(state: StrategyState) -> np.ndarray:
    return np.array(state.goal_dir, dtype=float)


def follow_goal(rel: np.ndarray, d_r: float) -> np.ndarray:
    """Point one body diameter short of the leader along the line to it."""
    return rel * (1.0 - d_r / math.hypot(rel[0], rel[1]))


def platoon_goal(snapshot: SensorSnapshot, leader_id: int, d_r: float):
    rel = snapshot.rel(leader_id)
    return None if rel is None else follow_goal(rel, d_r)


def platoon_pause(snapshot: SensorSnapshot, follower_id: int, r_p: float) -> bool:
    """Pause while the follower is unseen or further than ``r_p``."""
    rel = snapshot.rel(follower_id)
    return rel is None or math.hypot(rel[0], rel[1]) > r_p


def angle_to(v, direction) -> float:
    """Unsigned angle between two vectors, in degrees."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(direction, dtype=float)
    cross = v[0] * u[1] - v[1] * u[0]
    return math.degrees(math.atan2(abs(cross), v @ u))


def adaptive_update(state: StrategyState, snapshot: SensorSnapshot,
                    followed: frozenset | set, params: RobotParams,
                    comfort_radius: float = 0.15) -> StrategyState:
    """One pass of the adaptive-platoon leader logic.

    ``followed`` holds the ids that were notified as followed in the
    previous step.  A held leader is dropped when it is out of sensing range,
    a sensed comfort zone crosses the line of sight, or it lies at least
    ``drop_angle`` off the goal direction.  A leaderless robot adopts the
    nearest unfollowed neighbour within ``adopt_range`` and ``adopt_angle``.
    """
    goal_dir = state.goal_dir
    leader = state.leader
    if leader is not None:
        rel = snapshot.rel(leader)
        if (rel is None
                or segment_hits_any_disk(rel, snapshot.crowd_rel, comfort_radius)
                or angle_to(rel, goal_dir) >= params.drop_angle):
            leader = None
    else:
        for j, rel in snapshot.neighbors:
            if (j not in followed
                    and math.hypot(rel[0], rel[1]) < params.adopt_range
                    and angle_to(rel, goal_dir) <= params.adopt_angle):
                leader = j
                break
    return replace(state, leader=leader)


def strategy_goal(state: StrategyState, snapshot: SensorSnapshot, params: RobotParams):
    """Goal vector for the APF, or ``None`` when the robot must hold still.

    Platoon robots hold still when their fixed leader is out of sight.
    """
    if state.kind is Strategy.GREEDY or state.leader is None:
        return greedy_goal(state)
    rel = snapshot.rel(state.leader)
    if rel is None:
        return None
    return follow_goal(rel, params.diameter)


def compute_command(state: StrategyState, snapshot: SensorSnapshot,
                    params: RobotParams, dt: float) -> tuple[np.ndarray, bool]:
    """Desired (unsaturated) velocity and whether the robot is paused.

    Adaptive states are expected to be updated already; only platoon robots
    apply the pause rule.
    """
    if state.kind is Strategy.PLATOON and state.follower is not None:
        if platoon_pause(snapshot, state.follower, params.pause_range):
            return np.zeros(2), True
    goal = strategy_goal(state, snapshot, params)
    if goal is None:
        return np.zeros(2), True
    return apf_force(snapshot, goal, params) * dt, False
