"""Trial initialisation, the synchronous step loop and trial metrics.

One step runs: sense -> decide -> saturate -> noise -> crowd forces ->
integrate -> wrap -> interception detection -> overlap resolution ->
counter-flow respawn -> arrival bookkeeping.  Every decision and force in a
step reads the state at the start of that step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .control import (
    RobotParams,
    Strategy,
    StrategyState,
    adaptive_update,
    build_snapshot,
    clamp_velocity,
    compute_command,
)
from .crowd import Crowd, CrowdParams, Scenario, crowd_forces, integrate_crowd, respawn_counter_flow
from .geometry import Environment, region_contains_disk, sample_positions, wrap_positions

# Overlap tolerance for interception detection, so that bodies left exactly
# in contact by overlap resolution are not counted as touching.
CONTACT_TOL = 1e-9


class Formation(str, enum.Enum):
    LINE = "line"
    RANDOM = "random"


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.1
    timeout: float = 900.0
    noise_factor: float = 0.05
    # "raise" aborts a trial whose counter-flow respawn finds no free spot;
    # "closest" accepts the clearest of the rejected candidates.
    respawn_policy: str = "closest"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.noise_factor < 0:
            raise ValueError("noise_factor must be non-negative")
        if self.respawn_policy not in ("raise", "closest"):
            raise ValueError("respawn_policy must be 'raise' or 'closest'")

    @property
    def max_steps(self) -> int:
        return int(round(self.timeout / self.dt))


@dataclass(frozen=True)
class TrialConfig:
    """Everything that determines a trial, seed included."""

    scenario: Scenario = Scenario.PASSIVE
    strategy: Strategy = Strategy.GREEDY
    density: float = 0.0
    n_robots: int = 10
    formation: Formation = Formation.LINE
    seed: int = 0
    robot: RobotParams = field(default_factory=RobotParams)
    crowd: CrowdParams = field(default_factory=CrowdParams)
    sim: SimParams = field(default_factory=SimParams)
    spacing: float = 0.5
    spacing_is_gap: bool = False
    start_gap: float = 3.0
    allow_any_formation: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "formation", Formation(self.formation))
        if self.density < 0:
            raise ValueError("density must be non-negative")
        if self.n_robots < 1:
            raise ValueError("n_robots must be at least 1")
        if (self.formation is Formation.RANDOM and self.strategy is not Strategy.GREEDY
                and not self.allow_any_formation):
            raise ValueError("the random formation is only defined for the greedy strategy")

    @property
    def env(self) -> Environment:
        return Environment.for_scenario(self.scenario)

    @property
    def center_spacing(self) -> float:
        return self.spacing + self.robot.diameter if self.spacing_is_gap else self.spacing


@dataclass
class WorldState:
    k: int
    robot_pos: np.ndarray
    strategies: list[StrategyState]
    crowd: Crowd
    rng: np.random.Generator
    env: Environment
    followed: frozenset = frozenset()
    arrivals: dict[int, int] = field(default_factory=dict)
    first_entry_k: int | None = None
    contacts: set = field(default_factory=set)
    interceptions: int = 0
    contact_steps: int = 0
    respawns: int = 0
    paused: np.ndarray | None = None
    max_applied_speed: float = 0.0

    @property
    def n_robots(self) -> int:
        return len(self.robot_pos)

    def leaders(self) -> list[int | None]:
        return [s.leader for s in self.strategies]


@dataclass
class TrialResult:
    time_to_goal: float | None
    interceptions: int
    contact_steps: int
    arrival_times: list[float | None]
    respawns: int
    steps: int
    first_entry_time: float | None
    trace: list[dict] | None = None

    @property
    def timeout(self) -> bool:
        return self.time_to_goal is None

    def to_dict(self) -> dict:
        return {
            "time_to_goal": self.time_to_goal,
            "timeout": self.timeout,
            "interceptions": self.interceptions,
            "contact_steps": self.contact_steps,
            "arrival_times": self.arrival_times,
            "respawns": self.respawns,
            "steps": self.steps,
            "first_entry_time": self.first_entry_time,
        }


def n_crowd(density: float, area: float, d_c: float) -> int:
    """Crowd size for a target area fraction."""
    if density < 0 or area <= 0 or d_c <= 0:
        raise ValueError("density must be >= 0, area and d_c > 0")
    return int(math.floor(density * area / (math.pi / 4.0 * d_c * d_c)))


def robot_start_positions(config: TrialConfig, rng: np.random.Generator) -> np.ndarray:
    """Robot 1 nearest the crowd region, later ids further left."""
    n = config.n_robots
    h = config.env.height
    x = -config.start_gap - config.center_spacing * np.arange(n)
    if config.formation is Formation.LINE:
        y = np.full(n, 0.5 * h)
    else:
        y = 0.5 + (h - 1.0) * rng.random(n)
    return np.column_stack([x, y])


def init_trial(config: TrialConfig) -> WorldState:
    rng = np.random.default_rng(config.seed)
    env = config.env
    robots = robot_start_positions(config, rng)
    n_c = n_crowd(config.density, env.crowd_area, config.crowd.comfort_diameter)
    pos = sample_positions((0.0, 0.0, env.width, env.height), n_c,
                           config.crowd.comfort_diameter, rng, period_y=env.height)
    crowd = Crowd.at_rest(pos, config.scenario)
    strategies = [StrategyState.initial(config.strategy, i, config.n_robots)
                  for i in range(1, config.n_robots + 1)]
    followed = frozenset(s.leader for s in strategies if s.leader is not None)
    return WorldState(0, robots, strategies, crowd, rng, env, followed=followed,
                      paused=np.zeros(config.n_robots, dtype=bool))


def apply_noise(u: np.ndarray, rng: np.random.Generator, noise_factor: float,
                v_max: float) -> np.ndarray:
    """Zero-mean Gaussian noise with per-component std ``noise_factor * |u|``.

    Always draws one normal per component so the stream does not depend on
    the commands.  The result is re-saturated to ``v_max``.
    """
    u = np.asarray(u, dtype=float)
    z = rng.standard_normal(u.shape)
    noisy = u + noise_factor * np.abs(u) * z
    if noisy.ndim == 1:
        return clamp_velocity(noisy, v_max)
    return np.array([clamp_velocity(v, v_max) for v in noisy]).reshape(u.shape)


def resolve_overlaps(robot_pos: np.ndarray, crowd_pos: np.ndarray, env: Environment,
                     robot_radius: float, comfort_radius: float) -> None:
    """One in-place overlap pass: body pairs in id order, then walls."""
    kernels.resolve_pairs(robot_pos, crowd_pos, robot_radius, comfort_radius,
                          env.width, env.height)
    kernels.resolve_walls(robot_pos, robot_radius, env.wall_array)
    kernels.resolve_walls(crowd_pos, comfort_radius, env.crowd_wall_array)
    wrap_positions(robot_pos, env)
    wrap_positions(crowd_pos, env)


def decide(world: WorldState, config: TrialConfig) -> tuple[np.ndarray, list[StrategyState], np.ndarray]:
    """Desired velocities and updated strategy states from the current state."""
    rp = config.robot
    n = world.n_robots
    snaps = [build_snapshot(i, world.robot_pos, world.crowd.pos, world.env, rp)
             for i in range(1, n + 1)]
    states = list(world.strategies)
    if config.strategy is Strategy.ADAPTIVE:
        states = [adaptive_update(s, snap, world.followed, rp, config.crowd.comfort_radius)
                  for s, snap in zip(states, snaps)]
        states = _settle_claims(states)
    u = np.zeros((n, 2))
    paused = np.zeros(n, dtype=bool)
    for i, (state, snap) in enumerate(zip(states, snaps)):
        u[i], paused[i] = compute_command(state, snap, rp, config.sim.dt)
    return u, states, paused


def _settle_claims(states: list[StrategyState]) -> list[StrategyState]:
    """Keep only the lowest-id claimant when several robots take one leader."""
    taken: set[int] = set()
    out = []
    for s in states:
        if s.leader is not None:
            if s.leader in taken:
                s = replace(s, leader=None)
            else:
                taken.add(s.leader)
        out.append(s)
    return out


def update_metrics(world: WorldState, touching: set, config: TrialConfig) -> None:
    """Interception onsets, crowd-region entry and goal arrivals (in place)."""
    new = touching - world.contacts
    world.interceptions += len(new)
    world.contact_steps += len(touching)
    world.contacts = touching
    r = config.robot.radius
    env = world.env
    if world.first_entry_k is None:
        x = world.robot_pos[:, 0]
        if np.any((x + r > 0.0) & (x - r < env.width)):
            world.first_entry_k = world.k
    for i, p in enumerate(world.robot_pos, start=1):
        if i not in world.arrivals and region_contains_disk(env.goal_x_min, p, r, env):
            world.arrivals[i] = world.k


def touching_pairs(world: WorldState, config: TrialConfig) -> set:
    """(robot id, crowd agent id) pairs whose bodies currently overlap."""
    if len(world.crowd) == 0:
        return set()
    contact = config.robot.radius + config.crowd.comfort_radius - CONTACT_TOL
    m = kernels.contact_matrix(np.ascontiguousarray(world.robot_pos),
                               np.ascontiguousarray(world.crowd.pos), contact,
                               world.env.width, world.env.height)
    ii, jj = np.nonzero(m)
    ids = world.crowd.ids
    return {(int(i) + 1, int(ids[j])) for i, j in zip(ii, jj)}


def step(world: WorldState, config: TrialConfig) -> WorldState:
    """Advance the world by one sampling period (in place; returns it)."""
    dt = config.sim.dt
    rp = config.robot
    u_des, states, paused = decide(world, config)
    u = np.array([clamp_velocity(v, rp.v_max) for v in u_des]).reshape(-1, 2)
    if config.sim.noise_factor > 0:
        u = apply_noise(u, world.rng, config.sim.noise_factor, rp.v_max)
    force = crowd_forces(world.crowd, world.robot_pos, config.crowd, world.env)

    world.robot_pos = world.robot_pos + u * dt
    world.crowd = integrate_crowd(world.crowd, force, config.crowd, dt)
    wrap_positions(world.robot_pos, world.env)
    wrap_positions(world.crowd.pos, world.env)
    world.k += 1
    world.max_applied_speed = max(world.max_applied_speed,
                                  float(np.max(np.hypot(u[:, 0], u[:, 1]), initial=0.0)))

    # Interceptions are judged on the motion itself, before overlap
    # resolution would separate every touching pair again.
    touching = touching_pairs(world, config)

    resolve_overlaps(world.robot_pos, world.crowd.pos, world.env, rp.radius,
                     config.crowd.comfort_radius)
    if world.env.crowd_exit:
        world.crowd, n = respawn_counter_flow(world.crowd, world.env, world.rng,
                                              config.crowd, world.robot_pos, rp.radius,
                                              config.sim.respawn_policy)
        world.respawns += n

    world.strategies = states
    world.paused = paused
    world.followed = frozenset(s.leader for s in states if s.leader is not None)
    update_metrics(world, touching, config)
    return world


def trace_row(world: WorldState) -> dict:
    return {
        "k": world.k,
        "robots": world.robot_pos.tolist(),
        "crowd": world.crowd.pos.tolist(),
        "crowd_ids": world.crowd.ids.tolist(),
        "leaders": world.leaders(),
        "paused": [bool(p) for p in world.paused],
    }


def finished(world: WorldState) -> bool:
    return len(world.arrivals) == world.n_robots


def _seconds(steps: int, dt: float) -> float:
    # Rounded so that e.g. 358 steps read 35.8 rather than 35.800000000000004.
    return round(steps * dt, 9)


def run_trial(config: TrialConfig, trace: bool = False, world: WorldState | None = None,
              observer=None) -> TrialResult:
    """Step until every robot has arrived or the timeout elapses.

    ``observer`` is called with the world after initialisation and after
    every step.
    """
    world = init_trial(config) if world is None else world
    rows = [trace_row(world)] if trace else None
    if observer is not None:
        observer(world)
    max_steps = config.sim.max_steps
    while not finished(world) and world.k < max_steps:
        step(world, config)
        if trace:
            rows.append(trace_row(world))
        if observer is not None:
            observer(world)
    dt = config.sim.dt
    ttg = None
    if finished(world):
        ttg = _seconds(max(world.arrivals.values()) - world.first_entry_k, dt)
    return TrialResult(
        time_to_goal=ttg,
        interceptions=world.interceptions,
        contact_steps=world.contact_steps,
        arrival_times=[_seconds(world.arrivals[i], dt) if i in world.arrivals else None
                       for i in range(1, world.n_robots + 1)],
        respawns=world.respawns,
        steps=world.k,
        first_entry_time=None if world.first_entry_k is None else _seconds(world.first_entry_k, dt),
        trace=rows,
    )
