"""Batch drivers: strategy/density sweeps, crowd-only baselines, aggregation.

Every trial is fully determined by its config (seed included), so trials can
run in any order or in parallel; results are always reported in the
deterministic order of :meth:`SweepSpec.configs`.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .control import RobotParams, Strategy
from .crowd import Crowd, CrowdParams, Scenario, desired_direction, mean_flow_velocity, respawn_counter_flow, step_crowd
from .engine import Formation, SimParams, TrialConfig, n_crowd, run_trial
from .geometry import Environment, sample_positions

MAX_DENSITY = 0.5


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian product of strategies, densities, robot counts, formations and seeds."""

    scenario: Scenario
    strategies: tuple
    densities: tuple
    n_robots: tuple = (10,)
    formations: tuple = (Formation.LINE,)
    seeds: tuple = tuple(range(30))
    robot: RobotParams = field(default_factory=RobotParams)
    crowd: CrowdParams = field(default_factory=CrowdParams)
    sim: SimParams = field(default_factory=SimParams)
    allow_any_formation: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "strategies", tuple(Strategy(s) for s in self.strategies))
        object.__setattr__(self, "formations", tuple(Formation(f) for f in self.formations))
        for name in ("densities", "n_robots", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("strategies", "densities", "n_robots", "formations", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"sweep {name} must not be empty")
        for rho in self.densities:
            if not 0.0 <= rho <= MAX_DENSITY:
                raise ValueError(f"density {rho} outside [0, {MAX_DENSITY}]")
        if not self.allow_any_formation:
            for st, fm in itertools.product(self.strategies, self.formations):
                if fm is Formation.RANDOM and st is not Strategy.GREEDY:
                    raise ValueError(f"random formation is only defined for greedy, not {st.value}")

    def configs(self) -> list[TrialConfig]:
        return [
            TrialConfig(scenario=self.scenario, strategy=st, density=rho, n_robots=n,
                        formation=fm, seed=seed, robot=self.robot, crowd=self.crowd,
                        sim=self.sim, allow_any_formation=self.allow_any_formation)
            for st, rho, n, fm, seed in itertools.product(
                self.strategies, self.densities, self.n_robots, self.formations, self.seeds)
        ]


def config_key(config: TrialConfig) -> tuple:
    """Grouping key of a trial: everything except the seed."""
    return (config.scenario.value, config.strategy.value, config.density,
            config.n_robots, config.formation.value)


KEY_FIELDS = ("scenario", "strategy", "density", "n_robots", "formation")


@dataclass
class TrialRecord:
    config: TrialConfig
    result: dict | None = None
    error: str | None = None

    @property
    def key(self) -> tuple:
        return config_key(self.config)

    def to_dict(self) -> dict:
        out = dict(zip(KEY_FIELDS, self.key))
        out["seed"] = self.config.seed
        if self.error is not None:
            out["error"] = self.error
        else:
            out.update(self.result)
        return out


@dataclass
class AggregateRow:
    key: tuple
    n_trials: int
    timeouts: int
    errors: int
    time_median: float | None
    time_q1: float | None
    time_q3: float | None
    interceptions_median: float | None
    interceptions_q1: float | None
    interceptions_q3: float | None

    # Column order of aggregate.csv.
    COLUMNS = KEY_FIELDS + ("n_trials", "timeouts", "errors", "time_median", "time_q1",
                            "time_q3", "interceptions_median", "interceptions_q1",
                            "interceptions_q3")

    def as_row(self) -> list:
        d = asdict(self)
        return list(self.key) + [d[c] for c in self.COLUMNS[len(KEY_FIELDS):]]


def quartiles(values) -> tuple[float, float, float]:
    """(q1, median, q3) with linear interpolation between order statistics."""
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return float(q1), float(med), float(q3)


def aggregate(trials: list[TrialRecord]) -> AggregateRow:
    """Reduce the trials of one configuration to medians and quartiles.

    Timed-out trials are left out of the time statistics and counted instead;
    their interceptions still count.  Failed trials appear only in ``errors``.
    """
    if not trials:
        raise ValueError("cannot aggregate an empty trial list")
    keys = {t.key for t in trials}
    if len(keys) != 1:
        raise ValueError(f"trials span several configurations: {sorted(keys)}")
    ok = [t.result for t in trials if t.error is None]
    times = [r["time_to_goal"] for r in ok if not r["timeout"]]
    hits = [r["interceptions"] for r in ok]
    t_stats = quartiles(times) if times else (None, None, None)
    i_stats = quartiles(hits) if hits else (None, None, None)
    return AggregateRow(
        key=trials[0].key,
        n_trials=len(trials),
        timeouts=sum(1 for r in ok if r["timeout"]),
        errors=len(trials) - len(ok),
        time_median=t_stats[1], time_q1=t_stats[0], time_q3=t_stats[2],
        interceptions_median=i_stats[1], interceptions_q1=i_stats[0], interceptions_q3=i_stats[2],
    )


def _run_one(config: TrialConfig) -> TrialRecord:
    try:
        return TrialRecord(config, result=run_trial(config).to_dict())
    except Exception as exc:  # recorded per trial; the sweep carries on
        return TrialRecord(config, error=f"{type(exc).__name__}: {exc}")


def _pmap(fn, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=1))


def run_trials(configs: list[TrialConfig], jobs: int = 1) -> list[TrialRecord]:
    return _pmap(_run_one, configs, jobs)


def group_records(records: list[TrialRecord]) -> list[AggregateRow]:
    """One aggregate row per config key, in first-appearance order."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault(rec.key, []).append(rec)
    return [aggregate(g) for g in groups.values()]


def run_sweep(spec: SweepSpec, jobs: int = 1) -> tuple[list[AggregateRow], list[TrialRecord]]:
    """Run every trial of ``spec``; returns (aggregate rows, per-trial records)."""
    records = run_trials(spec.configs(), jobs)
    return group_records(records), records


def scalability_spec(robot_counts=(10, 50, 100, 150, 200), seeds=tuple(range(30)),
                     density: float = 0.3, **kw) -> SweepSpec:
    """Counter-flow sweep over the number of robots (greedy line, platoon, adaptive)."""
    return SweepSpec(Scenario.COUNTER_FLOW, tuple(Strategy), (density,),
                     n_robots=tuple(robot_counts), seeds=tuple(seeds), **kw)


# --- crowd-only baseline -------------------------------------------------

@dataclass
class BaselineRow:
    density: float
    n_agents: int
    median: float
    q1: float
    q3: float
    flows: list[float]

    COLUMNS = ("density", "n_agents", "median", "q1", "q3")

    def as_row(self) -> list:
        return [self.density, self.n_agents, self.median, self.q1, self.q3]


def crowd_flow(scenario, density: float, seed: int, duration: float = 300.0,
               crowd: CrowdParams | None = None, sim: SimParams | None = None,
               warmup: float = 0.5) -> float:
    """Time-averaged mean flow velocity of one crowd-only run.

    The first ``warmup`` fraction of the steps is discarded.
    """
    scenario = Scenario(scenario)
    if not np.any(desired_direction(scenario)):
        raise ValueError("the passive crowd has no flow direction")
    crowd = crowd or CrowdParams()
    sim = sim or SimParams()
    env = Environment.for_scenario(scenario)
    n = n_crowd(density, env.crowd_area, crowd.comfort_diameter)
    if n == 0:
        raise ValueError(f"density {density} gives no crowd agents")
    rng = np.random.default_rng(seed)
    pos = sample_positions((0.0, 0.0, env.width, env.height), n, crowd.comfort_diameter,
                           rng, period_y=env.height)
    agents = Crowd.at_rest(pos, scenario)
    no_robots = np.empty((0, 2))
    steps = int(round(duration / sim.dt))
    start = int(math.floor(steps * warmup))
    total, count = 0.0, 0
    for k in range(steps):
        agents = step_crowd(agents, no_robots, crowd, env, sim.dt)
        if env.crowd_exit:
            agents, _ = respawn_counter_flow(agents, env, rng, crowd,
                                             on_exhausted=sim.respawn_policy)
        if k >= start:
            total += mean_flow_velocity(agents.vel, scenario)
            count += 1
    return total / count


def _flow_task(args) -> float:
    return crowd_flow(*args)


def crowd_baseline(scenario, densities, seeds, duration: float = 300.0,
                   crowd: CrowdParams | None = None, sim: SimParams | None = None,
                   jobs: int = 1) -> list[BaselineRow]:
    """Median and quartiles over seeds of the crowd flow at each density."""
    scenario = Scenario(scenario)
    if not np.any(desired_direction(scenario)):
        raise ValueError("the passive crowd has no flow direction")
    densities, seeds = list(densities), list(seeds)
    if not densities or not seeds:
        raise ValueError("densities and seeds must not be empty")
    crowd = crowd or CrowdParams()
    tasks = [(scenario, rho, s, duration, crowd, sim) for rho in densities for s in seeds]
    flows = _pmap(_flow_task, tasks, jobs)
    env = Environment.for_scenario(scenario)
    rows = []
    for i, rho in enumerate(densities):
        f = flows[i * len(seeds):(i + 1) * len(seeds)]
        q1, med, q3 = quartiles(f)
        rows.append(BaselineRow(rho, n_crowd(rho, env.crowd_area, crowd.comfort_diameter),
                                med, q1, q3, f))
    return rows
