import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoonsim.crowd import (Crowd, CrowdAgent, CrowdParams, Scenario, cap_speed, crowd_forces,
                              desired_direction, mean_flow_velocity, nearest_wall_point,
                              respawn_counter_flow, social_force, step_crowd)
from platoonsim.geometry import Environment, PlacementFailed

P = CrowdParams()
ENV = Environment.for_scenario(Scenario.PASSIVE)
CF_ENV = Environment.for_scenario(Scenario.COUNTER_FLOW)


@pytest.mark.parametrize("scenario, e", [
    (Scenario.PASSIVE, (0, 0)),
    (Scenario.COUNTER_FLOW, (-1, 0)),
    (Scenario.PERPENDICULAR_FLOW, (0, 1)),
])
def test_desired_direction(scenario, e):
    np.testing.assert_array_equal(desired_direction(scenario), e)


def test_params_validation():
    with pytest.raises(ValueError):
        CrowdParams(out_of_view_weight=1.0)
    with pytest.raises(ValueError):
        CrowdParams(pair_range=0.0)
    ref = CrowdParams.reference()
    assert (ref.pair_strength, ref.out_of_view_weight) == (2.1, 0.5)


def _agent(pos=(5.0, 2.5), vel=(0.0, 0.0), e=(-1.0, 0.0)):
    return CrowdAgent(0, np.array(pos), np.array(vel), np.array(e))


def test_driving_term_only():
    f = social_force(_agent(), [], [], None, P, ENV)
    np.testing.assert_allclose(f, (-P.desired_speed / P.relaxation_time, 0.0), rtol=1e-12)


def test_driving_term_vanishes_at_desired_velocity():
    a = _agent(vel=(-P.desired_speed, 0.0))
    np.testing.assert_array_equal(social_force(a, [], [], None, P, ENV), (0.0, 0.0))


def test_anisotropy_behind_is_c_times_ahead():
    a = _agent(e=(1.0, 0.0))
    ahead = social_force(a, [(5.5, 2.5)], [], None, P, ENV) - social_force(a, [], [], None, P, ENV)
    behind = social_force(a, [(4.5, 2.5)], [], None, P, ENV) - social_force(a, [], [], None, P, ENV)
    assert np.linalg.norm(behind) == pytest.approx(P.out_of_view_weight * np.linalg.norm(ahead), rel=1e-12)
    # exponential kernel magnitude
    assert np.linalg.norm(ahead) == pytest.approx(P.pair_strength / P.pair_range * math.exp(-0.5 / P.pair_range), rel=1e-12)


def test_robots_repel_like_peers():
    a = _agent()
    np.testing.assert_array_equal(social_force(a, [(4.7, 2.6)], [], None, P, ENV),
                                  social_force(a, [], [(4.7, 2.6)], None, P, ENV))


def test_coincident_source_is_ignored():
    a = _agent()
    np.testing.assert_array_equal(social_force(a, [(5.0, 2.5)], [], None, P, ENV),
                                  social_force(a, [], [], None, P, ENV))


def test_facing_agents_symmetric():
    a = _agent((4.0, 2.5), e=(1.0, 0.0))
    b = _agent((4.6, 2.5), e=(-1.0, 0.0))
    fa = social_force(a, [b.pos], [], None, P, ENV) - social_force(a, [], [], None, P, ENV)
    fb = social_force(b, [a.pos], [], None, P, ENV) - social_force(b, [], [], None, P, ENV)
    np.testing.assert_allclose(fa, -fb, rtol=1e-12)


def test_repulsion_across_periodic_seam():
    a = _agent((5.0, 0.1), e=(0.0, 1.0))
    near = social_force(a, [(5.0, 4.9)], [], None, P, ENV)
    assert near[1] > social_force(a, [], [], None, P, ENV)[1]


coords = st.tuples(st.floats(0.0, 10.0), st.floats(0.0, 5.0))


@settings(max_examples=50, deadline=None)
@given(st.lists(coords, min_size=1, max_size=25), st.lists(coords, max_size=4),
       st.sampled_from(list(Scenario)), st.integers(0, 1000))
def test_vectorised_forces_match_reference(pos, robots, scenario, seed):
    env = Environment.for_scenario(scenario)
    rng = np.random.default_rng(seed)
    crowd = Crowd.at_rest(np.array(pos), scenario)
    crowd.vel[:] = rng.normal(0.0, 0.5, crowd.vel.shape)
    robots = np.array(robots, dtype=float).reshape(-1, 2)
    got = crowd_forces(crowd, robots, P, env)
    for i, agent in enumerate(crowd.agents()):
        peers = [p for j, p in enumerate(crowd.pos) if j != i]
        want = social_force(agent, peers, robots, nearest_wall_point(agent.pos, env), P, env)
        np.testing.assert_allclose(got[i], want, rtol=1e-9, atol=1e-9)


def test_step_empty_is_identity():
    out = step_crowd(Crowd.empty(), np.empty((0, 2)), P, ENV, 0.1)
    assert len(out) == 0


def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        step_crowd(Crowd.empty(), [], P, ENV, 0.0)


def test_passive_agent_stays_put():
    c = Crowd.at_rest(np.array([[5.0, 2.5]]), Scenario.PASSIVE)
    for _ in range(500):
        c = step_crowd(c, [], P, ENV, 0.1)
    # the wall kernel 5 m away is ~1e-9 of its contact value, not exactly zero
    np.testing.assert_allclose(c.pos, [[5.0, 2.5]], rtol=0, atol=1e-9)
    np.testing.assert_allclose(c.vel, [[0.0, 0.0]], rtol=0, atol=1e-9)


def test_counter_flow_agent_moves_left_until_exit():
    c = Crowd.at_rest(np.array([[9.0, 2.5]]), Scenario.COUNTER_FLOW)
    xs = [9.0]
    while c.pos[0, 0] + P.comfort_radius > 0.0:
        c = step_crowd(c, [], P, CF_ENV, 0.1)
        xs.append(c.pos[0, 0])
        assert len(xs) < 1000
    assert np.all(np.diff(xs) < 0)
    _, n = respawn_counter_flow(c, CF_ENV, np.random.default_rng(0), P)
    assert n == 1


@settings(max_examples=20, deadline=None)
@given(st.lists(coords, min_size=1, max_size=40), st.sampled_from(list(Scenario)),
       st.integers(0, 1000))
def test_speed_cap_after_every_step(pos, scenario, seed):
    env = Environment.for_scenario(scenario)
    c = Crowd.at_rest(np.array(pos), scenario)
    c.vel[:] = np.random.default_rng(seed).normal(0.0, 3.0, c.vel.shape)
    for _ in range(5):
        c = step_crowd(c, [(5.0, 2.5)], P, env, 0.1)
        assert np.all(np.hypot(c.vel[:, 0], c.vel[:, 1]) <= P.max_speed * (1 + 1e-12))


def test_cap_speed_preserves_direction():
    v = cap_speed(np.array([[3.0, 4.0], [0.1, 0.0]]), 1.0)
    np.testing.assert_allclose(v, [[0.6, 0.8], [0.1, 0.0]])


def test_confinement_walls_hold_crowd():
    c = Crowd.at_rest(np.array([[0.2, 2.5], [9.8, 1.0]]), Scenario.PASSIVE)
    c.vel[:] = [[-3.0, 0.0], [3.0, 0.0]]
    for _ in range(20):
        c = step_crowd(c, [], P, ENV, 0.1)
        assert np.all(c.pos[:, 0] >= P.comfort_radius - 1e-12)
        assert np.all(c.pos[:, 0] <= 10.0 - P.comfort_radius + 1e-12)


def test_respawn_examples():
    rng = np.random.default_rng(3)
    c = Crowd.at_rest(np.array([[-0.2, 2.5], [-0.1, 2.5], [3.0, 3.0]]), Scenario.COUNTER_FLOW)
    out, n = respawn_counter_flow(c, CF_ENV, rng, P)
    assert n == 1 and len(out) == 3
    assert list(out.ids[:2]) == [1, 2]
    assert out.ids[2] == 3
    new = out.pos[2]
    assert 5.0 + 0.15 <= new[0] <= 9.85 and 0.15 <= new[1] <= 4.85
    np.testing.assert_array_equal(out.vel[2], (0.0, 0.0))
    np.testing.assert_array_equal(out.dirs[2], (-1.0, 0.0))
    same, n0 = respawn_counter_flow(out, CF_ENV, rng, P)
    assert n0 == 0 and same is out


def test_respawn_avoids_comfort_zones_and_robots():
    rng = np.random.default_rng(0)
    pos = np.vstack([[-0.5, 2.5], [[x, y] for x in np.arange(5.2, 10, 0.6) for y in np.arange(0.2, 5, 0.6)]])
    robots = np.array([[7.5, 2.5]])
    for _ in range(5):
        c = Crowd.at_rest(pos, Scenario.COUNTER_FLOW)
        out, n = respawn_counter_flow(c, CF_ENV, rng, P, robots, 0.15)
        p = out.pos[-1]
        d = out.pos[:-1] - p
        d[:, 1] -= 5.0 * np.floor(d[:, 1] / 5.0 + 0.5)
        assert np.min(np.hypot(d[:, 0], d[:, 1])) >= 0.3
        assert np.linalg.norm(p - robots[0]) >= 0.3


def _jammed():
    grid = [[x, y] for x in np.arange(5.0, 10.01, 0.25) for y in np.arange(0.0, 5.0, 0.25)]
    return Crowd.at_rest(np.vstack([[-0.5, 2.5], grid]), Scenario.COUNTER_FLOW)


def test_respawn_policy_raise():
    with pytest.raises(PlacementFailed):
        respawn_counter_flow(_jammed(), CF_ENV, np.random.default_rng(0), P, on_exhausted="raise")


def test_respawn_policy_closest_conserves_population():
    c = _jammed()
    out, n = respawn_counter_flow(c, CF_ENV, np.random.default_rng(0), P, on_exhausted="closest")
    assert n == 1 and len(out) == len(c)
    assert 5.15 <= out.pos[-1, 0] <= 9.85


def test_respawn_policy_unknown():
    with pytest.raises(ValueError):
        respawn_counter_flow(_jammed(), CF_ENV, np.random.default_rng(0), P, on_exhausted="skip")


def test_mean_flow_velocity():
    e = desired_direction(Scenario.PERPENDICULAR_FLOW)
    v = np.tile(P.desired_speed * e, (4, 1))
    assert mean_flow_velocity(v, Scenario.PERPENDICULAR_FLOW) == pytest.approx(P.desired_speed)
    v[:2] *= -1
    assert mean_flow_velocity(v, Scenario.PERPENDICULAR_FLOW) == 0.0
    with pytest.raises(ValueError):
        mean_flow_velocity(v, Scenario.PASSIVE)
    with pytest.raises(ValueError):
        mean_flow_velocity(np.empty((0, 2)), Scenario.COUNTER_FLOW)
