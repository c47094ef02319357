import math

import numpy as np
import pytest

from goalmeg import envs
from goalmeg.mdp import Policy, attainable_range, expected_utility, sample_trajectories, validate, value_iteration


def test_mouse_layout():
    mdp, u = envs.mouse_onestep()
    assert (mdp.horizon, mdp.n_states, mdp.n_actions) == (1, 4, 2)
    assert np.allclose(mdp.initial_dist, [0.5, 0.5, 0, 0])
    r = attainable_range(mdp, u)
    assert (r.u_min, r.u_max) == (-1.0, 1.0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("stay", [False, True])
def test_cliffworld_is_stochastic_with_forty_cells(k, stay):
    mdp = envs.cliffworld(envs.CliffWorldSpec(goal_length=k, include_stay=stay))
    assert mdp.n_states == 40
    assert mdp.n_actions == (5 if stay else 4)
    assert np.allclose(mdp.transition.sum(axis=2), 1.0)


def test_cells_are_disjoint():
    for k in (1, 2, 3, 4):
        spec = envs.CliffWorldSpec(goal_length=k)
        goals, cliffs = set(spec.goal_cells()), set(spec.cliff_cells())
        assert len(goals) == k
        assert not goals & cliffs
        assert spec.start_cell() not in goals | cliffs


def test_wind_pushes_up_after_move():
    spec = envs.CliffWorldSpec()
    mdp = envs.cliffworld(spec)
    right = spec.actions.index("right")
    s = spec.cell(2, 4)
    row = mdp.transition[s, right]
    assert row[spec.cell(2, 5)] == pytest.approx(0.7)
    assert row[spec.cell(1, 5)] == pytest.approx(0.3)
    # at the right wall the move is clipped, then wind still applies
    s = spec.cell(3, 9)
    row = mdp.transition[s, right]
    assert row[spec.cell(3, 9)] == pytest.approx(0.7)
    assert row[spec.cell(2, 9)] == pytest.approx(0.3)


def test_wind_in_top_row_is_clipped():
    spec = envs.CliffWorldSpec()
    mdp = envs.cliffworld(spec)
    up = spec.actions.index("up")
    assert mdp.transition[spec.cell(0, 0), up, spec.cell(0, 0)] == pytest.approx(1.0)


def test_windless_deterministic_trajectory():
    mdp = envs.cliffworld(envs.CliffWorldSpec(wind=0.0, horizon=5))
    pol = Policy.deterministic(np.full((5, 40), 1), 4)
    traj = sample_trajectories(mdp, pol, 10, seed=0)
    assert len({tuple(s) for s in traj.states}) == 1


def test_windless_shortest_path_value():
    # from (0, 0): one step down and nine steps right along row 1 (10 x -1), then
    # step up onto the goal and keep pushing into the corner (10 x +10)
    spec = envs.CliffWorldSpec(wind=0.0, horizon=20)
    mdp = envs.cliffworld(spec)
    opt, _ = value_iteration(mdp)
    hand = -1.0 * 10 + 10.0 * 10
    assert expected_utility(mdp, opt) == pytest.approx(hand)
    assert attainable_range(mdp).u_max == pytest.approx(hand)


@pytest.mark.parametrize("bad", [dict(goal_length=0), dict(goal_length=5), dict(wind=1.5),
                                 dict(horizon=0)])
def test_invalid_specs(bad):
    with pytest.raises(ValueError):
        envs.cliffworld(envs.CliffWorldSpec(**bad))


def test_random_mdp_is_seeded_and_valid():
    a, ua = envs.random_mdp(42, 3, 2, 2)
    b, ub = envs.random_mdp(42, 3, 2, 2)
    validate(a)
    assert np.array_equal(a.transition, b.transition) and np.array_equal(ua, ub)
    assert np.all(np.abs(ua) <= 1.0)
    assert np.allclose(a.initial_dist, 1 / 3)


def test_random_mdp_rejects_empty_sizes():
    with pytest.raises(ValueError):
        envs.random_mdp(0, 0, 2, 2)


def test_mouse_policy_rows():
    pi = envs.mouse_policy(0.8)
    assert pi.probs[0, envs.CHEESE_LEFT, envs.LEFT] == 0.8
    assert pi.probs[0, envs.CHEESE_RIGHT, envs.RIGHT] == 0.8
    assert math.isclose(pi.probs[0, envs.GOT_CHEESE].sum(), 1.0)
