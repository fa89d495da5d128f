from dataclasses import replace

import numpy as np
import pytest

from skyrsma import mdp
from skyrsma.constants_utils import ShapeMismatch, BadConfig
from skyrsma.encode_decode import head_layout, head_slices, action_from_indices, indices_from_action, one_hot, \
    state_dim, encode_state, time_choices
from skyrsma.physics import UavPose
from skyrsma.agent import training
from skyrsma.scenario import reference_scenario


def test_reference_layout():
    scenario = reference_scenario(2)
    layout = head_layout(scenario, mdp.RewardConfig())
    assert layout == (5, 3, 5, 2, 2, 5, 5, 5, 5)
    slices = head_slices(layout)
    assert slices[0] == slice(0, 5)
    assert slices[-1] == slice(32, 37)


def test_indices_to_action():
    scenario = reference_scenario(2)
    action = action_from_indices([4, 2, 0, 1, 0, 4, 3, 0, 0], scenario)
    assert (action.move, action.climb, action.time_level) == ("I", "I", 1)
    np.testing.assert_array_equal(action.offload, [1, 0])
    np.testing.assert_array_equal(action.power_level, [[4, 3], [0, 0]])
    np.testing.assert_array_equal(indices_from_action(action, scenario), [4, 2, 0, 1, 0, 4, 3, 0, 0])
    with pytest.raises(ShapeMismatch):
        action_from_indices([0, 0, 0], scenario)


def test_one_hot():
    layout = (5, 3, 2)
    vec = one_hot([4, 0, 1], layout)
    assert vec.shape == (10,)
    np.testing.assert_array_equal(np.flatnonzero(vec), [4, 5, 9])
    batch = one_hot([[0, 0, 0], [1, 2, 1]], layout)
    assert batch.shape == (2, 10)
    np.testing.assert_array_equal(batch.sum(axis=1), [3, 3])
    with pytest.raises(ShapeMismatch):
        one_hot([0, 0], layout)


def test_state_features():
    scenario = reference_scenario(3, placement_seed=2, n_slots=10)
    features = encode_state(mdp.initial_state(scenario), scenario)
    assert features.shape == (state_dim(scenario),) == (14,)
    assert np.all((features >= 0) & (features <= 1))
    np.testing.assert_allclose(features[-3:], [1.0, 1.0, 1.0])
    assert features[-4] == 0.0


def short_slots_barred(n_slots=20):
    scenario = reference_scenario(2, n_slots=n_slots)
    start = UavPose(1, 20, 2)
    return replace(scenario, bounds=replace(scenario.bounds, t_min=2.0, start_pose=start, end_pose=start))


def test_time_head_covers_feasible_levels_only():
    scenario = short_slots_barred()
    assert time_choices(scenario) == [2, 3, 4, 5]
    assert head_layout(scenario, mdp.RewardConfig())[2] == 4
    action = action_from_indices([4, 2, 0, 1, 1, 0, 0, 0, 0], scenario)
    assert action.time_level == 2
    assert indices_from_action(action, scenario)[2] == 0
    with pytest.raises(BadConfig):
        indices_from_action(replace(action, time_level=1), scenario)


def test_sampled_actions_respect_the_slot_duration():
    scenario = short_slots_barred()
    header, rows = training.random_run(scenario, episodes=2, seed=4).trajectory
    assert len(rows) == 20
    col = header.index("violations")
    assert not any("C7" in row[col].split(";") for row in rows)
    assert min(row[header.index("time_level")] for row in rows) >= 2
