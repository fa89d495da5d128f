import math

import numpy as np
import pytest

from skyrsma import physics
from skyrsma.constants_utils import InvalidCell, ZeroDuration, InvalidKinematics, InvalidGeometry, BadConfig
from skyrsma.physics import AreaGrid, UavPose, MissionBounds, PropulsionParams, ChannelParams


def reference_bounds(n_slots=100):
    start = UavPose(1, 20, 1)
    return MissionBounds(100.0, 200.0, 1.0, 5.0, 10.0, 10.0, start, start, n_slots)


def test_hover_energy():
    assert abs(physics.slot_propulsion_energy(0.0, 0.0, 1.0, PropulsionParams()) - 168.5) <= 1e-9


def test_climb_energy():
    assert physics.slot_propulsion_energy(0.0, 10.0, 1.0, PropulsionParams()) == pytest.approx(283.1, abs=1e-9)


def test_energy_scales_with_duration():
    p = PropulsionParams()
    one = physics.slot_propulsion_energy(5.0, 0.0, 1.0, p)
    assert physics.slot_propulsion_energy(5.0, 0.0, 3.0, p) == pytest.approx(3 * one)


def test_energy_errors():
    with pytest.raises(ZeroDuration):
        physics.slot_propulsion_energy(1.0, 0.0, 0.0, PropulsionParams())
    with pytest.raises(InvalidKinematics):
        physics.slot_propulsion_energy(-1.0, 0.0, 1.0, PropulsionParams())


def test_forward_flight_energy_closed_form():
    v = 10.0
    blade = 79.9 * (1 + 3 * v ** 2 / 120.0 ** 2)
    parasite = 0.5 * 0.6 * 1.225 * 0.05 * 0.503 * v ** 3
    induced = 88.6 * math.sqrt(math.sqrt(1 + v ** 4 / (4 * 4.03 ** 4)) - v ** 2 / (2 * 4.03 ** 2))
    energy = physics.slot_propulsion_energy(v, 0.0, 2.0, PropulsionParams())
    assert energy == pytest.approx(2.0 * (blade + parasite + induced), rel=1e-12)
    assert energy < 2 * 168.5


def test_grid_indexing():
    grid = AreaGrid(101, 101, 10.0, 10.0)
    assert grid.num_cells == 10201
    assert grid.col_row(1) == (0, 0)
    assert grid.col_row(102) == (0, 1)
    assert physics.cell_center(grid, 2) == (10.0, 0.0)
    with pytest.raises(InvalidCell):
        grid.col_row(0)
    with pytest.raises(InvalidCell):
        grid.col_row(10202)


def test_neighbours_at_the_edge():
    grid = AreaGrid(101, 101, 10.0, 10.0)
    assert grid.neighbour(1, "N") == 102
    assert grid.neighbour(1, "E") == 2
    assert grid.neighbour(1, "I") == 1
    assert grid.neighbour(1, "S") is None
    assert grid.neighbour(1, "W") is None


def test_level_spacing():
    bounds = reference_bounds()
    assert bounds.delta_h == 10
    assert bounds.delta_t == 1
    assert bounds.altitude(UavPose(1, 20, 1)) == 200
    assert bounds.valid_alt_levels() == list(range(10, 21))
    assert bounds.valid_time_levels() == [1, 2, 3, 4, 5]


def test_zero_level_spacing_rejected():
    start = UavPose(1, 1, 1)
    with pytest.raises(BadConfig):
        MissionBounds(1.0, 2.0, 1.0, 5.0, 10.0, 10.0, start, start, 10, alt_levels=20)


def test_slot_speeds():
    grid = AreaGrid(101, 101, 10.0, 10.0)
    bounds = reference_bounds()
    speeds = physics.slot_speeds(UavPose(1, 20, 1), UavPose(2, 19, 1), grid, bounds)
    assert speeds.v_h == pytest.approx(10.0)
    assert speeds.v_v == pytest.approx(10.0)
    assert not speeds.over_h and not speeds.over_v
    speeds = physics.slot_speeds(UavPose(1, 20, 1), UavPose(103, 20, 1), grid, bounds)
    assert speeds.over_h


def test_trajectory_energy_of_hover():
    grid = AreaGrid(11, 11, 10.0, 10.0)
    poses = [UavPose(5, 20, 1)] * 4
    assert physics.trajectory_energy(poses, grid, reference_bounds(), PropulsionParams()) == pytest.approx(3 * 168.5)


def test_trajectory_energy_of_a_flight():
    grid = AreaGrid(11, 11, 10.0, 10.0)
    bounds = reference_bounds()
    p = PropulsionParams()
    poses = [UavPose(1, 10, 1), UavPose(2, 11, 2), UavPose(13, 11, 1), UavPose(13, 10, 1)]
    expected = (physics.slot_propulsion_energy(10.0, 10.0, 1.0, p) + physics.slot_propulsion_energy(5.0, 0.0, 2.0, p)
                + physics.slot_propulsion_energy(0.0, 10.0, 1.0, p))
    total = physics.trajectory_energy(poses, grid, bounds, p)
    assert total == pytest.approx(expected, rel=1e-12)
    split = physics.trajectory_energy(poses[:3], grid, bounds, p) + physics.trajectory_energy(poses[2:], grid, bounds, p)
    assert total == pytest.approx(split, rel=1e-12)


def test_cell_centres_are_a_bijection():
    grid = AreaGrid(7, 5, 10.0, 20.0, (100.0, -50.0))
    centres = [physics.cell_center(grid, idx) for idx in range(1, grid.num_cells + 1)]
    assert len(set(centres)) == grid.num_cells
    for idx, (x, y) in enumerate(centres, start=1):
        col, row = round((x - 100.0) / 10.0), round((y + 50.0) / 20.0)
        assert grid.index(col, row) == idx


def test_los_probability():
    ch = ChannelParams()
    overhead = physics.los_probability(100.0, 0.0, ch)
    expected = 1 / (1 + 12.08 * math.exp(-0.11 * (90 - 12.08)))
    assert overhead == pytest.approx(expected)
    far = physics.los_probability(100.0, 1000.0, ch)
    assert 0 < far < overhead < 1
    with pytest.raises(InvalidGeometry):
        physics.los_probability(0.0, 10.0, ch)


def test_pathloss_matches_closed_form():
    ch = ChannelParams()
    h, l = 150.0, 300.0
    los = physics.los_probability(h, l, ch)
    a2 = 20 * math.log10(4 * math.pi * 2.4e9 / 3e8) + 23.0
    expected = 20 * math.log10(math.hypot(h, l)) + (1.6 - 23.0) * los + a2
    assert physics.pathloss_db(h, l, ch) == pytest.approx(expected, rel=1e-12)


def test_channel_gain():
    assert physics.channel_gain(0.0) == 1.0
    assert physics.channel_gain(10.0) == pytest.approx(0.1)


def test_overhead_link_anchors():
    loss = physics.pathloss_db(200.0, 0.0, ChannelParams())
    assert loss == pytest.approx(87.7, abs=0.05)
    assert physics.channel_gain(87.7) == pytest.approx(1.70e-9, rel=5e-3)


def test_noise_power():
    assert ChannelParams().noise_power == pytest.approx(1e6 * 10 ** (-20.4))


def test_gains_fall_with_distance():
    grid = AreaGrid(101, 101, 10.0, 10.0)
    gts = (physics.GroundTerminal(0, (0.0, 0.0), 1000.0, 1000.0), physics.GroundTerminal(1, (800.0, 800.0), 1000.0,
                                                                                         1000.0))
    gains = physics.pose_gains(UavPose(1, 20, 1), gts, grid, reference_bounds(), ChannelParams())
    assert gains.shape == (2,)
    assert gains[0] > gains[1] > 0
    assert np.all(np.isfinite(gains))
