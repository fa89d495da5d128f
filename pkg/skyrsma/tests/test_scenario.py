import pytest

from skyrsma.constants_utils import BadConfig
from skyrsma.scenario import reference_scenario, place_gts
from skyrsma.physics import AreaGrid


def test_reference_scenario():
    scenario = reference_scenario(3, placement_seed=4)
    assert scenario.num_gts == 3
    assert scenario.sub_messages == 2
    assert scenario.grid.num_cells == 101 * 101
    assert scenario.bounds.start_pose == scenario.bounds.end_pose
    assert all(scenario.grid.contains(gt.position) for gt in scenario.gts)
    assert all(1000 <= gt.task_bits <= 1500 and 500 <= gt.task_cycles <= 2500 for gt in scenario.gts)


def test_placement_is_seeded():
    a = reference_scenario(2, placement_seed=9).gts
    b = reference_scenario(2, placement_seed=9).gts
    c = reference_scenario(2, placement_seed=10).gts
    assert a == b
    assert a != c


def test_fixed_positions_and_tasks():
    grid = AreaGrid(11, 11, 10.0, 10.0)
    gts = place_gts(grid, 2, 0, cycles=1000.0, bits=(1200.0, 1200.0), positions=[(10.0, 20.0), (50.0, 50.0)])
    assert [gt.position for gt in gts] == [(10.0, 20.0), (50.0, 50.0)]
    assert all(gt.task_cycles == 1000.0 and gt.task_bits == 1200.0 for gt in gts)


def test_with_access():
    scenario = reference_scenario(2)
    noma = scenario.with_access("noma")
    assert (noma.access, noma.decoding) == ("noma", "priority")
    assert noma.gts == scenario.gts
    with pytest.raises(BadConfig):
        scenario.with_access("tdma")


def test_invalid_scenarios():
    with pytest.raises(BadConfig):
        reference_scenario(5, decoding="oracle")
    with pytest.raises(BadConfig):
        reference_scenario(1, cols=11, rows=11, positions=[(500.0, 500.0)])
    assert reference_scenario(5, decoding="oracle", access="fdma").num_gts == 5
