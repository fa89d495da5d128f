import numpy as np
import pytest

from skyrsma.constants_utils import BadConfig
from skyrsma.agent.replay import ReplayBuffer


def filled(capacity, count):
    buffer = ReplayBuffer(capacity, 2, 3, seed=0)
    for j in range(count):
        buffer.add(np.full(2, j), [j % 2, 0, 1], float(j), np.full(2, j + 1), j == count - 1)
    return buffer


def test_add_and_sample():
    buffer = filled(10, 6)
    assert len(buffer) == 6
    batch = buffer.sample(6)
    assert len(batch) == 6
    assert sorted(batch.rewards) == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    np.testing.assert_array_equal(batch.next_states[:, 0], batch.states[:, 0] + 1)
    assert batch.actions.dtype.kind == "i"
    assert batch.dones.sum() == 1


def test_ring_overwrites_the_oldest():
    buffer = filled(4, 7)
    assert len(buffer) == 4
    assert sorted(buffer.sample(4).rewards) == [3.0, 4.0, 5.0, 6.0]


def test_sampling_is_without_replacement():
    buffer = filled(100, 50)
    batch = buffer.sample(32)
    assert len(set(batch.rewards)) == 32


def test_sampling_is_seeded():
    a = filled(100, 50).sample(8)
    b = filled(100, 50).sample(8)
    np.testing.assert_array_equal(a.rewards, b.rewards)


def test_errors():
    with pytest.raises(BadConfig):
        filled(10, 3).sample(4)
    with pytest.raises(BadConfig):
        ReplayBuffer(0, 2, 3)
