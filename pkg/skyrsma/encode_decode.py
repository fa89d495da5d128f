"""
Action heads and state features.

The joint action is factorised into independent categorical heads, laid out as

    move (5) | climb (3) | time level (feasible levels) | offload_k (2) x K | power_k_i (P_lv) x K*I

and the state is flattened into a fixed-length feature vector scaled to roughly [0, 1].
"""
import numpy as np

from skyrsma import physics
from skyrsma.constants_utils import MOVES, CLIMBS, ShapeMismatch, BadConfig
from skyrsma.mdp import EnvAction


def time_choices(scenario):
    """Time levels whose slot duration lies in [t_min, t_max]; the time head indexes this list."""
    levels = scenario.bounds.valid_time_levels()
    if not levels:
        raise BadConfig("No time level satisfies t_min <= level * delta_t <= t_max")
    return levels


def head_layout(scenario, reward_cfg):
    sizes = [len(MOVES), len(CLIMBS), len(time_choices(scenario))]
    sizes += [2] * scenario.num_gts
    sizes += [reward_cfg.power_levels] * (scenario.num_gts * scenario.sub_messages)
    return tuple(sizes)


def head_slices(layout):
    edges = np.concatenate([[0], np.cumsum(layout)])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def action_from_indices(indices, scenario):
    """Builds an EnvAction from one category index per head (time index j is the j-th feasible level)."""
    num_gts, sub = scenario.num_gts, scenario.sub_messages
    indices = [int(j) for j in indices]
    if len(indices) != 3 + num_gts + num_gts * sub:
        raise ShapeMismatch("Expected {} head indices, got {}".format(3 + num_gts + num_gts * sub, len(indices)))
    offload = np.array(indices[3:3 + num_gts])
    power = np.array(indices[3 + num_gts:]).reshape(num_gts, sub)
    return EnvAction(MOVES[indices[0]], CLIMBS[indices[1]], time_choices(scenario)[indices[2]], offload, power)


def indices_from_action(action, scenario):
    levels = time_choices(scenario)
    if action.time_level not in levels:
        raise BadConfig("Time level {} is not one of the feasible levels {}".format(action.time_level, levels))
    indices = [MOVES.index(action.move), CLIMBS.index(action.climb), levels.index(action.time_level)]
    indices += [int(a) for a in action.offload]
    indices += [int(p) for p in action.power_level.ravel()]
    return np.array(indices, dtype=int)


def one_hot(indices, layout):
    """Concatenated one-hot encoding; ``indices`` is (H,) or (n, H)."""
    indices = np.asarray(indices, dtype=int)
    single = indices.ndim == 1
    indices = np.atleast_2d(indices)
    if indices.shape[1] != len(layout):
        raise ShapeMismatch("Got {} head indices for {} heads".format(indices.shape[1], len(layout)))
    out = np.zeros((indices.shape[0], int(sum(layout))))
    rows = np.arange(indices.shape[0])
    for h, sl in enumerate(head_slices(layout)):
        out[rows, sl.start + indices[:, h]] = 1.0
    return out[0] if single else out


def state_dim(scenario):
    return 3 * scenario.num_gts + 5


def encode_state(state, scenario):
    grid, bounds = scenario.grid, scenario.bounds
    xmin, xmax, ymin, ymax = grid.extent
    scale = np.array([xmax - xmin, ymax - ymin])
    low = np.array([xmin, ymin])
    gts = ((state.gt_positions - low) / scale).ravel()
    uav = (np.array(physics.cell_center(grid, state.uav.cell)) - low) / scale
    task_bits = np.array([gt.task_bits for gt in scenario.gts])
    return np.concatenate([
        gts,
        uav,
        [bounds.altitude(state.uav) / bounds.h_max,
         state.uav.time_level / bounds.time_levels,
         state.slot / bounds.n_slots],
        state.residual_bits / task_bits,
    ])
