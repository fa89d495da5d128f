"""
Episodic UAV-MEC environment.

A step applies the UAV movement, evaluates the channel at the new waypoint, decodes the
uplink, runs the computing model and charges the propulsion energy of the slot. The
reward is ``lambda1 * sum(processed) / slot_energy - lambda2 * PV``.
"""
import logging
from dataclasses import dataclass, replace, field

import numpy as np

from skyrsma import access, physics
from skyrsma.constants_utils import MOVES, CLIMBS, EpisodeFinished, EmptyEpisode, BadConfig

log = logging.getLogger(__name__)

PER_SLOT_CONSTRAINTS = ("C1", "C3", "C4", "C5", "C6", "C7", "C8")


@dataclass(frozen=True, eq=False)
class EnvState:
    gt_positions: np.ndarray
    uav: physics.UavPose
    slot: int
    residual_bits: np.ndarray
    cumulative_energy: float = 0.0
    cumulative_processed: float = 0.0


@dataclass(frozen=True, eq=False)
class EnvAction:
    move: str
    climb: str
    time_level: int
    offload: np.ndarray
    power_level: np.ndarray

    def __post_init__(self):
        if self.move not in MOVES:
            raise BadConfig("Unknown move {}".format(self.move))
        if self.climb not in CLIMBS:
            raise BadConfig("Unknown climb {}".format(self.climb))
        object.__setattr__(self, "offload", np.asarray(self.offload, dtype=int))
        object.__setattr__(self, "power_level", np.asarray(self.power_level, dtype=int))


@dataclass(frozen=True)
class RewardConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    c0: float = 10.0
    power_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    terminal_distance_weight: float = 0.0

    def __post_init__(self):
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise BadConfig("Reward scale factors must be positive")
        if self.c0 <= 0:
            raise BadConfig("Penalty magnitude must be positive")
        if not self.power_grid or any(not 0 <= f <= 1 for f in self.power_grid):
            raise BadConfig("Power grid fractions must lie in [0, 1]")
        if self.terminal_distance_weight < 0:
            raise BadConfig("Terminal distance weight must be non-negative")

    @property
    def power_levels(self):
        return len(self.power_grid)


@dataclass(frozen=True, eq=False)
class EnvTransition:
    state: EnvState
    action: EnvAction
    reward: float
    next_state: EnvState
    done: bool
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EpisodeSummary:
    steps: int
    total_reward: float
    mean_reward: float
    total_bits: float
    total_energy: float
    eta: float
    violation_count: int
    unfinished_gts: int


def initial_state(scenario):
    return EnvState(np.array([gt.position for gt in scenario.gts], dtype=float), scenario.bounds.start_pose, 0,
                    np.array([gt.task_bits for gt in scenario.gts], dtype=float))


def apply_kinematics(pose, move, climb, grid, bounds):
    """Next waypoint; a move leaving the area or the altitude band is replaced by I."""
    cell = grid.neighbour(pose.cell, move)
    if cell is None:
        cell = pose.cell
    alt_level = pose.alt_level + {"U": 1, "D": -1, "I": 0}[climb]
    if not (1 <= alt_level <= bounds.alt_levels and bounds.altitude_ok(alt_level)):
        alt_level = pose.alt_level
    return physics.UavPose(cell, alt_level, pose.time_level)


def slot_powers(action, scenario, reward_cfg):
    """Transmit powers (K, I) in watts from the power-level head; local GTs send nothing."""
    levels = action.power_level
    if levels.shape != (scenario.num_gts, scenario.sub_messages):
        raise BadConfig("Power levels need shape ({}, {})".format(scenario.num_gts, scenario.sub_messages))
    if levels.min() < 0 or levels.max() >= reward_cfg.power_levels:
        raise BadConfig("Power level outside 0..{}".format(reward_cfg.power_levels - 1))
    grid = np.asarray(reward_cfg.power_grid, dtype=float)
    powers = grid[levels] * scenario.rsma.p_max / scenario.sub_messages
    return powers * (action.offload == 1)[:, None]


def constraint_check(state, action, next_pose, powers, scenario, residual_after=None, final=False):
    """
    Identifiers of the violated constraints for one slot. C2 is only evaluated when
    ``final`` is set, on the residual task bits after the slot.
    """
    bounds = scenario.bounds
    violations = []
    if np.any((action.offload != 0) & (action.offload != 1)):
        violations.append("C1")
    if final and residual_after is not None and np.any(np.asarray(residual_after) > 0):
        violations.append("C2")
    powers = np.asarray(powers, dtype=float)
    if np.any(powers.sum(axis=1) > scenario.rsma.p_max * (1 + 1e-12)):
        violations.append("C3")
    acting = replace(state.uav, time_level=action.time_level)
    speeds = physics.slot_speeds(acting, next_pose, scenario.grid, bounds)
    if speeds.over_h:
        violations.append("C4")
    if speeds.over_v:
        violations.append("C5")
    if not bounds.altitude_ok(next_pose.alt_level):
        violations.append("C6")
    if not bounds.duration_ok(action.time_level):
        violations.append("C7")
    if np.any(powers < 0):
        violations.append("C8")
    return violations


def decode(gains, powers, offload, duration, scenario, rng=None):
    """Per-GT rates (K,), sub-message rates (K, I) or None, and the decoding order used."""
    ch = scenario.channel
    if scenario.access != "rsma":
        return access.alt_access_rates(scenario.access, gains, powers.sum(axis=1), offload, ch), None, None
    if scenario.decoding == "priority":
        order = access.priority_order(gains, offload, scenario.rsma)
    elif scenario.decoding == "random":
        if rng is None:
            raise BadConfig("Random decoding needs an rng stream")
        order = access.random_order(offload, scenario.sub_messages, rng)
    else:
        order, _ = access.oracle_best_order(gains, powers, offload, scenario.rsma, ch, scenario.gts,
                                            scenario.compute, duration)
    sub_rates = access.submessage_rates(gains, powers, offload, order, ch)
    return sub_rates.sum(axis=1), sub_rates, order


def step(state, action, scenario, reward_cfg, rng=None):
    bounds = scenario.bounds
    if state.slot >= bounds.n_slots:
        raise EpisodeFinished("Episode already ended at slot {}".format(state.slot))

    acting = replace(state.uav, time_level=action.time_level)
    next_pose = apply_kinematics(acting, action.move, action.climb, scenario.grid, bounds)
    speeds = physics.slot_speeds(acting, next_pose, scenario.grid, bounds)
    duration = bounds.duration(acting)

    gains = physics.pose_gains(next_pose, scenario.gts, scenario.grid, bounds, scenario.channel)
    powers = slot_powers(action, scenario, reward_cfg)
    offload = (action.offload == 1).astype(int)
    rates, sub_rates, order = decode(gains, powers, offload, duration, scenario, rng)

    processed = np.array([access.processed_data(offload[k], rates[k], duration, gt, scenario.compute)
                          for k, gt in enumerate(scenario.gts)])
    processed = np.minimum(processed, state.residual_bits)
    residual = state.residual_bits - processed
    kappa = np.array([access.transmit_fraction(rates[k], gt, scenario.compute) if offload[k] else 0.0
                      for k, gt in enumerate(scenario.gts)])

    energy = physics.slot_propulsion_energy(speeds.v_h, speeds.v_v, duration, scenario.propulsion)
    done = state.slot + 1 == bounds.n_slots
    violations = constraint_check(state, action, next_pose, powers, scenario, residual, final=done)

    penalty = reward_cfg.c0 if any(v in PER_SLOT_CONSTRAINTS for v in violations) else 0.0
    unfinished = int(np.sum(residual > 0)) if done else 0
    penalty += reward_cfg.c0 * unfinished
    distance = 0.0
    if done and reward_cfg.terminal_distance_weight > 0:
        x0, y0 = physics.cell_center(scenario.grid, next_pose.cell)
        x1, y1 = physics.cell_center(scenario.grid, bounds.end_pose.cell)
        distance = np.hypot(x1 - x0, y1 - y0) / scenario.grid.diagonal
        penalty += reward_cfg.terminal_distance_weight * distance
    reward = reward_cfg.lambda1 * processed.sum() / energy - reward_cfg.lambda2 * penalty

    next_state = EnvState(state.gt_positions, next_pose, state.slot + 1, residual,
                          state.cumulative_energy + energy, state.cumulative_processed + processed.sum())
    info = dict(gains=gains, powers=powers, rates=rates, sub_rates=sub_rates, order=order, kappa=kappa,
                processed=processed, energy=energy, duration=duration, speeds=speeds,
                violations=violations, penalty=penalty, unfinished=unfinished, distance=distance)
    if sub_rates is not None:
        info["rate_report"] = access.rate_constraints_check(sub_rates, scenario.rsma, scenario.channel)
    return EnvTransition(state, action, float(reward), next_state, done, info)


class UavMecEnv:
    """Stateful wrapper around ``step`` owning the rng stream of the random decoding order."""

    def __init__(self, scenario, reward_cfg=None, seed=None):
        self.scenario = scenario
        self.reward_cfg = reward_cfg or RewardConfig()
        self.rng = np.random.default_rng(seed)
        self.state = None

    def reset(self):
        self.state = initial_state(self.scenario)
        return self.state

    def step(self, action):
        if self.state is None:
            self.reset()
        transition = step(self.state, action, self.scenario, self.reward_cfg, self.rng)
        self.state = transition.next_state
        return transition

    @property
    def done(self):
        return self.state is not None and self.state.slot >= self.scenario.bounds.n_slots


def episode_metrics(transitions):
    if not transitions:
        raise EmptyEpisode("No transitions to summarise")
    rewards = [t.reward for t in transitions]
    bits = float(sum(t.info["processed"].sum() for t in transitions))
    energy = float(sum(t.info["energy"] for t in transitions))
    return EpisodeSummary(
        steps=len(transitions),
        total_reward=float(sum(rewards)),
        mean_reward=float(np.mean(rewards)),
        total_bits=bits,
        total_energy=energy,
        eta=access.energy_efficiency(bits, energy),
        violation_count=sum(len(t.info["violations"]) for t in transitions),
        unfinished_gts=transitions[-1].info["unfinished"],
    )


def trajectory_rows(transitions, scenario):
    """Per-slot CSV header and rows for a transition log."""
    num_gts, sub = scenario.num_gts, scenario.sub_messages
    header = ["slot", "cell", "x", "y", "h", "t", "move", "climb", "time_level"]
    header += ["offload_{}".format(k) for k in range(num_gts)]
    header += ["power_level_{}_{}".format(k, i) for k in range(num_gts) for i in range(sub)]
    header += ["rate_{}".format(k) for k in range(num_gts)]
    header += ["processed_{}".format(k) for k in range(num_gts)]
    header += ["energy", "reward", "eta_so_far", "violations"]
    rows = []
    for t in transitions:
        pose = t.next_state.uav
        x, y = physics.cell_center(scenario.grid, pose.cell)
        eta = access.energy_efficiency(t.next_state.cumulative_processed, t.next_state.cumulative_energy)
        row = [t.state.slot, pose.cell, x, y, scenario.bounds.altitude(pose), t.info["duration"],
               t.action.move, t.action.climb, t.action.time_level]
        row += [int(a) for a in t.action.offload]
        row += [int(p) for p in t.action.power_level.ravel()]
        row += [float(r) for r in t.info["rates"]]
        row += [float(v) for v in t.info["processed"]]
        row += [t.info["energy"], t.reward, eta, ";".join(t.info["violations"])]
        rows.append(row)
    return header, rows
