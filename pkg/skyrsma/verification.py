"""
Property suites behind ``runproject.py verify``. Every suite returns a list of ``Check``
records holding the measured statistic and the threshold it is held to.
"""
import filecmp
import itertools
import logging
import os
import tempfile
from typing import NamedTuple

import numpy as np

from skyrsma import access, physics, mdp, config
from skyrsma import constants_utils as cu
from skyrsma.scenario import reference_scenario
from skyrsma.encode_decode import one_hot
from skyrsma.nn import DenseNet, grad_check
from skyrsma.agent.diffusion import build_schedule, forward_noise, head_probabilities
from skyrsma.agent.replay import ReplayBuffer, Batch
from skyrsma.agent.sac import (SacHyper, GdrsAgent, critic_loss_and_grad, critic_update,
                               actor_loss_and_grad, actor_update, head_loss_and_grad, soft_update, update_targets)
from skyrsma.agent.dqn import DqnHyper, DqnAgent, dqn_update
from skyrsma.agent import training

log = logging.getLogger(__name__)

SUITES = ("telescoping", "decoding-oracle", "gradcheck", "energy", "schedule", "soft-update", "toy-control",
          "access-direction", "smoke")


class Check(NamedTuple):
    name: str
    ok: bool
    statistic: float
    threshold: float

    def line(self):
        return "{} {}: {:.6g} (threshold {:.6g})".format("PASS" if self.ok else "FAIL", self.name, self.statistic,
                                                        self.threshold)


def _at_most(name, statistic, threshold):
    return Check(name, bool(statistic <= threshold), float(statistic), float(threshold))


def _at_least(name, statistic, threshold):
    return Check(name, bool(statistic >= threshold), float(statistic), float(threshold))


def energy_checks():
    p = physics.PropulsionParams()
    hover = physics.slot_propulsion_energy(0.0, 0.0, 1.0, p)
    climb = physics.slot_propulsion_energy(0.0, 10.0, 1.0, p)
    return [_at_most("hover energy |E - 168.5 J|", abs(hover - 168.5), 1e-9),
            _at_most("10 m/s climb energy |E - 283.1 J|", abs(climb - 283.1), 1e-9)]


def random_instance(rng, num_gts, sub_messages=2):
    """Random gains from a random GT layout under a random hover pose, and random feasible powers."""
    scenario = reference_scenario(num_gts, placement_seed=int(rng.integers(2 ** 31)))
    pose = physics.UavPose(int(rng.integers(1, scenario.grid.num_cells + 1)), int(rng.integers(10, 21)), 1)
    gains = physics.pose_gains(pose, scenario.gts, scenario.grid, scenario.bounds, scenario.channel)
    powers = rng.uniform(0, scenario.rsma.p_max / sub_messages, size=(num_gts, sub_messages))
    return scenario, gains, powers


def telescoping_checks(instances=config.TELESCOPING_INSTANCES, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        scenario, gains, powers = random_instance(rng, int(rng.integers(2, 5)))
        offload = np.ones(scenario.num_gts, dtype=int)
        order = access.random_order(offload, scenario.sub_messages, rng)
        total = access.submessage_rates(gains, powers, offload, order, scenario.channel).sum()
        capacity = access.sum_capacity(gains, powers, offload, scenario.channel)
        worst = max(worst, abs(total - capacity) / capacity)
    return [_at_most("sum of SIC rates vs sum capacity, max relative deviation", worst,
                     config.TELESCOPING_TOLERANCE)]


def decoding_oracle_checks(instances=config.ORACLE_INSTANCES, seed=0):
    rng = np.random.default_rng(seed)
    above_median = within_two_percent = 0
    for _ in range(instances):
        scenario, gains, powers = random_instance(rng, int(rng.integers(2, 4)))
        offload = np.ones(scenario.num_gts, dtype=int)
        args = (gains, powers, offload, scenario.rsma, scenario.channel, scenario.gts, scenario.compute, 1.0)
        priority = access.order_objective(access.priority_order(gains, offload, scenario.rsma), *args)
        pairs = access.offloading_pairs(offload, scenario.sub_messages)
        values = [access.order_objective(order, *args) for order in itertools.permutations(pairs)]
        best = max(values)
        above_median += priority >= np.median(values) - 1e-12 * abs(best)
        within_two_percent += priority >= 0.98 * best
    return [_at_least("priority order >= median permutation, fraction of instances", above_median / instances, 0.99),
            _at_least("priority order within 2% of the oracle, fraction of instances",
                      within_two_percent / instances, 0.90)]


def _small_agent(state_dim=4, layout=(3, 2), seed=0, steps=config.GRADCHECK_STEPS, clip=None, **kwargs):
    hyper = SacHyper(diffusion_steps=steps, phi_max=config.GRADCHECK_PHI_MAX, hidden=(8,), denoise_clip=clip,
                     batch_size=4, warmup=0, **kwargs)
    return GdrsAgent(state_dim, layout, hyper, seed=seed)


def gradcheck_checks(seed=0):
    rng = np.random.default_rng(seed)
    tol = config.GRADCHECK_TOLERANCE
    agent = _small_agent(seed=seed, temperature=0.3)
    n = 3
    states = rng.standard_normal((n, agent.state_dim))
    indices = np.stack([rng.integers(size, size=n) for size in agent.head_layout], axis=1)

    critic = agent.critics[0]
    inputs = np.concatenate([states, one_hot(indices, agent.head_layout)], axis=1)
    targets = rng.standard_normal(n)
    _, grads = critic_loss_and_grad(critic, inputs, targets)
    critic_err = grad_check(critic, lambda: critic_loss_and_grad(critic, inputs, targets)[0], grads)

    z0 = rng.standard_normal((n, agent.action_dim))
    q_bar = rng.standard_normal((n, agent.action_dim))
    _, dz = head_loss_and_grad(z0, agent.head_layout, q_bar, 0.3)
    head_err = grad_check([z0], lambda: float(np.sum(head_loss_and_grad(z0, agent.head_layout, q_bar, 0.3)[0])), [dz])

    noises = rng.standard_normal((agent.actor.schedule.steps + 1, n, agent.action_dim))
    _, grads = actor_loss_and_grad(agent, states, noises, indices)
    actor_err = grad_check(agent.actor.params, lambda: actor_loss_and_grad(agent, states, noises, indices)[0], grads,
                           max_checks=40, rng=rng)
    return [_at_most("critic loss gradient, max relative error", critic_err, tol),
            _at_most("softmax-entropy head gradient, max relative error", head_err, tol),
            _at_most("unrolled {}-step actor loss gradient, max relative error".format(config.GRADCHECK_STEPS),
                     actor_err, tol)]


def schedule_checks(seed=0):
    s = build_schedule(config.DIFFUSION_STEPS, config.PHI_MIN, config.PHI_MAX)
    steps = np.diff(s.nu_bar)
    rng = np.random.default_rng(seed)
    t = s.steps // 2
    z0 = 2.0 * rng.standard_normal(100000)
    zt = forward_noise(z0, t, s, rng.standard_normal(100000))
    expected = s.nu_bar[t] * np.var(z0) + (1 - s.nu_bar[t])
    return [Check("nu_bar strictly decreasing, largest step", bool(np.all(steps < 0)), float(np.max(steps)), 0.0),
            _at_most("phi_tilde at t=1", abs(s.phi_tilde[1]), 0.0),
            _at_most("nu_bar at t=T", s.nu_bar[-1], 0.05),
            _at_most("|phi_1 - 0.0294|", abs(s.phi[1] - 0.0294), 5e-5),
            _at_most("forward-noise variance, relative error", abs(np.var(zt) - expected) / expected, 0.02)]


def soft_update_checks(seed=0):
    checks = []
    for rate in (0.0, 0.005, 1.0):
        online = DenseNet([5, 7, 3], rng=np.random.default_rng(seed))
        target = DenseNet([5, 7, 3], rng=np.random.default_rng(seed + 1))
        before = [p.copy() for p in target.params]
        soft_update(online, target, rate)
        err = max(float(np.max(np.abs(q - (rate * p + (1 - rate) * b))))
                  for p, q, b in zip(online.params, target.params, before))
        checks.append(_at_most("soft update rate {} vs element-wise blend".format(rate), err, 1e-15))
    return checks


def chain_critic_error(updates=20000, seed=0, discount=0.9):
    """
    Critic regression on the chain s0 -> s1 -> s2 -> end (reward 1 on the last move) with a
    single-action head. Returns the critic MSE against the value-iteration values.
    """
    hyper = SacHyper(discount=discount, soft_update=0.05, critic_lr=3e-3, hidden=(16,), diffusion_steps=1,
                     batch_size=3, warmup=0, temperature=0.0)
    agent = GdrsAgent(3, (1,), hyper, seed=seed)
    states = np.eye(3)
    next_states = np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]], dtype=float)
    batch = Batch(states, np.zeros((3, 1), dtype=int), np.array([0.0, 0.0, 1.0]), next_states,
                  np.array([0.0, 0.0, 1.0]))
    values = np.zeros(3)
    for _ in range(200):
        values = np.array([discount * values[1], discount * values[2], 1.0])
    for _ in range(updates):
        critic_update(batch, hyper, agent)
        update_targets(agent)
    q = agent.q_values(agent.critics, states, np.ones((3, 1))).min(axis=0)
    return float(np.mean((q - values) ** 2))


BANDIT_MEANS = np.array([0.1, 0.3, 1.0, 0.5, 0.0])


def gdrs_bandit_probability(updates=2000, seed=0):
    """Mean probability of the best arm (over 200 chain draws) after GDRS training on a 5-arm bandit."""
    rng = np.random.default_rng(seed)
    hyper = SacHyper(discount=0.0, temperature=0.01, actor_lr=5e-3, critic_lr=5e-3, hidden=(32,), diffusion_steps=5,
                     batch_size=32, warmup=0, soft_update=0.05)
    agent = GdrsAgent(1, (5,), hyper, seed=seed)
    buffer = ReplayBuffer(5000, 1, 1, rng=rng)
    state = np.ones(1)
    for _ in range(updates):
        arm = agent.act(state).indices
        buffer.add(state, arm, BANDIT_MEANS[arm[0]] + 0.1 * rng.standard_normal(), state, True)
        if len(buffer) >= hyper.batch_size:
            batch = buffer.sample(hyper.batch_size)
            critic_update(batch, hyper, agent)
            actor_update(batch, hyper, agent)
            update_targets(agent)
    z0, _ = agent.actor.run_chain(np.ones((200, 1)), rng)
    return float(np.mean(head_probabilities(z0, (5,))[0][:, int(np.argmax(BANDIT_MEANS))]))


def dqn_bandit_arm(updates=2000, seed=0):
    rng = np.random.default_rng(seed)
    hyper = DqnHyper(discount=0.0, learning_rate=1e-2, hidden=(16,), batch_size=32, warmup=0, eps_decay_steps=1000,
                     soft_update=0.1)
    agent = DqnAgent(1, (5,), hyper, seed=seed)
    buffer = ReplayBuffer(5000, 1, 1, rng=rng)
    state = np.ones(1)
    for _ in range(updates):
        arm = agent.act(state).indices
        buffer.add(state, arm, BANDIT_MEANS[arm[0]] + 0.1 * rng.standard_normal(), state, True)
        if len(buffer) >= hyper.batch_size:
            dqn_update(buffer.sample(hyper.batch_size), agent)
    return int(agent.act(state, greedy=True).indices[0])


def toy_control_checks(seed=0):
    best = int(np.argmax(BANDIT_MEANS))
    return [_at_most("3-state chain critic MSE vs value iteration", chain_critic_error(seed=seed), 1e-3),
            _at_least("GDRS best-arm probability on the 5-arm bandit", gdrs_bandit_probability(seed=seed), 0.9),
            _at_most("DQN greedy arm distance from the best arm", abs(dqn_bandit_arm(seed=seed) - best), 0)]


def hover_centroid_pose(scenario):
    centroid = np.mean([gt.position for gt in scenario.gts], axis=0)
    col = int(np.clip(round((centroid[0] - scenario.grid.origin[0]) / scenario.grid.x_s), 0, scenario.grid.cols - 1))
    row = int(np.clip(round((centroid[1] - scenario.grid.origin[1]) / scenario.grid.y_s), 0, scenario.grid.rows - 1))
    return physics.UavPose(scenario.grid.index(col, row), scenario.bounds.start_pose.alt_level, 1)


def best_fixed_power_eta(scenario, reward_cfg, pose):
    """
    Hovers at ``pose`` for every slot with the power levels that maximise the bits processed
    in one slot (exhaustive over the power grid, every GT offloading), and returns the
    episode energy efficiency.
    """
    num_gts, sub = scenario.num_gts, scenario.sub_messages
    gains = physics.pose_gains(pose, scenario.gts, scenario.grid, scenario.bounds, scenario.channel)
    offload = np.ones(num_gts, dtype=int)
    duration = scenario.bounds.duration(pose)
    best_levels, best_bits = None, -np.inf
    for levels in itertools.product(range(reward_cfg.power_levels), repeat=num_gts * sub):
        action = mdp.EnvAction("I", "I", pose.time_level, offload, np.reshape(levels, (num_gts, sub)))
        powers = mdp.slot_powers(action, scenario, reward_cfg)
        rates, _, _ = mdp.decode(gains, powers, offload, duration, scenario)
        bits = sum(access.processed_data(1, rates[k], duration, gt, scenario.compute)
                   for k, gt in enumerate(scenario.gts))
        if bits > best_bits:
            best_levels, best_bits = action.power_level, bits
    state = mdp.initial_state(scenario)
    state = mdp.EnvState(state.gt_positions, pose, 0, state.residual_bits)
    action = mdp.EnvAction("I", "I", pose.time_level, offload, best_levels)
    transitions = []
    while state.slot < scenario.bounds.n_slots:
        transitions.append(mdp.step(state, action, scenario, reward_cfg))
        state = transitions[-1].next_state
    return mdp.episode_metrics(transitions).eta


def access_direction_checks(layouts=100, n_slots=20):
    reward_cfg = mdp.RewardConfig()
    beats_fdma = beats_noma = 0
    for seed in range(layouts):
        scenario = reference_scenario(2, placement_seed=seed, n_slots=n_slots)
        pose = hover_centroid_pose(scenario)
        eta = {scheme: best_fixed_power_eta(scenario.with_access(scheme), reward_cfg, pose)
               for scheme in cu.ACCESS_SCHEMES}
        beats_fdma += eta["rsma"] >= eta["fdma"] * (1 - 1e-9)
        beats_noma += eta["rsma"] >= eta["noma"] * (1 - 1e-9)
    return [_at_least("RSMA eta >= FDMA eta, fraction of layouts", beats_fdma / layouts, 0.95),
            _at_least("RSMA eta >= NOMA eta, fraction of layouts", beats_noma / layouts, 0.60)]


def smoke_scenario(n_slots=config.SMOKE_SLOTS):
    """
    Reference layout on a coarser grid where a one-cell move in a short slot breaks the
    horizontal speed limit, so an untrained policy pays the per-slot penalty often.
    """
    return reference_scenario(2, n_slots=n_slots, spacing=config.SMOKE_CELL_SPACING)


def smoke_hyper():
    return SacHyper(discount=0.5, soft_update=0.05, hidden=(64,), diffusion_steps=5, batch_size=32,
                    warmup=config.SMOKE_WARMUP, actor_lr=config.SMOKE_LEARNING_RATE,
                    critic_lr=config.SMOKE_LEARNING_RATE)


def smoke_run(folder, episodes=config.SMOKE_EPISODES, seed=0):
    """GDRS run writing metrics.csv and the per-slot trajectory of every episode to ``folder``."""
    result = training.train(smoke_scenario(), smoke_hyper(), episodes=episodes, seed=seed, keep_all_trajectories=True)
    cu.write_csv(os.path.join(folder, "metrics.csv"), training.METRICS_HEADER, result.metrics)
    cu.write_csv(os.path.join(folder, "trajectory.csv"), *result.trajectory)
    return result


def smoke_checks(episodes=config.SMOKE_EPISODES, seed=0):
    with tempfile.TemporaryDirectory() as tmp:
        first, second = os.path.join(tmp, "a"), os.path.join(tmp, "b")
        os.makedirs(first)
        os.makedirs(second)
        result = smoke_run(first, episodes, seed)
        smoke_run(second, episodes, seed)
        identical = all(filecmp.cmp(os.path.join(first, name), os.path.join(second, name), shallow=False)
                        for name in ("metrics.csv", "trajectory.csv"))
        header, rows = result.trajectory
        col = header.index("violations")
        power_violations = sum(1 for row in rows for v in row[col].split(";") if v in ("C3", "C8"))
    rewards = [row[1] for row in result.metrics]
    gain = np.mean(rewards[-10:]) - np.mean(rewards[:5])
    return [_at_least("rerun produces identical CSVs", float(identical), 1.0),
            _at_most("C3/C8 violations of sampled actions over all episodes", power_violations, 0),
            Check("last-10 minus first-5 mean reward", bool(gain > 0), float(gain), 0.0)]


_SUITES = {
    "telescoping": telescoping_checks,
    "decoding-oracle": decoding_oracle_checks,
    "gradcheck": gradcheck_checks,
    "energy": energy_checks,
    "schedule": schedule_checks,
    "soft-update": soft_update_checks,
    "toy-control": toy_control_checks,
    "access-direction": access_direction_checks,
    "smoke": smoke_checks,
}


def run_suite(name):
    if name not in _SUITES:
        raise cu.BadConfig("Unknown verification suite {}".format(name))
    log.info("Running %s checks", name)
    return _SUITES[name]()
