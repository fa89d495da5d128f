"""
Episode loops: GDRS training, the DQN baseline, the scripted random policy and frozen
policy evaluation. All of them share ``run_episodes`` and emit one metrics row per episode.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from skyrsma import mdp
from skyrsma.constants_utils import BadConfig
from skyrsma.encode_decode import head_layout, state_dim, encode_state
from skyrsma.agent.diffusion import sample_action
from skyrsma.agent.replay import ReplayBuffer
from skyrsma.agent.sac import SacHyper, GdrsAgent, critic_update, actor_update, update_targets
from skyrsma.agent.dqn import DqnHyper, DqnAgent, dqn_update

log = logging.getLogger(__name__)

METRICS_HEADER = ["episode", "mean_reward", "eta", "total_bits", "total_energy", "violation_count"]


@dataclass
class TrainResult:
    metrics: list
    trajectory: tuple
    agent: object = None
    losses: list = field(default_factory=list)

    @property
    def etas(self):
        return [row[2] for row in self.metrics]


def _check_run(scenario, episodes, steps_per_episode):
    if int(episodes) != episodes or episodes < 1:
        raise BadConfig("Need at least one episode, got {}".format(episodes))
    steps = scenario.bounds.n_slots if steps_per_episode is None else steps_per_episode
    if int(steps) != steps or not 1 <= steps <= scenario.bounds.n_slots:
        raise BadConfig("Steps per episode must lie in 1..{}".format(scenario.bounds.n_slots))
    return int(episodes), int(steps)


def _seeds(seed, n):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def metrics_row(episode, transitions):
    summary = mdp.episode_metrics(transitions)
    return [episode, summary.mean_reward, summary.eta, summary.total_bits, summary.total_energy,
            summary.violation_count]


def run_episodes(scenario, reward_cfg, episodes, steps, env_seed, policy, learner=None, tag="episode",
                 keep_all_trajectories=False):
    """
    Runs ``episodes`` episodes of ``steps`` slots. ``policy(features)`` returns a
    SampledAction; ``learner(features, indices, reward, next_features, done)`` is called
    after every step and may return loss values.

    :return: (metrics rows, trajectory (header, rows), losses)
    """
    env = mdp.UavMecEnv(scenario, reward_cfg, seed=env_seed)
    rows, losses = [], []
    header, traj_rows = None, []
    for episode in range(episodes):
        state = env.reset()
        features = encode_state(state, scenario)
        transitions = []
        for _ in range(steps):
            sampled = policy(features)
            transition = env.step(sampled.action)
            next_features = encode_state(transition.next_state, scenario)
            if learner is not None:
                out = learner(features, sampled.indices, transition.reward, next_features, transition.done)
                if out is not None:
                    losses.append(out)
            transitions.append(transition)
            features = next_features
            if transition.done:
                break
        row = metrics_row(episode, transitions)
        rows.append(row)
        log.info("%s %d: mean reward %.4g, eta %.4g bits/J, %d violations", tag, episode, row[1], row[2], row[5])
        if keep_all_trajectories or episode == episodes - 1:
            header, ep_rows = mdp.trajectory_rows(transitions, scenario)
            if keep_all_trajectories:
                header = ["episode"] + header
                ep_rows = [[episode] + r for r in ep_rows]
            traj_rows += ep_rows
    return rows, (header, traj_rows), losses


def train(scenario, hyper=None, reward_cfg=None, episodes=500, steps_per_episode=None, seed=0,
          keep_all_trajectories=False):
    """
    GDRS training. Every step samples an action through the reverse chain, stores the
    transition and, once the buffer holds max(batch, warm-up) transitions, runs one critic
    update, one actor update and the soft target updates.

    The trajectory holds the last episode, or every episode with ``keep_all_trajectories``.
    """
    hyper = hyper or SacHyper()
    reward_cfg = reward_cfg or mdp.RewardConfig()
    if not isinstance(hyper, SacHyper):
        raise BadConfig("GDRS training needs SacHyper, got {}".format(type(hyper).__name__))
    episodes, steps = _check_run(scenario, episodes, steps_per_episode)
    layout = head_layout(scenario, reward_cfg)
    seeds = _seeds(seed, 3)
    agent = GdrsAgent(state_dim(scenario), layout, hyper, seed=seeds[0])
    buffer = ReplayBuffer(hyper.replay_capacity, state_dim(scenario), len(layout), rng=np.random.default_rng(seeds[1]))
    ready = max(hyper.batch_size, hyper.warmup)

    def policy(features):
        return agent.act(features, scenario)

    def learner(features, indices, reward, next_features, done):
        buffer.add(features, indices, reward, next_features, done)
        if len(buffer) < ready:
            return None
        batch = buffer.sample(hyper.batch_size)
        critic_losses = critic_update(batch, hyper, agent)
        actor_loss = actor_update(batch, hyper, agent)
        update_targets(agent)
        return critic_losses + [actor_loss]

    rows, trajectory, losses = run_episodes(scenario, reward_cfg, episodes, steps, seeds[2], policy, learner,
                                            tag="GDRS episode", keep_all_trajectories=keep_all_trajectories)
    return TrainResult(rows, trajectory, agent, losses)


def dqn_train(scenario, hyper=None, reward_cfg=None, episodes=500, steps_per_episode=None, seed=0):
    hyper = hyper or DqnHyper()
    reward_cfg = reward_cfg or mdp.RewardConfig()
    if not isinstance(hyper, DqnHyper):
        raise BadConfig("DQN training needs DqnHyper, got {}".format(type(hyper).__name__))
    episodes, steps = _check_run(scenario, episodes, steps_per_episode)
    layout = head_layout(scenario, reward_cfg)
    seeds = _seeds(seed, 3)
    agent = DqnAgent(state_dim(scenario), layout, hyper, seed=seeds[0])
    buffer = ReplayBuffer(hyper.replay_capacity, state_dim(scenario), len(layout), rng=np.random.default_rng(seeds[1]))
    ready = max(hyper.batch_size, hyper.warmup)

    def policy(features):
        return agent.act(features, scenario)

    def learner(features, indices, reward, next_features, done):
        buffer.add(features, indices, reward, next_features, done)
        if len(buffer) < ready:
            return None
        return [dqn_update(buffer.sample(hyper.batch_size), agent)]

    rows, trajectory, losses = run_episodes(scenario, reward_cfg, episodes, steps, seeds[2], policy, learner,
                                            tag="DQN episode")
    return TrainResult(rows, trajectory, agent, losses)


def random_run(scenario, reward_cfg=None, episodes=1, steps_per_episode=None, seed=0):
    """Uniform draw on every head; no learning and no checkpoint."""
    reward_cfg = reward_cfg or mdp.RewardConfig()
    episodes, steps = _check_run(scenario, episodes, steps_per_episode)
    layout = head_layout(scenario, reward_cfg)
    policy_seed, env_seed = _seeds(seed, 2)
    policy_rng = np.random.default_rng(policy_seed)
    uniform = [np.full(size, 1.0 / size) for size in layout]

    def policy(features):
        return sample_action(uniform, policy_rng, scenario)

    rows, trajectory, _ = run_episodes(scenario, reward_cfg, episodes, steps, env_seed, policy, tag="Random episode")
    return TrainResult(rows, trajectory)


def evaluate(scenario, agent, reward_cfg=None, episodes=5, steps_per_episode=None, seed=0, greedy=False):
    """Frozen-policy rollouts; the trajectory keeps every episode with an ``episode`` column."""
    reward_cfg = reward_cfg or mdp.RewardConfig()
    episodes, steps = _check_run(scenario, episodes, steps_per_episode)
    layout = head_layout(scenario, reward_cfg)
    if tuple(agent.head_layout) != tuple(layout):
        raise BadConfig("Checkpoint heads {} do not match the scenario {}".format(agent.head_layout, layout))
    agent_seed, env_seed = _seeds(seed, 2)
    agent.rng = np.random.default_rng(agent_seed)

    def policy(features):
        return agent.act(features, scenario, greedy=greedy)

    rows, trajectory, _ = run_episodes(scenario, reward_cfg, episodes, steps, env_seed, policy, tag="Eval episode",
                                       keep_all_trajectories=True)
    return TrainResult(rows, trajectory, agent)


def final_window_eta(etas, fraction=0.1):
    """Mean eta over the last ``fraction`` of the episodes (at least one)."""
    if not len(etas):
        raise BadConfig("No episodes to aggregate")
    window = max(1, int(round(len(etas) * fraction)))
    return float(np.mean(etas[-window:]))
