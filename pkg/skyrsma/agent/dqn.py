"""
Branching deep Q-network baseline: one network whose output is split into a Q-vector per
action head, epsilon-greedy exploration and a softly updated target copy.
"""
from dataclasses import dataclass, asdict

import numpy as np

from skyrsma.constants_utils import BadConfig
from skyrsma.encode_decode import head_slices
from skyrsma.nn import DenseNet, Optimizer, apply_update
from skyrsma.agent.diffusion import sample_action
from skyrsma.agent.sac import soft_update


@dataclass
class DqnHyper:
    discount: float = 0.95
    learning_rate: float = 5e-4
    soft_update: float = 0.005
    batch_size: int = 64
    replay_capacity: int = 100000
    warmup: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 10000
    hidden: tuple = (128, 128)
    activation: str = "tanh"
    optimizer: str = "adam"

    def __post_init__(self):
        if not 0 <= self.discount < 1:
            raise BadConfig("Discount must lie in [0, 1)")
        if not 0 < self.soft_update <= 1:
            raise BadConfig("Soft-update rate must lie in (0, 1]")
        if not (0 <= self.eps_end <= 1 and 0 <= self.eps_start <= 1):
            raise BadConfig("Exploration rates must lie in [0, 1]")
        if self.eps_decay_steps < 0:
            raise BadConfig("Exploration decay must be non-negative")
        if self.batch_size < 1 or self.batch_size > self.replay_capacity:
            raise BadConfig("Batch size must lie in 1..replay capacity")

    def as_dict(self):
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        return out


class DqnAgent:
    def __init__(self, state_dim, head_layout, hyper, seed=0, zero_init=False):
        self.state_dim = int(state_dim)
        self.head_layout = tuple(head_layout)
        self.hyper = hyper
        net_rng, self.rng = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
        self.net = DenseNet([self.state_dim, *hyper.hidden, int(sum(self.head_layout))], hyper.activation, "linear",
                            rng=net_rng, zero=zero_init)
        self.target = self.net.copy()
        self.opt = Optimizer(hyper.optimizer, hyper.learning_rate)
        self.steps = 0

    def networks(self):
        return {"q": self.net, "q_target": self.target}

    def load_networks(self, nets):
        self.net = nets["q"]
        self.target = nets["q_target"]

    @property
    def epsilon(self):
        h = self.hyper
        if h.eps_decay_steps == 0:
            return h.eps_end
        frac = min(self.steps / h.eps_decay_steps, 1.0)
        return h.eps_start + frac * (h.eps_end - h.eps_start)

    def head_values(self, features):
        q = self.net.forward(features)
        return [q[sl] for sl in head_slices(self.head_layout)]

    def act(self, features, scenario=None, greedy=False):
        """
        Epsilon-greedy draw per head, expressed as the mixture distribution
        eps / size + (1 - eps) * [j == argmax]; ties go to the lowest index.
        """
        eps = 0.0 if greedy else self.epsilon
        probs = []
        for q in self.head_values(features):
            p = np.full(len(q), eps / len(q))
            p[np.argmax(q)] += 1.0 - eps
            probs.append(p)
        if not greedy:
            self.steps += 1
        return sample_action(probs, self.rng, scenario)


def td_targets(agent, batch):
    q_next = agent.target.forward(batch.next_states)
    bootstrap = agent.hyper.discount * (1.0 - batch.dones)
    return np.stack([batch.rewards + bootstrap * q_next[:, sl].max(axis=1)
                     for sl in head_slices(agent.head_layout)], axis=1)


def dqn_loss_and_grad(agent, batch, targets=None):
    """Mean over batch and heads of 0.5 * (Q_h(s, a_h) - y_h)^2, with its parameter gradients."""
    if targets is None:
        targets = td_targets(agent, batch)
    q, cache = agent.net.forward_cached(batch.states)
    n, num_heads = batch.actions.shape
    rows = np.arange(n)
    upstream = np.zeros_like(q)
    loss = 0.0
    for h, sl in enumerate(head_slices(agent.head_layout)):
        cols = sl.start + batch.actions[:, h]
        diff = q[rows, cols] - targets[:, h]
        loss += 0.5 * float(np.sum(diff ** 2))
        upstream[rows, cols] = diff
    grads, _ = agent.net.backward(upstream / (n * num_heads), cache)
    return loss / (n * num_heads), grads


def dqn_update(batch, agent):
    loss, grads = dqn_loss_and_grad(agent, batch)
    apply_update(agent.opt, agent.net, grads)
    soft_update(agent.net, agent.target, agent.hyper.soft_update)
    return loss
