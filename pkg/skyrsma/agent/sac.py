"""
Soft actor-critic learner around the diffusion policy: two critics on (state, one-hot
action), two target critics following by soft update, entropy-regularised targets.
"""
import logging
from dataclasses import dataclass, asdict

import numpy as np

from skyrsma.constants_utils import BadConfig, ShapeMismatch
from skyrsma.encode_decode import one_hot, head_slices
from skyrsma.nn import DenseNet, Optimizer, apply_update
from skyrsma.agent.diffusion import (DiffusionActor, build_schedule, head_probabilities, head_log_probabilities,
                                     entropy_sum, categorical, sample_action)

log = logging.getLogger(__name__)


@dataclass
class SacHyper:
    discount: float = 0.95
    temperature: float = 0.05
    soft_update: float = 0.005
    batch_size: int = 64
    replay_capacity: int = 100000
    warmup: int = 500
    actor_lr: float = 5e-4
    critic_lr: float = 5e-4
    hidden: tuple = (128, 128)
    activation: str = "tanh"
    optimizer: str = "adam"
    diffusion_steps: int = 20
    phi_min: float = 0.1
    phi_max: float = 20.0
    noise_scale: str = "verbatim"
    denoise_clip: float = 4.0
    embed_dim: int = 16

    def __post_init__(self):
        if not 0 <= self.discount < 1:
            raise BadConfig("Discount must lie in [0, 1)")
        if not 0 < self.soft_update <= 1:
            raise BadConfig("Soft-update rate must lie in (0, 1]")
        if self.temperature < 0:
            raise BadConfig("Entropy temperature must be non-negative")
        if self.batch_size < 1 or self.batch_size > self.replay_capacity:
            raise BadConfig("Batch size must lie in 1..replay capacity")
        if self.warmup > self.replay_capacity:
            raise BadConfig("Warm-up exceeds replay capacity")

    def as_dict(self):
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        return out


class GdrsAgent:
    def __init__(self, state_dim, head_layout, hyper, seed=0):
        self.state_dim = int(state_dim)
        self.head_layout = tuple(head_layout)
        self.action_dim = int(sum(self.head_layout))
        self.hyper = hyper
        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
        self.rng = streams[3]
        schedule = build_schedule(hyper.diffusion_steps, hyper.phi_min, hyper.phi_max)
        self.actor = DiffusionActor(state_dim, head_layout, schedule, hyper.hidden, hyper.activation, hyper.embed_dim,
                                    hyper.noise_scale, hyper.denoise_clip, rng=streams[0])
        dims = [self.state_dim + self.action_dim, *hyper.hidden, 1]
        self.critics = [DenseNet(dims, hyper.activation, "linear", rng=streams[1]),
                        DenseNet(dims, hyper.activation, "linear", rng=streams[2])]
        self.targets = [critic.copy() for critic in self.critics]
        self.actor_opt = Optimizer(hyper.optimizer, hyper.actor_lr)
        self.critic_opts = [Optimizer(hyper.optimizer, hyper.critic_lr) for _ in self.critics]

    def networks(self):
        return {"actor": self.actor.denoiser, "critic1": self.critics[0], "critic2": self.critics[1],
                "target1": self.targets[0], "target2": self.targets[1]}

    def load_networks(self, nets):
        self.actor.denoiser = nets["actor"]
        self.critics = [nets["critic1"], nets["critic2"]]
        self.targets = [nets["target1"], nets["target2"]]

    def act(self, features, scenario=None, greedy=False):
        z0, _ = self.actor.run_chain(features, self.rng)
        probs = [p[0] for p in self.actor.distributions(z0)]
        if greedy:
            probs = [np.eye(len(p))[np.argmax(p)] for p in probs]
        return sample_action(probs, self.rng, scenario)

    def q_values(self, nets, states, actions_encoded):
        x = np.concatenate([np.atleast_2d(states), np.atleast_2d(actions_encoded)], axis=1)
        return np.stack([net.forward(x)[:, 0] for net in nets])


def critic_target(batch, hyper, agent, next_indices=None, which="min"):
    """
    Soft target r + discount * V(s') with V from the target critics at a freshly
    sampled a' plus the entropy bonus; terminal rows bootstrap nothing.
    """
    z0, _ = agent.actor.run_chain(batch.next_states, agent.rng)
    probs = head_probabilities(z0, agent.head_layout)
    log_probs = head_log_probabilities(z0, agent.head_layout)
    if next_indices is None:
        next_indices = np.stack([categorical(p, agent.rng) for p in probs], axis=1)
    q = agent.q_values(agent.targets, batch.next_states, one_hot(next_indices, agent.head_layout))
    q_next = q.min(axis=0) if which == "min" else q[int(which)]
    value = q_next + hyper.temperature * entropy_sum(probs, log_probs)
    return batch.rewards + hyper.discount * (1.0 - batch.dones) * value


def critic_loss_and_grad(critic, inputs, targets):
    out, cache = critic.forward_cached(inputs)
    diff = out[:, 0] - targets
    grads, _ = critic.backward(diff[:, None] / len(targets), cache)
    return 0.5 * float(np.mean(diff ** 2)), grads


def critic_update(batch, hyper, agent, targets=None):
    """One optimiser step per critic on 0.5 * (Q(s, a) - q_hat)^2. Returns both losses."""
    if targets is None:
        targets = critic_target(batch, hyper, agent)
    inputs = np.concatenate([batch.states, one_hot(batch.actions, agent.head_layout)], axis=1)
    losses = []
    for critic, opt in zip(agent.critics, agent.critic_opts):
        loss, grads = critic_loss_and_grad(critic, inputs, targets)
        apply_update(opt, critic, grads)
        losses.append(loss)
    return losses


def counterfactual_q(agent, states, indices):
    """
    min over critics of Q(s, a with head h switched to category j), laid out like the
    concatenated head logits: (n, sum of head sizes).
    """
    n = states.shape[0]
    base = one_hot(indices, agent.head_layout)
    rows = []
    for sl in head_slices(agent.head_layout):
        for j in range(sl.start, sl.stop):
            enc = base.copy()
            enc[:, sl] = 0.0
            enc[:, j] = 1.0
            rows.append(enc)
    encodings = np.concatenate(rows, axis=0)
    repeated = np.tile(states, (len(rows), 1))
    q = agent.q_values(agent.critics, repeated, encodings).min(axis=0)
    return q.reshape(len(rows), n).T


def head_loss_and_grad(z0, layout, q_bar, temperature):
    """
    Per-row loss temperature * sum(pi log pi) - sum(pi * q_bar) over every head, with its
    gradient with respect to the logits z0. ``q_bar`` is held constant.
    """
    probs = head_probabilities(z0, layout)
    log_probs = head_log_probabilities(z0, layout)
    loss = np.zeros(z0.shape[0])
    grad = np.zeros_like(z0)
    for sl, p, lp in zip(head_slices(layout), probs, log_probs):
        q = q_bar[:, sl]
        loss += temperature * np.sum(p * lp, axis=1) - np.sum(p * q, axis=1)
        neg_entropy = p * (lp - np.sum(p * lp, axis=1, keepdims=True))
        value = p * (q - np.sum(p * q, axis=1, keepdims=True))
        grad[:, sl] = temperature * neg_entropy - value
    return loss, grad


def actor_loss_and_grad(agent, states, noises=None, indices=None):
    """
    Actor loss averaged over the batch and its gradient through the whole reverse chain.

    The value term uses one fresh action sample per state, switching one head at a time
    (see ``counterfactual_q``), which gives an unbiased gradient of E_pi[Q].
    """
    z0, tape = agent.actor.run_chain(states, agent.rng, noises)
    if indices is None:
        probs = head_probabilities(z0, agent.head_layout)
        indices = np.stack([categorical(p, agent.rng) for p in probs], axis=1)
    q_bar = counterfactual_q(agent, states, indices)
    loss, dz0 = head_loss_and_grad(z0, agent.head_layout, q_bar, agent.hyper.temperature)
    grads = agent.actor.backprop_chain(tape, dz0 / len(states))
    return float(np.mean(loss)), grads


def actor_update(batch, hyper, agent):
    loss, grads = actor_loss_and_grad(agent, batch.states)
    apply_update(agent.actor_opt, agent.actor, grads)
    return loss


def soft_update(online, target, rate):
    """target <- rate * online + (1 - rate) * target, parameter-wise, in place."""
    if online.layer_dims != target.layer_dims:
        raise ShapeMismatch("Online {} and target {} differ".format(online.layer_dims, target.layer_dims))
    for p, q in zip(online.params, target.params):
        if p.shape != q.shape:
            raise ShapeMismatch("Parameter shapes {} / {} differ".format(p.shape, q.shape))
        q[...] = rate * p + (1 - rate) * q
    return target


def update_targets(agent):
    for critic, target in zip(agent.critics, agent.targets):
        soft_update(critic, target, agent.hyper.soft_update)
