"""
Diffusion policy: a denoiser network run backwards through a fixed noise schedule turns
Gaussian noise into the logits of the categorical action heads.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import softmax, log_softmax

from skyrsma.constants_utils import BadSchedule, BadConfig, ShapeMismatch
from skyrsma.encode_decode import action_from_indices
from skyrsma.nn import DenseNet, add_grads

NOISE_SCALES = ("verbatim", "conventional")


@dataclass(frozen=True, eq=False)
class DiffusionSchedule:
    """
    Per-step arrays indexed by t = 0..T. Index 0 is the clean end of the chain
    (phi = 0, nu_bar = 1) so that ``nu_bar[t - 1]`` is always defined.
    """
    steps: int
    phi_min: float
    phi_max: float
    phi: np.ndarray
    nu: np.ndarray
    nu_bar: np.ndarray
    phi_tilde: np.ndarray


def build_schedule(steps, phi_min, phi_max):
    if int(steps) != steps or steps < 1:
        raise BadSchedule("Need at least one diffusion step, got {}".format(steps))
    if not 0 < phi_min < phi_max:
        raise BadSchedule("Need 0 < phi_min < phi_max, got {} and {}".format(phi_min, phi_max))
    steps = int(steps)
    t = np.arange(1, steps + 1)
    exponent = phi_min / steps + (2 * t - 1) / (2 * steps ** 2) * (phi_max - phi_min)
    phi = np.concatenate([[0.0], -np.expm1(-exponent)])
    nu = np.concatenate([[1.0], np.exp(-exponent)])
    nu_bar = np.cumprod(nu)
    phi_tilde = np.zeros(steps + 1)
    phi_tilde[1:] = (1 - nu_bar[:-1]) / (1 - nu_bar[1:]) * phi[1:]
    return DiffusionSchedule(steps, phi_min, phi_max, phi, nu, nu_bar, phi_tilde)


def _check_step(t, schedule):
    if not 1 <= t <= schedule.steps:
        raise BadSchedule("Step {} outside 1..{}".format(t, schedule.steps))


def forward_noise(z0, t, schedule, noise):
    _check_step(t, schedule)
    return np.sqrt(schedule.nu_bar[t]) * np.asarray(z0) + np.sqrt(1 - schedule.nu_bar[t]) * np.asarray(noise)


def timestep_embedding(t, dim):
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    return np.concatenate([np.sin(t * freqs), np.cos(t * freqs)])


class ChainStep:
    def __init__(self, t, cache, u, inside):
        self.t = t
        self.cache = cache
        self.u = u
        self.inside = inside


class DiffusionActor:
    """
    Denoiser network plus schedule. The denoiser sees the noisy logits, a sinusoidal
    embedding of the step and the state features.

    ``clip`` bounds the reconstructed clean sample; with ``clip=None`` the mean is the
    plain noise-prediction formula.
    """

    def __init__(self, state_dim, head_layout, schedule, hidden=(128, 128), activation="tanh", embed_dim=16,
                 noise_scale="verbatim", clip=4.0, rng=None, seed=None):
        if noise_scale not in NOISE_SCALES:
            raise BadConfig("Unknown noise scale {}".format(noise_scale))
        if clip is not None and clip <= 0:
            raise BadConfig("Denoise clip must be positive")
        self.state_dim = int(state_dim)
        self.head_layout = tuple(int(s) for s in head_layout)
        self.action_dim = int(sum(self.head_layout))
        self.schedule = schedule
        self.embed_dim = embed_dim
        self.noise_scale = noise_scale
        self.clip = clip
        rng = rng if rng is not None else np.random.default_rng(seed)
        self.denoiser = DenseNet([self.action_dim + embed_dim + self.state_dim, *hidden, self.action_dim],
                                 activation, "linear", rng=rng)
        self._embeddings = {t: timestep_embedding(t, embed_dim) for t in range(1, schedule.steps + 1)}

    @property
    def params(self):
        return self.denoiser.params

    def noise_coefficient(self, t):
        if self.noise_scale == "verbatim":
            return (self.schedule.phi_tilde[t] / 2) ** 2
        return np.sqrt(self.schedule.phi_tilde[t])

    def _inputs(self, z, t, features):
        emb = np.broadcast_to(self._embeddings[t], (z.shape[0], self.embed_dim))
        return np.concatenate([z, emb, features], axis=1)

    def _as_batch(self, z, features):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if z.shape[1] != self.action_dim or features.shape[1] != self.state_dim:
            raise ShapeMismatch("Chain input shapes {} / {} do not match the actor".format(z.shape, features.shape))
        if features.shape[0] != z.shape[0]:
            features = np.broadcast_to(features, (z.shape[0], self.state_dim))
        return z, features

    def _step(self, z, t, features, noise):
        s = self.schedule
        sigma, cache = self.denoiser.forward_cached(self._inputs(z, t, features))
        u = np.tanh(sigma)
        if self.clip is None:
            mean = (z - s.phi[t] * u / np.sqrt(1 - s.nu_bar[t])) / np.sqrt(s.nu[t])
            inside = None
        else:
            x0 = (z - np.sqrt(1 - s.nu_bar[t]) * u) / np.sqrt(s.nu_bar[t])
            inside = np.abs(x0) < self.clip
            c1 = np.sqrt(s.nu_bar[t - 1]) * s.phi[t] / (1 - s.nu_bar[t])
            c2 = np.sqrt(s.nu[t]) * (1 - s.nu_bar[t - 1]) / (1 - s.nu_bar[t])
            mean = c1 * np.clip(x0, -self.clip, self.clip) + c2 * z
        return mean + self.noise_coefficient(t) * noise, ChainStep(t, cache, u, inside)

    def denoise_step(self, z_t, t, features, noise):
        _check_step(t, self.schedule)
        single = np.asarray(z_t).ndim == 1
        z, features = self._as_batch(z_t, features)
        z_prev, _ = self._step(z, t, features, np.broadcast_to(noise, z.shape))
        return z_prev[0] if single else z_prev

    def run_chain(self, features, rng=None, noises=None):
        """
        Reverse chain from t = T down to 1 for a batch of states.

        ``noises`` (T + 1, n, dim) fixes the randomness: ``noises[0]`` is z_T and
        ``noises[t]`` the draw of step t. Returns (z_0, tape) with z_0 shaped (n, dim).
        """
        features = np.atleast_2d(np.asarray(features, dtype=float))
        n, steps = features.shape[0], self.schedule.steps
        if noises is None:
            noises = rng.standard_normal((steps + 1, n, self.action_dim))
        z, features = self._as_batch(noises[0], features)
        tape = []
        for t in range(steps, 0, -1):
            z, record = self._step(z, t, features, noises[t])
            tape.append(record)
        return z, tape

    def backprop_chain(self, tape, dz0):
        """Parameter gradients of sum(dz0 * z_0) through every recorded step."""
        s = self.schedule
        g = np.asarray(dz0, dtype=float)
        total = None
        for record in reversed(tape):
            t = record.t
            if self.clip is None:
                du = -s.phi[t] / (np.sqrt(1 - s.nu_bar[t]) * np.sqrt(s.nu[t])) * g
                dz = g / np.sqrt(s.nu[t])
            else:
                c1 = np.sqrt(s.nu_bar[t - 1]) * s.phi[t] / (1 - s.nu_bar[t])
                c2 = np.sqrt(s.nu[t]) * (1 - s.nu_bar[t - 1]) / (1 - s.nu_bar[t])
                dx0 = c1 * g * record.inside
                dz = c2 * g + dx0 / np.sqrt(s.nu_bar[t])
                du = -np.sqrt(1 - s.nu_bar[t]) / np.sqrt(s.nu_bar[t]) * dx0
            grads, dinputs = self.denoiser.backward(du * (1 - record.u ** 2), record.cache)
            total = add_grads(total, grads)
            g = dz + dinputs[:, :self.action_dim]
        return total

    def distributions(self, z0):
        return head_probabilities(z0, self.head_layout)


def split_heads(z, layout):
    edges = np.cumsum(layout)[:-1]
    return np.split(np.atleast_2d(z), edges, axis=1)


def head_probabilities(z0, layout):
    return [softmax(part, axis=1) for part in split_heads(z0, layout)]


def head_log_probabilities(z0, layout):
    return [log_softmax(part, axis=1) for part in split_heads(z0, layout)]


def entropy_sum(probs, log_probs):
    """Summed head entropy per row."""
    return -sum(np.sum(p * lp, axis=1) for p, lp in zip(probs, log_probs))


def generate_action_distribution(state_features, actor, rng):
    """Per-head probability vectors for one state (1-D arrays) or a batch (2-D arrays)."""
    single = np.asarray(state_features).ndim == 1
    z0, _ = actor.run_chain(state_features, rng)
    probs = actor.distributions(z0)
    return [p[0] for p in probs] if single else probs


class SampledAction(NamedTuple):
    indices: np.ndarray
    log_prob: float
    entropies: np.ndarray
    action: object = None


def categorical(probs, rng):
    """One inverse-CDF draw per row of ``probs`` (n, size)."""
    probs = np.atleast_2d(probs)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None] * cdf[:, -1:]
    return np.minimum(np.sum(cdf <= u, axis=1), probs.shape[1] - 1)


def sample_action(distributions, rng, scenario=None):
    """
    One independent draw per head. With a scenario the EnvAction is assembled too.

    :return: SampledAction(indices, log_prob, per-head entropies, action)
    """
    indices = np.array([int(categorical(p, rng)[0]) for p in distributions])
    log_prob = 0.0
    entropies = []
    for p, j in zip(distributions, indices):
        p = np.asarray(p, dtype=float)
        log_prob += np.log(p[j]) if p[j] > 0 else -np.inf
        nz = p[p > 0]
        entropies.append(float(-np.sum(nz * np.log(nz))))
    action = None
    if scenario is not None:
        action = action_from_indices(indices, scenario)
    return SampledAction(indices, float(log_prob), np.array(entropies), action)
