import math

import numpy as np
import pytest

from skyrsma import nn
from skyrsma.constants_utils import BadSchedule, BadConfig, ShapeMismatch
from skyrsma.agent import diffusion
from skyrsma.agent.diffusion import DiffusionActor, build_schedule


def small_actor(clip=None, steps=5, phi_max=2.0, seed=0, noise_scale="verbatim"):
    schedule = build_schedule(steps, 0.1, phi_max)
    return DiffusionActor(3, (3, 2), schedule, hidden=(8,), embed_dim=4, noise_scale=noise_scale, clip=clip, seed=seed)


def test_reference_schedule():
    s = build_schedule(20, 0.1, 20.0)
    assert s.phi[1] == pytest.approx(0.0294, abs=5e-5)
    assert s.phi_tilde[1] == 0.0
    assert s.nu_bar[-1] < 0.05
    assert np.all(np.diff(s.nu_bar) < 0)
    np.testing.assert_allclose(s.phi + s.nu, 1.0)


def test_single_step_schedule():
    s = build_schedule(1, 0.1, 20.0)
    assert s.phi[1] == pytest.approx(1 - math.exp(-10.05))
    assert s.phi_tilde[1] == 0.0


@pytest.mark.parametrize("steps,phi_min,phi_max", [(0, 0.1, 20.0), (5, 2.0, 1.0), (5, 0.0, 1.0), (2.5, 0.1, 1.0)])
def test_bad_schedule(steps, phi_min, phi_max):
    with pytest.raises(BadSchedule):
        build_schedule(steps, phi_min, phi_max)


def test_forward_noise():
    s = build_schedule(20, 0.1, 20.0)
    rng = np.random.default_rng(0)
    z0 = 2.0 * rng.standard_normal(100000)
    zt = diffusion.forward_noise(z0, 10, s, rng.standard_normal(100000))
    expected = s.nu_bar[10] * np.var(z0) + 1 - s.nu_bar[10]
    assert abs(np.var(zt) - expected) / expected < 0.02
    with pytest.raises(BadSchedule):
        diffusion.forward_noise(z0, 0, s, z0)


def test_zero_denoiser_rescales():
    actor = small_actor()
    actor.denoiser = nn.DenseNet(actor.denoiser.layer_dims, zero=True)
    z = np.linspace(-1, 1, 5)
    out = actor.denoise_step(z, 3, np.ones(3), np.zeros(5))
    np.testing.assert_allclose(out, z / np.sqrt(actor.schedule.nu[3]))


def test_clipped_mean_matches_plain_mean_inside_the_clip():
    plain = small_actor(clip=None)
    clipped = small_actor(clip=1e6)
    rng = np.random.default_rng(1)
    z = rng.standard_normal((4, 5))
    features = rng.standard_normal((4, 3))
    noise = rng.standard_normal((4, 5))
    for t in (1, 3, 5):
        np.testing.assert_allclose(clipped.denoise_step(z, t, features, noise),
                                   plain.denoise_step(z, t, features, noise), rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("noise_scale", ["verbatim", "conventional"])
def test_last_step_is_noise_free(noise_scale):
    actor = small_actor(noise_scale=noise_scale)
    z = np.linspace(-1, 1, 5)
    a = actor.denoise_step(z, 1, np.ones(3), np.zeros(5))
    b = actor.denoise_step(z, 1, np.ones(3), np.ones(5))
    np.testing.assert_array_equal(a, b)


def test_denoise_step_errors():
    actor = small_actor()
    with pytest.raises(BadSchedule):
        actor.denoise_step(np.zeros(5), 6, np.ones(3), np.zeros(5))
    with pytest.raises(ShapeMismatch):
        actor.denoise_step(np.zeros(4), 2, np.ones(3), np.zeros(4))
    with pytest.raises(BadConfig):
        small_actor(noise_scale="loud")


@pytest.mark.parametrize("clip", [None, 50.0])
def test_chain_gradient(clip):
    actor = small_actor(clip=clip)
    rng = np.random.default_rng(2)
    features = rng.standard_normal((3, 3))
    noises = rng.standard_normal((actor.schedule.steps + 1, 3, 5))
    w = rng.standard_normal((3, 5))
    _, tape = actor.run_chain(features, noises=noises)
    grads = actor.backprop_chain(tape, w)
    err = nn.grad_check(actor.params, lambda: float(np.sum(w * actor.run_chain(features, noises=noises)[0])), grads,
                        max_checks=30, rng=rng)
    assert err < 1e-5


def test_action_distribution():
    actor = small_actor()
    probs = diffusion.generate_action_distribution(np.ones(3), actor, np.random.default_rng(0))
    assert [p.shape for p in probs] == [(3,), (2,)]
    for p in probs:
        assert abs(p.sum() - 1) <= 1e-12
        assert np.all(p >= 0)
    again = diffusion.generate_action_distribution(np.ones(3), actor, np.random.default_rng(0))
    for p, q in zip(probs, again):
        np.testing.assert_array_equal(p, q)
    batch = diffusion.generate_action_distribution(np.ones((4, 3)), actor, np.random.default_rng(0))
    assert [p.shape for p in batch] == [(4, 3), (4, 2)]


def test_one_hot_head_is_deterministic():
    rng = np.random.default_rng(0)
    for _ in range(20):
        sampled = diffusion.sample_action([np.array([0.0, 0.0, 1.0, 0.0])], rng)
        assert sampled.indices[0] == 2
        assert sampled.log_prob == 0.0
        assert sampled.entropies[0] == 0.0


def test_uniform_head_entropy():
    sampled = diffusion.sample_action([np.full(4, 0.25), np.array([0.5, 0.5])], np.random.default_rng(0))
    np.testing.assert_allclose(sampled.entropies, [math.log(4), math.log(2)])
    assert sampled.log_prob == pytest.approx(math.log(0.25) + math.log(0.5))
    assert sampled.action is None


def test_categorical_frequencies():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    draws = diffusion.categorical(np.tile(p, (100000, 1)), np.random.default_rng(5))
    freq = np.bincount(draws, minlength=4) / len(draws)
    np.testing.assert_allclose(freq, p, atol=0.01)
