"""
PPO pieces: GAE, losses, update safety, observation statistics, export
"""
import numpy as np
import pytest
import torch

from src.errors import PpoInstabilityError
from src.models.config import ActionScaling, ObservationConfig, PpoConfig
from src.policy.network import mlp_forward, normalize
from src.training.ppo import (
    ActorCritic,
    RolloutBuffer,
    RunningMeanStd,
    clipped_surrogate_loss,
    export_policy,
    gae_advantages,
    gaussian_kl,
    ppo_update,
)

OBS_DIM = 29


def _three_steps(dones=(0.0, 0.0, 0.0)):
    rewards = torch.ones(3, 1, dtype=torch.float64)
    values = torch.full((3, 1), 0.5, dtype=torch.float64)
    return rewards, values, torch.tensor(dones, dtype=torch.float64).reshape(3, 1)


def test_gae_three_step_reference():
    rewards, values, dones = _three_steps()
    advantages, returns = gae_advantages(rewards, values, dones, torch.tensor([0.5], dtype=torch.float64),
                                         gamma=0.9, lam=0.8, normalize=False)
    np.testing.assert_allclose(advantages[:, 0].numpy(), [2.12648, 1.634, 0.95], rtol=1e-12)
    np.testing.assert_allclose(returns.numpy(), advantages.numpy() + 0.5)


def test_gae_stops_at_episode_end():
    rewards, values, dones = _three_steps(dones=(0.0, 1.0, 0.0))
    advantages, _ = gae_advantages(rewards, values, dones, torch.tensor([0.5], dtype=torch.float64),
                                   gamma=0.9, lam=0.8, normalize=False)
    np.testing.assert_allclose(advantages[:, 0].numpy(), [1.31, 0.5, 0.95], rtol=1e-12)


def test_gae_normalization():
    generator = torch.Generator().manual_seed(0)
    rewards = torch.rand(16, 4, generator=generator)
    values = torch.rand(16, 4, generator=generator)
    advantages, returns = gae_advantages(rewards, values, torch.zeros(16, 4), torch.zeros(4), 0.99, 0.95)
    assert advantages.mean().item() == pytest.approx(0.0, abs=1e-6)
    assert advantages.std().item() == pytest.approx(1.0, rel=1e-4)
    raw, raw_returns = gae_advantages(rewards, values, torch.zeros(16, 4), torch.zeros(4), 0.99, 0.95,
                                      normalize=False)
    torch.testing.assert_close(returns, raw_returns)


def test_surrogate_is_clipped_for_positive_advantage():
    advantages = torch.tensor([2.0])
    loss = clipped_surrogate_loss(torch.log(torch.tensor([1.5])), torch.zeros(1), advantages, clip_ratio=0.2)
    assert loss.item() == pytest.approx(-2.0 * 1.2)
    unclipped = clipped_surrogate_loss(torch.log(torch.tensor([1.1])), torch.zeros(1), advantages, 0.2)
    assert unclipped.item() == pytest.approx(-2.0 * 1.1)


def test_surrogate_gradient_matches_analytic():
    """Inside the clip range d/dlogp of -A*exp(logp - old) is -A*ratio"""
    log_probs = torch.tensor([0.05, -0.1, 0.0], dtype=torch.float64, requires_grad=True)
    old = torch.zeros(3, dtype=torch.float64)
    advantages = torch.tensor([1.0, -2.0, 0.5], dtype=torch.float64)
    clipped_surrogate_loss(log_probs, old, advantages, clip_ratio=0.2).backward()
    expected = -advantages * torch.exp(log_probs.detach()) / 3.0
    torch.testing.assert_close(log_probs.grad, expected)


def test_kl_of_identical_gaussians_is_zero():
    mu, sigma = torch.randn(5, 9), torch.rand(5, 9) + 0.1
    torch.testing.assert_close(gaussian_kl(mu, sigma, mu, sigma), torch.zeros(5))
    assert torch.all(gaussian_kl(mu, sigma, mu + 0.3, sigma * 1.2) > 0)


def _filled_buffer(model: ActorCritic, num_steps=4, num_envs=8, seed=0) -> RolloutBuffer:
    generator = torch.Generator().manual_seed(seed)
    buffer = RolloutBuffer(num_steps, num_envs, OBS_DIM)
    for _ in range(num_steps):
        obs = torch.randn(num_envs, OBS_DIM, generator=generator)
        action, log_prob, value, mu, sigma = model.act(obs, generator)
        buffer.add(obs, obs.numpy(), action, log_prob, value, torch.zeros(num_envs), torch.zeros(num_envs),
                   mu, sigma)
    return buffer


def _parameters(model: ActorCritic):
    return [p.detach().clone() for p in model.parameters()]


def test_zero_advantage_leaves_parameters_unchanged():
    torch.manual_seed(0)
    model = ActorCritic(OBS_DIM, (16, 16))
    buffer = _filled_buffer(model)
    buffer.advantages = torch.zeros_like(buffer.rewards)
    buffer.returns = buffer.values.clone()
    before = _parameters(model)
    cfg = PpoConfig(num_envs=8, rollout_length=4, num_minibatches=2, num_epochs=2, adaptive_lr=False)
    ppo_update(buffer, model, torch.optim.SGD(model.parameters(), lr=1e-3), cfg)
    for old, new in zip(before, model.parameters()):
        torch.testing.assert_close(old, new.detach())


def test_non_finite_loss_restores_parameters():
    torch.manual_seed(0)
    model = ActorCritic(OBS_DIM, (16, 16))
    buffer = _filled_buffer(model)
    buffer.rewards[0, 0] = float("nan")
    buffer.compute_returns(torch.zeros(8), gamma=0.99, lam=0.95)
    optimizer = torch.optim.Adam(model.parameters(), lr=1e-3)
    before = _parameters(model)
    cfg = PpoConfig(num_envs=8, rollout_length=4, num_minibatches=2, num_epochs=2)
    with pytest.raises(PpoInstabilityError):
        ppo_update(buffer, model, optimizer, cfg)
    for old, new in zip(before, model.parameters()):
        torch.testing.assert_close(old, new.detach())


def test_update_reports_finite_statistics():
    torch.manual_seed(1)
    model = ActorCritic(OBS_DIM, (16, 16))
    buffer = _filled_buffer(model)
    buffer.rewards = torch.rand(4, 8, generator=torch.Generator().manual_seed(3))
    buffer.compute_returns(torch.zeros(8), gamma=0.99, lam=0.95)
    obs_rms = RunningMeanStd(OBS_DIM)
    cfg = PpoConfig(num_envs=8, rollout_length=4, num_minibatches=2, num_epochs=2)
    stats = ppo_update(buffer, model, torch.optim.Adam(model.parameters(), lr=1e-3), cfg, obs_rms,
                       torch.Generator().manual_seed(0))
    assert all(np.isfinite([stats.kl, stats.policy_loss, stats.value_loss, stats.entropy]))
    assert cfg.lr_bounds[0] <= stats.learning_rate <= cfg.lr_bounds[1]
    assert obs_rms.count == 32


def test_minibatches_cover_the_rollout_once():
    buffer = RolloutBuffer(4, 6, OBS_DIM)
    buffer.log_probs = torch.arange(24, dtype=torch.float32).reshape(4, 6)
    seen = torch.cat([batch["log_probs"] for batch in buffer.minibatches(3, torch.Generator().manual_seed(0))])
    assert sorted(seen.tolist()) == list(range(24))


def test_running_statistics_match_concatenated_batches(rng):
    batches = [rng.normal(loc=2.0, scale=3.0, size=(n, 4)) for n in (5, 17, 1, 40)]
    stats = RunningMeanStd(4)
    for batch in batches:
        stats.update(batch)
    everything = np.concatenate(batches)
    np.testing.assert_allclose(stats.mean, everything.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(stats.var, everything.var(axis=0), rtol=1e-10)
    assert stats.count == len(everything)


def test_exported_policy_matches_actor(rng):
    torch.manual_seed(2)
    model = ActorCritic(OBS_DIM, (32, 16), init_noise_std=0.5)
    obs_rms = RunningMeanStd(OBS_DIM)
    obs_rms.update(rng.normal(size=(64, OBS_DIM)))
    weights = export_policy(model, obs_rms, ActionScaling(), ObservationConfig())

    obs = rng.normal(size=(6, OBS_DIM))
    with torch.no_grad():
        expected = model.actor(torch.as_tensor(obs_rms.normalize(obs), dtype=torch.float32)).numpy()
    np.testing.assert_allclose(mlp_forward(normalize(obs, weights), weights), expected, rtol=1e-4, atol=1e-4)
    np.testing.assert_allclose(np.exp(weights.log_std), 0.5, rtol=1e-6)


def test_export_floors_variance_of_constant_inputs(rng):
    model = ActorCritic(OBS_DIM, (8, 8), init_noise_std=1.0)
    obs_rms = RunningMeanStd(OBS_DIM)
    batch = rng.normal(size=(32, OBS_DIM))
    batch[:, 0] = 0.25
    obs_rms.update(batch)
    weights = export_policy(model, obs_rms, ActionScaling(), ObservationConfig())
    assert weights.obs_var[0] == np.float32(1e-8)
    assert np.all(weights.obs_var[1:] > 1e-3)
