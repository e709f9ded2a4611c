"""
PPO with GAE, clipped value loss, adaptive learning rate and running
observation normalization.

The actor and critic are separate ELU MLPs; the actor's state-independent
log standard deviation is a free parameter. Export to the numpy runtime goes
through export_policy().
"""
import copy
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn
from torch.distributions import Normal

from src.errors import PpoInstabilityError
from src.models.config import ActionScaling, ObservationConfig, PpoConfig
from src.policy.network import ACTION_DIM, OBS_CLIP, OBS_EPSILON, PolicyWeights

logger = logging.getLogger(__name__)


# =============================================================================
# Observation statistics
# =============================================================================

class RunningMeanStd:
    """Streaming mean / variance in float64, merged batch-wise (Chan et al.)."""

    def __init__(self, dim: int):
        self.mean = np.zeros(dim, dtype=np.float64)
        self.var = np.ones(dim, dtype=np.float64)
        self.count = 0.0

    def update(self, batch: np.ndarray) -> None:
        batch = np.asarray(batch, dtype=np.float64).reshape(-1, self.mean.shape[0])
        n = batch.shape[0]
        if n == 0:
            return
        batch_mean = batch.mean(axis=0)
        batch_var = batch.var(axis=0)
        if self.count == 0:
            self.mean, self.var, self.count = batch_mean, batch_var, float(n)
            return
        total = self.count + n
        delta = batch_mean - self.mean
        m2 = self.var * self.count + batch_var * n + delta ** 2 * self.count * n / total
        self.mean = self.mean + delta * n / total
        self.var = m2 / total
        self.count = total

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        return np.clip((obs - self.mean) / np.sqrt(self.var + OBS_EPSILON), -OBS_CLIP, OBS_CLIP)

    def state_dict(self) -> dict:
        return {"mean": self.mean.copy(), "var": self.var.copy(), "count": self.count}

    def load_state_dict(self, state: dict) -> None:
        self.mean = np.asarray(state["mean"], dtype=np.float64)
        self.var = np.asarray(state["var"], dtype=np.float64)
        self.count = float(state["count"])


# =============================================================================
# Networks
# =============================================================================

def _mlp(in_dim: int, hidden_sizes: Sequence[int], out_dim: int) -> nn.Sequential:
    layers = []
    width = in_dim
    for size in hidden_sizes:
        layers += [nn.Linear(width, size), nn.ELU()]
        width = size
    layers.append(nn.Linear(width, out_dim))
    return nn.Sequential(*layers)


class ActorCritic(nn.Module):
    def __init__(self, obs_dim: int, hidden_sizes: Sequence[int] = (512, 256, 128),
                 init_noise_std: float = 1.0, action_dim: int = ACTION_DIM):
        super().__init__()
        self.actor = _mlp(obs_dim, hidden_sizes, action_dim)
        self.critic = _mlp(obs_dim, hidden_sizes, 1)
        self.log_std = nn.Parameter(torch.full((action_dim,), float(np.log(init_noise_std))))

    def distribution(self, obs: torch.Tensor) -> Normal:
        mean = self.actor(obs)
        return Normal(mean, self.log_std.exp().expand_as(mean))

    def value(self, obs: torch.Tensor) -> torch.Tensor:
        return self.critic(obs).squeeze(-1)

    @torch.no_grad()
    def act(self, obs: torch.Tensor, generator: Optional[torch.Generator] = None):
        """Sampled action, its log-probability, value, and the distribution parameters."""
        dist = self.distribution(obs)
        noise = torch.randn(dist.mean.shape, generator=generator, dtype=dist.mean.dtype)
        action = dist.mean + dist.stddev * noise
        return action, dist.log_prob(action).sum(-1), self.value(obs), dist.mean, dist.stddev


def export_policy(model: ActorCritic, obs_rms: RunningMeanStd, actions: ActionScaling,
                  observation: ObservationConfig) -> PolicyWeights:
    """Freeze the actor and observation statistics into runtime weights."""
    linears = [m for m in model.actor if isinstance(m, nn.Linear)]
    layers = tuple(
        (m.weight.detach().cpu().numpy().astype(np.float32),
         m.bias.detach().cpu().numpy().astype(np.float32))
        for m in linears
    )
    return PolicyWeights(
        layers=layers,
        log_std=model.log_std.detach().cpu().numpy().astype(np.float32),
        obs_mean=obs_rms.mean.astype(np.float32),
        obs_var=np.maximum(obs_rms.var, OBS_EPSILON).astype(np.float32),
        actions=actions,
        observation=observation,
    )


# =============================================================================
# Rollout storage and advantages
# =============================================================================

def gae_advantages(rewards: torch.Tensor, values: torch.Tensor, dones: torch.Tensor,
                   bootstrap: torch.Tensor, gamma: float, lam: float,
                   normalize: bool = True) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Generalized advantage estimation over a (T, N) rollout.

    Args:
        rewards, values, dones: (T, N); dones[t] marks that step t ended an episode
        bootstrap: (N,) value of the observation after the last step
        normalize: scale advantages to zero mean, unit std (eps 1e-8)

    Returns:
        (advantages, returns); returns = raw advantages + values
    """
    steps = rewards.shape[0]
    advantages = torch.zeros_like(rewards)
    running = torch.zeros_like(bootstrap)
    next_value = bootstrap
    for t in reversed(range(steps)):
        not_done = 1.0 - dones[t].to(rewards.dtype)
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        running = delta + gamma * lam * not_done * running
        advantages[t] = running
        next_value = values[t]
    returns = advantages + values
    if normalize:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    return advantages, returns


class RolloutBuffer:
    """Fixed-length (T, N) storage for one PPO iteration."""

    def __init__(self, num_steps: int, num_envs: int, obs_dim: int, action_dim: int = ACTION_DIM):
        self.num_steps, self.num_envs = num_steps, num_envs
        self.obs = torch.zeros(num_steps, num_envs, obs_dim)
        self.raw_obs = np.zeros((num_steps, num_envs, obs_dim))
        self.actions = torch.zeros(num_steps, num_envs, action_dim)
        self.log_probs = torch.zeros(num_steps, num_envs)
        self.values = torch.zeros(num_steps, num_envs)
        self.rewards = torch.zeros(num_steps, num_envs)
        self.dones = torch.zeros(num_steps, num_envs)
        self.mu = torch.zeros(num_steps, num_envs, action_dim)
        self.sigma = torch.zeros(num_steps, num_envs, action_dim)
        self.advantages = torch.zeros(num_steps, num_envs)
        self.returns = torch.zeros(num_steps, num_envs)
        self.step = 0

    def add(self, obs, raw_obs, actions, log_probs, values, rewards, dones, mu, sigma) -> None:
        t = self.step
        if t >= self.num_steps:
            raise IndexError("rollout buffer is full")
        self.obs[t], self.raw_obs[t], self.actions[t] = obs, raw_obs, actions
        self.log_probs[t], self.values[t] = log_probs, values
        self.rewards[t], self.dones[t] = rewards, dones
        self.mu[t], self.sigma[t] = mu, sigma
        self.step += 1

    def compute_returns(self, bootstrap: torch.Tensor, gamma: float, lam: float) -> None:
        self.advantages, self.returns = gae_advantages(
            self.rewards, self.values, self.dones, bootstrap, gamma, lam, normalize=True
        )

    def clear(self) -> None:
        self.step = 0

    def minibatches(self, num_minibatches: int, generator: Optional[torch.Generator] = None):
        size = self.num_steps * self.num_envs
        order = torch.randperm(size, generator=generator)
        flat = {
            "obs": self.obs.reshape(size, -1),
            "actions": self.actions.reshape(size, -1),
            "log_probs": self.log_probs.reshape(size),
            "values": self.values.reshape(size),
            "advantages": self.advantages.reshape(size),
            "returns": self.returns.reshape(size),
            "mu": self.mu.reshape(size, -1),
            "sigma": self.sigma.reshape(size, -1),
        }
        chunk = size // num_minibatches
        for start in range(0, chunk * num_minibatches, chunk):
            index = order[start:start + chunk]
            yield {name: tensor[index] for name, tensor in flat.items()}


# =============================================================================
# Losses and update
# =============================================================================

def clipped_surrogate_loss(log_probs: torch.Tensor, old_log_probs: torch.Tensor,
                           advantages: torch.Tensor, clip_ratio: float) -> torch.Tensor:
    ratio = torch.exp(log_probs - old_log_probs)
    unclipped = -advantages * ratio
    clipped = -advantages * torch.clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio)
    return torch.max(unclipped, clipped).mean()


def value_loss(values: torch.Tensor, old_values: torch.Tensor, returns: torch.Tensor,
               clip_ratio: float, clip: bool = True) -> torch.Tensor:
    if not clip:
        return (returns - values).pow(2).mean()
    clipped = old_values + (values - old_values).clamp(-clip_ratio, clip_ratio)
    return torch.max((values - returns).pow(2), (clipped - returns).pow(2)).mean()


def gaussian_kl(mu_old, sigma_old, mu, sigma) -> torch.Tensor:
    """KL(old || new) per sample, summed over action dimensions."""
    return torch.sum(
        torch.log(sigma / sigma_old) + (sigma_old.pow(2) + (mu_old - mu).pow(2)) / (2.0 * sigma.pow(2)) - 0.5,
        dim=-1,
    )


@dataclass
class UpdateStats:
    kl: float
    policy_loss: float
    value_loss: float
    entropy: float
    learning_rate: float
    action_std: float


def ppo_update(buffer: RolloutBuffer, model: ActorCritic, optimizer: torch.optim.Optimizer,
               cfg: PpoConfig, obs_rms: Optional[RunningMeanStd] = None,
               generator: Optional[torch.Generator] = None) -> UpdateStats:
    """
    K epochs of minibatch PPO over one full rollout.

    Raises:
        PpoInstabilityError: a loss became non-finite; model and optimizer are
            restored to their state before the update.
    """
    model_snapshot = copy.deepcopy(model.state_dict())
    optimizer_snapshot = copy.deepcopy(optimizer.state_dict())
    learning_rate = optimizer.param_groups[0]["lr"]
    totals = {"kl": 0.0, "policy": 0.0, "value": 0.0, "entropy": 0.0}
    updates = 0

    for _ in range(cfg.num_epochs):
        for batch in buffer.minibatches(cfg.num_minibatches, generator):
            dist = model.distribution(batch["obs"])
            log_probs = dist.log_prob(batch["actions"]).sum(-1)
            entropy = dist.entropy().sum(-1)
            values = model.value(batch["obs"])

            with torch.no_grad():
                kl = gaussian_kl(batch["mu"], batch["sigma"], dist.mean, dist.stddev).mean()
            if cfg.adaptive_lr and torch.isfinite(kl):
                low, high = cfg.lr_bounds
                if kl > 2.0 * cfg.desired_kl:
                    learning_rate = max(low, learning_rate / 1.5)
                elif 0.0 < kl < 0.5 * cfg.desired_kl:
                    learning_rate = min(high, learning_rate * 1.5)
                for group in optimizer.param_groups:
                    group["lr"] = learning_rate

            surrogate = clipped_surrogate_loss(log_probs, batch["log_probs"], batch["advantages"], cfg.clip_ratio)
            critic = value_loss(values, batch["values"], batch["returns"], cfg.clip_ratio, cfg.clip_value_loss)
            loss = surrogate + cfg.value_coef * critic - cfg.entropy_coef * entropy.mean()

            if not torch.isfinite(loss):
                model.load_state_dict(model_snapshot)
                optimizer.load_state_dict(optimizer_snapshot)
                logger.warning("non-finite PPO loss; parameters restored")
                raise PpoInstabilityError(
                    f"non-finite loss (policy={surrogate.item()}, value={critic.item()})"
                )

            optimizer.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), cfg.max_grad_norm)
            optimizer.step()

            totals["kl"] += kl.item()
            totals["policy"] += surrogate.item()
            totals["value"] += critic.item()
            totals["entropy"] += entropy.mean().item()
            updates += 1

    if obs_rms is not None:
        obs_rms.update(buffer.raw_obs[:buffer.step])
    if learning_rate <= cfg.lr_bounds[0]:
        logger.warning("learning rate at its lower bound %.3g", learning_rate)

    updates = max(updates, 1)
    return UpdateStats(
        kl=totals["kl"] / updates,
        policy_loss=totals["policy"] / updates,
        value_loss=totals["value"] / updates,
        entropy=totals["entropy"] / updates,
        learning_rate=learning_rate,
        action_std=float(model.log_std.detach().exp().mean()),
    )
