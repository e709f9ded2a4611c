"""
Training loop: collect a rollout from the vectorized environments, run the
PPO update, log one CSV row per iteration, checkpoint periodically.
"""
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
import torch

from src.errors import PpoInstabilityError
from src.models.config import RunConfig
from src.policy.weights_io import save_weights
from src.storage.run_store import RunPaths
from src.training.env import ShardedVecEnv
from src.training.ppo import ActorCritic, RolloutBuffer, RunningMeanStd, export_policy, ppo_update
from src.training.rewards import REWARD_COMPONENTS

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
TRAINING_LOG_COLUMNS = [
    "iteration", "env_steps",
    *REWARD_COMPONENTS, "reward_total",
    "episodes_finished", "episode_length_mean", "crash_rate", "joint_oscillation",
    "kl", "policy_loss", "value_loss", "entropy", "learning_rate", "action_std",
]
MAX_INSTABILITY_RETRIES = 3


@dataclass
class TrainingResult:
    weights_path: Path
    log_path: Path
    iterations: int
    env_steps: int


def configure_determinism(deterministic: bool, seed: int) -> None:
    torch.manual_seed(seed)
    if deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)


class Trainer:
    """
    Owns the environments, networks and optimizer of one training run.

    Args:
        config: run config (ppo section sets the scale)
        paths: run directory
        deterministic: one worker thread, one torch thread, deterministic kernels
    """

    def __init__(self, config: RunConfig, paths: RunPaths, deterministic: bool = False):
        self.config = config
        self.paths = paths
        self.deterministic = deterministic
        ppo = config.ppo
        configure_determinism(deterministic, config.seed)

        workers = 1 if deterministic else ppo.num_workers
        self.env = ShardedVecEnv(config, ppo.num_envs, config.seed, workers)
        self.model = ActorCritic(self.env.obs_dim, ppo.hidden_sizes, ppo.init_noise_std)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=ppo.learning_rate)
        self.obs_rms = RunningMeanStd(self.env.obs_dim)
        self.generator = torch.Generator().manual_seed(config.seed)
        self.buffer = RolloutBuffer(ppo.rollout_length, ppo.num_envs, self.env.obs_dim)

        self.iteration = 0
        self.env_steps = 0
        self.log_rows: List[dict] = []
        self.obs: Optional[np.ndarray] = None

    # ------------------------------------------------------------------
    # Checkpoints
    # ------------------------------------------------------------------

    def save_checkpoint(self) -> Path:
        weights = export_policy(self.model, self.obs_rms, self.config.actions, self.config.observation)
        save_weights(weights, self.paths.checkpoint(self.iteration, "dsamw"))
        blob_path = self.paths.checkpoint(self.iteration, "pt")
        torch.save({
            "checkpoint_version": CHECKPOINT_VERSION,
            "iteration": self.iteration,
            "env_steps": self.env_steps,
            "model": self.model.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "obs_rms": self.obs_rms.state_dict(),
            "torch_rng": torch.get_rng_state(),
            "generator": self.generator.get_state(),
            "env_shards": self.env.shards,
            "obs": self.obs,
            "log_rows": self.log_rows,
        }, blob_path)
        logger.info("checkpoint %s", blob_path.name)
        return blob_path

    def resume(self) -> bool:
        """Load the newest complete checkpoint; False when there is none."""
        latest = self.paths.latest_checkpoint()
        if latest is None:
            logger.warning("no checkpoint in %s; starting from scratch", self.paths.checkpoints)
            return False
        blob = torch.load(latest, weights_only=False)
        if blob.get("checkpoint_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {blob.get('checkpoint_version')} in {latest}")
        self.model.load_state_dict(blob["model"])
        self.optimizer.load_state_dict(blob["optimizer"])
        self.obs_rms.load_state_dict(blob["obs_rms"])
        torch.set_rng_state(blob["torch_rng"])
        self.generator.set_state(blob["generator"])
        self.env.shards = blob["env_shards"]
        self.obs = blob["obs"]
        self.iteration = blob["iteration"]
        self.env_steps = blob["env_steps"]
        self.log_rows = list(blob["log_rows"])
        logger.info("resumed from %s at iteration %d", latest.name, self.iteration)
        return True

    # ------------------------------------------------------------------
    # Loop
    # ------------------------------------------------------------------

    def _normalized(self, obs: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(self.obs_rms.normalize(obs), dtype=torch.float32)

    def collect_rollout(self) -> dict:
        """Fill the buffer with one rollout; returns per-iteration statistics."""
        ppo = self.config.ppo
        self.buffer.clear()
        component_sums = {name: 0.0 for name in REWARD_COMPONENTS}
        finished = []

        for _ in range(ppo.rollout_length):
            obs_t = self._normalized(self.obs)
            action, log_prob, value, mu, sigma = self.model.act(obs_t, self.generator)
            result = self.env.step(action.numpy().astype(np.float64))

            reward = torch.as_tensor(result.total_reward, dtype=torch.float32)
            if np.any(result.timeout):
                with torch.no_grad():
                    final_value = self.model.value(self._normalized(result.final_obs))
                reward = reward + ppo.gamma * final_value * torch.as_tensor(result.timeout, dtype=torch.float32)

            self.buffer.add(obs_t, self.obs, action, log_prob, value, reward,
                            torch.as_tensor(result.done, dtype=torch.float32), mu, sigma)
            for name in REWARD_COMPONENTS:
                component_sums[name] += float(np.sum(getattr(result.reward, name)))
            finished.extend(result.finished)
            self.obs = result.obs

        with torch.no_grad():
            bootstrap = self.model.value(self._normalized(self.obs))
        self.buffer.compute_returns(bootstrap, ppo.gamma, ppo.lam)

        stats = {name: value / ppo.batch_size for name, value in component_sums.items()}
        stats["reward_total"] = sum(stats[name] for name in REWARD_COMPONENTS)
        stats["episodes_finished"] = len(finished)
        if finished:
            stats["episode_length_mean"] = float(np.mean([e.length for e in finished]))
            stats["crash_rate"] = float(np.mean([e.crashed for e in finished]))
            stats["joint_oscillation"] = float(np.mean([e.joint_oscillation for e in finished]))
        else:
            stats["episode_length_mean"] = np.nan
            stats["crash_rate"] = np.nan
            stats["joint_oscillation"] = np.nan
        return stats

    def write_log(self) -> Path:
        frame = pd.DataFrame(self.log_rows, columns=TRAINING_LOG_COLUMNS)
        frame.to_csv(self.paths.training_log, index=False, float_format="%.9g")
        return self.paths.training_log

    def train(self, resume: bool = False) -> TrainingResult:
        ppo = self.config.ppo
        if not (resume and self.resume()):
            self.obs = self.env.reset()
        total_iterations = ppo.num_iterations
        logger.info("training %s: %d envs x %d steps, %d iterations", self.paths.run_id,
                    ppo.num_envs, ppo.rollout_length, total_iterations)

        retries = 0
        while self.iteration < total_iterations:
            started = time.perf_counter()
            stats = self.collect_rollout()
            try:
                update = ppo_update(self.buffer, self.model, self.optimizer, ppo, self.obs_rms, self.generator)
            except PpoInstabilityError:
                retries += 1
                logger.warning("PPO update skipped at iteration %d (%d/%d)", self.iteration, retries,
                               MAX_INSTABILITY_RETRIES)
                if retries >= MAX_INSTABILITY_RETRIES:
                    raise
                continue
            retries = 0
            self.iteration += 1
            # Rollouts of skipped updates are not counted
            self.env_steps += ppo.batch_size

            row = {"iteration": self.iteration, "env_steps": self.env_steps, **stats,
                   "kl": update.kl, "policy_loss": update.policy_loss, "value_loss": update.value_loss,
                   "entropy": update.entropy, "learning_rate": update.learning_rate,
                   "action_std": update.action_std}
            self.log_rows.append(row)
            self.write_log()
            logger.info(
                "iter %d steps %d reward %.4f ep_len %.1f crash %.2f kl %.4f lr %.2e (%.1fs)",
                self.iteration, self.env_steps, stats["reward_total"], stats["episode_length_mean"],
                stats["crash_rate"], update.kl, update.learning_rate, time.perf_counter() - started,
            )
            if self.iteration % ppo.checkpoint_interval == 0:
                self.save_checkpoint()

        if self.iteration % ppo.checkpoint_interval:
            self.save_checkpoint()
        weights = export_policy(self.model, self.obs_rms, self.config.actions, self.config.observation)
        save_weights(weights, self.paths.policy)
        self.env.close()
        return TrainingResult(self.paths.policy, self.paths.training_log, self.iteration, self.env_steps)


def train(config: RunConfig, paths: RunPaths, deterministic: bool = False,
          resume: bool = False) -> TrainingResult:
    """Train one policy into the given run directory."""
    return Trainer(config, paths, deterministic).train(resume=resume)
