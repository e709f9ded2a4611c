"""
Goal-conditioned training environment.

One DsamVecEnv steps N independent systems as a single batch at the policy
rate: scale_actions -> inner-loop ticks (300 Hz) -> physics steps (900 Hz)
-> observation, reward, termination. Finished environments reset
automatically; the observation they ended on is returned separately so
time-outs can be bootstrapped.

Each environment owns a numpy Generator spawned from the run seed, and all
randomness for that environment is drawn from it. Results therefore do not
depend on how environments are grouped into shards or worker threads.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np

from src.control.inner_loop import InnerLoopController, InnerLoopState, inner_loop_tick
from src.dynamics import integrator
from src.dynamics.actuators import joint_actuator
from src.dynamics.model import DsamModel, forward_kinematics
from src.errors import DivergenceError
from src.geometry.se3 import Pose, quat_from_euler_zyx
from src.models.config import DomainRandomization, EpisodeConfig, ModelParams, RunConfig
from src.models.state import ControlInput, ExternalWrench, OuterCommand, SystemState
from src.policy.network import scale_actions
from src.policy.observation import build_observation, observation_dim
from src.training.rewards import REWARD_COMPONENTS, RewardBreakdown, compute_reward

logger = logging.getLogger(__name__)


# =============================================================================
# Sampling
# =============================================================================

def sample_goal(rng: np.random.Generator, ranges: EpisodeConfig = EpisodeConfig()) -> Pose:
    """Uniform goal position and intrinsic Z-Y-X (yaw, pitch, roll) orientation."""
    low = np.array([ranges.goal_x_range[0], ranges.goal_y_range[0], ranges.goal_z_range[0]])
    high = np.array([ranges.goal_x_range[1], ranges.goal_y_range[1], ranges.goal_z_range[1]])
    position = rng.uniform(low, high)
    yaw = np.deg2rad(rng.uniform(*ranges.goal_yaw_range_deg))
    pitch = np.deg2rad(rng.uniform(*ranges.goal_pitch_range_deg))
    roll = np.deg2rad(rng.uniform(*ranges.goal_roll_range_deg))
    return Pose(position, quat_from_euler_zyx(yaw, pitch, roll))


def sample_domain(rng: np.random.Generator, dr: DomainRandomization) -> Tuple[float, float, float]:
    """
    (payload mass, stiffness scale, friction scale) for one episode.

    All three values are drawn even when an axis is disabled, so switching an
    axis off leaves every other random stream unchanged.
    """
    payload = rng.uniform(*dr.payload_range)
    stiffness = rng.uniform(*dr.stiffness_scale_range)
    friction = rng.uniform(*dr.friction_scale_range)
    return (
        float(payload) if dr.randomize_mass else 0.0,
        float(stiffness) if dr.randomize_stiffness else 1.0,
        float(friction) if dr.randomize_friction else 1.0,
    )


@dataclass(frozen=True)
class EpisodeSample:
    goal: Pose
    theta: np.ndarray
    payload_mass: float
    stiffness_scale: float
    friction_scale: float


def sample_episode(rng: np.random.Generator, dr: DomainRandomization,
                   episode: EpisodeConfig) -> EpisodeSample:
    """Draw order: goal, joint angles, domain randomization."""
    goal = sample_goal(rng, episode)
    theta = np.deg2rad(rng.uniform(*episode.initial_joint_range_deg, size=2))
    payload, stiffness, friction = sample_domain(rng, dr)
    return EpisodeSample(goal, theta, payload, stiffness, friction)


def reset_env(rng: np.random.Generator, dr: DomainRandomization = DomainRandomization(),
              params: ModelParams = ModelParams(),
              episode: EpisodeConfig = EpisodeConfig()) -> Tuple[SystemState, Pose, ModelParams]:
    """
    Initial state, goal and randomized parameters for one episode.

    The base starts at the spawn point, level and at rest, rotors at the
    nominal hover speed; joints start uniformly inside the initial range.
    """
    sample = sample_episode(rng, dr, episode)
    state = SystemState.at_rest(episode.spawn_position, params.hover_rotor_speed, sample.theta)
    randomized = params.randomized(sample.payload_mass, sample.stiffness_scale, sample.friction_scale)
    return state, sample.goal, randomized


# =============================================================================
# Policy-step simulation shared with the evaluators
# =============================================================================

class Disturbance(Protocol):
    """External wrench source advanced together with the physics."""

    def wrench(self, state: SystemState, model: DsamModel) -> ExternalWrench:
        ...

    def advance(self, state: SystemState, model: DsamModel, dt: float) -> None:
        ...


@dataclass
class PolicyStepOutcome:
    state: SystemState
    inner: InnerLoopState
    diverged: np.ndarray
    physics_steps: int


def advance_policy_step(state: SystemState, inner: InnerLoopState, cmd: OuterCommand,
                        controller: InnerLoopController, model: DsamModel, config: RunConfig,
                        noise_rngs: Optional[Sequence[np.random.Generator]] = None,
                        disturbance: Optional[Disturbance] = None) -> PolicyStepOutcome:
    """
    Run the inner loop and physics for one policy period.

    Joint torques are refreshed from the plant's servo model every physics
    step. Systems that diverge keep their last finite state, are flagged in
    the returned mask and are not stepped further in this period.
    """
    sim = config.simulation
    batch = state.batch_shape
    diverged = np.zeros(batch, dtype=bool)
    noise_std = config.inner_loop.gyro_noise_std
    physics_steps = 0

    for _ in range(sim.inner_per_policy):
        gyro_noise = None
        if noise_std > 0 and noise_rngs is not None:
            gyro_noise = np.stack([rng.normal(0.0, noise_std, 3) for rng in noise_rngs]).reshape(batch + (3,))
        u, inner = inner_loop_tick(cmd, state, inner, controller, joint_model=model, gyro_noise=gyro_noise)

        for _ in range(sim.physics_per_inner):
            wrench = disturbance.wrench(state, model) if disturbance is not None else ExternalWrench.zeros(batch)
            u = ControlInput(
                rotor_speed_cmd=u.rotor_speed_cmd,
                joint_torque=joint_actuator(cmd.joint_ref, state.theta, state.theta_dot, model,
                                            inner.joint_error_integral),
            )
            try:
                stepped = integrator.step(state, u, wrench, sim.physics_dt, model,
                                          method=sim.integrator, divergence_ceiling=sim.divergence_ceiling)
            except DivergenceError as exc:
                mask = np.broadcast_to(exc.mask, batch)
                diverged = diverged | mask
                stepped = exc.state.merge(mask, state)
            state = stepped.merge(diverged, state) if np.any(diverged) else stepped
            if disturbance is not None:
                disturbance.advance(state, model, sim.physics_dt)
            physics_steps += 1

    return PolicyStepOutcome(state=state, inner=inner, diverged=diverged, physics_steps=physics_steps)


# =============================================================================
# Vectorized environment
# =============================================================================

@dataclass
class EpisodeStats:
    env_id: int
    length: int
    total_reward: float
    crashed: bool
    joint_oscillation: float


@dataclass
class StepResult:
    obs: np.ndarray
    reward: RewardBreakdown
    done: np.ndarray
    timeout: np.ndarray
    crash: np.ndarray
    final_obs: np.ndarray
    finished: List[EpisodeStats]

    @property
    def total_reward(self) -> np.ndarray:
        return self.reward.total


class DsamVecEnv:
    """
    N goal-reaching environments stepped as one numpy batch.

    Args:
        config: run configuration
        seed_sequences: one SeedSequence per environment
        env_ids: global ids used in episode statistics (defaults to 0..N-1)
    """

    def __init__(self, config: RunConfig, seed_sequences: Sequence[np.random.SeedSequence],
                 env_ids: Optional[Sequence[int]] = None):
        self.config = config
        self.num_envs = len(seed_sequences)
        self.env_ids = list(env_ids) if env_ids is not None else list(range(self.num_envs))
        self.rngs = [np.random.default_rng(s) for s in seed_sequences]
        self.controller = InnerLoopController.build(config.model, config.inner_loop,
                                                    config.simulation.inner_rate_hz)
        self.max_steps = config.episode.max_steps(config.simulation.policy_rate_hz)
        self.obs_dim = observation_dim(config.observation)
        self.hover_speed = config.model.hover_rotor_speed

        n = self.num_envs
        self.state = SystemState.at_rest(config.episode.spawn_position, self.hover_speed, batch_shape=(n,))
        self.goal = Pose.identity((n,))
        self.payload = np.zeros(n)
        self.stiffness_scale = np.ones(n)
        self.friction_scale = np.ones(n)
        self.model = DsamModel.from_params(config.model)
        self.inner = InnerLoopState.initial((n,), self.hover_speed)
        self.prev_action = OuterCommand.zeros((n,))
        self.steps = np.zeros(n, dtype=int)
        self.episode_return = np.zeros(n)
        self.episode_oscillation = np.zeros(n)

    @classmethod
    def from_seed(cls, config: RunConfig, num_envs: int, seed: int) -> "DsamVecEnv":
        return cls(config, np.random.SeedSequence(seed).spawn(num_envs))

    # ------------------------------------------------------------------

    def _rebuild_model(self) -> None:
        self.model = DsamModel.from_params(
            self.config.model,
            payload_mass=self.payload,
            stiffness_scale=self.stiffness_scale,
            friction_scale=self.friction_scale,
        )

    def _reset_rows(self, rows: np.ndarray) -> None:
        cfg = self.config
        samples = {int(i): sample_episode(self.rngs[i], cfg.domain_randomization, cfg.episode) for i in rows}
        mask = np.zeros(self.num_envs, dtype=bool)
        mask[rows] = True

        theta = self.state.theta.copy()
        position = self.goal.position.copy()
        orientation = self.goal.orientation.copy()
        for i, sample in samples.items():
            theta[i] = sample.theta
            position[i] = sample.goal.position
            orientation[i] = sample.goal.orientation
            self.payload[i] = sample.payload_mass
            self.stiffness_scale[i] = sample.stiffness_scale
            self.friction_scale[i] = sample.friction_scale

        fresh = SystemState.at_rest(cfg.episode.spawn_position, self.hover_speed, theta, (self.num_envs,))
        self.state = self.state.merge(mask, fresh)
        self.goal = Pose(position, orientation)
        self._rebuild_model()
        self.inner = self.inner.reset(mask, self.hover_speed)
        self.prev_action = self.prev_action.merge(mask, OuterCommand.zeros((self.num_envs,)))
        self.steps[mask] = 0
        self.episode_return[mask] = 0.0
        self.episode_oscillation[mask] = 0.0

    def observe(self) -> np.ndarray:
        return build_observation(self.state, self.goal, self.model, self.config.observation)

    def reset(self) -> np.ndarray:
        self._reset_rows(np.arange(self.num_envs))
        return self.observe()

    def step(self, raw_actions: np.ndarray) -> StepResult:
        cfg = self.config
        cmd = scale_actions(raw_actions, cfg.actions)
        outcome = advance_policy_step(self.state, self.inner, cmd, self.controller, self.model, cfg,
                                      noise_rngs=self.rngs)
        self.state, self.inner = outcome.state, outcome.inner

        ee = forward_kinematics(self.state, self.model)
        reward = compute_reward(self.prev_action, cmd, ee, self.goal, cfg.rewards)
        if np.any(outcome.diverged):
            logger.warning("%d environments diverged and will reset", int(np.sum(outcome.diverged)))
        total = np.where(outcome.diverged, 0.0, reward.total)
        reward = RewardBreakdown(**{
            name: np.where(outcome.diverged, 0.0, getattr(reward, name)) for name in REWARD_COMPONENTS
        })

        joint_change = np.mean(np.abs(cmd.joint_ref - self.prev_action.joint_ref), axis=-1)
        self.episode_oscillation += np.where(self.steps > 0, joint_change, 0.0)
        self.prev_action = cmd
        self.steps += 1
        self.episode_return += total

        crash = outcome.diverged | (self.state.p_b[:, 2] < cfg.episode.crash_altitude)
        timeout = (self.steps >= self.max_steps) & ~crash
        done = crash | timeout
        obs = self.observe()
        final_obs = obs.copy()

        finished = []
        if np.any(done):
            rows = np.flatnonzero(done)
            for i in rows:
                finished.append(EpisodeStats(
                    env_id=self.env_ids[i],
                    length=int(self.steps[i]),
                    total_reward=float(self.episode_return[i]),
                    crashed=bool(crash[i]),
                    joint_oscillation=float(self.episode_oscillation[i] / max(self.steps[i] - 1, 1)),
                ))
            self._reset_rows(rows)
            obs = self.observe()

        return StepResult(obs=obs, reward=reward, done=done, timeout=timeout, crash=crash,
                          final_obs=final_obs, finished=finished)


class ShardedVecEnv:
    """
    DsamVecEnv split into shards stepped by a thread pool.

    Environment i gets the same seed sequence as in the unsharded env, so
    trajectories are identical for any worker count.
    """

    def __init__(self, config: RunConfig, num_envs: int, seed: int, num_workers: int = 1):
        seeds = np.random.SeedSequence(seed).spawn(num_envs)
        bounds = np.linspace(0, num_envs, num_workers + 1).astype(int)
        self.shards = [
            DsamVecEnv(config, seeds[lo:hi], env_ids=range(lo, hi))
            for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
        ]
        self.num_envs = num_envs
        self.obs_dim = self.shards[0].obs_dim
        self._pool = ThreadPoolExecutor(max_workers=len(self.shards)) if len(self.shards) > 1 else None
        self._bounds = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    def _map(self, fn, args):
        if self._pool is None:
            return [fn(*a) for a in args]
        return list(self._pool.map(lambda a: fn(*a), args))

    def reset(self) -> np.ndarray:
        return np.concatenate(self._map(lambda shard: shard.reset(), [(s,) for s in self.shards]))

    def step(self, raw_actions: np.ndarray) -> StepResult:
        results = self._map(
            lambda shard, lo, hi: shard.step(raw_actions[lo:hi]),
            [(s, lo, hi) for s, (lo, hi) in zip(self.shards, self._bounds)],
        )
        return StepResult(
            obs=np.concatenate([r.obs for r in results]),
            reward=RewardBreakdown(**{
                name: np.concatenate([getattr(r.reward, name) for r in results])
                for name in REWARD_COMPONENTS
            }),
            done=np.concatenate([r.done for r in results]),
            timeout=np.concatenate([r.timeout for r in results]),
            crash=np.concatenate([r.crash for r in results]),
            final_obs=np.concatenate([r.final_obs for r in results]),
            finished=[stats for r in results for stats in r.finished],
        )

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
