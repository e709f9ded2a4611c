"""
Numpy inference for the policy MLP.

The network is affine -> ELU (x3) -> affine, producing the 9 raw action
means. Weights are float32 and stored (out_features, in_features), the same
layout torch.nn.Linear uses, so trainer exports copy straight across.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from src.geometry.se3 import wrap_angle
from src.models.config import ActionScaling, ObservationConfig
from src.models.state import OuterCommand
from src.policy.observation import observation_dim

logger = logging.getLogger(__name__)

ACTION_DIM = 9
OBS_EPSILON = 1e-8
OBS_CLIP = 10.0
FORMAT_VERSION = 1


def elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0)))


@dataclass(frozen=True, eq=False)
class PolicyWeights:
    """
    Immutable policy parameters plus everything inference needs around them.

    layers: ((W0, b0), (W1, b1), ...) with W of shape (out, in)
    log_std: (9,) Gaussian log standard deviations, used only when sampling
    obs_mean / obs_var: running observation statistics frozen at export
    """
    layers: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    log_std: np.ndarray
    obs_mean: np.ndarray
    obs_var: np.ndarray
    actions: ActionScaling = ActionScaling()
    observation: ObservationConfig = ObservationConfig()
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        in_dim = observation_dim(self.observation)
        width = in_dim
        for index, (W, b) in enumerate(self.layers):
            if W.ndim != 2 or W.shape[1] != width or b.shape != (W.shape[0],):
                raise ValueError(f"layer {index}: weight {W.shape} / bias {b.shape} does not chain from width {width}")
            width = W.shape[0]
        if width != ACTION_DIM:
            raise ValueError(f"network output width {width} != {ACTION_DIM}")
        if self.log_std.shape != (ACTION_DIM,):
            raise ValueError(f"log_std shape {self.log_std.shape} != ({ACTION_DIM},)")
        for name in ("obs_mean", "obs_var"):
            if getattr(self, name).shape != (in_dim,):
                raise ValueError(f"{name} shape {getattr(self, name).shape} != ({in_dim},)")
        tensors = [t for layer in self.layers for t in layer] + [self.log_std, self.obs_mean, self.obs_var]
        if not all(np.all(np.isfinite(t)) for t in tensors):
            raise ValueError("policy weights contain non-finite entries")
        if np.any(self.obs_var < np.float32(OBS_EPSILON)):
            raise ValueError(f"obs_var entries must be >= {OBS_EPSILON:g}")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def hidden_sizes(self) -> Tuple[int, ...]:
        return tuple(W.shape[0] for W, _ in self.layers[:-1])

    @classmethod
    def initialize(cls, rng: np.random.Generator, hidden_sizes: Sequence[int] = (512, 256, 128),
                   actions: ActionScaling = ActionScaling(),
                   observation: ObservationConfig = ObservationConfig(),
                   init_std: float = 1.0, scale: float = 1.0) -> "PolicyWeights":
        """Random Glorot-uniform weights with zero biases and unit observation stats."""
        in_dim = observation_dim(observation)
        sizes = [in_dim, *hidden_sizes, ACTION_DIM]
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = scale * np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-limit, limit, size=(fan_out, fan_in)).astype(np.float32)
            layers.append((W, np.zeros(fan_out, dtype=np.float32)))
        return cls(
            layers=tuple(layers),
            log_std=np.full(ACTION_DIM, np.log(init_std), dtype=np.float32),
            obs_mean=np.zeros(in_dim, dtype=np.float32),
            obs_var=np.ones(in_dim, dtype=np.float32),
            actions=actions,
            observation=observation,
        )


def normalize(obs: np.ndarray, weights: PolicyWeights) -> np.ndarray:
    """(obs - mean) / sqrt(var + eps), clipped to [-10, 10]."""
    mean = weights.obs_mean.astype(np.float64)
    std = np.sqrt(weights.obs_var.astype(np.float64) + OBS_EPSILON)
    return np.clip((np.asarray(obs, dtype=np.float64) - mean) / std, -OBS_CLIP, OBS_CLIP)


def mlp_forward(normalized_obs: np.ndarray, weights: PolicyWeights,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Raw 9-dim action: the mean, or a Gaussian sample around it when rng is given.

    Raises:
        ValueError: if the observation width does not match the first layer
    """
    x = np.asarray(normalized_obs, dtype=np.float32)
    if x.shape[-1] != weights.input_dim:
        raise ValueError(f"observation width {x.shape[-1]} != network input {weights.input_dim}")
    *hidden, (W_out, b_out) = weights.layers
    for W, b in hidden:
        x = elu(x @ W.T + b)
    mean = x @ W_out.T + b_out
    if rng is None:
        return mean
    noise = rng.standard_normal(mean.shape).astype(np.float32)
    return mean + np.exp(weights.log_std) * noise


def scale_actions(raw: np.ndarray, scaling: ActionScaling = ActionScaling()) -> OuterCommand:
    """
    Map raw network outputs to physical commands.

    Every channel is clamped to ±raw_clip first. Accelerations and body rates
    are then scaled and clamped to their maxima, yaw is scaled by yaw_scale and
    wrapped to (-pi, pi], joint references are scaled by joint_scale.
    """
    raw = np.clip(np.asarray(raw, dtype=np.float64), -scaling.raw_clip, scaling.raw_clip)
    accel = np.clip(raw[..., 0:3] * scaling.accel_scale, -scaling.accel_max, scaling.accel_max)
    rates = np.clip(raw[..., 3:6] * scaling.rate_scale, -scaling.rate_max, scaling.rate_max)
    return OuterCommand(
        accel_des=accel,
        bodyrate_ff=rates,
        yaw_ref=wrap_angle(raw[..., 6] * scaling.yaw_scale),
        joint_ref=raw[..., 7:9] * scaling.joint_scale,
    )


@dataclass
class Policy:
    """Weights plus inference bookkeeping; one instance per evaluator."""
    weights: PolicyWeights
    calls: int = 0
    total_seconds: float = field(default=0.0, repr=False)

    def act(self, obs: np.ndarray, rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, OuterCommand]:
        """Raw action and scaled command for one (batched) observation."""
        start = time.perf_counter()
        raw = mlp_forward(normalize(obs, self.weights), self.weights, rng)
        self.total_seconds += time.perf_counter() - start
        self.calls += 1
        return raw, scale_actions(raw, self.weights.actions)

    @property
    def mean_latency_ms(self) -> float:
        return 1e3 * self.total_seconds / self.calls if self.calls else 0.0
