"""
Run configuration models.

Every tunable number of the simulator, controller, trainer and benchmarks is a
field default here; YAML run files override any subset. Values marked
"placeholder" are plausible choices for an 860 g platform, not measured data.
"""
import math
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Vec3 = Tuple[float, float, float]
Matrix3 = Tuple[Vec3, Vec3, Vec3]
Range = Tuple[float, float]


def _diag(a: float, b: float, c: float) -> Matrix3:
    return ((a, 0.0, 0.0), (0.0, b, 0.0), (0.0, 0.0, c))


def _check_range(value: Range, name: str) -> Range:
    low, high = value
    if not low < high:
        raise ValueError(f"{name} must satisfy low < high, got {value}")
    return value


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# =============================================================================
# Physical model
# =============================================================================

class ModelParams(FrozenModel):
    """
    Masses, inertias, geometry and actuator coefficients of the DSAM.

    Nominal mass split: base 0.785 kg + arm 0.035 kg + gripper 0.040 kg = 0.860 kg.
    Geometry, inertias, rotor and joint coefficients are placeholder defaults.
    """
    base_mass: float = 0.785
    arm_mass: float = 0.035
    ee_mass: float = 0.040
    payload_mass: float = 0.0

    base_inertia: Matrix3 = _diag(2.5e-3, 2.5e-3, 4.5e-3)
    arm_inertia: Matrix3 = _diag(4.2e-5, 4.2e-5, 2.0e-6)
    ee_inertia: Matrix3 = _diag(1.5e-5, 1.5e-5, 1.0e-5)

    # Differential location in the body frame; not forced onto the base CoM
    mount_offset: Vec3 = (0.0, 0.0, -0.04)
    # Joint-to-link-end and link-end-to-gripper-CoM lengths
    link_lengths: Tuple[float, float] = (0.12, 0.06)

    rotor_arm: float = 0.11
    # Sign of each rotor's drag torque about body z (X layout, rotors at 45°, 135°, 225°, 315°)
    rotor_yaw_signs: Tuple[float, float, float, float] = (1.0, -1.0, 1.0, -1.0)
    thrust_coeff: float = 1.0e-6
    drag_torque_coeff: float = 1.6e-8
    rotor_time_constant: float = 0.03
    rotor_speed_limits: Range = (0.0, 3000.0)

    joint_limit: float = math.pi / 2
    joint_stiffness: float = 2.0
    joint_damping: float = 0.087
    joint_coulomb_friction: float = 0.005
    joint_viscous_friction: float = 0.005
    joint_integral_gain: float = 0.0
    joint_torque_limit: float = 0.6

    gravity: float = 9.81

    @field_validator("base_mass", "arm_mass", "ee_mass", "rotor_arm", "thrust_coeff",
                     "drag_torque_coeff", "rotor_time_constant", "joint_limit",
                     "joint_torque_limit", "gravity")
    @classmethod
    def _positive(cls, value: float, info) -> float:
        if not value > 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return value

    @field_validator("joint_stiffness", "joint_damping", "joint_coulomb_friction",
                     "joint_viscous_friction", "joint_integral_gain")
    @classmethod
    def _non_negative(cls, value: float, info) -> float:
        if value < 0:
            raise ValueError(f"{info.field_name} must be >= 0")
        return value

    @field_validator("base_inertia", "arm_inertia", "ee_inertia")
    @classmethod
    def _spd(cls, value: Matrix3, info) -> Matrix3:
        matrix = np.asarray(value, dtype=float)
        if not np.allclose(matrix, matrix.T, atol=1e-12):
            raise ValueError(f"{info.field_name} must be symmetric")
        if np.min(np.linalg.eigvalsh(matrix)) <= 0:
            raise ValueError(f"{info.field_name} must be positive definite")
        return value

    @field_validator("link_lengths")
    @classmethod
    def _link_lengths(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if min(value) <= 0:
            raise ValueError("link_lengths must be > 0")
        return value

    @model_validator(mode="after")
    def _payload_keeps_gripper_massive(self) -> "ModelParams":
        if self.ee_mass + self.payload_mass <= 0:
            raise ValueError("ee_mass + payload_mass must stay > 0")
        low, high = self.rotor_speed_limits
        if not 0 <= low < high:
            raise ValueError("rotor_speed_limits must satisfy 0 <= min < max")
        return self

    @property
    def nominal_mass(self) -> float:
        """Base + arm + gripper, payload excluded."""
        return self.base_mass + self.arm_mass + self.ee_mass

    @property
    def total_mass(self) -> float:
        return self.nominal_mass + self.payload_mass

    @property
    def rotor_positions(self) -> List[Vec3]:
        offset = self.rotor_arm / math.sqrt(2.0)
        return [
            (offset, offset, 0.0),
            (-offset, offset, 0.0),
            (-offset, -offset, 0.0),
            (offset, -offset, 0.0),
        ]

    @property
    def hover_rotor_speed(self) -> float:
        """Per-rotor speed whose four thrusts carry the nominal mass."""
        return math.sqrt(self.nominal_mass * self.gravity / (4.0 * self.thrust_coeff))

    def randomized(self, payload_mass: float = 0.0, stiffness_scale: float = 1.0,
                   friction_scale: float = 1.0) -> "ModelParams":
        """Fold one domain-randomization sample into a new parameter set."""
        if payload_mass == 0.0 and stiffness_scale == 1.0 and friction_scale == 1.0:
            return self
        return self.model_copy(update={
            "payload_mass": self.payload_mass + payload_mass,
            "joint_stiffness": self.joint_stiffness * stiffness_scale,
            "joint_coulomb_friction": self.joint_coulomb_friction * friction_scale,
            "joint_viscous_friction": self.joint_viscous_friction * friction_scale,
        })


class SimulationConfig(FrozenModel):
    physics_rate_hz: int = 900
    inner_rate_hz: int = 300
    policy_rate_hz: int = 150
    integrator: Literal["semi_implicit", "rk4"] = "semi_implicit"
    divergence_ceiling: float = 1.0e3

    @model_validator(mode="after")
    def _rates_nest(self) -> "SimulationConfig":
        if self.physics_rate_hz % self.inner_rate_hz or self.inner_rate_hz % self.policy_rate_hz:
            raise ValueError("rates must nest: physics % inner == 0 and inner % policy == 0")
        return self

    @property
    def physics_dt(self) -> float:
        return 1.0 / self.physics_rate_hz

    @property
    def inner_dt(self) -> float:
        return 1.0 / self.inner_rate_hz

    @property
    def policy_dt(self) -> float:
        return 1.0 / self.policy_rate_hz

    @property
    def physics_per_inner(self) -> int:
        return self.physics_rate_hz // self.inner_rate_hz

    @property
    def inner_per_policy(self) -> int:
        return self.inner_rate_hz // self.policy_rate_hz


class InnerLoopConfig(FrozenModel):
    """
    Attitude / INDI gains.

    alpha = k_rate * (k_tilt * e_tilt + k_yaw * e_yaw + ff - omega)

    k_tilt and k_yaw are attitude-to-rate gains [1/s]. Angular-acceleration
    gains quoted per rad of attitude error (150 tilt, 30 yaw) are the products
    k_rate * k_tilt and k_rate * k_yaw, so with k_rate = 20 /s the defaults
    7.5 and 1.5 give exactly those stiffnesses. Convert a quoted gain g with
    k = g / k_rate.
    """
    k_tilt: float = 7.5
    k_yaw: float = 1.5
    k_rate: float = 20.0
    filter_cutoff_hz: float = 20.0
    mode: Literal["full", "ctbr"] = "full"
    gyro_noise_std: float = 0.0
    min_thrust: float = 0.0
    degenerate_accel: float = 0.1
    # INDI torque from measured rotor speeds (ESC telemetry) or from last commands
    rotor_speed_feedback: bool = True

    @model_validator(mode="after")
    def _tilt_dominates(self) -> "InnerLoopConfig":
        if not self.k_tilt > self.k_yaw > 0:
            raise ValueError("gains must satisfy k_tilt > k_yaw > 0")
        if self.k_rate <= 0 or self.filter_cutoff_hz <= 0:
            raise ValueError("k_rate and filter_cutoff_hz must be > 0")
        if self.gyro_noise_std < 0 or self.min_thrust < 0:
            raise ValueError("gyro_noise_std and min_thrust must be >= 0")
        return self


class ActionScaling(FrozenModel):
    """Raw network outputs are clamped to ±raw_clip, then scaled."""
    raw_clip: float = 2.0
    accel_max: float = 5.0
    rate_max: float = 3.0
    yaw_scale: float = math.pi
    joint_scale: float = math.pi / 4

    @model_validator(mode="after")
    def _positive(self) -> "ActionScaling":
        if min(self.raw_clip, self.accel_max, self.rate_max, self.yaw_scale, self.joint_scale) <= 0:
            raise ValueError("action clip and scales must be > 0")
        return self

    @property
    def accel_scale(self) -> float:
        return self.accel_max / self.raw_clip

    @property
    def rate_scale(self) -> float:
        return self.rate_max / self.raw_clip


class ObservationConfig(FrozenModel):
    include_joint_positions: bool = True
    include_goal_in_body: bool = True
    include_body_rate: bool = True


class RewardWeights(FrozenModel):
    """Order: position, orientation, action smoothness, joint smoothness, base action magnitude."""
    weights: Tuple[float, float, float, float, float] = (4.0, 1.0, 0.5, 1.0, 0.1)
    alphas: Tuple[float, float, float, float, float] = (1.2, 1.0, 1.0, 1.0, 1.0)

    @field_validator("weights", "alphas")
    @classmethod
    def _positive(cls, value):
        if min(value) <= 0:
            raise ValueError("reward weights and scaling factors must be > 0")
        return value

    @property
    def max_total(self) -> float:
        return float(sum(self.weights))


class EpisodeConfig(FrozenModel):
    episode_length_s: float = 6.0
    crash_altitude: float = 0.3
    spawn_position: Vec3 = (0.0, 0.0, 3.0)
    goal_x_range: Range = (-1.0, 1.0)
    goal_y_range: Range = (-1.0, 1.0)
    goal_z_range: Range = (3.0, 5.0)
    goal_yaw_range_deg: Range = (-180.0, 180.0)
    goal_pitch_range_deg: Range = (-90.0, 90.0)
    goal_roll_range_deg: Range = (-90.0, 90.0)
    initial_joint_range_deg: Range = (-90.0, 90.0)

    @field_validator("goal_x_range", "goal_y_range", "goal_z_range", "goal_yaw_range_deg",
                     "goal_pitch_range_deg", "goal_roll_range_deg", "initial_joint_range_deg")
    @classmethod
    def _non_empty(cls, value: Range, info) -> Range:
        return _check_range(value, info.field_name)

    def max_steps(self, policy_rate_hz: int) -> int:
        return int(round(self.episode_length_s * policy_rate_hz))


class DomainRandomization(FrozenModel):
    payload_range: Range = (-0.015, 0.120)
    stiffness_scale_range: Range = (0.75, 1.25)
    friction_scale_range: Range = (0.0, 1.5)
    randomize_mass: bool = True
    randomize_stiffness: bool = True
    randomize_friction: bool = True

    @field_validator("payload_range", "stiffness_scale_range", "friction_scale_range")
    @classmethod
    def _non_empty(cls, value: Range, info) -> Range:
        return _check_range(value, info.field_name)

    @classmethod
    def disabled(cls) -> "DomainRandomization":
        return cls(randomize_mass=False, randomize_stiffness=False, randomize_friction=False)


class PpoConfig(FrozenModel):
    """PPO defaults follow common legged-robot settings; desk scale by default."""
    num_envs: int = 256
    rollout_length: int = 24
    total_env_steps: int = 5_000_000
    num_epochs: int = 5
    num_minibatches: int = 4
    gamma: float = 0.99
    lam: float = 0.95
    clip_ratio: float = 0.2
    learning_rate: float = 1.0e-3
    adaptive_lr: bool = True
    desired_kl: float = 0.01
    lr_bounds: Range = (1.0e-5, 1.0e-2)
    entropy_coef: float = 0.0
    value_coef: float = 1.0
    max_grad_norm: float = 1.0
    clip_value_loss: bool = True
    init_noise_std: float = 1.0
    hidden_sizes: Tuple[int, ...] = (512, 256, 128)
    checkpoint_interval: int = 50
    num_workers: int = 1

    @model_validator(mode="after")
    def _batch_splits(self) -> "PpoConfig":
        for name in ("num_envs", "rollout_length", "total_env_steps", "num_epochs",
                     "num_minibatches", "checkpoint_interval", "num_workers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.batch_size % self.num_minibatches:
            raise ValueError("num_envs * rollout_length must be divisible by num_minibatches")
        if not (0 < self.gamma <= 1 and 0 <= self.lam <= 1 and self.clip_ratio > 0):
            raise ValueError("gamma in (0,1], lam in [0,1], clip_ratio > 0 required")
        return self

    @property
    def batch_size(self) -> int:
        return self.num_envs * self.rollout_length

    @property
    def num_iterations(self) -> int:
        return max(1, math.ceil(self.total_env_steps / self.batch_size))


# =============================================================================
# Evaluation
# =============================================================================

class PathSpec(FrozenModel):
    """Figure-8 (lemniscate of Bernoulli in the horizontal plane) or straight line."""
    kind: Literal["figure8", "line"] = "figure8"
    center: Vec3 = (0.0, 0.0, 4.0)
    width: float = 1.0
    height: float = 0.5
    period_s: float = 12.0
    laps: int = 1
    line_start: Vec3 = (-0.5, 0.0, 4.0)
    line_end: Vec3 = (0.5, 0.0, 4.0)
    ee_speed: float = 0.2
    orientation_rpy_deg: Vec3 = (0.0, 0.0, 0.0)
    settle_s: float = 4.0

    @model_validator(mode="after")
    def _positive(self) -> "PathSpec":
        if self.width < 0 or self.height < 0 or self.period_s <= 0 or self.ee_speed <= 0:
            raise ValueError("path dimensions must be >= 0 and period/speed > 0")
        if self.settle_s < 0 or self.laps <= 0:
            raise ValueError("settle_s must be >= 0 and laps > 0")
        return self


class PushRigConfig(FrozenModel):
    """1-D box on the ground plane pushed along world x (placeholder contact coefficients)."""
    box_mass: float = 0.590
    ground_friction_coeff: float = 0.3
    contact_stiffness: float = 300.0
    contact_damping: float = 5.0
    start_position: Vec3 = (-0.35, 0.0, 3.5)
    path_length: float = 0.6
    face_offset: float = 0.15
    ee_speed: float = 0.05
    orientation_rpy_deg: Vec3 = (0.0, -90.0, 0.0)
    settle_s: float = 4.0

    @model_validator(mode="after")
    def _positive(self) -> "PushRigConfig":
        if self.box_mass <= 0 or self.contact_stiffness <= 0 or self.ee_speed <= 0:
            raise ValueError("box_mass, contact_stiffness and ee_speed must be > 0")
        if self.ground_friction_coeff < 0 or self.contact_damping < 0 or self.path_length < 0:
            raise ValueError("friction, damping and path_length must be >= 0")
        return self


class BenchmarkSpec(FrozenModel):
    task: Literal["pose", "payload", "push", "path", "ablation"] = "pose"
    goal_count: int = 10
    hold_duration_s: float = 10.0
    window_s: float = 2.0
    payload_mass: float = 0.0
    position_threshold_m: float = 0.15
    orientation_threshold_deg: float = 20.0
    seed: int = 0
    parallel: bool = False
    goal_x_range: Range = (-1.0, 1.0)
    goal_y_range: Range = (-1.0, 1.0)
    goal_z_range: Range = (3.0, 5.0)
    goal_yaw_range_deg: Range = (-120.0, 120.0)
    goal_pitch_range_deg: Range = (-90.0, 90.0)
    goal_roll_range_deg: Range = (-90.0, 90.0)
    path: Optional[PathSpec] = None
    push: Optional[PushRigConfig] = None

    @model_validator(mode="after")
    def _positive(self) -> "BenchmarkSpec":
        if self.hold_duration_s <= 0 or self.window_s <= 0 or self.window_s > self.hold_duration_s:
            raise ValueError("hold_duration_s > 0 and 0 < window_s <= hold_duration_s required")
        if self.position_threshold_m <= 0 or self.orientation_threshold_deg <= 0:
            raise ValueError("success thresholds must be > 0")
        if self.goal_count <= 0:
            raise ValueError("goal_count must be > 0")
        return self

    def goal_ranges(self) -> EpisodeConfig:
        """Goal sampling ranges packaged for the shared goal sampler."""
        return EpisodeConfig(
            goal_x_range=self.goal_x_range,
            goal_y_range=self.goal_y_range,
            goal_z_range=self.goal_z_range,
            goal_yaw_range_deg=self.goal_yaw_range_deg,
            goal_pitch_range_deg=self.goal_pitch_range_deg,
            goal_roll_range_deg=self.goal_roll_range_deg,
        )


class EvaluationConfig(FrozenModel):
    pose: BenchmarkSpec = BenchmarkSpec(task="pose", goal_count=10)
    payload: BenchmarkSpec = BenchmarkSpec(task="payload", goal_count=7, payload_mass=0.05)
    payload_sweep: Tuple[float, ...] = (0.05, 0.14)
    push: BenchmarkSpec = BenchmarkSpec(task="push", goal_count=1, push=PushRigConfig())
    path: BenchmarkSpec = BenchmarkSpec(task="path", goal_count=1, path=PathSpec())


class AblationVariant(FrozenModel):
    name: str
    overrides: Dict[str, Any] = Field(default_factory=dict)


def _default_variants() -> List[AblationVariant]:
    return [
        AblationVariant(name="full"),
        AblationVariant(name="no_joint_positions",
                        overrides={"observation": {"include_joint_positions": False}}),
        AblationVariant(name="no_goal_in_body",
                        overrides={"observation": {"include_goal_in_body": False}}),
        AblationVariant(name="no_body_rate",
                        overrides={"observation": {"include_body_rate": False}}),
        AblationVariant(name="ctbr", overrides={"inner_loop": {"mode": "ctbr"}}),
        AblationVariant(name="no_mass_dr",
                        overrides={"domain_randomization": {"randomize_mass": False}}),
        AblationVariant(name="no_friction_dr",
                        overrides={"domain_randomization": {"randomize_friction": False}}),
    ]


class AblationConfig(FrozenModel):
    variants: List[AblationVariant] = Field(default_factory=_default_variants)
    total_env_steps: Optional[int] = None


# =============================================================================
# Root
# =============================================================================

def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class RunConfig(FrozenModel):
    name: str = "dsam"
    seed: int = 0
    model: ModelParams = ModelParams()
    simulation: SimulationConfig = SimulationConfig()
    inner_loop: InnerLoopConfig = InnerLoopConfig()
    actions: ActionScaling = ActionScaling()
    observation: ObservationConfig = ObservationConfig()
    rewards: RewardWeights = RewardWeights()
    episode: EpisodeConfig = EpisodeConfig()
    domain_randomization: DomainRandomization = DomainRandomization()
    ppo: PpoConfig = PpoConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    ablation: AblationConfig = AblationConfig()

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Return a validated copy with a nested override dict merged in."""
        return RunConfig.model_validate(_deep_merge(self.model_dump(), overrides))
