"""
1-D pushing rig: a box whose contact face is the plane x = box position.

The gripper touches the face from the -x side. Contact is a penalty spring
with damping; the box slides on the ground with Coulomb friction and sticks
while the push stays below the static friction limit. An infinite box mass
gives an immovable wall.
"""
from dataclasses import dataclass

import numpy as np

from src.models.config import PushRigConfig
from src.models.state import ExternalWrench

_STICK_SPEED = 1e-6


@dataclass(frozen=True, eq=False)
class BoxState:
    position: np.ndarray  # x of the contact face [m]
    velocity: np.ndarray  # [m/s]


class PushRig:
    """Contact force and box motion for the push benchmark"""

    def __init__(self, config: PushRigConfig, gravity: float = 9.81):
        self.config = config
        self.gravity = gravity

    @property
    def face_start(self) -> float:
        return self.config.start_position[0] + self.config.face_offset

    @property
    def immovable(self) -> bool:
        return not np.isfinite(self.config.box_mass)

    def initial_box(self, batch_shape=()) -> BoxState:
        batch_shape = tuple(batch_shape)
        return BoxState(np.full(batch_shape, self.face_start), np.zeros(batch_shape))

    def contact_force(self, ee_position: np.ndarray, ee_velocity: np.ndarray,
                      box: BoxState) -> np.ndarray:
        """Normal force magnitude pushing the box along +x (>= 0)."""
        penetration = ee_position[..., 0] - box.position
        closing_speed = ee_velocity[..., 0] - box.velocity
        force = self.config.contact_stiffness * penetration + self.config.contact_damping * closing_speed
        return np.where(penetration > 0.0, np.maximum(force, 0.0), 0.0)

    def gripper_wrench(self, force: np.ndarray) -> ExternalWrench:
        """Reaction on the gripper: -force along world x."""
        force = np.asarray(force, dtype=float)
        vector = np.zeros(force.shape + (3,))
        vector[..., 0] = -force
        return ExternalWrench(force=vector, torque=np.zeros_like(vector))

    def step_box(self, box: BoxState, force: np.ndarray, dt: float) -> BoxState:
        if self.immovable:
            return BoxState(box.position, np.zeros_like(box.velocity))
        mass = self.config.box_mass
        friction_limit = self.config.ground_friction_coeff * mass * self.gravity

        moving = np.abs(box.velocity) > _STICK_SPEED
        sticking = ~moving & (force <= friction_limit)
        direction = np.where(moving, np.sign(box.velocity), 1.0)
        accel = (force - friction_limit * direction) / mass
        velocity = box.velocity + accel * dt
        # Friction alone never reverses the sliding direction
        reversed_ = moving & (np.sign(velocity) != np.sign(box.velocity))
        velocity = np.where(sticking | reversed_, 0.0, velocity)
        return BoxState(box.position + velocity * dt, velocity)
