"""
SE(3) / SO(3) arithmetic used by the simulator, observation builder and rewards.

Conventions (fixed once for the whole code base):
- Hamilton quaternions stored as (w, x, y, z), canonical sign w >= 0.
- R_wb maps body-frame vectors into the world frame: v_w = R_wb @ v_b.
  Its columns are the body axes expressed in world coordinates.
- Every function accepts arbitrary leading batch dimensions.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from src.errors import RotationMatrixError

ORTHONORMALITY_TOL = 1e-6
_SMALL_ANGLE = 1e-6


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix [v]x so that skew(a) @ b == cross(a, b)."""
    v = np.asarray(v, dtype=float)
    zero = np.zeros(v.shape[:-1])
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    return np.stack([
        np.stack([zero, -z, y], axis=-1),
        np.stack([z, zero, -x], axis=-1),
        np.stack([-y, x, zero], axis=-1),
    ], axis=-2)


def wrap_angle(angle):
    """Wrap angles to the half-open interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)


# =============================================================================
# Quaternions
# =============================================================================

def normalize_quat(q: np.ndarray) -> np.ndarray:
    """
    Normalize to unit length and fix the sign so that w >= 0.

    When w == 0 the first non-zero component is made positive, so q and -q
    always map to the same stored value.
    """
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    leading = np.argmax(np.abs(q) > 1e-15, axis=-1)
    lead_value = np.take_along_axis(q, leading[..., None], axis=-1)
    return np.where(lead_value < 0.0, -q, q)


def identity_quat(batch_shape=()) -> np.ndarray:
    q = np.zeros(tuple(batch_shape) + (4,))
    q[..., 0] = 1.0
    return q


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.concatenate([q[..., :1], -q[..., 1:]], axis=-1)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a ⊗ b, renormalized and canonical."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    product = np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)
    return normalize_quat(product)


def quat_from_axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=float)[..., None]
    return normalize_quat(np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1))


def quat_from_euler_zyx(yaw, pitch, roll) -> np.ndarray:
    """Intrinsic Z-Y-X composition: q = q_z(yaw) ⊗ q_y(pitch) ⊗ q_x(roll)."""
    yaw, pitch, roll = np.broadcast_arrays(
        np.asarray(yaw, dtype=float), np.asarray(pitch, dtype=float), np.asarray(roll, dtype=float)
    )
    q_z = quat_from_axis_angle(np.broadcast_to([0.0, 0.0, 1.0], yaw.shape + (3,)), yaw)
    q_y = quat_from_axis_angle(np.broadcast_to([0.0, 1.0, 0.0], pitch.shape + (3,)), pitch)
    q_x = quat_from_axis_angle(np.broadcast_to([1.0, 0.0, 0.0], roll.shape + (3,)), roll)
    return quat_mul(quat_mul(q_z, q_y), q_x)


def euler_zyx_from_quat(q: np.ndarray) -> np.ndarray:
    """Inverse of quat_from_euler_zyx: returns (..., 3) as (yaw, pitch, roll)."""
    q = np.asarray(q, dtype=float)
    flat = q.reshape(-1, 4)
    angles = Rotation.from_quat(flat[:, [1, 2, 3, 0]]).as_euler("ZYX")
    return angles.reshape(q.shape[:-1] + (3,))


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1),
    ], axis=-2)


def check_rotation(R: np.ndarray, tol: float = ORTHONORMALITY_TOL) -> None:
    """Raise RotationMatrixError if any matrix in the batch is not a proper rotation."""
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(R)):
        raise RotationMatrixError("rotation matrix contains non-finite entries")
    gram = np.einsum("...ki,...kj->...ij", R, R)
    deviation = np.max(np.abs(gram - np.eye(3)), initial=0.0)
    if deviation > tol:
        raise RotationMatrixError(f"R^T R deviates from identity by {deviation:.3e} (tolerance {tol:.1e})")
    det = np.linalg.det(R)
    if np.any(np.abs(det - 1.0) > tol):
        raise RotationMatrixError("rotation matrix determinant is not +1")


def rotmat_to_quat(R: np.ndarray, check: bool = True) -> np.ndarray:
    """
    Convert rotation matrices to canonical unit quaternions.

    Args:
        R: (..., 3, 3) rotation matrices
        check: reject matrices whose orthonormality error exceeds 1e-6

    Returns:
        (..., 4) quaternions (w, x, y, z) with w >= 0

    Raises:
        RotationMatrixError: if check is enabled and R is not a rotation
    """
    R = np.asarray(R, dtype=float)
    if check:
        check_rotation(R)
    flat = R.reshape(-1, 3, 3)
    xyzw = Rotation.from_matrix(flat).as_quat()
    q = xyzw[:, [3, 0, 1, 2]].reshape(R.shape[:-2] + (4,))
    return normalize_quat(q)


def geodesic_angle(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """
    Smallest rotation angle between two orientations, in [0, pi].

    Equal to 2*arccos(|q1·q2|); the half-chord form keeps full precision for
    nearly identical rotations where arccos loses half the mantissa.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    dot = np.sum(q1 * q2, axis=-1, keepdims=True)
    sign = np.where(dot < 0.0, -1.0, 1.0)
    chord_minus = np.linalg.norm(q1 - sign * q2, axis=-1)
    chord_plus = np.linalg.norm(q1 + sign * q2, axis=-1)
    return 4.0 * np.arctan2(chord_minus, chord_plus)


# =============================================================================
# Rotation matrices
# =============================================================================

def so3_exp(phi: np.ndarray) -> np.ndarray:
    """Rodrigues' formula for exp([phi]x), series-expanded near zero."""
    phi = np.asarray(phi, dtype=float)
    angle = np.linalg.norm(phi, axis=-1)
    small = angle < _SMALL_ANGLE
    safe = np.where(small, 1.0, angle)
    a = np.where(small, 1.0 - angle ** 2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - angle ** 2 / 24.0, (1.0 - np.cos(safe)) / safe ** 2)
    K = skew(phi)
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * (K @ K)


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """One Newton step of the polar projection; removes first-order drift."""
    gram = np.einsum("...ki,...kj->...ij", R, R)
    return 0.5 * R @ (3.0 * np.eye(3) - gram)


def yaw_rotmat(yaw) -> np.ndarray:
    yaw = np.asarray(yaw, dtype=float)
    c, s = np.cos(yaw), np.sin(yaw)
    zero, one = np.zeros_like(yaw), np.ones_like(yaw)
    return np.stack([
        np.stack([c, -s, zero], axis=-1),
        np.stack([s, c, zero], axis=-1),
        np.stack([zero, zero, one], axis=-1),
    ], axis=-2)


def rotmat_6d_encode(R: np.ndarray) -> np.ndarray:
    """First two columns of R, column-major: (R[:,0], R[:,1])."""
    R = np.asarray(R, dtype=float)
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


# =============================================================================
# Poses
# =============================================================================

@dataclass(frozen=True)
class Pose:
    """Position (..., 3) [m] plus canonical unit quaternion (..., 4)."""
    position: np.ndarray
    orientation: np.ndarray

    @classmethod
    def identity(cls, batch_shape=()) -> "Pose":
        return cls(np.zeros(tuple(batch_shape) + (3,)), identity_quat(batch_shape))

    @classmethod
    def from_rotmat(cls, position, R, check: bool = True) -> "Pose":
        return cls(np.asarray(position, dtype=float), rotmat_to_quat(R, check=check))

    @property
    def rotmat(self) -> np.ndarray:
        return quat_to_rotmat(self.orientation)

    def __getitem__(self, index) -> "Pose":
        return Pose(self.position[index], self.orientation[index])


def pose_in_frame(target: Pose, frame: Pose) -> Pose:
    """Express target in the coordinates of frame: frame⁻¹ ∘ target."""
    R_f = quat_to_rotmat(frame.orientation)
    delta = np.asarray(target.position, dtype=float) - frame.position
    position = np.einsum("...ji,...j->...i", R_f, delta)
    orientation = quat_mul(quat_conjugate(frame.orientation), target.orientation)
    return Pose(position, orientation)


def pose_compose(frame: Pose, relative: Pose) -> Pose:
    """frame ∘ relative; the inverse of pose_in_frame."""
    R_f = quat_to_rotmat(frame.orientation)
    position = frame.position + np.einsum("...ij,...j->...i", R_f, relative.position)
    return Pose(position, quat_mul(frame.orientation, relative.orientation))
