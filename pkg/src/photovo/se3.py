"""SE(3) rigid-transform machinery for the tracker.

Conventions, fixed once and used everywhere:
  - A pose stores a 3x3 rotation matrix R and a 3-vector translation t and
    maps points as p' = R p + t.
  - Twists are 6-vectors ordered (v, omega): translational part first
    (meters), rotational part second (radians).
  - Pose updates use the left-multiplicative perturbation T <- exp(eps) * T,
    which keeps the translational block of the point-pose Jacobian constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Below this rotation magnitude the closed-form exp/log coefficients are
# replaced by 2nd-order Taylor series to avoid 0/0.
SMALL_ANGLE = 1e-8

# |angle - pi| below this engages the symmetric-eigenvector branch of log
# and flags the result as degenerate (axis sign is ambiguous at pi).
PI_DEGENERACY = 1e-6

# Orthonormality drift tolerated before compose() re-projects the rotation.
ORTHONORMALITY_TOL = 1e-9


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Pose:
    """Rigid transform: p' = rotation @ p + translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_readonly(np.asarray(self.rotation).reshape(3, 3)))
        object.__setattr__(self, "translation", _as_readonly(np.asarray(self.translation).reshape(3)))

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def identity() -> "Pose":
        return Pose()


def skew(v: np.ndarray) -> np.ndarray:
    """3x3 skew-symmetric (hat) matrix of a 3-vector."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _so3_exp(omega: np.ndarray) -> np.ndarray:
    """Rodrigues' formula with a Taylor branch for small angles."""
    theta = float(np.linalg.norm(omega))
    k = skew(omega)
    k2 = k @ k
    if theta < SMALL_ANGLE:
        # R = I + K + K^2/2 + O(theta^3)
        return np.eye(3) + k + 0.5 * k2
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * k2


def _so3_left_jacobian(omega: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(omega))
    k = skew(omega)
    k2 = k @ k
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * k + k2 / 6.0
    t2 = theta * theta
    a = (1.0 - np.cos(theta)) / t2
    b = (theta - np.sin(theta)) / (t2 * theta)
    return np.eye(3) + a * k + b * k2


def _so3_left_jacobian_inv(omega: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(omega))
    k = skew(omega)
    k2 = k @ k
    if theta < SMALL_ANGLE:
        return np.eye(3) - 0.5 * k + k2 / 12.0
    half = 0.5 * theta
    cot = half / np.tan(half)
    coeff = (1.0 - cot) / (theta * theta)
    return np.eye(3) - 0.5 * k + coeff * k2


def _so3_log(R: np.ndarray) -> tuple[np.ndarray, bool]:
    """Rotation vector of R; second value flags |angle - pi| < PI_DEGENERACY."""
    cos_theta = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta < SMALL_ANGLE:
        # omega ~ vee(R - R^T)/2 to first order
        return 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]), False
    if np.pi - theta < PI_DEGENERACY:
        # Near pi the sine-based formula loses the axis; recover it from the
        # dominant column of (R + I)/2 = axis axis^T at exactly pi.
        B = 0.5 * (R + np.eye(3))
        i = int(np.argmax(np.diag(B)))
        axis = B[:, i] / np.sqrt(max(B[i, i], 1e-300))
        axis = axis / np.linalg.norm(axis)
        # Fix the sign so that exp matches R's off-diagonal antisymmetry.
        s = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        if s @ axis < 0.0:
            axis = -axis
        return theta * axis, True
    scale = theta / (2.0 * np.sin(theta))
    return scale * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]), False


def exp_se3(xi: np.ndarray) -> Pose:
    """Closed-form SE(3) exponential of a (v, omega) twist."""
    xi = np.asarray(xi, dtype=np.float64).reshape(6)
    v, omega = xi[:3], xi[3:]
    R = _so3_exp(omega)
    t = _so3_left_jacobian(omega) @ v
    return Pose(R, t)


def log_se3(P: Pose, *, return_degenerate_flag: bool = False):
    """Inverse of exp_se3; rotation magnitude lands in [0, pi].

    With return_degenerate_flag the result is (xi, flag) where flag marks a
    rotation within PI_DEGENERACY of pi (axis sign ambiguous there).
    """
    omega, degenerate = _so3_log(P.rotation)
    v = _so3_left_jacobian_inv(omega) @ P.translation
    xi = np.concatenate([v, omega])
    if return_degenerate_flag:
        return xi, degenerate
    return xi


def _orthonormalize(R: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(R)
    R2 = u @ vt
    if np.linalg.det(R2) < 0.0:
        u[:, -1] = -u[:, -1]
        R2 = u @ vt
    return R2


def compose(A: Pose, B: Pose) -> Pose:
    """A then-applied-after B: (A*B) p = A(B(p)). Re-orthonormalizes on drift."""
    R = A.rotation @ B.rotation
    t = A.rotation @ B.translation + A.translation
    drift = np.abs(R @ R.T - np.eye(3)).max()
    if drift > ORTHONORMALITY_TOL:
        R = _orthonormalize(R)
    return Pose(R, t)


def inverse(P: Pose) -> Pose:
    Rt = P.rotation.T
    return Pose(Rt, -(Rt @ P.translation))


def act(P: Pose, p: np.ndarray) -> np.ndarray:
    """Apply the transform to one point or an (N, 3) stack of points."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        return P.rotation @ p + P.translation
    return p @ P.rotation.T + P.translation


def point_pose_jacobian(P: Pose, p: np.ndarray) -> np.ndarray:
    """d(exp(eps) * P applied to p)/d(eps) at eps = 0, a 3x6 matrix.

    Under the left perturbation this is [I | -skew(P p)], so the translation
    columns are always the identity.
    """
    q = act(P, np.asarray(p, dtype=np.float64).reshape(3))
    J = np.zeros((3, 6))
    J[:, :3] = np.eye(3)
    J[:, 3:] = -skew(q)
    return J


def rotation_angle(P: Pose) -> float:
    """Geodesic rotation magnitude of the pose, in radians."""
    cos_theta = np.clip(0.5 * (np.trace(P.rotation) - 1.0), -1.0, 1.0)
    return float(np.arccos(cos_theta))


def pose_distance(A: Pose, B: Pose) -> tuple[float, float]:
    """(translation meters, rotation radians) of the relative pose A^-1 B."""
    rel = compose(inverse(A), B)
    return float(np.linalg.norm(rel.translation)), rotation_angle(rel)


def quat_from_rotation(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (x, y, z, w) with non-negative w, Shepperd's method."""
    t = np.trace(R)
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    q = np.array([x, y, z, w])
    q = q / np.linalg.norm(q)
    if q[3] < 0.0:
        q = -q
    return q


def rotation_from_quat(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix from an (x, y, z, w) quaternion."""
    x, y, z, w = np.asarray(q, dtype=np.float64).reshape(4)
    n = np.sqrt(x * x + y * y + z * z + w * w)
    x, y, z, w = x / n, y / n, z / n, w / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
