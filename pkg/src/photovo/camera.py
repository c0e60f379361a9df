"""Pinhole projection/backprojection and the Jacobians the tracker needs.

Pixel-center convention: integer coordinates address pixel centers, so the
image domain is [0, width-1] x [0, height-1]. Depth and disparity must
exceed small positive floors; points at or behind the camera plane raise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEPTH_FLOOR = 1e-9  # meters
DISPARITY_FLOOR = 1e-9  # pixels


class NonPositiveDepth(ValueError):
    pass


class NonPositiveDisparity(ValueError):
    pass


class OutOfBounds(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fu: float
    fv: float
    cu: float
    cv: float
    width: int
    height: int

    def __post_init__(self):
        if self.fu <= 0 or self.fv <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cu < self.width) or not (0 < self.cv < self.height):
            raise ValueError("principal point must lie inside the image")

    def scaled_half(self) -> "CameraIntrinsics":
        """Intrinsics of the next (half-resolution) pyramid level.

        The principal point update keeps pixel centers aligned across levels:
        c <- (c + 0.5)/2 - 0.5.
        """
        return CameraIntrinsics(
            fu=self.fu / 2.0,
            fv=self.fv / 2.0,
            cu=(self.cu + 0.5) / 2.0 - 0.5,
            cv=(self.cv + 0.5) / 2.0 - 0.5,
            width=self.width // 2,
            height=self.height // 2,
        )


@dataclass(frozen=True)
class StereoModel:
    intrinsics: CameraIntrinsics
    baseline: float  # meters

    def __post_init__(self):
        if self.baseline <= 0:
            raise ValueError("baseline must be positive")


def project(K: CameraIntrinsics, p: np.ndarray) -> tuple[np.ndarray, float]:
    """3D point (camera frame) -> (pixel, depth)."""
    x, y, z = np.asarray(p, dtype=np.float64).reshape(3)
    if z <= DEPTH_FLOOR:
        raise NonPositiveDepth(f"point depth {z} <= {DEPTH_FLOOR}")
    return np.array([K.fu * x / z + K.cu, K.fv * y / z + K.cv]), float(z)


def backproject(K: CameraIntrinsics, pixel: np.ndarray, depth: float) -> np.ndarray:
    """(pixel, depth) -> 3D point in the camera frame."""
    u, v = np.asarray(pixel, dtype=np.float64).reshape(2)
    if depth <= DEPTH_FLOOR:
        raise NonPositiveDepth(f"depth {depth} <= {DEPTH_FLOOR}")
    if not (0.0 <= u <= K.width - 1 and 0.0 <= v <= K.height - 1):
        raise OutOfBounds(f"pixel ({u}, {v}) outside [0,{K.width - 1}]x[0,{K.height - 1}]")
    return depth * np.array([(u - K.cu) / K.fu, (v - K.cv) / K.fv, 1.0])


def project_stereo(S: StereoModel, p: np.ndarray) -> tuple[np.ndarray, float]:
    """3D point -> (pixel in the left image, disparity in pixels)."""
    pixel, depth = project(S.intrinsics, p)
    return pixel, S.intrinsics.fu * S.baseline / depth


def backproject_stereo(S: StereoModel, pixel: np.ndarray, disparity: float) -> np.ndarray:
    if disparity <= DISPARITY_FLOOR:
        raise NonPositiveDisparity(f"disparity {disparity} <= {DISPARITY_FLOOR}")
    depth = S.intrinsics.fu * S.baseline / disparity
    return backproject(S.intrinsics, pixel, depth)


def projection_jacobian(K: CameraIntrinsics, p: np.ndarray) -> np.ndarray:
    """2x3 derivative of project() with respect to the point."""
    x, y, z = np.asarray(p, dtype=np.float64).reshape(3)
    if z <= DEPTH_FLOOR:
        raise NonPositiveDepth(f"point depth {z} <= {DEPTH_FLOOR}")
    iz = 1.0 / z
    return np.array(
        [
            [K.fu * iz, 0.0, -K.fu * x * iz * iz],
            [0.0, K.fv * iz, -K.fv * y * iz * iz],
        ]
    )


def backprojection_depth_jacobian(K: CameraIntrinsics, pixel: np.ndarray) -> np.ndarray:
    """Derivative of backproject() with respect to depth: the unit-depth ray."""
    u, v = np.asarray(pixel, dtype=np.float64).reshape(2)
    if not (0.0 <= u <= K.width - 1 and 0.0 <= v <= K.height - 1):
        raise OutOfBounds(f"pixel ({u}, {v}) outside image")
    return np.array([(u - K.cu) / K.fu, (v - K.cv) / K.fv, 1.0])
