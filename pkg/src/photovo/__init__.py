"""Direct photometric visual odometry and keyframe relocalization.

Tracks RGB-D or stereo frames against keyframes by minimizing robust
photometric error coarse-to-fine over a Gaussian pyramid, with a pluggable
appearance-transform stage that canonicalizes illumination before tracking.
Ships a synthetic illumination-varying scene generator and an evaluation
harness.
"""

from ._kernels import backend_name
from .camera import CameraIntrinsics, StereoModel
from .config import KeyframeConfig, PipelineConfig, TrackerConfig, load_config
from .image import DepthMap, DisparityMap, ImageBuffer, Pyramid, build_pyramid
from .keyframes import Keyframe, KeyframeMap, create_keyframe, load_map, nearest_keyframe, save_map
from .se3 import Pose, act, compose, exp_se3, inverse, log_se3, point_pose_jacobian
from .tracker import TrackResult, TrackStatus, track_frame
from .transform import AffineCorrection, ExternalPrecomputed, Identity

__version__ = "0.1.0"

__all__ = [
    "AffineCorrection",
    "CameraIntrinsics",
    "DepthMap",
    "DisparityMap",
    "ExternalPrecomputed",
    "Identity",
    "ImageBuffer",
    "Keyframe",
    "KeyframeConfig",
    "KeyframeMap",
    "PipelineConfig",
    "Pose",
    "Pyramid",
    "StereoModel",
    "TrackResult",
    "TrackStatus",
    "TrackerConfig",
    "act",
    "backend_name",
    "build_pyramid",
    "compose",
    "create_keyframe",
    "exp_se3",
    "inverse",
    "load_config",
    "load_map",
    "log_se3",
    "nearest_keyframe",
    "point_pose_jacobian",
    "save_map",
    "track_frame",
]
