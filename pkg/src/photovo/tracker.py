"""Direct photometric frame-to-keyframe tracking.

Residuals compare the keyframe image against the tracking image sampled at
warped coordinates: e(u) = I_ref(u) - I_track(warp(u)). The 1x6 residual
Jacobian under a left-multiplicative twist perturbation uses the keyframe's
precomputed image gradients (the small-motion approximation that lets all
image derivatives be computed once per keyframe); per-pixel variances
combine the intensity noise floor with depth noise propagated through the
current warp. A Huber-weighted Gauss-Newton/IRLS loop runs coarse-to-fine
over the pyramid, rotation-only at the coarsest level, with backtracking so
the accepted robust cost never increases.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import TrackerConfig
from .image import ImageBuffer, Pyramid, build_pyramid, gradients, luminance, smooth_image
from .keyframes import Keyframe, KeyframeLevel
from .se3 import Pose, compose, exp_se3

# A level is solvable only with a healthy multiple of the 6 DOF.
MIN_SYSTEM_PIXELS = 24

CONDITION_LIMIT = 1e12

DAMPING_SCALE = 1e-6


class NoValidPixels(RuntimeError):
    pass


class SingularNormalEquations(RuntimeError):
    pass


class TrackStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    LOST = "lost"


@dataclass(frozen=True)
class TrackResult:
    pose: Pose  # tracking-from-reference
    status: TrackStatus
    final_cost: float  # mean Huber objective per valid pixel
    inlier_ratio: float
    iterations_per_level: tuple
    n_valid: int = 0

    @property
    def lost(self) -> bool:
        return self.status is TrackStatus.LOST


# Warp drop reasons, reported per pixel by warp_pixels.
WARP_OK = 0
WARP_BEHIND = 1
WARP_OUT_OF_BOUNDS = 2


@dataclass(frozen=True)
class WarpedPixels:
    u: np.ndarray
    v: np.ndarray
    reason: np.ndarray  # WARP_* codes

    @property
    def valid(self) -> np.ndarray:
        return self.reason == WARP_OK


def warp_pixels(level: KeyframeLevel, pose: Pose) -> WarpedPixels:
    """Warp the level's selected pixels into the tracking view."""
    K = level.intrinsics
    q = level.points @ pose.rotation.T + pose.translation
    behind = q[:, 2] <= 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        iz = np.where(behind, 0.0, 1.0 / q[:, 2])
    u = K.fu * q[:, 0] * iz + K.cu
    v = K.fv * q[:, 1] * iz + K.cv
    oob = ~behind & ~((u >= 0) & (u <= K.width - 1) & (v >= 0) & (v <= K.height - 1))
    reason = np.zeros(q.shape[0], dtype=np.int8)
    reason[oob] = WARP_OUT_OF_BOUNDS
    reason[behind] = WARP_BEHIND
    u[reason != WARP_OK] = np.nan
    v[reason != WARP_OK] = np.nan
    return WarpedPixels(u=u, v=v, reason=reason)


@dataclass(frozen=True)
class ResidualSet:
    """Per-pixel residual diagnostics (the slow, inspectable path).

    The solver itself uses the fused kernel; tests cross-check the two.
    """

    pixel_idx: np.ndarray
    value: np.ndarray
    jacobian_pose: np.ndarray  # (N, 6)
    variance: np.ndarray
    huber_weight: np.ndarray

    def __len__(self) -> int:
        return int(self.value.shape[0])


def compute_residuals(level: KeyframeLevel, track_img: ImageBuffer, pose: Pose, cfg: TrackerConfig) -> ResidualSet:
    """Residuals, Jacobians, variances and Huber weights at one pose."""
    K = level.intrinsics
    warped = warp_pixels(level, pose)
    keep = warped.valid
    if not keep.any():
        raise NoValidPixels("every selected pixel was dropped by the warp")
    u, v = warped.u[keep], warped.v[keep]
    vals, _ = _kernels.bilinear_many(track_img.data, u, v)
    e = level.ref_vals[keep] - vals

    q = level.points[keep] @ pose.rotation.T + pose.translation
    iz = 1.0 / q[:, 2]
    gu, gv = level.grad_u[keep], level.grad_v[keep]
    a = K.fu * iz
    c = K.fv * iz
    w0 = gu * a
    w1 = gv * c
    w2 = -(w0 * q[:, 0] + w1 * q[:, 1]) * iz
    J = np.stack(
        [
            -w0,
            -w1,
            -w2,
            w1 * q[:, 2] - w2 * q[:, 1],
            w2 * q[:, 0] - w0 * q[:, 2],
            w0 * q[:, 1] - w1 * q[:, 0],
        ],
        axis=1,
    )

    # Depth noise enters through the warp: moving a point along its
    # reference ray shifts the warped pixel only under relative motion.
    ray_dir = (q - pose.translation) / level.points[keep][:, 2:3]
    j_depth = -(w0 * ray_dir[:, 0] + w1 * ray_dir[:, 1] + w2 * ray_dir[:, 2])
    var = cfg.image_noise_sigma**2 + (j_depth * level.sigma_d[keep]) ** 2

    r = np.abs(e) / np.sqrt(var)
    weight = np.minimum(1.0, cfg.huber_k / np.maximum(r, 1e-300))
    return ResidualSet(
        pixel_idx=level.pixel_idx[keep],
        value=e,
        jacobian_pose=J,
        variance=var,
        huber_weight=weight,
    )


def _linearize(level: KeyframeLevel, track: np.ndarray, pose: Pose, cfg: TrackerConfig, track_grad):
    K = level.intrinsics
    return _kernels.accumulate_system(
        level.points,
        level.ref_vals,
        level.grad_u,
        level.grad_v,
        level.sigma_d,
        pose.rotation,
        pose.translation,
        K.fu,
        K.fv,
        K.cu,
        K.cv,
        track,
        cfg.huber_k,
        cfg.image_noise_sigma,
        track_grad,
    )


def _solve_step(H: np.ndarray, b: np.ndarray, rotation_only: bool) -> np.ndarray:
    """Damped Gauss-Newton step; raises on near-singular systems."""
    if rotation_only:
        Hs, bs = H[3:, 3:], b[3:]
    else:
        Hs, bs = H, b
    dim = Hs.shape[0]
    damped = Hs + (DAMPING_SCALE * np.trace(Hs) / dim) * np.eye(dim)
    if not np.isfinite(damped).all() or np.linalg.cond(damped) > CONDITION_LIMIT:
        raise SingularNormalEquations("normal equations are numerically singular")
    step_s = np.linalg.solve(damped, -bs)
    if rotation_only:
        step = np.zeros(6)
        step[3:] = step_s
        return step
    return step_s


@dataclass
class LevelResult:
    pose: Pose
    cost: float  # mean per-pixel Huber objective
    iterations: int
    inlier_ratio: float
    n_valid: int
    converged: bool
    cost_history: tuple = ()  # accepted-iteration costs, non-increasing


def solve_level(
    level: KeyframeLevel,
    track_img: ImageBuffer,
    initial_pose: Pose,
    cfg: TrackerConfig,
    rotation_only: bool = False,
) -> LevelResult:
    """Huber-IRLS Gauss-Newton at a single pyramid level.

    Steps that would increase the robust cost are shrunk (halved, a few
    tries) and finally rejected, so the accepted-iteration cost sequence is
    non-increasing. Stops on step norm, relative cost decrease, or the
    iteration cap.
    """
    track = track_img.data
    track_grad = None
    if not cfg.use_keyframe_gradients:
        g = gradients(track_img)
        track_grad = (g.du, g.dv)

    pose = initial_pose
    H, b, cost_sum, n_valid, n_inlier, _ = _linearize(level, track, pose, cfg, track_grad)
    if n_valid < MIN_SYSTEM_PIXELS:
        raise NoValidPixels(f"{n_valid} valid pixels at this level")
    cost = cost_sum / n_valid
    inlier_ratio = n_inlier / n_valid
    converged = False
    iterations = 0
    cost_history = [cost]

    for _ in range(cfg.max_iterations_per_level):
        step = _solve_step(H, b, rotation_only)
        if not np.isfinite(step).all():
            raise SingularNormalEquations("non-finite step")

        # Backtracking on the robust cost.
        accepted = None
        scale = 1.0
        for _ in range(6):
            candidate = compose(exp_se3(scale * step), pose)
            Hc, bc, cost_sum_c, n_valid_c, n_inlier_c, _ = _linearize(level, track, candidate, cfg, track_grad)
            if n_valid_c >= MIN_SYSTEM_PIXELS and np.isfinite(cost_sum_c) and cost_sum_c / n_valid_c <= cost + 1e-15:
                accepted = (candidate, Hc, bc, cost_sum_c / n_valid_c, n_valid_c, n_inlier_c / n_valid_c)
                break
            scale *= 0.5
        if accepted is None:
            converged = True  # local minimum at the current pose
            break

        iterations += 1
        pose, H, b, new_cost, n_valid, inlier_ratio = accepted
        step_norm = float(np.linalg.norm(scale * step))
        cost_drop = cost - new_cost
        cost = new_cost
        cost_history.append(cost)
        if step_norm < cfg.step_norm_tolerance or cost_drop < cfg.relative_cost_tolerance * max(cost, 1e-300):
            converged = True
            break

    return LevelResult(
        pose=pose,
        cost=cost,
        iterations=iterations,
        inlier_ratio=inlier_ratio,
        n_valid=n_valid,
        converged=converged,
        cost_history=tuple(cost_history),
    )


def smoothed_luminance(img: ImageBuffer, cfg: TrackerConfig) -> ImageBuffer:
    """Tracking-channel conversion plus the configured pre-smoothing."""
    return smooth_image(luminance(img), cfg.pre_smoothing)


def prepare_tracking_pyramid(img: ImageBuffer, K, cfg: TrackerConfig) -> Pyramid:
    """Luminance pyramid of an (already transformed) tracking frame."""
    return build_pyramid(smoothed_luminance(img, cfg), K, cfg.pyramid_levels)


def track_frame(
    keyframe: Keyframe,
    tracking: Pyramid | ImageBuffer,
    initial_pose: Pose,
    cfg: TrackerConfig,
) -> TrackResult:
    """Coarse-to-fine tracking of one frame against a keyframe.

    `tracking` is either a prepared luminance pyramid or a raw (transformed)
    image. The coarsest level solves rotation only; each level's solution
    seeds the next. On any loss condition the initial pose is returned
    unchanged with status LOST.
    """

    def lost() -> TrackResult:
        return TrackResult(
            pose=initial_pose,
            status=TrackStatus.LOST,
            final_cost=float("nan"),
            inlier_ratio=0.0,
            iterations_per_level=tuple(iterations),
        )

    iterations: list[int] = []
    if keyframe.n_selected < cfg.min_selected_pixels:
        return lost()
    if isinstance(tracking, ImageBuffer):
        tracking = prepare_tracking_pyramid(tracking, keyframe.levels[0].intrinsics, cfg)

    pose = initial_pose
    result = None
    for li in reversed(range(cfg.pyramid_levels)):
        rotation_only = li == cfg.pyramid_levels - 1 and cfg.pyramid_levels > 1
        try:
            result = solve_level(keyframe.levels[li], tracking[li][0], pose, cfg, rotation_only=rotation_only)
        except (NoValidPixels, SingularNormalEquations):
            return lost()
        pose = result.pose
        iterations.append(result.iterations)

    if not np.isfinite(result.cost) or result.inlier_ratio < cfg.min_inlier_ratio:
        return lost()
    status = TrackStatus.CONVERGED if result.converged else TrackStatus.MAX_ITERATIONS
    return TrackResult(
        pose=pose,
        status=status,
        final_cost=result.cost,
        inlier_ratio=result.inlier_ratio,
        iterations_per_level=tuple(iterations),
        n_valid=result.n_valid,
    )
