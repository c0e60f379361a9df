"""Stereo block matching: SAD winner-take-all with sub-pixel refinement.

Expects a rectified pair. Matching runs in the selected kernel backend;
this wrapper owns validation and the disparity/depth conversions.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .camera import StereoModel
from .image import DepthMap, DimensionMismatch, DisparityMap, ImageBuffer, luminance


def block_match_disparity(
    left: ImageBuffer,
    right: ImageBuffer,
    S: StereoModel,
    window: int = 7,
    max_disp: int = 64,
) -> DisparityMap:
    """Dense disparity of the left image against the right.

    Integer SAD minimum refined by a parabola over the neighboring costs;
    the validity mask combines a left-right consistency check (1 px), an
    ambiguity rejection for flat cost curves, and window/search borders.
    """
    if (left.height, left.width) != (right.height, right.width):
        raise DimensionMismatch(
            f"left {left.width}x{left.height} vs right {right.width}x{right.height}"
        )
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    if max_disp < 0:
        raise ValueError("max_disp must be >= 0")
    disp, valid = _kernels.block_match(luminance(left).data, luminance(right).data, window, max_disp)
    return DisparityMap(disp, valid)


def disparity_to_depth(disp: DisparityMap, S: StereoModel) -> DepthMap:
    """depth = fu * baseline / disparity on the valid mask."""
    fb = S.intrinsics.fu * S.baseline
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(disp.valid & (disp.data > 0), fb / np.maximum(disp.data, 1e-12), 0.0)
    return DepthMap(depth, disp.valid & (disp.data > 0))


def stereo_depth_noise_k(S: StereoModel, disparity_sigma: float) -> float:
    """Quadratic depth noise coefficient implied by disparity noise.

    sigma_z = (z^2 / (fu b)) sigma_d, matching the tracker's k z^2 model.
    """
    return disparity_sigma / (S.intrinsics.fu * S.baseline)
