"""Image containers, Gaussian pyramids, gradients, sampling, pixel selection.

Images are float64 in [0, 1], shaped (height, width) for single channel or
(height, width, 3) for RGB. Depth maps are metric float64 with a validity
mask. PNG ingestion follows the TUM convention: 8- or 16-bit intensity
normalized to [0, 1], 16-bit depth with a configurable scale (default
1/5000 m per unit).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .camera import CameraIntrinsics

TUM_DEPTH_SCALE = 1.0 / 5000.0

# Luminance weights used to collapse RGB before residual computation.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

MIN_PYRAMID_SIDE = 8


class ImageTooSmall(ValueError):
    pass


class TooManyLevels(ValueError):
    pass


class OutOfBounds(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ImageBuffer:
    """Dense intensity image, values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim not in (2, 3) or (data.ndim == 3 and data.shape[2] != 3):
            raise ValueError(f"expected (H, W) or (H, W, 3) data, got {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("image contains non-finite values")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3


@dataclass(frozen=True)
class DepthMap:
    """Metric depth with validity mask; invalid entries are ignored everywhere."""

    data: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("depth map must be (H, W)")
        if self.valid is None:
            valid = np.isfinite(data) & (data > 0.0)
        else:
            valid = np.ascontiguousarray(self.valid, dtype=bool)
            if valid.shape != data.shape:
                raise ValueError("validity mask shape mismatch")
            valid = valid & np.isfinite(data) & (data > 0.0)
        data.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


# A disparity map shares the container semantics (values in pixels).
DisparityMap = DepthMap


@dataclass(frozen=True)
class GradientField:
    """Per-pixel central-difference derivatives, same shape as the source."""

    du: np.ndarray
    dv: np.ndarray

    def __post_init__(self):
        if self.du.shape != self.dv.shape:
            raise ValueError("du/dv shape mismatch")
        for a in (self.du, self.dv):
            a.flags.writeable = False

    def magnitude(self) -> np.ndarray:
        """Max-over-channels gradient magnitude."""
        mag = np.sqrt(self.du * self.du + self.dv * self.dv)
        if mag.ndim == 3:
            mag = mag.max(axis=2)
        return mag


@dataclass(frozen=True)
class Pyramid:
    """Coarse-to-fine stack; level 0 is full resolution."""

    levels: tuple  # of (ImageBuffer, CameraIntrinsics)

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i):
        return self.levels[i]


def luminance(img: ImageBuffer) -> ImageBuffer:
    if img.channels == 1:
        return img
    return ImageBuffer(np.clip(img.data @ LUMA_WEIGHTS, 0.0, 1.0))


_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _blur5(data: np.ndarray) -> np.ndarray:
    """Separable 5-tap binomial blur with reflected borders."""
    pad = [(2, 2), (0, 0)] + ([(0, 0)] if data.ndim == 3 else [])
    out = np.pad(data, pad, mode="reflect")
    out = sum(_BINOMIAL5[k] * out[k : k + data.shape[0]] for k in range(5))
    pad = [(0, 0), (2, 2)] + ([(0, 0)] if data.ndim == 3 else [])
    out = np.pad(out, pad, mode="reflect")
    out = sum(_BINOMIAL5[k] * out[:, k : k + data.shape[1]] for k in range(5))
    return out


def downsample_image(data: np.ndarray) -> np.ndarray:
    """Blur + decimate by 2 (floored output size)."""
    nh, nw = data.shape[0] // 2, data.shape[1] // 2
    blurred = _blur5(data)
    return np.clip(blurred[: 2 * nh : 2, : 2 * nw : 2], 0.0, 1.0)


def smooth_image(img: ImageBuffer, passes: int) -> ImageBuffer:
    """Repeated 5-tap binomial smoothing (no decimation)."""
    if passes <= 0:
        return img
    data = img.data
    for _ in range(passes):
        data = np.clip(_blur5(data), 0.0, 1.0)
    return ImageBuffer(data)


def build_pyramid(img: ImageBuffer, K: CameraIntrinsics, levels: int) -> Pyramid:
    """Gaussian pyramid with per-level rescaled intrinsics."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    w, h = img.width, img.height
    for _ in range(levels - 1):
        w, h = w // 2, h // 2
    if min(w, h) < MIN_PYRAMID_SIDE:
        raise TooManyLevels(f"coarsest level {w}x{h} is below {MIN_PYRAMID_SIDE}x{MIN_PYRAMID_SIDE}")
    out = [(img, K)]
    data, intr = img.data, K
    for _ in range(levels - 1):
        data = downsample_image(data)
        intr = intr.scaled_half()
        out.append((ImageBuffer(data), intr))
    return Pyramid(tuple(out))


def downsample_depth(depth: DepthMap) -> DepthMap:
    """Depth pyramids decimate without blurring to avoid phantom surfaces."""
    nh, nw = depth.height // 2, depth.width // 2
    return DepthMap(depth.data[: 2 * nh : 2, : 2 * nw : 2], depth.valid[: 2 * nh : 2, : 2 * nw : 2])


def sample_bilinear(img: ImageBuffer, pixel) -> float | np.ndarray:
    """Bilinear interpolation at one continuous pixel coordinate.

    Exact at integer coordinates, including the right/bottom edges. Raises
    OutOfBounds outside [0, W-1] x [0, H-1]; callers drop such residuals
    rather than clamping.
    """
    u, v = float(pixel[0]), float(pixel[1])
    w, h = img.width, img.height
    if not (0.0 <= u <= w - 1 and 0.0 <= v <= h - 1):
        raise OutOfBounds(f"({u}, {v}) outside [0,{w - 1}]x[0,{h - 1}]")
    u0 = min(int(np.floor(u)), w - 2)
    v0 = min(int(np.floor(v)), h - 2)
    fu, fv = u - u0, v - v0
    d = img.data
    val = (
        (1 - fu) * (1 - fv) * d[v0, u0]
        + fu * (1 - fv) * d[v0, u0 + 1]
        + (1 - fu) * fv * d[v0 + 1, u0]
        + fu * fv * d[v0 + 1, u0 + 1]
    )
    return val if img.channels == 3 else float(val)


def gradients(img: ImageBuffer) -> GradientField:
    """Central differences in the interior, one-sided at the borders."""
    if img.width < 3 or img.height < 3:
        raise ImageTooSmall(f"{img.width}x{img.height} below 3x3")
    d = img.data
    du = np.empty_like(d)
    dv = np.empty_like(d)
    du[:, 1:-1] = 0.5 * (d[:, 2:] - d[:, :-2])
    du[:, 0] = d[:, 1] - d[:, 0]
    du[:, -1] = d[:, -1] - d[:, -2]
    dv[1:-1, :] = 0.5 * (d[2:, :] - d[:-2, :])
    dv[0, :] = d[1, :] - d[0, :]
    dv[-1, :] = d[-1, :] - d[-2, :]
    return GradientField(du, dv)


def depth_discontinuity_mask(
    depth: DepthMap, rel_jump: float = 0.04, rel_curv: float = 0.005, dilate: int = 2
) -> np.ndarray:
    """True near depth edges and creases, dilated by `dilate` px.

    Flags occlusion boundaries (a 4-neighbor differs by more than rel_jump
    of the pixel's depth, or is invalid) and surface creases / extreme
    grazing (the second difference along an axis exceeds rel_curv of the
    depth; planes at moderate slant stay well below). Image intensity is
    not a smooth function of the warp around either, so keyframes skip
    those pixels.
    """
    z = depth.data
    valid = depth.valid
    edge = ~valid
    for axis in (0, 1):
        zp = np.roll(z, 1, axis=axis)
        zm = np.roll(z, -1, axis=axis)
        vp = np.roll(valid, 1, axis=axis)
        vm = np.roll(valid, -1, axis=axis)
        both = valid & vp & vm
        edge |= valid & (~vp | ~vm)
        edge |= both & (np.abs(zp - z) > rel_jump * np.abs(z))
        edge |= both & (np.abs(zm - z) > rel_jump * np.abs(z))
        edge |= both & (np.abs(zp + zm - 2.0 * z) > rel_curv * np.abs(z))
    for _ in range(dilate):
        grown = edge.copy()
        for axis in (0, 1):
            for shift in (1, -1):
                grown |= np.roll(edge, shift, axis=axis)
        edge = grown
    return edge


def select_pixels(grad: GradientField, depth: DepthMap, threshold: float) -> np.ndarray:
    """Flat indices (row-major) of interior pixels worth tracking.

    A pixel qualifies when its max-over-channels gradient magnitude exceeds
    the threshold and its depth is valid. Border pixels are excluded: their
    one-sided gradients are unreliable and warps need interpolation margin.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    mag = grad.magnitude()
    if mag.shape != depth.data.shape:
        raise DimensionMismatch(f"gradient {mag.shape} vs depth {depth.data.shape}")
    keep = (mag > threshold) & depth.valid
    keep[0, :] = keep[-1, :] = False
    keep[:, 0] = keep[:, -1] = False
    return np.flatnonzero(keep)


# ---------------------------------------------------------------------------
# PNG I/O


def load_image_png(path) -> ImageBuffer:
    with PILImage.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif im.mode == "L":
            arr = np.asarray(im, dtype=np.float64) / 255.0
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return ImageBuffer(np.clip(arr, 0.0, 1.0))


def save_image_png(path, img: ImageBuffer, *, bits: int = 8) -> None:
    if bits == 8:
        arr = np.round(img.data * 255.0).astype(np.uint8)
        PILImage.fromarray(arr).save(path)
    elif bits == 16:
        if img.channels != 1:
            raise ValueError("16-bit PNG output is single-channel only")
        arr = np.round(img.data * 65535.0).astype(np.uint16)
        PILImage.fromarray(arr).save(path)
    else:
        raise ValueError("bits must be 8 or 16")


def load_depth_png(path, scale: float = TUM_DEPTH_SCALE) -> DepthMap:
    with PILImage.open(path) as im:
        raw = np.asarray(im, dtype=np.float64)
    return DepthMap(raw * scale, raw > 0)


def save_depth_png(path, depth: DepthMap, scale: float = TUM_DEPTH_SCALE) -> None:
    units = np.zeros(depth.data.shape, dtype=np.uint16)
    quant = np.round(depth.data[depth.valid] / scale)
    units[depth.valid] = np.clip(quant, 0, 65535).astype(np.uint16)
    PILImage.fromarray(units).save(path)
