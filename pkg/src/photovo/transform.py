"""Appearance transforms: map an input image to its canonical appearance.

Every frame entering the tracker (keyframes included) passes through one of
these before pyramids are built, so the whole engine sees canonical
appearance. Outputs always share the input's dimensions and are clamped to
[0, 1]; the identity variant returns its input bit-identically.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .image import ImageBuffer, load_image_png

ZERO_GAIN_FLOOR = 1e-6


class MissingFrame(KeyError):
    pass


class ZeroGain(ValueError):
    pass


class AppearanceTransform:
    """Base interface: apply(img, frame_id) -> canonicalized image."""

    name = "base"

    def apply(self, img: ImageBuffer, frame_id: str | None = None) -> ImageBuffer:
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(AppearanceTransform):
    name: str = "identity"

    def apply(self, img: ImageBuffer, frame_id: str | None = None) -> ImageBuffer:
        return img


@dataclass(frozen=True)
class AffineCorrection(AppearanceTransform):
    """Inverts a per-pixel affine illumination model I' = a*I + b.

    For a sequence whose affine parameters vary over time, a schedule maps
    frame ids to (a, b); frames missing from the schedule (or all frames,
    when no schedule is given) use the constant gain/offset.
    """

    gain: float = 1.0
    offset: float = 0.0
    schedule: dict = None
    name: str = "affine"

    def params_for(self, frame_id: str | None) -> tuple[float, float]:
        if self.schedule and frame_id is not None and frame_id in self.schedule:
            return self.schedule[frame_id]
        return self.gain, self.offset

    def apply(self, img: ImageBuffer, frame_id: str | None = None) -> ImageBuffer:
        a, b = self.params_for(frame_id)
        if abs(a) < ZERO_GAIN_FLOOR:
            raise ZeroGain(f"gain {a} too close to zero")
        return ImageBuffer(np.clip((img.data - b) / a, 0.0, 1.0))


@dataclass(frozen=True)
class ExternalPrecomputed(AppearanceTransform):
    """Looks up externally transformed frames from a directory.

    The directory must contain one PNG per raw frame with an identical
    filename; outputs whose resolution differs from the engine's are
    resized and center-cropped to match.
    """

    directory: str = ""
    name: str = "external"

    def apply(self, img: ImageBuffer, frame_id: str | None = None) -> ImageBuffer:
        if frame_id is None:
            raise MissingFrame("external transform needs a frame id")
        path = os.path.join(self.directory, f"{frame_id}.png")
        if not os.path.isfile(path):
            raise MissingFrame(f"no transformed frame at {path}")
        out = load_image_png(path)
        if (out.height, out.width) != (img.height, img.width):
            out = resize_center_crop(out, img.width, img.height)
        return out


def resize_center_crop(img: ImageBuffer, width: int, height: int) -> ImageBuffer:
    """Scale so both target sides are covered, then crop centrally."""
    scale = max(width / img.width, height / img.height)
    new_w = max(int(round(img.width * scale)), width)
    new_h = max(int(round(img.height * scale)), height)
    arr = np.round(img.data * 255.0).astype(np.uint8)
    mode = "RGB" if img.channels == 3 else "L"
    resized = PILImage.fromarray(arr, mode=mode).resize((new_w, new_h), PILImage.BILINEAR)
    data = np.asarray(resized, dtype=np.float64) / 255.0
    u0 = (new_w - width) // 2
    v0 = (new_h - height) // 2
    return ImageBuffer(np.clip(data[v0 : v0 + height, u0 : u0 + width], 0.0, 1.0))


def load_affine_schedule(path) -> dict:
    """Parse 'frame_id a b' lines into a schedule for AffineCorrection."""
    schedule = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            frame_id, a, b = line.split()
            schedule[frame_id] = (float(a), float(b))
    return schedule


def parse_transform_spec(spec: str) -> AppearanceTransform:
    """CLI transform syntax.

    identity                  -> Identity
    affine:<a>,<b>            -> fixed AffineCorrection
    affine-file:<path>        -> AffineCorrection driven by a schedule file
    external:<dir>            -> ExternalPrecomputed
    """
    if spec == "identity":
        return Identity()
    if spec.startswith("affine:"):
        a, b = spec[len("affine:") :].split(",")
        return AffineCorrection(gain=float(a), offset=float(b))
    if spec.startswith("affine-file:"):
        return AffineCorrection(schedule=load_affine_schedule(spec[len("affine-file:") :]))
    if spec.startswith("external:"):
        return ExternalPrecomputed(directory=spec[len("external:") :])
    raise ValueError(f"unknown transform spec {spec!r}")
