"""Tracker and pipeline configuration, config-file parsing, and hashing.

The config file is INI-style (key = value, one section per subsystem);
every report embeds a hash of the effective configuration so runs are
attributable.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace


@dataclass(frozen=True)
class TrackerConfig:
    pyramid_levels: int = 4
    # Huber threshold on normalized residuals |e|/sigma, in sigma units.
    # 1.345 is the classical 95%-efficiency constant; pixels within the
    # band count as inliers (weight 1).
    huber_delta: float = 1.345
    max_iterations_per_level: int = 30
    step_norm_tolerance: float = 1e-8
    relative_cost_tolerance: float = 1e-6
    gradient_threshold: float = 0.02  # intensity per pixel
    image_noise_sigma: float = 0.02  # intensity
    depth_noise_k: float = 0.0025  # sigma_z = k * z^2, 1/m
    min_inlier_ratio: float = 0.25
    min_selected_pixels: int = 200
    use_keyframe_gradients: bool = True  # small-motion Jacobian approximation
    # Binomial smoothing passes applied to the luminance image before the
    # pyramid is built (keyframe and tracking sides alike). Zero by
    # default: smoothing trades gradient signal for interpolation bias and
    # only pays off on very noisy or aliased input.
    pre_smoothing: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "pre_smoothing":
                if v < 0:
                    raise ValueError("pre_smoothing must be >= 0")
            elif f.type in ("int", "float") and v <= 0:
                raise ValueError(f"{f.name} must be positive, got {v}")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")

    @property
    def huber_k(self) -> float:
        """Huber threshold in normalized-residual (sigma) units."""
        return self.huber_delta


@dataclass(frozen=True)
class KeyframeConfig:
    translation_threshold: float = 0.25  # meters (desk-scale profile)
    rotation_threshold_deg: float = 10.0
    # Relocalization only re-targets a strictly nearer keyframe; the margin
    # (fraction of the translation threshold) prevents boundary oscillation.
    switch_hysteresis: float = 0.01

    def __post_init__(self):
        if self.translation_threshold <= 0 or self.rotation_threshold_deg <= 0:
            raise ValueError("keyframe thresholds must be positive")


# Profile matching car-scale sequences (long baselines, gentle rotations).
KITTI_SCALE_PROFILE = KeyframeConfig(translation_threshold=3.0, rotation_threshold_deg=5.0)


@dataclass(frozen=True)
class PipelineConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    keyframes: KeyframeConfig = field(default_factory=KeyframeConfig)
    depth_scale: float = 1.0 / 5000.0  # 16-bit depth PNG unit, TUM convention
    stereo_window: int = 7
    stereo_max_disparity: int = 64
    stereo_disparity_sigma: float = 0.5  # pixels, for the depth noise model


_SECTIONS = {"tracker": TrackerConfig, "keyframes": KeyframeConfig}


def load_config(path=None) -> PipelineConfig:
    """Defaults overlaid with an optional INI file."""
    cfg = PipelineConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    updates = {}
    for section, cls in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        kwargs = {}
        valid = {f.name: f for f in fields(cls)}
        for key, raw in parser.items(section):
            if key not in valid:
                raise ValueError(f"unknown config key [{section}] {key}")
            kwargs[key] = _parse_value(valid[key].type, raw)
        updates[section] = replace(getattr(cfg, section), **kwargs)
    if parser.has_section("pipeline"):
        valid = {f.name: f for f in fields(PipelineConfig) if f.name not in _SECTIONS}
        for key, raw in parser.items("pipeline"):
            if key not in valid:
                raise ValueError(f"unknown config key [pipeline] {key}")
            updates[key] = _parse_value(valid[key].type, raw)
    return replace(cfg, **updates)


def _parse_value(type_name: str, raw: str):
    raw = raw.strip()
    if type_name == "int":
        return int(raw)
    if type_name == "float":
        return float(raw)
    if type_name == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


def config_hash(cfg: PipelineConfig) -> str:
    """Stable 12-hex digest of every effective config value."""
    parts = []
    for name, sub in (("tracker", cfg.tracker), ("keyframes", cfg.keyframes)):
        for f in sorted(fields(sub), key=lambda f: f.name):
            parts.append(f"{name}.{f.name}={getattr(sub, f.name)!r}")
    for f in sorted(fields(cfg), key=lambda f: f.name):
        if f.name not in _SECTIONS:
            parts.append(f"pipeline.{f.name}={getattr(cfg, f.name)!r}")
    digest = hashlib.sha256("\n".join(parts).encode()).hexdigest()
    return digest[:12]
