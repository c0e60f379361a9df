"""Shared test helpers."""

from dataclasses import replace

import numpy as np


def corrupt_keyframe_residuals(kf, fraction=0.2, magnitude=0.5, seed=99):
    """Gross zero-mean outliers on a fraction of the reference intensities.

    Corrupting the keyframe's reference values (unclipped) makes exactly
    that fraction of residuals outliers with symmetric signs, which is the
    clean way to probe the robust loss: corrupting image pixels in [0, 1]
    would clip and inject a net brightness shift instead.
    """
    rng = np.random.default_rng(seed)
    levels = []
    for lv in kf.levels:
        ref = lv.ref_vals.copy()
        hit = rng.random(ref.shape[0]) < fraction
        sign = np.where(rng.random(ref.shape[0]) < 0.5, -1.0, 1.0)
        levels.append(replace(lv, ref_vals=ref + hit * sign * magnitude))
    return replace(kf, levels=tuple(levels))
