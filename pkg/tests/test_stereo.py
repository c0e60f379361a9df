"""Block matching: constructed shifts, degenerate pairs, conversions."""

import numpy as np
import pytest

from photovo.camera import CameraIntrinsics, StereoModel
from photovo.image import DimensionMismatch, ImageBuffer
from photovo.stereo import block_match_disparity, disparity_to_depth, stereo_depth_noise_k

K = CameraIntrinsics(fu=120.0, fv=120.0, cu=63.5, cv=47.5, width=128, height=96)
S = StereoModel(intrinsics=K, baseline=0.4)


def textured(w=128, h=96, seed=0):
    """Band-limited random texture (smooth enough for sub-pixel fits)."""
    rng = np.random.default_rng(seed)
    base = rng.random((h // 4 + 2, w // 4 + 2))
    up = np.kron(base, np.ones((4, 4)))[:h, :w]
    # Light smoothing via separable binomial passes.
    for _ in range(2):
        up = 0.25 * (np.roll(up, 1, 0) + np.roll(up, -1, 0) + np.roll(up, 1, 1) + np.roll(up, -1, 1))
    return np.clip(up, 0.0, 1.0)


def test_integer_shift_recovered():
    left = textured()
    right = np.roll(left, -4, axis=1)  # true disparity 4 everywhere
    disp = block_match_disparity(ImageBuffer(left), ImageBuffer(right), S, window=7, max_disp=16)
    assert disp.valid.sum() > 2000
    err = np.abs(disp.data[disp.valid] - 4.0)
    assert (err <= 0.5).mean() >= 0.95


def test_shift_zero_invalid_by_container():
    # Disparity 0 matches are rejected by the positivity invariant.
    left = textured(seed=1)
    right = left.copy()
    disp = block_match_disparity(ImageBuffer(left), ImageBuffer(right), S, window=7, max_disp=16)
    assert not disp.valid.any()


def test_textureless_pair_empty_mask():
    flat = ImageBuffer(np.full((96, 128), 0.5))
    disp = block_match_disparity(flat, flat, S, window=7, max_disp=16)
    assert not disp.valid.any()


def test_max_disp_zero_all_invalid():
    left = textured(seed=2)
    disp = block_match_disparity(ImageBuffer(left), ImageBuffer(np.roll(left, -3, 1)), S, window=7, max_disp=0)
    assert not disp.valid.any()


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        block_match_disparity(ImageBuffer(np.zeros((10, 10))), ImageBuffer(np.zeros((10, 12))), S)


def test_window_validation():
    img = ImageBuffer(textured())
    with pytest.raises(ValueError):
        block_match_disparity(img, img, S, window=4)
    with pytest.raises(ValueError):
        block_match_disparity(img, img, S, window=1)


def test_subpixel_on_smooth_shift():
    # A smooth sinusoidal texture shifted by a non-integer amount; the
    # parabola fit should land within half a pixel of the truth.
    h, w = 64, 128
    u = np.arange(w, dtype=np.float64)
    shift = 5.0
    row = 0.5 + 0.45 * np.sin(2 * np.pi * u / 17.0)
    left = np.tile(row, (h, 1))
    row_r = 0.5 + 0.45 * np.sin(2 * np.pi * (u + shift) / 17.0)
    right = np.tile(row_r, (h, 1))
    # Vertical modulation breaks the LR ambiguity of a pure 1-D pattern.
    mod = 0.08 * np.sin(2 * np.pi * np.arange(h) / 11.0)[:, None]
    left = np.clip(left + mod, 0, 1)
    right = np.clip(right + mod, 0, 1)
    disp = block_match_disparity(ImageBuffer(left), ImageBuffer(right), S, window=7, max_disp=16)
    assert disp.valid.sum() > 500
    err = np.abs(disp.data[disp.valid] - shift)
    assert np.median(err) <= 0.5


def test_disparity_to_depth():
    data = np.zeros((4, 4))
    data[1, 1] = 24.0  # depth = 120*0.4/24 = 2m
    valid = data > 0
    from photovo.image import DisparityMap

    depth = disparity_to_depth(DisparityMap(data, valid), S)
    assert depth.data[1, 1] == pytest.approx(2.0)
    assert depth.valid.sum() == 1


def test_stereo_noise_model():
    k = stereo_depth_noise_k(S, disparity_sigma=0.5)
    # sigma_z at z: k z^2 must equal z^2 sigma_d / (fu b)
    assert k * 4.0 == pytest.approx(4.0 * 0.5 / (120.0 * 0.4))
