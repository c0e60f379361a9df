"""Pure-numpy implementations of the hot kernels.

These are the reference semantics; the compiled extension in native.pyx
mirrors them loop-for-loop. Everything is float64 and deterministic.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

DEPTH_FLOOR = 1e-9


def bilinear_many(img: np.ndarray, us: np.ndarray, vs: np.ndarray):
    """Bilinear samples at continuous coordinates.

    Returns (values, valid); out-of-domain samples get value 0 and
    valid=False. Exact at integer coordinates including the far edges.
    """
    h, w = img.shape
    us = np.asarray(us, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    valid = (us >= 0.0) & (us <= w - 1) & (vs >= 0.0) & (vs <= h - 1)
    u = np.where(valid, us, 0.0)
    v = np.where(valid, vs, 0.0)
    u0 = np.minimum(np.floor(u).astype(np.intp), w - 2)
    v0 = np.minimum(np.floor(v).astype(np.intp), h - 2)
    fu = u - u0
    fv = v - v0
    vals = (
        (1 - fu) * (1 - fv) * img[v0, u0]
        + fu * (1 - fv) * img[v0, u0 + 1]
        + (1 - fu) * fv * img[v0 + 1, u0]
        + fu * fv * img[v0 + 1, u0 + 1]
    )
    return np.where(valid, vals, 0.0), valid


def accumulate_system(
    points: np.ndarray,
    ref_vals: np.ndarray,
    grad_u: np.ndarray,
    grad_v: np.ndarray,
    sigma_d: np.ndarray,
    R: np.ndarray,
    t: np.ndarray,
    fu: float,
    fv: float,
    cu: float,
    cv: float,
    track: np.ndarray,
    huber_k: float,
    sigma_i: float,
    track_grad: tuple | None = None,
):
    """One IRLS linearization pass over the keyframe's selected pixels.

    Warps each reference point by (R, t), samples the tracking image,
    forms the residual e = ref - sample and its 1x6 pose Jacobian under a
    left-multiplicative twist perturbation, then accumulates the
    Huber-weighted normal equations. The per-pixel variance is
    sigma_i^2 + (J_depth * sigma_d)^2 with J_depth the derivative of the
    residual along the reference ray, evaluated at the current warp.

    track_grad, when given as (gu_img, gv_img), samples the tracking-image
    gradients at the warped coordinate instead of using the precomputed
    keyframe gradients (the exact, non-approximated Jacobian).

    Returns (H, b, cost, n_valid, n_inlier, n_behind); H dxi = -b steps
    toward the minimum and cost is the Huber objective of the normalized
    residuals.
    """
    h_img, w_img = track.shape
    q = points @ R.T + t
    qx, qy, qz = q[:, 0], q[:, 1], q[:, 2]
    in_front = qz > DEPTH_FLOOR
    n_behind = int(points.shape[0] - np.count_nonzero(in_front))
    with np.errstate(divide="ignore", invalid="ignore"):
        iz = np.where(in_front, 1.0 / qz, 0.0)
    u = fu * qx * iz + cu
    v = fv * qy * iz + cv
    inb = in_front & (u >= 0.0) & (u <= w_img - 1) & (v >= 0.0) & (v <= h_img - 1)
    if not inb.any():
        return np.zeros((6, 6)), np.zeros(6), 0.0, 0, 0, n_behind

    vals, _ = bilinear_many(track, u[inb], v[inb])
    e = ref_vals[inb] - vals

    if track_grad is None:
        gu = grad_u[inb]
        gv = grad_v[inb]
    else:
        gu, _ = bilinear_many(track_grad[0], u[inb], v[inb])
        gv, _ = bilinear_many(track_grad[1], u[inb], v[inb])

    qxs, qys, qzs = qx[inb], qy[inb], qz[inb]
    izs = iz[inb]
    a = fu * izs
    c = fv * izs
    w0 = gu * a
    w1 = gv * c
    w2 = -(w0 * qxs + w1 * qys) * izs
    # J = -g Jproj [I | -skew(q)]: translation block -w, rotation block
    # +w x-product structure (the two minus signs cancel).
    J = np.empty((e.shape[0], 6))
    J[:, 0] = -w0
    J[:, 1] = -w1
    J[:, 2] = -w2
    J[:, 3] = w1 * qzs - w2 * qys
    J[:, 4] = w2 * qxs - w0 * qzs
    J[:, 5] = w0 * qys - w1 * qxs

    ipz = 1.0 / points[inb, 2]
    j_depth = -(
        w0 * (qxs - t[0]) + w1 * (qys - t[1]) + w2 * (qzs - t[2])
    ) * ipz
    var = sigma_i * sigma_i + (j_depth * sigma_d[inb]) ** 2
    ivar = 1.0 / var
    r = np.abs(e) * np.sqrt(ivar)
    inlier = r <= huber_k
    weight = np.where(inlier, 1.0, huber_k / np.maximum(r, 1e-300))

    scale = weight * ivar
    H = (J * scale[:, None]).T @ J
    b = J.T @ (scale * e)
    cost = float(np.sum(np.where(inlier, 0.5 * r * r, huber_k * (r - 0.5 * huber_k))))
    return H, b, cost, int(e.shape[0]), int(np.count_nonzero(inlier)), n_behind


def _box_sum(a: np.ndarray, half: int) -> np.ndarray:
    """Sum over (2*half+1)^2 windows; only fully-interior outputs are used."""
    win = 2 * half + 1
    c = np.cumsum(np.cumsum(a, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    out = np.full(a.shape, np.inf)
    h, w = a.shape
    if h < win or w < win:
        return out
    sums = c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]
    out[half : h - half, half : w - half] = sums
    return out


def sad_cost_volume(left: np.ndarray, right: np.ndarray, window: int, max_disp: int) -> np.ndarray:
    """cost[d, v, u] = windowed SAD of left at (u, v) vs right at (u - d, v).

    Entries where the window or the shifted pixel fall outside either image
    are +inf.
    """
    h, w = left.shape
    half = window // 2
    cost = np.full((max_disp + 1, h, w), np.inf)
    for d in range(max_disp + 1):
        if w - d < window:
            break
        ad = np.abs(left[:, d:] - right[:, : w - d])
        cost[d, :, d:] = _box_sum(ad, half)
    return cost


def block_match(left: np.ndarray, right: np.ndarray, window: int, max_disp: int):
    """SAD block matching with sub-pixel parabola refinement and LR check.

    Returns (disparity, valid). Ambiguous pixels (cost ties, e.g. constant
    images), LR-inconsistent pixels (tolerance 1 px), and window/search
    border pixels are invalid.
    """
    cost = sad_cost_volume(left, right, window, max_disp)
    n_d = cost.shape[0]
    best = np.argmin(cost, axis=0)
    h, w = left.shape
    vv, uu = np.mgrid[0:h, 0:w]
    best_cost = cost[best, vv, uu]
    valid = np.isfinite(best_cost)

    # Ambiguity rejection: a distinct runner-up (excluding the immediate
    # neighbors of the minimum) must cost strictly more.
    masked = cost.copy()
    for off in (-1, 0, 1):
        idx = np.clip(best + off, 0, n_d - 1)
        masked[idx, vv, uu] = np.inf
    second = masked.min(axis=0)
    with np.errstate(invalid="ignore"):
        valid &= np.where(np.isfinite(second), second - best_cost > 1e-9, n_d > 1)

    # Sub-pixel parabola over the two neighboring integer costs.
    disp = best.astype(np.float64)
    has_nb = (best > 0) & (best < n_d - 1) & valid
    c0 = cost[np.maximum(best - 1, 0), vv, uu]
    c2 = cost[np.minimum(best + 1, n_d - 1), vv, uu]
    nb_ok = has_nb & np.isfinite(c0) & np.isfinite(c2)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.where(nb_ok, c0 - 2.0 * best_cost + c2, 0.0)
        delta = np.where(nb_ok & (denom > 1e-12), 0.5 * (c0 - c2) / np.maximum(denom, 1e-300), 0.0)
    disp = disp + np.clip(delta, -0.5, 0.5)

    # Left-right consistency: match with the right image as reference and
    # demand agreement within 1 px.
    d_right = _right_reference_best(cost)
    ur = np.clip(uu - np.rint(disp).astype(np.intp), 0, w - 1)
    dr = d_right[vv, ur]
    valid &= np.isfinite(dr) & (np.abs(disp - dr) <= 1.0)
    disp = np.where(valid, disp, 0.0)
    return disp, valid


def _right_reference_best(cost: np.ndarray) -> np.ndarray:
    """argmin_d cost[d, v, u_r + d] per right-image pixel; inf-only -> nan."""
    n_d, h, w = cost.shape
    best = np.full((h, w), np.inf)
    bestd = np.full((h, w), np.nan)
    for d in range(n_d):
        sl = np.full((h, w), np.inf)
        sl[:, : w - d] = cost[d, :, d:]
        take = sl < best
        best = np.where(take, sl, best)
        bestd = np.where(take, float(d), bestd)
    return bestd
