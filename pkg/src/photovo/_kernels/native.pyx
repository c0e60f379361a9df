# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels; semantics mirror numpy_backend exactly.

The fused residual/Jacobian/normal-equation loop and the SAD block matcher
dominate the pipeline's runtime, so they get C loops. Accumulation order is
sequential row-major, which keeps results deterministic (and within
floating-point reassociation distance of the numpy fallback).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, isfinite, rint, sqrt

cnp.import_array()

NAME = "native"

cdef double DEPTH_FLOOR = 1e-9
cdef double INF = float("inf")


cdef inline double _bilerp(const double[:, ::1] img, double u, double v, Py_ssize_t w, Py_ssize_t h) noexcept nogil:
    cdef Py_ssize_t u0 = <Py_ssize_t>floor(u)
    cdef Py_ssize_t v0 = <Py_ssize_t>floor(v)
    if u0 > w - 2:
        u0 = w - 2
    if v0 > h - 2:
        v0 = h - 2
    cdef double fu = u - u0
    cdef double fv = v - v0
    return ((1.0 - fu) * (1.0 - fv) * img[v0, u0]
            + fu * (1.0 - fv) * img[v0, u0 + 1]
            + (1.0 - fu) * fv * img[v0 + 1, u0]
            + fu * fv * img[v0 + 1, u0 + 1])


def bilinear_many(img, us, vs):
    cdef const double[:, ::1] im = np.ascontiguousarray(img, dtype=np.float64)
    us_arr = np.ascontiguousarray(np.atleast_1d(us), dtype=np.float64)
    vs_arr = np.ascontiguousarray(np.atleast_1d(vs), dtype=np.float64)
    cdef const double[::1] u = us_arr.ravel()
    cdef const double[::1] v = vs_arr.ravel()
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t h = im.shape[0]
    cdef Py_ssize_t w = im.shape[1]
    vals_arr = np.zeros(n, dtype=np.float64)
    valid_arr = np.zeros(n, dtype=bool)
    cdef double[::1] vals = vals_arr
    cdef cnp.uint8_t[::1] valid = valid_arr.view(np.uint8)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            if 0.0 <= u[i] <= w - 1 and 0.0 <= v[i] <= h - 1:
                vals[i] = _bilerp(im, u[i], v[i], w, h)
                valid[i] = 1
    return vals_arr.reshape(us_arr.shape), valid_arr.reshape(us_arr.shape)


def accumulate_system(points, ref_vals, grad_u, grad_v, sigma_d,
                      R, t, double fu, double fv, double cu, double cv,
                      track, double huber_k, double sigma_i, track_grad=None):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[::1] ref = np.ascontiguousarray(ref_vals, dtype=np.float64)
    cdef const double[::1] gu_kf = np.ascontiguousarray(grad_u, dtype=np.float64)
    cdef const double[::1] gv_kf = np.ascontiguousarray(grad_v, dtype=np.float64)
    cdef const double[::1] sig_d = np.ascontiguousarray(sigma_d, dtype=np.float64)
    cdef const double[:, ::1] rot = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[::1] trans = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[:, ::1] im = np.ascontiguousarray(track, dtype=np.float64)

    cdef bint exact = track_grad is not None
    cdef const double[:, ::1] tgu = im
    cdef const double[:, ::1] tgv = im
    if exact:
        tgu = np.ascontiguousarray(track_grad[0], dtype=np.float64)
        tgv = np.ascontiguousarray(track_grad[1], dtype=np.float64)

    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t h = im.shape[0]
    cdef Py_ssize_t w = im.shape[1]

    H_arr = np.zeros((6, 6), dtype=np.float64)
    b_arr = np.zeros(6, dtype=np.float64)
    cdef double[:, ::1] H = H_arr
    cdef double[::1] b = b_arr

    cdef double cost = 0.0
    cdef Py_ssize_t n_valid = 0, n_inlier = 0, n_behind = 0
    cdef Py_ssize_t i, j, k
    cdef double px, py, pz, qx, qy, qz, iz, u, v, val, e
    cdef double gu, gv, a, c, w0, w1, w2, j_depth, var, ivar, r, wgt, s
    cdef double sig_i2 = sigma_i * sigma_i
    cdef double J[6]

    with nogil:
        for i in range(n):
            px = pts[i, 0]; py = pts[i, 1]; pz = pts[i, 2]
            qx = rot[0, 0] * px + rot[0, 1] * py + rot[0, 2] * pz + trans[0]
            qy = rot[1, 0] * px + rot[1, 1] * py + rot[1, 2] * pz + trans[1]
            qz = rot[2, 0] * px + rot[2, 1] * py + rot[2, 2] * pz + trans[2]
            if qz <= DEPTH_FLOOR:
                n_behind += 1
                continue
            iz = 1.0 / qz
            u = fu * qx * iz + cu
            v = fv * qy * iz + cv
            if not (0.0 <= u <= w - 1 and 0.0 <= v <= h - 1):
                continue
            val = _bilerp(im, u, v, w, h)
            e = ref[i] - val
            if exact:
                gu = _bilerp(tgu, u, v, w, h)
                gv = _bilerp(tgv, u, v, w, h)
            else:
                gu = gu_kf[i]
                gv = gv_kf[i]
            a = fu * iz
            c = fv * iz
            w0 = gu * a
            w1 = gv * c
            w2 = -(w0 * qx + w1 * qy) * iz
            J[0] = -w0
            J[1] = -w1
            J[2] = -w2
            J[3] = w1 * qz - w2 * qy
            J[4] = w2 * qx - w0 * qz
            J[5] = w0 * qy - w1 * qx

            j_depth = -(w0 * (qx - trans[0]) + w1 * (qy - trans[1]) + w2 * (qz - trans[2])) / pz
            var = sig_i2 + (j_depth * sig_d[i]) * (j_depth * sig_d[i])
            ivar = 1.0 / var
            r = fabs(e) * sqrt(ivar)
            if r <= huber_k:
                wgt = 1.0
                n_inlier += 1
                cost += 0.5 * r * r
            else:
                wgt = huber_k / r
                cost += huber_k * (r - 0.5 * huber_k)
            s = wgt * ivar
            for j in range(6):
                b[j] += s * J[j] * e
                for k in range(j, 6):
                    H[j, k] += s * J[j] * J[k]
            n_valid += 1

        for j in range(6):
            for k in range(j):
                H[j, k] = H[k, j]

    return H_arr, b_arr, cost, int(n_valid), int(n_inlier), int(n_behind)


def sad_cost_volume(left, right, int window, int max_disp):
    cdef const double[:, ::1] L = np.ascontiguousarray(left, dtype=np.float64)
    cdef const double[:, ::1] Rm = np.ascontiguousarray(right, dtype=np.float64)
    cdef Py_ssize_t h = L.shape[0]
    cdef Py_ssize_t w = L.shape[1]
    cdef Py_ssize_t half = window // 2
    cost_arr = np.full((max_disp + 1, h, w), np.inf, dtype=np.float64)
    cdef double[:, :, ::1] cost = cost_arr
    integ_arr = np.zeros((h + 1, w + 1), dtype=np.float64)
    cdef double[:, ::1] integ = integ_arr
    cdef Py_ssize_t d, v, u
    cdef double s

    with nogil:
        for d in range(max_disp + 1):
            if w - d < window:
                break
            # Integral image of |L(v, u) - R(v, u - d)| over the overlap.
            for v in range(h):
                s = 0.0
                for u in range(d, w):
                    s += fabs(L[v, u] - Rm[v, u - d])
                    integ[v + 1, u + 1 - d] = integ[v, u + 1 - d] + s
            for v in range(half, h - half):
                for u in range(d + half, w - half):
                    cost[d, v, u] = (integ[v + half + 1, u + half + 1 - d]
                                     - integ[v - half, u + half + 1 - d]
                                     - integ[v + half + 1, u - half - d]
                                     + integ[v - half, u - half - d])
    return cost_arr


def block_match(left, right, int window, int max_disp):
    cost_arr = sad_cost_volume(left, right, window, max_disp)
    cdef const double[:, :, ::1] cost = cost_arr
    cdef Py_ssize_t n_d = cost.shape[0]
    cdef Py_ssize_t h = cost.shape[1]
    cdef Py_ssize_t w = cost.shape[2]

    disp_arr = np.zeros((h, w), dtype=np.float64)
    valid_arr = np.zeros((h, w), dtype=bool)
    dright_arr = np.full((h, w), np.nan, dtype=np.float64)
    cdef double[:, ::1] disp = disp_arr
    cdef cnp.uint8_t[:, ::1] valid = valid_arr.view(np.uint8)
    cdef double[:, ::1] dright = dright_arr

    cdef Py_ssize_t v, u, d, best, ur
    cdef double best_cost, second, c0, c2, denom, delta, dl, dr_val

    with nogil:
        # Right-reference winner-take-all for the consistency check.
        for v in range(h):
            for u in range(w):
                best_cost = INF
                for d in range(n_d):
                    if u + d < w and cost[d, v, u + d] < best_cost:
                        best_cost = cost[d, v, u + d]
                        dright[v, u] = <double>d

        for v in range(h):
            for u in range(w):
                best = 0
                best_cost = INF
                for d in range(n_d):
                    if cost[d, v, u] < best_cost:
                        best_cost = cost[d, v, u]
                        best = d
                if not isfinite(best_cost):
                    continue
                # Ambiguity rejection (exact-tie margin outside best +- 1).
                second = INF
                for d in range(n_d):
                    if d < best - 1 or d > best + 1:
                        if cost[d, v, u] < second:
                            second = cost[d, v, u]
                if isfinite(second):
                    if second - best_cost <= 1e-9:
                        continue
                elif n_d <= 1:
                    continue
                dl = <double>best
                if 0 < best < n_d - 1:
                    c0 = cost[best - 1, v, u]
                    c2 = cost[best + 1, v, u]
                    if isfinite(c0) and isfinite(c2):
                        denom = c0 - 2.0 * best_cost + c2
                        if denom > 1e-12:
                            delta = 0.5 * (c0 - c2) / denom
                            if delta > 0.5:
                                delta = 0.5
                            elif delta < -0.5:
                                delta = -0.5
                            dl += delta
                ur = u - <Py_ssize_t>rint(dl)
                if ur < 0:
                    ur = 0
                elif ur > w - 1:
                    ur = w - 1
                dr_val = dright[v, ur]
                if isfinite(dr_val) and fabs(dl - dr_val) <= 1.0:
                    disp[v, u] = dl
                    valid[v, u] = 1
    return disp_arr, valid_arr
