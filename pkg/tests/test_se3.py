"""Rigid-transform machinery: examples, round trips, group axioms, Jacobian."""

import numpy as np
import pytest

from photovo.se3 import (
    Pose,
    act,
    compose,
    exp_se3,
    inverse,
    log_se3,
    point_pose_jacobian,
    quat_from_rotation,
    rotation_angle,
    rotation_from_quat,
)

RNG = np.random.default_rng(42)


def random_twist(rng, scale=2.0):
    xi = rng.normal(size=6)
    return xi / np.linalg.norm(xi) * rng.uniform(0.0, scale)


def random_pose(rng, scale=2.0):
    return exp_se3(random_twist(rng, scale))


def test_exp_identity():
    P = exp_se3(np.zeros(6))
    np.testing.assert_allclose(P.rotation, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(P.translation, np.zeros(3), atol=1e-15)


def test_exp_pure_translation():
    P = exp_se3([1.0, 2.0, 3.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(P.rotation, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(P.translation, [1.0, 2.0, 3.0], atol=1e-15)


def test_exp_yaw_90():
    # Hand evaluation of Rodrigues' formula for a 90 degree z rotation.
    P = exp_se3([0, 0, 0, 0, 0, np.pi / 2])
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(P.rotation, expected, atol=1e-12)
    np.testing.assert_allclose(P.translation, np.zeros(3), atol=1e-12)


def test_log_identity_and_translation():
    np.testing.assert_allclose(log_se3(Pose.identity()), np.zeros(6), atol=1e-15)
    np.testing.assert_allclose(
        log_se3(Pose(translation=[1.0, 2.0, 3.0])), [1, 2, 3, 0, 0, 0], atol=1e-15
    )


def test_log_yaw_90_roundtrip():
    xi = np.array([0, 0, 0, 0, 0, np.pi / 2])
    np.testing.assert_allclose(log_se3(exp_se3(xi)), xi, atol=1e-12)


def test_log_exp_roundtrip_1000():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        xi = random_twist(rng, scale=2.0)
        np.testing.assert_allclose(log_se3(exp_se3(xi)), xi, atol=1e-9)


def test_exp_log_roundtrip_small_angles():
    rng = np.random.default_rng(2)
    for scale in (1e-12, 1e-9, 1e-7):
        xi = random_twist(rng) * scale
        np.testing.assert_allclose(log_se3(exp_se3(xi)), xi, atol=1e-15)


def test_log_near_pi_degenerate_flag():
    axis = np.array([1.0, 2.0, -1.0])
    axis /= np.linalg.norm(axis)
    P = exp_se3(np.concatenate([[0.1, -0.2, 0.3], axis * (np.pi - 1e-8)]))
    xi, degenerate = log_se3(P, return_degenerate_flag=True)
    assert degenerate
    P2 = exp_se3(xi)
    np.testing.assert_allclose(P2.rotation, P.rotation, atol=1e-6)


def test_log_rotation_norm_in_0_pi():
    rng = np.random.default_rng(3)
    for _ in range(100):
        xi = random_twist(rng, scale=3.0)
        back = log_se3(exp_se3(xi))
        assert 0.0 <= np.linalg.norm(back[3:]) <= np.pi + 1e-12


def test_compose_inverse_identity():
    rng = np.random.default_rng(4)
    for _ in range(50):
        P = random_pose(rng)
        I = compose(P, inverse(P))
        np.testing.assert_allclose(I.rotation, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(I.translation, np.zeros(3), atol=1e-9)


def test_group_axioms():
    rng = np.random.default_rng(5)
    for _ in range(200):
        A, B, C = (random_pose(rng) for _ in range(3))
        left = compose(compose(A, B), C)
        right = compose(A, compose(B, C))
        np.testing.assert_allclose(left.matrix(), right.matrix(), atol=1e-9)
        ab_inv = inverse(compose(A, B))
        ba = compose(inverse(B), inverse(A))
        np.testing.assert_allclose(ab_inv.matrix(), ba.matrix(), atol=1e-9)


def test_act_examples():
    p = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(act(Pose.identity(), p), p, atol=1e-15)
    yaw = exp_se3([0, 0, 0, 0, 0, np.pi / 2])
    np.testing.assert_allclose(act(yaw, p), [0.0, 1.0, 0.0], atol=1e-12)
    rng = np.random.default_rng(6)
    for _ in range(50):
        P = random_pose(rng)
        q = rng.normal(size=3)
        np.testing.assert_allclose(act(inverse(P), act(P, q)), q, atol=1e-9)


def test_act_compose_consistency():
    rng = np.random.default_rng(7)
    for _ in range(100):
        A, B = random_pose(rng), random_pose(rng)
        p = rng.normal(size=3)
        np.testing.assert_allclose(act(compose(A, B), p), act(A, act(B, p)), atol=1e-9)


def test_act_batch():
    rng = np.random.default_rng(8)
    P = random_pose(rng)
    pts = rng.normal(size=(17, 3))
    batch = act(P, pts)
    for i in range(17):
        np.testing.assert_allclose(batch[i], act(P, pts[i]), atol=1e-12)


def test_rotation_stays_orthonormal_after_many_compositions():
    rng = np.random.default_rng(9)
    P = Pose.identity()
    step = exp_se3([0.01, -0.02, 0.015, 0.03, 0.01, -0.02])
    for _ in range(5000):
        P = compose(step, P)
    drift = np.abs(P.rotation @ P.rotation.T - np.eye(3)).max()
    assert drift < 1e-9
    assert abs(np.linalg.det(P.rotation) - 1.0) < 1e-9


# --- point-pose Jacobian -----------------------------------------------------


def jacobian_fd(P, p, step=1e-6):
    """Central finite differences of act(exp(eps) * P, p) over the twist."""
    J = np.zeros((3, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = step
        plus = act(compose(exp_se3(e), P), p)
        minus = act(compose(exp_se3(-e), P), p)
        J[:, k] = (plus - minus) / (2 * step)
    return J


def test_point_pose_jacobian_example():
    # Frozen from the finite-difference oracle at P = I, p = (0, 0, 1).
    J = point_pose_jacobian(Pose.identity(), [0.0, 0.0, 1.0])
    expected = np.array(
        [
            [1, 0, 0, 0, 1, 0],
            [0, 1, 0, -1, 0, 0],
            [0, 0, 1, 0, 0, 0],
        ],
        dtype=float,
    )
    np.testing.assert_allclose(J, expected, atol=1e-12)
    np.testing.assert_allclose(jacobian_fd(Pose.identity(), np.array([0.0, 0.0, 1.0])), expected, atol=1e-6)


def test_point_pose_jacobian_matches_fd():
    rng = np.random.default_rng(10)
    for _ in range(100):
        P = random_pose(rng)
        p = rng.normal(size=3) * 2.0
        np.testing.assert_allclose(point_pose_jacobian(P, p), jacobian_fd(P, p), atol=1e-6)


def test_point_pose_jacobian_translation_block():
    rng = np.random.default_rng(11)
    for _ in range(20):
        J = point_pose_jacobian(random_pose(rng), rng.normal(size=3))
        np.testing.assert_allclose(J[:, :3], np.eye(3), atol=1e-15)


def test_lie_suite_runtime():
    import time

    rng = np.random.default_rng(12)
    start = time.perf_counter()
    for _ in range(1000):
        xi = random_twist(rng, scale=2.0)
        assert np.allclose(log_se3(exp_se3(xi)), xi, atol=1e-9)
    assert time.perf_counter() - start < 1.0


# --- quaternions -------------------------------------------------------------


def test_quaternion_roundtrip():
    rng = np.random.default_rng(13)
    for _ in range(200):
        R = random_pose(rng, scale=3.0).rotation
        q = quat_from_rotation(R)
        assert abs(np.linalg.norm(q) - 1.0) < 1e-12
        np.testing.assert_allclose(rotation_from_quat(q), R, atol=1e-12)


def test_rotation_angle():
    assert rotation_angle(Pose.identity()) == pytest.approx(0.0)
    assert rotation_angle(exp_se3([0, 0, 0, 0, 0, 0.3])) == pytest.approx(0.3, abs=1e-12)
