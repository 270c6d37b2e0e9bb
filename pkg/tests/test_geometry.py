"""Rotation, pose, and angle utilities."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from payloadsim.geometry import (Pose, angles_from_direction,
                                 direction_from_angles, matrix_to_rpy,
                                 normalize, rotation_zyx, wrap_angle)


def test_rotation_zyx_matches_scipy_euler():
    rng = np.random.default_rng(0)
    for _ in range(200):
        roll, pitch, yaw = rng.uniform(-np.pi, np.pi, size=3)
        got = rotation_zyx(roll, pitch, yaw)
        want = Rotation.from_euler("ZYX", [yaw, pitch, roll]).as_matrix()
        assert np.allclose(got, want, atol=1e-12)


def test_rotation_zyx_identity_and_cardinal_yaw():
    assert np.allclose(rotation_zyx(0.0, 0.0, 0.0), np.eye(3))
    r = rotation_zyx(0.0, 0.0, np.pi / 2)
    assert np.allclose(r @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0])


def test_positive_pitch_tilts_forward_axis_down():
    fwd = rotation_zyx(0.0, 0.3, 0.0) @ np.array([1.0, 0.0, 0.0])
    assert fwd[2] < 0.0


def test_matrix_to_rpy_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(300):
        roll, yaw = rng.uniform(-np.pi, np.pi, size=2)
        pitch = rng.uniform(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3)
        rpy = matrix_to_rpy(rotation_zyx(roll, pitch, yaw))
        assert np.allclose(rpy, [roll, pitch, yaw], atol=1e-9)


def test_matrix_to_rpy_gimbal_lock_folds_roll_into_yaw():
    r = rotation_zyx(0.4, np.pi / 2, 0.9)
    rpy = matrix_to_rpy(r)
    assert rpy[0] == 0.0
    assert np.allclose(rotation_zyx(*rpy), r, atol=1e-9)


def test_pose_compose_matches_manual_chain():
    rng = np.random.default_rng(2)
    for _ in range(100):
        a = Pose(rng.normal(size=3), rng.uniform(-1.0, 1.0, size=3))
        b = Pose(rng.normal(size=3), rng.uniform(-1.0, 1.0, size=3))
        c = a.compose(b)
        assert np.allclose(c.position, a.position + a.rotation() @ b.position)
        assert np.allclose(c.rotation(), a.rotation() @ b.rotation(), atol=1e-12)


def test_pose_transform_round_trip():
    rng = np.random.default_rng(3)
    pose = Pose(rng.normal(size=3), rng.uniform(-1.0, 1.0, size=3))
    pts = rng.normal(size=(50, 3))
    back = pose.inverse_transform_points(pose.transform_points(pts))
    assert np.allclose(back, pts, atol=1e-12)


def test_pose_copy_is_independent():
    pose = Pose(np.array([1.0, 2.0, 3.0]), np.array([0.0, 0.0, 0.5]))
    dup = pose.copy()
    dup.position[0] = 9.0
    dup.rpy[2] = 1.5
    assert pose.position[0] == 1.0
    assert pose.yaw == 0.5


def test_direction_from_angles_cardinals():
    assert np.allclose(direction_from_angles(0.0, 0.0), [1.0, 0.0, 0.0])
    assert np.allclose(direction_from_angles(np.pi / 2, 0.0), [0.0, 1.0, 0.0],
                       atol=1e-12)
    assert np.allclose(direction_from_angles(0.0, np.pi / 2), [0.0, 0.0, 1.0],
                       atol=1e-12)


def test_angles_direction_round_trip():
    rng = np.random.default_rng(4)
    az = rng.uniform(-np.pi, np.pi, size=200)
    el = rng.uniform(-np.pi / 2 + 1e-6, np.pi / 2 - 1e-6, size=200)
    dirs = direction_from_angles(az, el)
    assert np.allclose(np.linalg.norm(dirs, axis=-1), 1.0)
    az2, el2 = angles_from_direction(dirs)
    assert np.allclose(az2, az, atol=1e-9)
    assert np.allclose(el2, el, atol=1e-9)


def test_normalize_unit_and_zero_error():
    v = normalize([3.0, 0.0, 4.0])
    assert np.allclose(v, [0.6, 0.0, 0.8])
    with pytest.raises(ValueError):
        normalize([0.0, 0.0, 0.0])


def test_wrap_angle_range_and_periodicity():
    rng = np.random.default_rng(5)
    a = rng.uniform(-40.0, 40.0, size=500)
    w = wrap_angle(a)
    assert np.all(w > -np.pi)
    assert np.all(w <= np.pi)
    assert np.allclose(wrap_angle(a + 6 * np.pi), w, atol=1e-9)
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(0.0) == pytest.approx(0.0)
