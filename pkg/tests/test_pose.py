import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from glimpsevo.pose import (Pose6DoF, PoseSE3, euler_to_matrix, matrix_to_euler, nearest_rotation,
                            pose6dof_to_se3, relative_pose, rotation_angle, se3_to_pose6dof, wrap_angle)

angles = st.floats(-np.pi / 2 + 0.1, np.pi / 2 - 0.1)
full_angles = st.floats(-3.0, 3.0)
meters = st.floats(-50.0, 50.0)


def test_identity_relative_pose():
    a = PoseSE3.identity()
    assert np.allclose(relative_pose(a, a).as_array(), 0.0)


def test_pure_translation():
    b = PoseSE3(np.eye(3), [0.0, 0.0, 2.0])
    p = relative_pose(PoseSE3.identity(), b)
    assert np.allclose(p.as_array(), [0, 0, 0, 0, 0, 2])


def test_yaw_then_forward_matches_matrix_oracle():
    yaw = np.radians(30.0)
    a = PoseSE3(euler_to_matrix(0, 0, yaw), np.zeros(3))
    # forward 1 m along a's heading (a's local x axis)
    b = PoseSE3(a.rotation, a.rotation @ np.array([1.0, 0.0, 0.0]))
    rel = relative_pose(a, b)
    # oracle: explicit 4x4 composition
    m = np.linalg.inv(a.matrix()) @ b.matrix()
    assert np.abs(pose6dof_to_se3(rel).matrix() - m).max() < 1e-12
    assert np.allclose(rel.as_array(), [0, 0, 0, 1, 0, 0], atol=1e-12)


def test_compose_back_reproduces_target():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = PoseSE3(euler_to_matrix(*rng.uniform(-1, 1, 3)), rng.uniform(-10, 10, 3))
        b = PoseSE3(euler_to_matrix(*rng.uniform(-1, 1, 3)), rng.uniform(-10, 10, 3))
        rel = pose6dof_to_se3(relative_pose(a, b))
        back = a.compose(rel)
        assert np.abs(back.rotation - b.rotation).max() < 1e-6
        assert np.abs(back.translation - b.translation).max() < 1e-6


@given(angles, angles, angles, meters, meters, meters)
@settings(max_examples=200, deadline=None)
def test_6dof_se3_roundtrip(roll, pitch, yaw, x, y, z):
    p = Pose6DoF(roll, pitch, yaw, x, y, z)
    q = se3_to_pose6dof(pose6dof_to_se3(p))
    assert np.abs(q.as_array() - p.as_array()).max() < 1e-6


@given(full_angles, full_angles, full_angles)
@settings(max_examples=100, deadline=None)
def test_rotation_roundtrip_away_from_gimbal(roll, pitch, yaw):
    r = euler_to_matrix(roll, pitch, yaw)
    r2 = euler_to_matrix(*matrix_to_euler(r))
    assert np.abs(r - r2).max() < 1e-9


def test_wrap_angle():
    assert wrap_angle(np.pi) == np.pi
    assert wrap_angle(-np.pi) == np.pi
    assert abs(wrap_angle(3 * np.pi) - np.pi) < 1e-12
    assert abs(wrap_angle(0.3) - 0.3) < 1e-15


def test_nearest_rotation_projection():
    rng = np.random.default_rng(0)
    r = euler_to_matrix(0.2, -0.3, 1.0)
    noisy = r + rng.normal(scale=1e-3, size=(3, 3))
    proj = nearest_rotation(noisy)
    assert np.abs(proj.T @ proj - np.eye(3)).max() < 1e-12
    assert np.linalg.det(proj) > 0
    assert np.abs(proj - r).max() < 5e-3


def test_rotation_angle():
    assert rotation_angle(np.eye(3)) == 0.0
    assert abs(rotation_angle(euler_to_matrix(0, 0, 0.5)) - 0.5) < 1e-12
