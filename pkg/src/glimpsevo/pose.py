"""SE(3) poses and the 6-DoF Euler parameterization.

Euler convention is intrinsic Z-Y-X: R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
The 6-DoF vector ordering is (roll, pitch, yaw, x, y, z).  All pose math
runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Pose6DoF:
    roll: float
    pitch: float
    yaw: float
    x: float
    y: float
    z: float

    def as_array(self):
        return np.array([self.roll, self.pitch, self.yaw, self.x, self.y, self.z], dtype=np.float64)

    @staticmethod
    def from_array(v):
        return Pose6DoF(*(float(c) for c in v))


@dataclass(frozen=True)
class PoseSE3:
    """Rotation (3x3, orthonormal, det +1) and translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))

    @staticmethod
    def identity():
        return PoseSE3(np.eye(3), np.zeros(3))

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m):
        return PoseSE3(np.array(m[:3, :3]), np.array(m[:3, 3]))

    def inverse(self):
        rt = self.rotation.T
        return PoseSE3(rt, -rt @ self.translation)

    def compose(self, other):
        return PoseSE3(self.rotation @ other.rotation,
                       self.rotation @ other.translation + self.translation)

    def is_valid(self, tol=1e-6):
        r = self.rotation
        return (np.abs(r.T @ r - np.eye(3)).max() < tol
                and abs(np.linalg.det(r) - 1.0) < tol)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=np.float64)
    w = -((-a + np.pi) % (2.0 * np.pi) - np.pi)
    return w


def euler_to_matrix(roll, pitch, yaw):
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def matrix_to_euler(r):
    """Inverse of euler_to_matrix away from gimbal lock (|pitch| = pi/2)."""
    pitch = -np.arcsin(np.clip(r[2, 0], -1.0, 1.0))
    if abs(r[2, 0]) < 1.0 - 1e-10:
        roll = np.arctan2(r[2, 1], r[2, 2])
        yaw = np.arctan2(r[1, 0], r[0, 0])
    else:
        # gimbal lock: yaw and roll are coupled; pin roll to zero
        roll = 0.0
        yaw = np.arctan2(-r[0, 1], r[1, 1])
    return float(wrap_angle(roll)), float(wrap_angle(pitch)), float(wrap_angle(yaw))


def pose6dof_to_se3(p: Pose6DoF) -> PoseSE3:
    return PoseSE3(euler_to_matrix(p.roll, p.pitch, p.yaw), np.array([p.x, p.y, p.z]))


def se3_to_pose6dof(p: PoseSE3) -> Pose6DoF:
    roll, pitch, yaw = matrix_to_euler(p.rotation)
    t = p.translation
    return Pose6DoF(roll, pitch, yaw, float(t[0]), float(t[1]), float(t[2]))


def relative_pose(a: PoseSE3, b: PoseSE3) -> Pose6DoF:
    """6-DoF parameterization of a^-1 b: motion from a to b in a's frame."""
    return se3_to_pose6dof(a.inverse().compose(b))


def nearest_rotation(m):
    """Project a near-rotation matrix onto SO(3) (Frobenius-nearest)."""
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def rotation_angle(r):
    """Geodesic angle of a rotation matrix, in radians."""
    c = (np.trace(r) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))
