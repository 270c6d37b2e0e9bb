"""Rigid-body poses and frustum math.

Conventions used everywhere in the package: right-handed frame with
x forward, y left, z up. Euler angles are intrinsic Z-Y-X
(yaw about z, then pitch about y, then roll about x). With this
convention a positive pitch tilts the forward axis below the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def rotation_zyx(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """3x3 rotation matrix for intrinsic Z-Y-X Euler angles."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


@dataclass
class Pose:
    """6-DoF pose: position in meters plus roll/pitch/yaw in radians."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.rpy = np.asarray(self.rpy, dtype=float).reshape(3)

    @property
    def yaw(self) -> float:
        return float(self.rpy[2])

    def rotation(self) -> np.ndarray:
        return rotation_zyx(self.rpy[0], self.rpy[1], self.rpy[2])

    def compose(self, child: "Pose") -> "Pose":
        """Pose of `child` (given in this frame) expressed in the parent frame."""
        r = self.rotation()
        pos = self.position + r @ child.position
        rot = r @ child.rotation()
        return Pose(pos, matrix_to_rpy(rot))

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        """Map points from this pose's frame into the parent frame."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return pts @ self.rotation().T + self.position

    def inverse_transform_points(self, pts: np.ndarray) -> np.ndarray:
        """Map points from the parent frame into this pose's frame."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (pts - self.position) @ self.rotation()

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.rpy.copy())


def matrix_to_rpy(r: np.ndarray) -> np.ndarray:
    """Inverse of rotation_zyx. Assumes |pitch| < pi/2 away from gimbal lock."""
    pitch = math.asin(max(-1.0, min(1.0, -r[2, 0])))
    if abs(r[2, 0]) > 1.0 - 1e-12:
        # Gimbal lock: fold roll into yaw.
        yaw = math.atan2(-r[0, 1], r[1, 1])
        roll = 0.0
    else:
        yaw = math.atan2(r[1, 0], r[0, 0])
        roll = math.atan2(r[2, 1], r[2, 2])
    return np.array([roll, pitch, yaw])


def direction_from_angles(azimuth: np.ndarray, elevation: np.ndarray) -> np.ndarray:
    """Unit vectors for azimuth (about +z from +x toward +y) and elevation angles.

    Broadcasts, returning shape (..., 3).
    """
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    az, el = np.broadcast_arrays(az, el)
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)


def angles_from_direction(dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth and elevation of direction vectors (need not be unit length)."""
    d = np.atleast_2d(np.asarray(dirs, dtype=float))
    az = np.arctan2(d[..., 1], d[..., 0])
    el = np.arctan2(d[..., 2], np.hypot(d[..., 0], d[..., 1]))
    return az, el


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)
