"""Sensor models for the simulated payload and frustum-grid rendering.

Angles follow the body convention (x forward, y left, z up): azimuth
positive toward +y, elevation positive toward +z. Depth payloads are
(n_el, n_az) grids, row 0 at the highest elevation, column 0 at the most
negative azimuth. A value of +inf marks no return within range.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Pose, direction_from_angles
from .raycast import NO_RETURN, raycast_batch
from .world import VoxelWorld

EXTEROCEPTIVE_KINDS = ("lidar", "tof", "mono_cam", "color_cam", "radar")
SENSOR_KINDS = EXTEROCEPTIVE_KINDS + ("imu",)


@dataclass
class SensorModel:
    kind: str
    azimuth_fov: float  # degrees, 360 means full ring
    elevation_fov: float  # degrees
    max_range: float  # m
    nominal_rate: float  # Hz
    mount_pose: Pose = field(default_factory=Pose)
    angular_resolution: float = 2.0  # degrees between ray samples
    range_noise_sigma: float = 0.0  # m, additive; 0 keeps rendering exact

    def __post_init__(self):
        if self.kind not in SENSOR_KINDS:
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        if self.max_range <= 0 or self.nominal_rate <= 0:
            raise ValueError("max_range and nominal_rate must be positive")
        if self.kind in EXTEROCEPTIVE_KINDS:
            if not (0 < self.azimuth_fov <= 360 and 0 < self.elevation_fov <= 180):
                raise ValueError("field of view out of range")
            if self.angular_resolution <= 0:
                raise ValueError("angular_resolution must be positive")

    @property
    def period(self) -> float:
        return 1.0 / self.nominal_rate

    def ray_angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Azimuth (ascending) and elevation (descending) sample angles, rad."""
        step = np.radians(self.angular_resolution)
        az_fov = np.radians(self.azimuth_fov)
        el_fov = np.radians(self.elevation_fov)
        if self.azimuth_fov >= 360.0:
            n_az = max(1, int(round(2 * np.pi / step)))
            az = -np.pi + np.arange(n_az) * (2 * np.pi / n_az)
        else:
            n_az = max(1, int(round(az_fov / step))) + 1
            n_az += (n_az + 1) % 2  # odd count keeps a center ray
            az = np.linspace(-az_fov / 2, az_fov / 2, n_az)
        n_el = max(1, int(round(el_fov / step))) + 1
        n_el += (n_el + 1) % 2
        el = np.linspace(el_fov / 2, -el_fov / 2, n_el)
        return az, el

    def ray_directions(self) -> np.ndarray:
        """Unit ray directions in the sensor frame, shape (n_el, n_az, 3).

        The grid depends only on the field of view and the angular
        resolution, so it is computed once per configuration and reused.
        The returned array is read-only; copy before mutating.
        """
        key = (self.azimuth_fov, self.elevation_fov, self.angular_resolution)
        cached = getattr(self, "_dir_cache", None)
        if cached is None or cached[0] != key:
            az, el = self.ray_angles()
            azg, elg = np.meshgrid(az, el)
            dirs = direction_from_angles(azg, elg)
            dirs.setflags(write=False)
            cached = (key, dirs)
            self._dir_cache = cached
        return cached[1]

    def contains_direction(self, dirs: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Frustum test for unit directions in the sensor frame."""
        dirs = np.asarray(dirs, dtype=float)
        az = np.arctan2(dirs[..., 1], dirs[..., 0])
        el = np.arcsin(np.clip(dirs[..., 2], -1.0, 1.0))
        half_az = np.radians(self.azimuth_fov) / 2 + margin
        half_el = np.radians(self.elevation_fov) / 2 + margin
        ok_az = np.abs(az) <= half_az if self.azimuth_fov < 360 else np.ones(az.shape, bool)
        return ok_az & (np.abs(el) <= half_el)


@dataclass
class SensorFrame:
    sensor_id: str
    kind: str
    local_timestamp: float  # seconds in the emitting device's clock
    ranges: np.ndarray | None = None  # (n_el, n_az), +inf = no return
    inertial: np.ndarray | None = None  # (6,) accel + angular rate
    embedded: bool = False  # sensor origin was inside an occupied voxel
    model: SensorModel | None = None  # emitting model, lets consumers rebuild rays

    def point_cloud(self, model: SensorModel) -> np.ndarray:
        """Sensor-frame 3D points for all returned rays, shape (N, 3)."""
        if self.ranges is None:
            return np.zeros((0, 3))
        dirs = model.ray_directions()
        hit = np.isfinite(self.ranges) & (self.ranges > 0)
        return dirs[hit] * self.ranges[hit][..., None]


def render_frame(world: VoxelWorld, body_pose: Pose, model: SensorModel,
                 timestamp: float = 0.0, rng: np.random.Generator | None = None) -> SensorFrame:
    """Render one frustum-grid depth frame by exact raycasting.

    Pure function of its inputs when range noise is off. An embedded
    sensor yields an all-zero depth grid with the embedded flag set.
    """
    if model.kind not in EXTEROCEPTIVE_KINDS:
        raise ValueError(f"cannot render frames for sensor kind {model.kind!r}")
    sensor_pose = body_pose.compose(model.mount_pose)
    dirs = model.ray_directions()
    shape = dirs.shape[:2]
    dirs_world = dirs.reshape(-1, 3) @ sensor_pose.rotation().T

    dists, _ = raycast_batch(world.occupancy, world.resolution,
                             sensor_pose.position, dirs_world, model.max_range)
    if np.all(np.isnan(dists)):
        ranges = np.zeros(shape)
        return SensorFrame(sensor_id=model.kind, kind=model.kind,
                           local_timestamp=timestamp, ranges=ranges,
                           embedded=True, model=model)

    ranges = dists.reshape(shape)
    if model.range_noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        hit = np.isfinite(ranges)
        noisy = ranges[hit] + rng.normal(0.0, model.range_noise_sigma, hit.sum())
        ranges[hit] = np.clip(noisy, world.resolution * 1e-3, model.max_range)
    return SensorFrame(sensor_id=model.kind, kind=model.kind,
                       local_timestamp=timestamp, ranges=ranges, model=model)


def default_rig() -> dict[str, SensorModel]:
    """The payload's sensor suite with catalog field-of-view defaults."""
    return {
        "lidar": SensorModel(
            kind="lidar", azimuth_fov=360.0, elevation_fov=90.0, max_range=30.0,
            nominal_rate=10.0, angular_resolution=3.0,
            mount_pose=Pose(position=np.array([0.0, 0.0, 0.10]))),
        "tof": SensorModel(
            kind="tof", azimuth_fov=56.0, elevation_fov=44.0, max_range=4.0,
            nominal_rate=20.0, angular_resolution=2.0,
            mount_pose=Pose(position=np.array([0.12, 0.0, 0.0]))),
        "front_cam": SensorModel(
            kind="color_cam", azimuth_fov=118.0, elevation_fov=94.0, max_range=10.0,
            nominal_rate=20.0, angular_resolution=4.0,
            mount_pose=Pose(position=np.array([0.12, 0.0, -0.02]))),
        "left_cam": SensorModel(
            kind="mono_cam", azimuth_fov=185.0, elevation_fov=120.0, max_range=10.0,
            nominal_rate=20.0, angular_resolution=5.0,
            mount_pose=Pose(position=np.array([0.0, 0.10, 0.0]),
                            rpy=np.array([0.0, 0.0, np.pi / 2]))),
        "right_cam": SensorModel(
            kind="mono_cam", azimuth_fov=185.0, elevation_fov=120.0, max_range=10.0,
            nominal_rate=20.0, angular_resolution=5.0,
            mount_pose=Pose(position=np.array([0.0, -0.10, 0.0]),
                            rpy=np.array([0.0, 0.0, -np.pi / 2]))),
        # Imaging radar looks downward at 30 degrees; positive pitch drops
        # the forward axis below the horizon.
        "radar": SensorModel(
            kind="radar", azimuth_fov=180.0, elevation_fov=180.0, max_range=49.0,
            nominal_rate=10.0, angular_resolution=10.0,
            mount_pose=Pose(position=np.array([0.10, 0.0, -0.04]),
                            rpy=np.array([0.0, np.radians(30.0), 0.0]))),
        "imu": SensorModel(
            kind="imu", azimuth_fov=1.0, elevation_fov=1.0, max_range=1.0,
            nominal_rate=200.0),
    }
