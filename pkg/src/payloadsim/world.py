"""Ground-truth voxel worlds and deterministic scenario generation.

Worlds are dense boolean lattices with the boundary shell forced occupied,
so no ray or robot can leave the volume. Generators are pure functions of
(name, seed, dims) and guarantee that all carved free space is mutually
reachable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ScenarioError
from .geometry import Pose

GENERATORS = ("empty_room", "tunnel_network", "closed_tank", "cluttered_room")

# 6-connectivity structuring element for free-space labeling.
_FACE_STRUCT = ndimage.generate_binary_structure(3, 1)


@dataclass
class VoxelWorld:
    resolution: float
    occupancy: np.ndarray  # bool, shape (nx, ny, nz)
    start_pose: Pose
    generator: str = ""
    seed: int = 0
    goal_point: np.ndarray | None = None

    @property
    def extents(self) -> tuple:
        return self.occupancy.shape

    @property
    def size_m(self) -> np.ndarray:
        return np.asarray(self.occupancy.shape, dtype=float) * self.resolution

    def voxel_at(self, point) -> tuple:
        ijk = np.floor(np.asarray(point, dtype=float) / self.resolution).astype(int)
        return tuple(ijk)

    def voxel_center(self, ijk) -> np.ndarray:
        return (np.asarray(ijk, dtype=float) + 0.5) * self.resolution

    def in_bounds(self, ijk) -> bool:
        ijk = np.asarray(ijk)
        return bool(np.all(ijk >= 0) and np.all(ijk < self.occupancy.shape))

    def is_occupied(self, ijk) -> bool:
        """Out-of-bounds queries count as occupied (closed world)."""
        if not self.in_bounds(ijk):
            return True
        return bool(self.occupancy[tuple(ijk)])

    def is_free_point(self, point) -> bool:
        return not self.is_occupied(self.voxel_at(point))

    def box_collides(self, center, half_extents) -> bool:
        """True if an axis-aligned box overlaps any occupied voxel.

        Faces that exactly touch a voxel boundary do not count as overlap.
        """
        center = np.asarray(center, dtype=float)
        half = np.asarray(half_extents, dtype=float)
        eps = 1e-9
        lo = np.floor((center - half + eps) / self.resolution).astype(int)
        hi = np.floor((center + half - eps) / self.resolution).astype(int)
        shape = np.asarray(self.occupancy.shape)
        if np.any(lo < 0) or np.any(hi >= shape):
            return True
        region = self.occupancy[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1]
        return bool(region.any())

    def reachable_free_mask(self) -> np.ndarray:
        """Free voxels connected (6-conn) to the start voxel."""
        free = ~self.occupancy
        labels, _ = ndimage.label(free, structure=_FACE_STRUCT)
        start = self.voxel_at(self.start_pose.position)
        lbl = labels[start]
        if lbl == 0:
            raise ScenarioError("start pose is inside an occupied voxel")
        return labels == lbl


def parse_descriptor(text: str) -> dict:
    """Parse a plain-text key-value scenario descriptor.

    One `key = value` (or `key: value`) pair per line; `#` starts a comment.
    Values are coerced to int or float when possible.
    """
    out: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = line.partition("=")
        elif ":" in line:
            key, _, val = line.partition(":")
        else:
            raise ScenarioError(f"malformed descriptor line: {raw!r}")
        key = key.strip()
        val = val.strip()
        if not key or not val:
            raise ScenarioError(f"malformed descriptor line: {raw!r}")
        out[key] = _coerce(val)
    return out


def _coerce(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    return val


def format_descriptor(desc: dict) -> str:
    lines = [f"{k} = {desc[k]}" for k in desc]
    return "\n".join(lines) + "\n"


def load_descriptor(path) -> dict:
    return parse_descriptor(Path(path).read_text())


_DEFAULT_DIMS = {
    "empty_room": (10.0, 10.0, 3.0, 0.2),
    "tunnel_network": (28.0, 20.0, 4.5, 0.25),
    "closed_tank": (9.0, 7.0, 3.5, 0.25),
    "cluttered_room": (10.0, 10.0, 3.0, 0.25),
}


def build_scenario(desc) -> VoxelWorld:
    """Build a ground-truth world from a descriptor mapping or file path."""
    if isinstance(desc, (str, Path)):
        desc = load_descriptor(desc)
    desc = dict(desc)
    gen = desc.get("generator")
    if gen not in GENERATORS:
        raise ScenarioError(f"unknown generator: {gen!r}")
    seed = int(desc.get("seed", 0))
    dx, dy, dz, dres = _DEFAULT_DIMS[gen]
    res = float(desc.get("resolution", dres))
    if res <= 0:
        raise ScenarioError("resolution must be positive")
    size = (float(desc.get("size_x", dx)),
            float(desc.get("size_y", dy)),
            float(desc.get("size_z", dz)))
    extents = tuple(int(round(s / res)) for s in size)
    if min(extents) < 3:
        raise ScenarioError(f"world needs at least 3 voxels per axis, got {extents}")

    if gen == "empty_room":
        world = _gen_empty_room(extents, res, seed)
    elif gen == "tunnel_network":
        world = _gen_tunnel_network(extents, res, seed)
    elif gen == "closed_tank":
        world = _gen_closed_tank(extents, res, seed)
    else:
        world = _gen_cluttered_room(extents, res, seed,
                                    density=float(desc.get("obstacle_density", 0.06)))
    world.generator = gen
    world.seed = seed
    if world.is_occupied(world.voxel_at(world.start_pose.position)):
        raise ScenarioError("generator produced an occupied start voxel")
    return world


def _shell(extents) -> np.ndarray:
    occ = np.zeros(extents, dtype=bool)
    occ[0, :, :] = occ[-1, :, :] = True
    occ[:, 0, :] = occ[:, -1, :] = True
    occ[:, :, 0] = occ[:, :, -1] = True
    return occ


def _center_start(extents, res: float, z: float = 1.0) -> Pose:
    pos = np.array([extents[0] * res / 2.0, extents[1] * res / 2.0, z])
    # Snap away from exact voxel boundaries.
    pos = (np.floor(pos / res) + 0.5) * res
    return Pose(position=pos, rpy=np.zeros(3))


def _gen_empty_room(extents, res: float, seed: int) -> VoxelWorld:
    occ = _shell(extents)
    start = _center_start(extents, res, z=min(1.0, (extents[2] - 2) * res))
    return VoxelWorld(resolution=res, occupancy=occ, start_pose=start)


def _gen_tunnel_network(extents, res: float, seed: int) -> VoxelWorld:
    """Corridor network carved from solid rock: one trunk, seeded branches.

    Every branch is carved from the trunk, so connectivity holds by
    construction.
    """
    rng = np.random.default_rng(seed)
    nx, ny, nz = extents
    occ = np.ones(extents, dtype=bool)

    def carve(x0, x1, y0, y1, z0, z1):
        x0, y0, z0 = max(x0, 1), max(y0, 1), max(z0, 1)
        x1, y1, z1 = min(x1, nx - 1), min(y1, ny - 1), min(z1, nz - 1)
        if x0 < x1 and y0 < y1 and z0 < z1:
            occ[x0:x1, y0:y1, z0:z1] = False

    half_w = max(1, int(round(1.0 / res)))  # corridor half-width 1 m
    height = max(2, int(round(2.2 / res)))
    ymid = ny // 2
    z0, z1 = 1, 1 + height

    # Start chamber at the west end, wider than the trunk.
    carve(1, 1 + int(round(3.0 / res)), ymid - 2 * half_w, ymid + 2 * half_w, z0, z1)
    # Main trunk spanning the full length.
    carve(1, nx - 1, ymid - half_w, ymid + half_w, z0, z1)

    n_branches = int(rng.integers(3, 6))
    xs = np.sort(rng.choice(np.arange(int(4.0 / res), nx - half_w - 2, half_w * 2),
                            size=n_branches, replace=False))
    branch_ends = []
    for bx in xs:
        side = 1 if rng.random() < 0.5 else -1
        length = int(rng.integers(int(3.0 / res), ymid - half_w - 1))
        if side > 0:
            carve(bx - half_w, bx + half_w, ymid, ymid + length, z0, z1)
            branch_ends.append((bx, ymid + length - half_w, side))
        else:
            carve(bx - half_w, bx + half_w, ymid - length, ymid, z0, z1)
            branch_ends.append((bx, ymid - length + half_w, side))

    # Link a random pair of same-side branch ends into a loop corridor.
    same = {}
    for bx, by, side in branch_ends:
        same.setdefault(side, []).append((bx, by))
    for side, ends in same.items():
        if len(ends) >= 2:
            (xa, ya), (xb, yb) = ends[0], ends[-1]
            yline = min(ya, yb) if side > 0 else max(ya, yb)
            carve(min(xa, xb), max(xa, xb), yline - half_w, yline + half_w, z0, z1)
            break

    sx = (1 + int(round(1.5 / res)) + 0.5) * res
    sy = (ymid + 0.5) * res
    start = Pose(position=np.array([sx, sy, 1.0 + res / 2]), rpy=np.zeros(3))
    return VoxelWorld(resolution=res, occupancy=occ, start_pose=start)


def _gen_closed_tank(extents, res: float, seed: int) -> VoxelWorld:
    """Hollow tank with transverse bulkheads pierced by manholes and short
    wall-mounted stringer shelves, ballast-tank style."""
    rng = np.random.default_rng(seed)
    nx, ny, nz = extents
    occ = _shell(extents)

    def manhole(plate_x, yc, zc, half_y, half_z):
        occ[plate_x, max(1, yc - half_y):min(ny - 1, yc + half_y),
            max(1, zc - half_z):min(nz - 1, zc + half_z)] = False

    # Two transverse bulkheads splitting the tank into three bays.
    hole_hy = max(2, int(round(0.8 / res)))
    hole_hz = max(2, int(round(0.8 / res)))
    for fx in (1 / 3, 2 / 3):
        px = int(round(nx * fx))
        occ[px, 1:ny - 1, 1:nz - 1] = True
        yc = int(ny * (0.35 + 0.3 * rng.random()))
        zc = int(round((1.3 + 0.4 * rng.random()) / res))
        manhole(px, yc, zc, hole_hy, hole_hz)

    # Stringers: horizontal shelves on both long walls at mid-height.
    shelf_z = int(round(1.75 / res))
    depth = max(2, int(round(0.8 / res)))
    if 1 <= shelf_z < nz - 1:
        for x0 in range(2, nx - 2, max(4, int(round(2.0 / res)))):
            x1 = min(nx - 2, x0 + max(3, int(round(1.2 / res))))
            occ[x0:x1, 1:1 + depth, shelf_z] = True
            occ[x0:x1, ny - 1 - depth:ny - 1, shelf_z] = True

    sx = (nx // 6 + 0.5) * res
    sy = (ny // 2 + 0.5) * res
    start = Pose(position=np.array([sx, sy, 1.0 + res / 2]), rpy=np.zeros(3))
    return VoxelWorld(resolution=res, occupancy=occ, start_pose=start)


def _gen_cluttered_room(extents, res: float, seed: int, density: float) -> VoxelWorld:
    """Room with random floor-standing boxes and columns.

    Obstacles that would disconnect the start region from any free space,
    or that crowd the start/goal clearance zones, are rejected.
    """
    rng = np.random.default_rng(seed)
    nx, ny, nz = extents
    occ = _shell(extents)
    size = np.array([nx, ny, nz], dtype=float) * res

    start_pt = np.array([1.3, 1.3, 1.0])
    goal_pt = np.array([size[0] - 1.3, size[1] - 1.3, 1.0])
    start_pt = (np.floor(start_pt / res) + 0.5) * res
    goal_pt = (np.floor(goal_pt / res) + 0.5) * res

    area = (size[0] - 2 * res) * (size[1] - 2 * res)
    n_target = max(3, int(round(density * area)))
    clearance = 1.1  # keep this radius around start and goal obstacle-free

    placed = 0
    attempts = 0
    while placed < n_target and attempts < n_target * 30:
        attempts += 1
        is_column = rng.random() < 0.4
        if is_column:
            w = rng.uniform(0.4, 0.8)
            d = w
            h = size[2] - res  # full height
        else:
            w = rng.uniform(0.5, 1.6)
            d = rng.uniform(0.5, 1.6)
            h = rng.uniform(0.5, 1.4)
        cx = rng.uniform(1.0 + w / 2, size[0] - 1.0 - w / 2)
        cy = rng.uniform(1.0 + d / 2, size[1] - 1.0 - d / 2)
        center2 = np.array([cx, cy])
        if (np.linalg.norm(center2 - start_pt[:2]) < clearance + max(w, d) / 2 or
                np.linalg.norm(center2 - goal_pt[:2]) < clearance + max(w, d) / 2):
            continue
        x0 = max(1, int(np.floor((cx - w / 2) / res)))
        x1 = min(nx - 1, int(np.ceil((cx + w / 2) / res)))
        y0 = max(1, int(np.floor((cy - d / 2) / res)))
        y1 = min(ny - 1, int(np.ceil((cy + d / 2) / res)))
        z1 = min(nz - 1, int(np.ceil(h / res)) + 1)
        patch = occ[x0:x1, y0:y1, 1:z1].copy()
        occ[x0:x1, y0:y1, 1:z1] = True

        free = ~occ
        labels, nlab = ndimage.label(free, structure=_FACE_STRUCT)
        start_lbl = labels[tuple(np.floor(start_pt / res).astype(int))]
        if start_lbl == 0 or not np.all(labels[free] == start_lbl):
            occ[x0:x1, y0:y1, 1:z1] = patch  # disconnects free space, revert
            continue
        placed += 1

    start = Pose(position=start_pt, rpy=np.zeros(3))
    return VoxelWorld(resolution=res, occupancy=occ, start_pose=start,
                      goal_point=goal_pt)
