"""Online tri-state occupancy mapping and terrain products.

Log-odds are stored sparsely in 8x8x8 blocks: a slot table over block
space indexes a pool that grows as blocks are first touched, so untouched
regions cost nothing. Absent voxels are unknown (log-odds 0).
Classification thresholds are configured in probability space and applied
in log-odds space. Planners never touch the live map: they consume
immutable dense snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from .geometry import Pose
from .raycast import collect_ray_updates, sightline_batch
from .sensors import SensorFrame

UNKNOWN, FREE, OCCUPIED = 0, 1, 2
_CLASS_NAMES = {UNKNOWN: "unknown", FREE: "free", OCCUPIED: "occupied"}

BLOCK = 8  # voxels per block edge

_FACE_STRUCT = ndimage.generate_binary_structure(3, 1)


def _logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


@njit(cache=True)
def _scatter_add(rows, deltas, slot, pool, nblocks, start):
    """Add deltas into pooled blocks in row order, allocating slots on
    first touch. Returns (next unprocessed row, block count); the next
    row is short of len(rows) only when the pool ran out of capacity."""
    n = rows.shape[0]
    for r in range(start, n):
        i = rows[r, 0]
        j = rows[r, 1]
        k = rows[r, 2]
        bi = i // BLOCK
        bj = j // BLOCK
        bk = k // BLOCK
        s = slot[bi, bj, bk]
        if s < 0:
            if nblocks >= pool.shape[0]:
                return r, nblocks
            s = nblocks
            slot[bi, bj, bk] = s
            nblocks += 1
        pool[s, i - bi * BLOCK, j - bj * BLOCK, k - bk * BLOCK] += deltas[r]
    return n, nblocks


@njit(cache=True)
def _clamp_rows(rows, slot, pool, lo, hi):
    """Clamp every voxel named in rows into [lo, hi]. Idempotent, so
    duplicate rows are harmless."""
    for r in range(rows.shape[0]):
        i = rows[r, 0]
        j = rows[r, 1]
        k = rows[r, 2]
        s = slot[i // BLOCK, j // BLOCK, k // BLOCK]
        li = i % BLOCK
        lj = j % BLOCK
        lk = k % BLOCK
        v = pool[s, li, lj, lk]
        if v < lo:
            pool[s, li, lj, lk] = lo
        elif v > hi:
            pool[s, li, lj, lk] = hi


@dataclass
class OccupancyMap:
    resolution: float
    shape: tuple  # lattice extents in voxels, aligned with the world at origin 0
    l_occ: float = 0.85  # log-odds increment for a hit
    l_free: float = 0.4  # log-odds decrement for a pierced voxel
    clamp: tuple = (-3.5, 3.5)
    occ_threshold: float = 0.7  # probability-space classification bounds
    free_threshold: float = 0.3

    def __post_init__(self):
        if self.free_threshold >= self.occ_threshold:
            raise ValueError("free_threshold must be below occ_threshold")
        self._occ_lo = _logit(self.occ_threshold)
        self._free_lo = _logit(self.free_threshold)
        nb = tuple((int(s) + BLOCK - 1) // BLOCK for s in self.shape)
        self._slot = np.full(nb, -1, dtype=np.int32)
        self._pool = np.zeros((16, BLOCK, BLOCK, BLOCK), dtype=np.float32)
        self._nblocks = 0

    # -- storage ---------------------------------------------------------

    def _grow(self):
        pool = np.zeros((2 * self._pool.shape[0], BLOCK, BLOCK, BLOCK),
                        dtype=np.float32)
        pool[:self._nblocks] = self._pool[:self._nblocks]
        self._pool = pool

    def _block(self, key) -> np.ndarray:
        """Writable view of one block, allocated on first touch. Views go
        stale when a later allocation grows the pool, so write through
        them before touching another block."""
        s = int(self._slot[key])
        if s < 0:
            if self._nblocks == self._pool.shape[0]:
                self._grow()
            s = self._nblocks
            self._slot[key] = s
            self._nblocks += 1
        return self._pool[s]

    def log_odds_at(self, ijk) -> float:
        ijk = np.asarray(ijk, dtype=int)
        s = int(self._slot[tuple(ijk // BLOCK)])
        if s < 0:
            return 0.0
        return float(self._pool[s][tuple(ijk % BLOCK)])

    def stored_voxel_count(self) -> int:
        return int(np.count_nonzero(self._pool[:self._nblocks]))

    def _apply_deltas(self, ijk: np.ndarray, deltas: np.ndarray):
        """Accumulate per-voxel deltas in row order, then clamp the
        touched voxels. Duplicates sum before the clamp, so one batch's
        result does not depend on how rays were interleaved."""
        if ijk.size == 0:
            return
        rows = np.ascontiguousarray(ijk, dtype=np.int64)
        vals = np.ascontiguousarray(deltas, dtype=np.float32)
        start = 0
        while True:
            start, self._nblocks = _scatter_add(rows, vals, self._slot,
                                                self._pool, self._nblocks,
                                                start)
            if start >= len(rows):
                break
            self._grow()
        _clamp_rows(rows, self._slot, self._pool,
                    np.float32(self.clamp[0]), np.float32(self.clamp[1]))

    # -- integration -----------------------------------------------------

    def integrate_scan(self, body_pose: Pose, frame: SensorFrame):
        """Fold one depth frame into the map.

        Voxels pierced before each return get the free update, the return
        voxel gets the occupied update, and no-return rays carve free
        space out to max range. Deltas within one scan are summed before
        clamping, so integration is order-independent inside a scan.
        """
        if frame.model is None or frame.ranges is None:
            raise ValueError("frame must carry its sensor model and ranges")
        if frame.embedded:
            return
        model = frame.model
        sensor_pose = body_pose.compose(model.mount_pose)
        origin = sensor_pose.position
        if np.any(origin < 0) or np.any(origin >= np.asarray(self.shape) * self.resolution):
            raise ValueError("sensor pose outside map bounds")
        dirs = model.ray_directions().reshape(-1, 3) @ sensor_pose.rotation().T
        ranges = frame.ranges.reshape(-1)
        hit = np.isfinite(ranges)
        stops = np.where(hit, ranges, model.max_range)

        free_ijk, hit_ijk = collect_ray_updates(self.shape, self.resolution,
                                                origin, dirs, stops, hit)
        ijk = np.concatenate([free_ijk, hit_ijk], axis=0)
        deltas = np.concatenate([np.full(len(free_ijk), -self.l_free, dtype=np.float32),
                                 np.full(len(hit_ijk), self.l_occ, dtype=np.float32)])
        self._apply_deltas(ijk, deltas)

    def integrate_rays(self, origin, dirs: np.ndarray, stops: np.ndarray,
                       hit_mask: np.ndarray):
        """Low-level integration entry for pre-computed rays."""
        free_ijk, hit_ijk = collect_ray_updates(self.shape, self.resolution,
                                                np.asarray(origin, float), dirs,
                                                stops, hit_mask)
        ijk = np.concatenate([free_ijk, hit_ijk], axis=0)
        deltas = np.concatenate([np.full(len(free_ijk), -self.l_free, dtype=np.float32),
                                 np.full(len(hit_ijk), self.l_occ, dtype=np.float32)])
        self._apply_deltas(ijk, deltas)

    def seed_free_region(self, center, half_extents):
        """Force-classify a box of voxels as free.

        Models the usual map initialization at the robot's own footprint:
        the vehicle occupies that space, so it cannot be occupied, and no
        sensor can observe under its own belly.
        """
        center = np.asarray(center, dtype=float)
        half = np.asarray(half_extents, dtype=float)
        lo = np.maximum(np.floor((center - half) / self.resolution).astype(int), 0)
        hi = np.minimum(np.floor((center + half) / self.resolution).astype(int) + 1,
                        np.asarray(self.shape))
        if np.any(lo >= hi):
            return
        grid = np.mgrid[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        ijk = grid.reshape(3, -1).T
        repeats = int(np.ceil(-self._free_lo / self.l_free)) + 1
        deltas = np.full(len(ijk) * repeats, -self.l_free, dtype=np.float32)
        self._apply_deltas(np.tile(ijk, (repeats, 1)), deltas)

    # -- classification --------------------------------------------------

    def classify(self, ijk) -> str:
        v = self.log_odds_at(ijk)
        if v >= self._occ_lo:
            return "occupied"
        if v <= self._free_lo:
            return "free"
        return "unknown"

    def snapshot(self) -> "MapSnapshot":
        """Immutable dense classification of the whole lattice."""
        classes = np.zeros(self.shape, dtype=np.uint8)
        log_odds = np.zeros(self.shape, dtype=np.float32)
        shape = np.asarray(self.shape)
        for key in np.argwhere(self._slot >= 0):
            blk = self._pool[self._slot[tuple(key)]]
            lo = key * BLOCK
            hi = np.minimum(lo + BLOCK, shape)
            sub = blk[:hi[0] - lo[0], :hi[1] - lo[1], :hi[2] - lo[2]]
            log_odds[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = sub
        classes[log_odds >= self._occ_lo] = OCCUPIED
        classes[log_odds <= self._free_lo] = FREE
        return MapSnapshot(resolution=self.resolution, classes=classes,
                           log_odds=log_odds)


@dataclass(frozen=True)
class MapSnapshot:
    resolution: float
    classes: np.ndarray  # uint8 lattice of UNKNOWN/FREE/OCCUPIED
    log_odds: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.classes.shape

    def class_name(self, ijk) -> str:
        return _CLASS_NAMES[int(self.classes[tuple(ijk)])]

    def voxel_center(self, ijk) -> np.ndarray:
        return (np.asarray(ijk, dtype=float) + 0.5) * self.resolution

    def voxel_at(self, point) -> tuple:
        return tuple(np.floor(np.asarray(point, float) / self.resolution).astype(int))

    def in_bounds_point(self, point) -> bool:
        ijk = np.floor(np.asarray(point, float) / self.resolution).astype(int)
        return bool(np.all(ijk >= 0) and np.all(ijk < self.classes.shape))

    def box_is_free(self, center, half_extents) -> bool:
        """True iff every voxel overlapping the box is classified free."""
        center = np.asarray(center, dtype=float)
        half = np.asarray(half_extents, dtype=float)
        eps = 1e-9
        lo = np.floor((center - half + eps) / self.resolution).astype(int)
        hi = np.floor((center + half - eps) / self.resolution).astype(int)
        shape = np.asarray(self.classes.shape)
        if np.any(lo < 0) or np.any(hi >= shape):
            return False
        region = self.classes[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1]
        return bool(np.all(region == FREE))

    def edge_is_free(self, p0, p1, half_extents) -> bool:
        """Swept-box check: boxes sampled every resolution/2 along the
        segment, endpoints included."""
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        dist = float(np.linalg.norm(p1 - p0))
        n = max(2, int(np.ceil(dist / (self.resolution / 2))) + 1)
        for s in np.linspace(0.0, 1.0, n):
            if not self.box_is_free(p0 + s * (p1 - p0), half_extents):
                return False
        return True

    def visible_from(self, origins, targets_ijk: np.ndarray) -> np.ndarray:
        """Line-of-sight test from points to target voxels.

        `origins` is one point (3,) or one per target (N, 3). A target is
        visible iff every voxel its sight line pierces before reaching it
        is classified free; the target's own class does not matter. Exact
        lockstep grid traversal.
        """
        targets_ijk = np.asarray(targets_ijk, dtype=np.int64).reshape(-1, 3)
        n = len(targets_ijk)
        out = np.zeros(n, dtype=bool)
        if n == 0:
            return out
        origins = np.broadcast_to(np.asarray(origins, dtype=float), (n, 3))
        res = self.resolution
        centers = (targets_ijk + 0.5) * res
        dist = np.linalg.norm(centers - origins, axis=1)
        start = np.floor(origins / res).astype(np.int64)

        shape = np.asarray(self.classes.shape)
        free_grid = self.classes == FREE
        start_ok = np.all((start >= 0) & (start < shape), axis=1)
        start_free = np.zeros(n, dtype=bool)
        sij = start[start_ok]
        start_free[start_ok] = free_grid[sij[:, 0], sij[:, 1], sij[:, 2]]

        at_start = np.all(targets_ijk == start, axis=1) | (dist < 1e-12)
        out[at_start] = True

        # The start voxel must itself be free for anything beyond it to be
        # seen; out-of-lattice origins see nothing.
        ids = np.nonzero(~at_start & start_free)[0]
        out[ids] = sightline_batch(free_grid, res, origins[ids], start[ids],
                                   targets_ijk[ids])
        return out


def extract_frontiers(snapshot: MapSnapshot, region: tuple | None = None) -> np.ndarray:
    """Free voxels face-adjacent to at least one unknown voxel.

    `region` is an optional ((lo_i, lo_j, lo_k), (hi_i, hi_j, hi_k)) box,
    upper bound exclusive. Returns voxel indices in lexicographic order.
    """
    classes = snapshot.classes
    unknown = classes == UNKNOWN
    near_unknown = ndimage.binary_dilation(unknown, structure=_FACE_STRUCT)
    frontier = (classes == FREE) & near_unknown
    if region is not None:
        lo, hi = region
        mask = np.zeros_like(frontier)
        mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
        frontier &= mask
    return np.argwhere(frontier)


@dataclass
class ElevationMap:
    cell_size: float
    heights: np.ndarray  # (nx, ny), base height of the top occupied voxel
    valid: np.ndarray  # (nx, ny) bool

    def cell_at(self, xy) -> tuple:
        ij = np.floor(np.asarray(xy, dtype=float) / self.cell_size).astype(int)
        return tuple(ij)

    def height_at(self, xy) -> float:
        ij = self.cell_at(xy)
        if not (0 <= ij[0] < self.heights.shape[0] and 0 <= ij[1] < self.heights.shape[1]):
            return np.nan
        if not self.valid[ij]:
            return np.nan
        return float(self.heights[ij])


def build_elevation(snapshot: MapSnapshot, ceiling_z: float | None = None) -> ElevationMap:
    """Per-column ground height from the top occupied voxel below a
    clearance ceiling. Height is the base z of that voxel, so a ground
    layer at the bottom of the lattice reads as height 0."""
    res = snapshot.resolution
    nz = snapshot.classes.shape[2]
    kmax = nz if ceiling_z is None else min(nz, int(np.ceil(ceiling_z / res)))
    occ = snapshot.classes[:, :, :kmax] == OCCUPIED
    valid = occ.any(axis=2)
    ks = np.arange(kmax)
    top = np.where(occ, ks[None, None, :], -1).max(axis=2)
    heights = np.where(valid, top * res, np.nan)
    return ElevationMap(cell_size=res, heights=heights, valid=valid)


def _cells_crossed(p0, p1, cell: float):
    """2D grid cells a segment crosses, in order, by exact traversal."""
    p0 = np.asarray(p0, dtype=float)[:2]
    p1 = np.asarray(p1, dtype=float)[:2]
    ij = np.floor(p0 / cell).astype(int)
    end = np.floor(p1 / cell).astype(int)
    cells = [tuple(ij)]
    d = p1 - p0
    dist = np.linalg.norm(d)
    if dist < 1e-12:
        return cells
    dirv = d / dist
    step = np.sign(dirv).astype(int)
    with np.errstate(divide="ignore"):
        tdelta = np.where(dirv != 0.0, cell / np.abs(dirv), np.inf)
        next_boundary = (ij + (step > 0)) * cell
        tmax = np.where(dirv != 0.0, (next_boundary - p0) / dirv, np.inf)
    guard = abs(end[0] - ij[0]) + abs(end[1] - ij[1]) + 4
    for _ in range(guard * 2):
        if np.all(ij == end):
            break
        axis = int(np.argmin(tmax))
        if tmax[axis] > dist:
            break
        ij = ij.copy()
        ij[axis] += step[axis]
        tmax[axis] += tdelta[axis]
        cells.append(tuple(ij))
    return cells


def prune_untraversable(graph, elev: ElevationMap, max_step: float,
                        max_incline: float):
    """Drop graph edges a ground robot cannot take.

    An edge survives only if every elevation cell under it is valid and
    every transition between consecutive crossed cells stays within the
    step-height and incline limits (incline over one cell pitch). Vertices
    left isolated are removed; the root always stays.
    """
    from .graphs import PlanGraph  # local import, avoids a cycle

    tan_limit = np.tan(max_incline)
    kept = PlanGraph(root=graph.root)
    for vid, (pos, yaw) in graph.vertices.items():
        kept.add_vertex(pos, yaw, vid=vid)

    for (a, b), length in graph.edges.items():
        pa = graph.vertices[a][0]
        pb = graph.vertices[b][0]
        cells = _cells_crossed(pa, pb, elev.cell_size)
        ok = True
        heights = []
        for c in cells:
            if not (0 <= c[0] < elev.heights.shape[0] and 0 <= c[1] < elev.heights.shape[1]) \
                    or not elev.valid[c]:
                ok = False
                break
            heights.append(float(elev.heights[c]))
        if ok:
            for h0, h1 in zip(heights[:-1], heights[1:]):
                dh = abs(h1 - h0)
                if dh > max_step or dh > tan_limit * elev.cell_size:
                    ok = False
                    break
        if ok:
            kept.add_edge(a, b, length=length)

    kept.drop_isolated(keep=graph.root)
    return kept
