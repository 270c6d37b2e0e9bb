"""Exact voxel-grid ray traversal.

All traversal is boundary-exact grid stepping that visits every voxel a
segment pierces; there is no sampling, so thin single-voxel walls cannot
be tunneled through. Distances returned are to the boundary at which the
ray enters the hit voxel.

Conventions for batched results: a distance of +inf means no return
within range, NaN means the ray origin was embedded in an occupied voxel.

`raycast` is the plain-Python reference; the batched entry points run the
same stepping compiled per ray and must agree with it bit for bit.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

NO_RETURN = np.inf
EMBEDDED = np.nan


class RayHit(NamedTuple):
    distance: float  # entry distance; inf if no return, nan if embedded
    voxel: tuple | None  # hit voxel index, None unless a hit

    @property
    def is_hit(self) -> bool:
        return np.isfinite(self.distance)

    @property
    def is_embedded(self) -> bool:
        return bool(np.isnan(self.distance))


def raycast(occ: np.ndarray, resolution: float, origin, direction, max_range: float) -> RayHit:
    """Cast one ray through a dense boolean occupancy lattice.

    `direction` must be unit length and `origin` inside the lattice.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    shape = occ.shape
    ijk = np.floor(origin / resolution).astype(np.int64)
    if np.any(ijk < 0) or np.any(ijk >= shape):
        raise ValueError("ray origin outside the lattice")
    if occ[tuple(ijk)]:
        return RayHit(EMBEDDED, None)

    step = np.sign(direction).astype(np.int64)
    with np.errstate(divide="ignore"):
        tdelta = np.where(direction != 0.0, resolution / np.abs(direction), np.inf)
        next_boundary = (ijk + (step > 0)) * resolution
        tmax = np.where(direction != 0.0, (next_boundary - origin) / direction, np.inf)

    while True:
        axis = int(np.argmin(tmax))
        t_entry = float(tmax[axis])
        if t_entry > max_range:
            return RayHit(NO_RETURN, None)
        ijk[axis] += step[axis]
        if ijk[axis] < 0 or ijk[axis] >= shape[axis]:
            return RayHit(NO_RETURN, None)
        if occ[tuple(ijk)]:
            return RayHit(t_entry, tuple(int(v) for v in ijk))
        tmax[axis] += tdelta[axis]


@njit(cache=True)
def _trace_batch(occ, res, ox, oy, oz, i0, j0, k0, dirs, max_range,
                 distances, hit_voxels):  # pragma: no cover - compiled
    nx, ny, nz = occ.shape
    for r in range(dirs.shape[0]):
        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        sx = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
        sy = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
        sz = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)
        if dx != 0.0:
            tdx = res / abs(dx)
            tmx = ((i0 + (1 if sx > 0 else 0)) * res - ox) / dx
        else:
            tdx = math.inf
            tmx = math.inf
        if dy != 0.0:
            tdy = res / abs(dy)
            tmy = ((j0 + (1 if sy > 0 else 0)) * res - oy) / dy
        else:
            tdy = math.inf
            tmy = math.inf
        if dz != 0.0:
            tdz = res / abs(dz)
            tmz = ((k0 + (1 if sz > 0 else 0)) * res - oz) / dz
        else:
            tdz = math.inf
            tmz = math.inf

        i = i0
        j = j0
        k = k0
        mr = max_range[r]
        while True:
            # Lowest axis wins ties, like argmin over (tmx, tmy, tmz).
            if tmx <= tmy:
                if tmx <= tmz:
                    axis = 0
                    t = tmx
                else:
                    axis = 2
                    t = tmz
            elif tmy <= tmz:
                axis = 1
                t = tmy
            else:
                axis = 2
                t = tmz
            if t > mr:
                break
            if axis == 0:
                i += sx
                if i < 0 or i >= nx:
                    break
            elif axis == 1:
                j += sy
                if j < 0 or j >= ny:
                    break
            else:
                k += sz
                if k < 0 or k >= nz:
                    break
            if occ[i, j, k]:
                distances[r] = t
                hit_voxels[r, 0] = i
                hit_voxels[r, 1] = j
                hit_voxels[r, 2] = k
                break
            if axis == 0:
                tmx += tdx
            elif axis == 1:
                tmy += tdy
            else:
                tmz += tdz


def raycast_batch(occ: np.ndarray, resolution: float, origin, dirs: np.ndarray,
                  max_range) -> tuple[np.ndarray, np.ndarray]:
    """Cast many rays from a single origin.

    Returns (distances, hit_voxels) where distances follow the module
    conventions and hit_voxels is (N, 3) with -1 rows for non-hits.
    Matches `raycast` bit-for-bit on every ray.
    """
    origin = np.asarray(origin, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)
    n = dirs.shape[0]
    shape = occ.shape
    max_range = np.ascontiguousarray(np.broadcast_to(np.asarray(max_range, dtype=float), (n,)))

    distances = np.full(n, NO_RETURN)
    hit_voxels = np.full((n, 3), -1, dtype=np.int64)
    if n == 0:
        return distances, hit_voxels

    ijk0 = np.floor(origin / resolution).astype(np.int64)
    if np.any(ijk0 < 0) or np.any(ijk0 >= shape):
        raise ValueError("ray origin outside the lattice")
    if occ[tuple(ijk0)]:
        distances[:] = EMBEDDED
        return distances, hit_voxels

    _trace_batch(np.ascontiguousarray(occ), float(resolution),
                 float(origin[0]), float(origin[1]), float(origin[2]),
                 int(ijk0[0]), int(ijk0[1]), int(ijk0[2]),
                 dirs, max_range, distances, hit_voxels)
    return distances, hit_voxels


@njit(cache=True)
def _trace_collect(res, eps, ox, oy, oz, i0, j0, k0, nx, ny, nz, dirs, stops,
                   hit_mask, free_out, hit_ijk, hit_found):  # pragma: no cover - compiled
    m = 0
    for r in range(dirs.shape[0]):
        stop = stops[r]
        if stop <= eps:
            continue
        # Origin voxel counts as pierced for every ray with positive stop.
        free_out[m, 0] = i0
        free_out[m, 1] = j0
        free_out[m, 2] = k0
        m += 1
        stop_m = stop - eps

        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        sx = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
        sy = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
        sz = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)
        if dx != 0.0:
            tdx = res / abs(dx)
            tmx = ((i0 + (1 if sx > 0 else 0)) * res - ox) / dx
        else:
            tdx = math.inf
            tmx = math.inf
        if dy != 0.0:
            tdy = res / abs(dy)
            tmy = ((j0 + (1 if sy > 0 else 0)) * res - oy) / dy
        else:
            tdy = math.inf
            tmy = math.inf
        if dz != 0.0:
            tdz = res / abs(dz)
            tmz = ((k0 + (1 if sz > 0 else 0)) * res - oz) / dz
        else:
            tdz = math.inf
            tmz = math.inf

        i = i0
        j = j0
        k = k0
        while True:
            if tmx <= tmy:
                if tmx <= tmz:
                    axis = 0
                    t = tmx
                else:
                    axis = 2
                    t = tmz
            elif tmy <= tmz:
                axis = 1
                t = tmy
            else:
                axis = 2
                t = tmz
            if t >= stop_m:
                # The voxel entered at the stop distance is the hit endpoint.
                if hit_mask[r]:
                    ei = i
                    ej = j
                    ek = k
                    if axis == 0:
                        ei += sx
                    elif axis == 1:
                        ej += sy
                    else:
                        ek += sz
                    if 0 <= ei < nx and 0 <= ej < ny and 0 <= ek < nz:
                        hit_ijk[r, 0] = ei
                        hit_ijk[r, 1] = ej
                        hit_ijk[r, 2] = ek
                        hit_found[r] = True
                break
            if axis == 0:
                i += sx
                if i < 0 or i >= nx:
                    break
            elif axis == 1:
                j += sy
                if j < 0 or j >= ny:
                    break
            else:
                k += sz
                if k < 0 or k >= nz:
                    break
            free_out[m, 0] = i
            free_out[m, 1] = j
            free_out[m, 2] = k
            m += 1
            if axis == 0:
                tmx += tdx
            elif axis == 1:
                tmy += tdy
            else:
                tmz += tdz
    return m


def collect_ray_updates(shape, resolution: float, origin, dirs: np.ndarray,
                        stops: np.ndarray, hit_mask: np.ndarray):
    """Voxels pierced by each ray strictly before its stop distance.

    For rays flagged in `hit_mask` the voxel entered at the stop distance
    is reported separately as the hit endpoint. Used by map integration:
    pierced voxels get free updates, endpoints get occupied updates.

    Returns (free_ijk (M, 3), hit_ijk (H, 3)); a voxel pierced by k rays
    appears k times in free_ijk.
    """
    origin = np.asarray(origin, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)
    stops = np.ascontiguousarray(stops, dtype=float)
    hit_mask = np.ascontiguousarray(hit_mask, dtype=bool)
    n = dirs.shape[0]
    eps = resolution * 1e-7

    ijk0 = np.floor(origin / resolution).astype(np.int64)
    if np.any(ijk0 < 0) or np.any(ijk0 >= shape):
        raise ValueError("ray origin outside the lattice")

    hit_ijk = np.full((n, 3), -1, dtype=np.int64)
    hit_found = np.zeros(n, dtype=bool)
    if n == 0:
        return np.zeros((0, 3), dtype=np.int64), hit_ijk[hit_found]

    # A ray advances each axis index monotonically, so it can pierce at
    # most sum(shape) voxels inside the lattice plus the origin voxel.
    cap = n * (int(shape[0]) + int(shape[1]) + int(shape[2]) + 2)
    free_out = np.empty((cap, 3), dtype=np.int64)
    m = _trace_collect(float(resolution), float(eps),
                       float(origin[0]), float(origin[1]), float(origin[2]),
                       int(ijk0[0]), int(ijk0[1]), int(ijk0[2]),
                       int(shape[0]), int(shape[1]), int(shape[2]),
                       dirs, stops, hit_mask, free_out, hit_ijk, hit_found)
    return free_out[:m].copy(), hit_ijk[hit_found]


@njit(cache=True)
def _trace_visible(free_grid, res, origins, starts, targets,
                   out):  # pragma: no cover - compiled
    nx, ny, nz = free_grid.shape
    for r in range(targets.shape[0]):
        ox = origins[r, 0]
        oy = origins[r, 1]
        oz = origins[r, 2]
        i0 = starts[r, 0]
        j0 = starts[r, 1]
        k0 = starts[r, 2]
        ti = targets[r, 0]
        tj = targets[r, 1]
        tk = targets[r, 2]
        # Unit direction toward the target voxel center.
        cx = (ti + 0.5) * res - ox
        cy = (tj + 0.5) * res - oy
        cz = (tk + 0.5) * res - oz
        norm = math.sqrt(cx * cx + cy * cy + cz * cz)
        dx = cx / norm
        dy = cy / norm
        dz = cz / norm
        sx = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
        sy = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
        sz = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)
        if dx != 0.0:
            tdx = res / abs(dx)
            tmx = ((i0 + (1 if sx > 0 else 0)) * res - ox) / dx
        else:
            tdx = math.inf
            tmx = math.inf
        if dy != 0.0:
            tdy = res / abs(dy)
            tmy = ((j0 + (1 if sy > 0 else 0)) * res - oy) / dy
        else:
            tdy = math.inf
            tmy = math.inf
        if dz != 0.0:
            tdz = res / abs(dz)
            tmz = ((k0 + (1 if sz > 0 else 0)) * res - oz) / dz
        else:
            tdz = math.inf
            tmz = math.inf

        i = i0
        j = j0
        k = k0
        while True:
            if tmx <= tmy:
                if tmx <= tmz:
                    axis = 0
                else:
                    axis = 2
            elif tmy <= tmz:
                axis = 1
            else:
                axis = 2
            if axis == 0:
                i += sx
                if i < 0 or i >= nx:
                    break
            elif axis == 1:
                j += sy
                if j < 0 or j >= ny:
                    break
            else:
                k += sz
                if k < 0 or k >= nz:
                    break
            if i == ti and j == tj and k == tk:
                out[r] = True
                break
            if not free_grid[i, j, k]:
                break
            if axis == 0:
                tmx += tdx
            elif axis == 1:
                tmy += tdy
            else:
                tmz += tdz


def sightline_batch(free_grid: np.ndarray, resolution: float, origins: np.ndarray,
                    starts: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-row visibility of target voxels through free space.

    `origins` (N, 3) metric points, `starts` (N, 3) their voxel indices,
    `targets` (N, 3) target voxels. A target is visible when every voxel
    entered before it is free; the target's own state does not matter.
    Callers handle degenerate rows (origin inside the target voxel).
    """
    out = np.zeros(len(targets), dtype=bool)
    if len(targets):
        _trace_visible(np.ascontiguousarray(free_grid), float(resolution),
                       np.ascontiguousarray(origins, dtype=float),
                       np.ascontiguousarray(starts, dtype=np.int64),
                       np.ascontiguousarray(targets, dtype=np.int64), out)
    return out
