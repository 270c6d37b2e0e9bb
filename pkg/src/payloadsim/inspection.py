"""Surface inspection planning: viewpoint sampling, set cover, tour.

Surfaces are occupied voxels touching mapped-free space. Candidate camera
poses sit in a standoff band along estimated surface normals; a greedy
set cover picks a small subset whose fields of view see every reachable
surface voxel, and a roadmap tour strings the picks together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import PlannerError
from .geometry import Pose
from .graphs import Path, PlanGraph
from .mapping import FREE, OCCUPIED, MapSnapshot
from .sensors import SensorModel

_FACE_STRUCT = ndimage.generate_binary_structure(3, 1)
_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


@dataclass
class InspectionParams:
    standoff: float = 2.0
    band: tuple = (0.8, 1.2)  # acceptable range as multiples of standoff
    incidence_limit: float = np.radians(70.0)
    n_per_voxel: int = 2  # candidates sampled per surface voxel
    surface_stride: int = 2  # candidate generation visits every k-th voxel
    max_z: float | None = None
    robot_half_extents: tuple = (0.3, 0.3, 0.175)
    roadmap_samples: int = 250
    k_nearest: int = 8
    max_edge_len: float = 3.0
    two_opt_passes: int = 40


@dataclass
class SurfaceSet:
    resolution: float
    voxels: np.ndarray  # (N, 3) int indices, lexicographic order
    normals: np.ndarray  # (N, 3) unit outward estimates
    ambiguous: np.ndarray  # (N,) bool, free space gave no usable direction

    def __len__(self):
        return len(self.voxels)

    @property
    def centers(self) -> np.ndarray:
        return (self.voxels + 0.5) * self.resolution


@dataclass
class Viewpoint:
    vp_id: int
    position: np.ndarray
    yaw: float
    pitch: float
    covered: np.ndarray  # surface ids this pose sees
    source_voxel: int  # surface id the candidate was spawned from

    def pose(self) -> Pose:
        return Pose(position=self.position, rpy=np.array([0.0, self.pitch, self.yaw]))


def extract_surfaces(snapshot: MapSnapshot) -> SurfaceSet:
    """Occupied voxels face-adjacent to mapped-free space, with outward
    normals from the 3x3x3 free-neighbor centroid direction. A voxel whose
    free neighbors cancel out (an isolated blob) is flagged ambiguous."""
    occ = snapshot.classes == OCCUPIED
    free = snapshot.classes == FREE
    surf_mask = occ & ndimage.binary_dilation(free, structure=_FACE_STRUCT)
    voxels = np.argwhere(surf_mask)

    axes = np.arange(-1, 2, dtype=np.float32)
    freef = free.astype(np.float32)
    comps = []
    for axis in range(3):
        w = np.zeros((3, 3, 3), dtype=np.float32)
        shape = [1, 1, 1]
        shape[axis] = 3
        w += axes.reshape(shape)
        comps.append(ndimage.correlate(freef, w, mode="constant", cval=0.0))
    grads = np.stack([c[surf_mask] for c in comps], axis=1)
    norms = np.linalg.norm(grads, axis=1)
    ambiguous = norms < 0.5
    normals = np.zeros_like(grads)
    ok = ~ambiguous
    normals[ok] = grads[ok] / norms[ok, None]
    normals[ambiguous] = np.array([0.0, 0.0, 1.0])
    return SurfaceSet(resolution=snapshot.resolution, voxels=voxels,
                      normals=normals, ambiguous=ambiguous)


def _perturbed_dirs(normal: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """The normal itself plus slightly tilted copies."""
    dirs = [normal]
    for _ in range(count - 1):
        tilt = rng.normal(0.0, 0.35, 3)
        v = normal + tilt
        n = np.linalg.norm(v)
        if n < 1e-9:
            v, n = normal, 1.0
        dirs.append(v / n)
    return np.array(dirs)


_AXIS_DIRS = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0],
                       [0, 0, 1], [0, 0, -1]], dtype=float)


def sample_viewpoints(surfaces: SurfaceSet, standoff: float, camera: SensorModel,
                      snapshot: MapSnapshot, params: InspectionParams,
                      rng: np.random.Generator) -> tuple[list, np.ndarray]:
    """Candidate camera poses along (perturbed) surface normals.

    Returns (candidates, uncoverable_ids): surface voxels no candidate can
    see are reported, not fatal. Candidate coverage obeys the standoff
    band, frustum, incidence limit, and line-of-sight rules.
    """
    if not (0 < standoff <= camera.max_range):
        raise PlannerError("standoff outside the camera's useful range")
    half = np.asarray(params.robot_half_extents, dtype=float)
    centers = surfaces.centers
    candidates: list[Viewpoint] = []
    for sid in range(0, len(surfaces), params.surface_stride):
        if surfaces.ambiguous[sid]:
            dirs = _AXIS_DIRS[:params.n_per_voxel * 2]
        else:
            dirs = _perturbed_dirs(surfaces.normals[sid], params.n_per_voxel, rng)
        for d in dirs:
            pos = centers[sid] + standoff * d
            if params.max_z is not None and pos[2] > params.max_z:
                continue
            if not snapshot.box_is_free(pos, half):
                continue
            face = centers[sid] - pos
            dist = np.linalg.norm(face)
            yaw = float(np.arctan2(face[1], face[0]))
            pitch = float(-np.arcsin(np.clip(face[2] / dist, -1.0, 1.0)))
            candidates.append(Viewpoint(vp_id=len(candidates), position=pos,
                                        yaw=yaw, pitch=pitch,
                                        covered=np.zeros(0, dtype=int),
                                        source_voxel=sid))
    if candidates:
        _fill_coverage(candidates, surfaces, standoff, camera, snapshot, params)
    seen = np.zeros(len(surfaces), dtype=bool)
    for c in candidates:
        seen[c.covered] = True
    return candidates, np.flatnonzero(~seen)


def _fill_coverage(candidates: list, surfaces: SurfaceSet, standoff: float,
                   camera: SensorModel, snapshot: MapSnapshot,
                   params: InspectionParams):
    """Compute each candidate's covered set in one batched pass."""
    centers = surfaces.centers
    tree = cKDTree(centers)
    pos = np.array([c.position for c in candidates])
    d_lo = params.band[0] * standoff
    d_hi = params.band[1] * standoff

    neighbor_lists = tree.query_ball_point(pos, d_hi)
    c_parts, v_parts = [], []
    for i, nl in enumerate(neighbor_lists):
        if len(nl):
            c_parts.append(np.full(len(nl), i, dtype=np.int64))
            v_parts.append(np.asarray(nl, dtype=np.int64))
    if not c_parts:
        return
    pair_c = np.concatenate(c_parts)
    pair_v = np.concatenate(v_parts)

    vec = centers[pair_v] - pos[pair_c]
    dist = np.linalg.norm(vec, axis=1)
    keep = dist >= d_lo
    pair_c, pair_v, vec, dist = pair_c[keep], pair_v[keep], vec[keep], dist[keep]
    if pair_c.size == 0:
        return

    # Frustum: rotate sight lines into each candidate's camera frame.
    yaws = np.array([c.yaw for c in candidates])
    pitches = np.array([c.pitch for c in candidates])
    cy, sy = np.cos(yaws), np.sin(yaws)
    cp, sp = np.cos(pitches), np.sin(pitches)
    rot = np.zeros((len(candidates), 3, 3))
    # R = Rz(yaw) @ Ry(pitch); rows of R^T map world into camera frame.
    rot[:, 0, 0] = cy * cp
    rot[:, 0, 1] = -sy
    rot[:, 0, 2] = cy * sp
    rot[:, 1, 0] = sy * cp
    rot[:, 1, 1] = cy
    rot[:, 1, 2] = sy * sp
    rot[:, 2, 0] = -sp
    rot[:, 2, 1] = 0.0
    rot[:, 2, 2] = cp
    dirs_world = vec / dist[:, None]
    dirs_cam = np.einsum("nji,nj->ni", rot[pair_c], dirs_world)
    in_fov = camera.contains_direction(dirs_cam)
    pair_c, pair_v, dist = pair_c[in_fov], pair_v[in_fov], dist[in_fov]
    dirs_world = dirs_world[in_fov]
    if pair_c.size == 0:
        return

    # Incidence between the outward normal and the voxel-to-camera ray;
    # waived where the normal estimate is ambiguous.
    cos_inc = -np.einsum("nj,nj->n", surfaces.normals[pair_v], dirs_world)
    ok_inc = surfaces.ambiguous[pair_v] | (cos_inc >= np.cos(params.incidence_limit))
    pair_c, pair_v = pair_c[ok_inc], pair_v[ok_inc]
    if pair_c.size == 0:
        return

    los = snapshot.visible_from(pos[pair_c], surfaces.voxels[pair_v])
    pair_c, pair_v = pair_c[los], pair_v[los]

    order = np.lexsort((pair_v, pair_c))
    pair_c, pair_v = pair_c[order], pair_v[order]
    starts = np.flatnonzero(np.r_[True, pair_c[1:] != pair_c[:-1]])
    bounds = np.r_[starts, pair_c.size]
    for a, b in zip(bounds[:-1], bounds[1:]):
        candidates[pair_c[a]].covered = pair_v[a:b].copy()


def select_cover(candidates: list, surfaces: SurfaceSet) -> tuple[list, np.ndarray]:
    """Greedy set cover over the surface voxels.

    Repeatedly picks the candidate seeing the most still-uncovered voxels
    (ties to the lower id) until nothing improves. Returns the selected
    candidates and the ids left uncovered."""
    n_surf = len(surfaces)
    if n_surf == 0 or not candidates:
        return [], np.arange(n_surf)
    n_bytes = (n_surf + 7) // 8
    masks = np.zeros((len(candidates), n_bytes), dtype=np.uint8)
    for i, c in enumerate(candidates):
        if len(c.covered):
            bits = np.zeros(n_surf, dtype=np.uint8)
            bits[c.covered] = 1
            masks[i] = np.packbits(bits)
    uncovered = np.full(n_bytes, 0xFF, dtype=np.uint8)
    if n_surf % 8:
        uncovered[-1] = 0xFF << (8 - n_surf % 8) & 0xFF
    selected = []
    while True:
        gains = _POPCOUNT[masks & uncovered].sum(axis=1)
        best = int(np.argmax(gains))
        if gains[best] == 0:
            break
        selected.append(candidates[best])
        uncovered &= ~masks[best]
    left = np.flatnonzero(np.unpackbits(uncovered)[:n_surf])
    return selected, left


@dataclass
class TourResult:
    path: Path
    order: list  # viewpoint ids in visit order
    stop_indices: list  # waypoint index of each visited viewpoint
    cost: float
    skipped: list  # viewpoint ids unreachable from the start


def connect_and_tour(viewpoints: list, start_pose: Pose, snapshot: MapSnapshot,
                     params: InspectionParams, rng: np.random.Generator,
                     seed_graph: PlanGraph | None = None) -> TourResult:
    """Collision-free open tour from the start through every reachable
    viewpoint: roadmap shortest-path costs, nearest-neighbor order, 2-opt
    improvement, then concatenated waypoints.

    `seed_graph` primes the roadmap with known-traversable vertices and
    edges (typically the graph built while exploring); seeded edges are
    re-checked against the current map before use. Uniform sampling alone
    often fails to thread tight passages that the seed already crossed.
    """
    graph = PlanGraph(root=0)
    start_pos = np.asarray(start_pose.position, dtype=float)
    graph.add_vertex(start_pos, start_pose.yaw, vid=0)
    terminal_ids = [0]
    for vp in viewpoints:
        terminal_ids.append(graph.add_vertex(vp.position, vp.yaw))

    if seed_graph is not None and len(seed_graph):
        half = np.asarray(params.robot_half_extents, dtype=float)
        remap = {}
        for svid in sorted(seed_graph.vertices):
            pos, yaw = seed_graph.vertices[svid]
            remap[svid] = graph.add_vertex(pos, yaw)
        for (a, b), length in sorted(seed_graph.edges.items()):
            if snapshot.edge_is_free(seed_graph.position(a),
                                     seed_graph.position(b), half):
                graph.add_edge(remap[a], remap[b], length)

    _connect_roadmap(graph, snapshot, params, rng)

    n_t = len(terminal_ids)
    dist_rows = []
    parents = []
    for t in terminal_ids:
        dist, parent = graph.shortest_paths(t)
        dist_rows.append(dist)
        parents.append(parent)
    cost = np.full((n_t, n_t), np.inf)
    for i, t in enumerate(terminal_ids):
        for j, u in enumerate(terminal_ids):
            if u in dist_rows[i]:
                cost[i, j] = dist_rows[i][u]

    reachable = [j for j in range(1, n_t) if np.isfinite(cost[0, j])]
    skipped = [viewpoints[j - 1].vp_id for j in range(1, n_t)
               if not np.isfinite(cost[0, j])]
    if not reachable:
        return TourResult(path=Path(positions=start_pos[None, :],
                                    yaws=np.array([start_pose.yaw])),
                          order=[], stop_indices=[], cost=0.0, skipped=skipped)

    order = _nearest_neighbor_order(cost, reachable)
    order = _two_opt(cost, order, params.two_opt_passes)

    # Stitch roadmap segments between consecutive stops.
    waypoints = [start_pos]
    yaws = [start_pose.yaw]
    stop_indices = []
    prev = 0
    total = 0.0
    for node in order:
        seg = graph.path_to(parents[prev], terminal_ids[node])
        for vid in seg[1:]:
            waypoints.append(graph.position(vid))
            yaws.append(_travel_yaw(waypoints))
        vp = viewpoints[node - 1]
        yaws[-1] = vp.yaw
        stop_indices.append(len(waypoints) - 1)
        total += cost[prev, node]
        prev = node
    path = Path(positions=np.array(waypoints), yaws=np.array(yaws))
    return TourResult(path=path, order=[viewpoints[n - 1].vp_id for n in order],
                      stop_indices=stop_indices, cost=float(total), skipped=skipped)


def _travel_yaw(waypoints: list) -> float:
    d = waypoints[-1] - waypoints[-2]
    if np.linalg.norm(d[:2]) < 1e-9:
        return 0.0
    return float(np.arctan2(d[1], d[0]))


def _connect_roadmap(graph: PlanGraph, snapshot: MapSnapshot,
                     params: InspectionParams, rng: np.random.Generator):
    """Densify the graph with free-space samples and k-nearest edges."""
    half = np.asarray(params.robot_half_extents, dtype=float)
    world_hi = np.asarray(snapshot.shape) * snapshot.resolution
    hi = world_hi.copy()
    if params.max_z is not None:
        hi[2] = min(hi[2], params.max_z)

    # Existing vertices first, then fresh samples.
    base_ids = sorted(graph.vertices)
    samples = 0
    attempts = 0
    while samples < params.roadmap_samples and attempts < params.roadmap_samples * 20:
        attempts += 1
        p = rng.uniform(np.zeros(3), hi)
        if snapshot.box_is_free(p, half):
            graph.add_vertex(p, 0.0)
            samples += 1

    ids = sorted(graph.vertices)
    pos = np.array([graph.vertices[v][0] for v in ids])
    tree = cKDTree(pos)
    k = min(params.k_nearest + 1, len(ids))
    dists, nbrs = tree.query(pos, k=k)
    for row, vid in enumerate(ids):
        for col in range(1, k):
            j = int(nbrs[row, col])
            d = float(dists[row, col])
            if not np.isfinite(d) or d > params.max_edge_len or d < 1e-9:
                continue
            other = ids[j]
            if graph.has_edge(vid, other):
                continue
            if snapshot.edge_is_free(pos[row], pos[j], half):
                graph.add_edge(vid, other, d)


def _nearest_neighbor_order(cost: np.ndarray, nodes: list) -> list:
    left = set(nodes)
    order = []
    cur = 0
    while left:
        nxt = min(left, key=lambda j: (cost[cur, j], j))
        order.append(nxt)
        left.remove(nxt)
        cur = nxt
    return order


def _two_opt(cost: np.ndarray, order: list, max_passes: int) -> list:
    """Open-tour 2-opt with the start pinned before order[0]."""
    tour = [0] + list(order)
    n = len(tour)
    for _ in range(max_passes):
        improved = False
        for i in range(1, n - 1):
            for j in range(i + 1, n):
                before = cost[tour[i - 1], tour[i]]
                after = cost[tour[i - 1], tour[j]]
                if j < n - 1:
                    before += cost[tour[j], tour[j + 1]]
                    after += cost[tour[i], tour[j + 1]]
                if after < before - 1e-12:
                    tour[i:j + 1] = reversed(tour[i:j + 1])
                    improved = True
        if not improved:
            break
    return tour[1:]
