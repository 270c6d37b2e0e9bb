"""Volumetric exploration planning.

A local sampled roadmap chases newly observable volume; a persistent
global graph remembers executed routes and unexploited high-gain spots so
the robot can reposition to frontiers and eventually ride the graph home.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PlannerError
from .geometry import Pose
from .graphs import Path, PlanGraph
from .mapping import UNKNOWN, MapSnapshot
from .sensors import SensorModel


@dataclass
class ExplorationParams:
    n_vertices: int = 40
    max_edge_len: float = 2.5
    k_nearest: int = 5
    robot_half_extents: tuple = (0.3, 0.3, 0.175)
    gain_range: float = 6.0  # caps gain evaluation radius, not the sensor
    lam: float = 0.3  # 1/m distance discount in path scoring
    min_candidate_gain: float = 1.0
    merge_radius: float = 0.5
    local_bounds_size: tuple = (20.0, 20.0, 6.0)
    max_height: float | None = None


@dataclass
class GainedPath:
    vids: list
    exploration_gain: float  # discounted unknown-voxel count along the path
    length: float


def local_bounds_around(position, params: ExplorationParams, snapshot: MapSnapshot):
    """Axis-aligned local planning box, clipped to the map and the height
    ceiling."""
    position = np.asarray(position, dtype=float)
    half = np.asarray(params.local_bounds_size, dtype=float) / 2
    world_hi = np.asarray(snapshot.shape) * snapshot.resolution
    lo = np.maximum(position - half, 0.0)
    hi = np.minimum(position + half, world_hi)
    if params.max_height is not None:
        hi[2] = min(hi[2], params.max_height)
    return lo, hi


def sample_local_graph(snapshot: MapSnapshot, root_pose: Pose,
                       local_bounds, params: ExplorationParams,
                       rng: np.random.Generator) -> PlanGraph:
    """Sampled roadmap rooted at the robot, entirely in mapped-free space.

    Samples failing the robot-box check are rejected; accepted samples
    connect to their nearest predecessors through swept-box-checked
    edges, so every kept vertex is reachable from the root. An empty
    graph (root only, no edges) signals a local dead-end.
    """
    half = np.asarray(params.robot_half_extents, dtype=float)
    root_pos = np.asarray(root_pose.position, dtype=float)
    if not snapshot.box_is_free(root_pos, half):
        raise PlannerError("local planner root is in collision")
    lo, hi = np.asarray(local_bounds[0], float), np.asarray(local_bounds[1], float)

    graph = PlanGraph(root=0)
    graph.add_vertex(root_pos, root_pose.yaw, vid=0)
    positions = [root_pos]

    accepted = 0
    attempts = 0
    max_attempts = params.n_vertices * 25
    while accepted < params.n_vertices and attempts < max_attempts:
        attempts += 1
        p = rng.uniform(lo, hi)
        yaw = rng.uniform(-np.pi, np.pi)
        if not snapshot.box_is_free(p, half):
            continue
        pos_arr = np.array(positions)
        d = np.linalg.norm(pos_arr - p, axis=1)
        order = np.argsort(d, kind="stable")
        linked = False
        vid = None
        links = 0
        for j in order:
            if d[j] > params.max_edge_len:
                break
            if d[j] < 1e-6:
                break  # duplicate position, drop the sample
            if snapshot.edge_is_free(positions[j], p, half):
                if vid is None:
                    vid = graph.add_vertex(p, yaw)
                    positions.append(p)
                graph.add_edge(int(j), vid)
                linked = True
                links += 1
                if links >= params.k_nearest:
                    break
        if linked:
            accepted += 1
    return graph


def exploration_gain(snapshot: MapSnapshot, position, yaw: float,
                     model: SensorModel, gain_range: float | None = None) -> int:
    """Unknown voxels the sensor would see from a hover at (position, yaw).

    A voxel counts iff its center lies inside the sensor frustum within
    the evaluation range and every voxel on the sight line before it is
    mapped free.
    """
    position = np.asarray(position, dtype=float)
    body = Pose(position=position, rpy=np.array([0.0, 0.0, yaw]))
    sensor_pose = body.compose(model.mount_pose)
    r = model.max_range if gain_range is None else min(model.max_range, gain_range)
    res = snapshot.resolution
    shape = np.asarray(snapshot.shape)

    lo = np.maximum(np.floor((sensor_pose.position - r) / res).astype(int), 0)
    hi = np.minimum(np.floor((sensor_pose.position + r) / res).astype(int) + 1, shape)
    if np.any(lo >= hi):
        return 0
    sub = snapshot.classes[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    unk = np.argwhere(sub == UNKNOWN)
    if unk.size == 0:
        return 0
    ijk = unk + lo
    centers = (ijk + 0.5) * res
    offs = centers - sensor_pose.position
    dist = np.linalg.norm(offs, axis=1)
    near = dist <= r
    ijk, offs, dist = ijk[near], offs[near], dist[near]
    if len(ijk) == 0:
        return 0
    dirs_sensor = (offs / np.maximum(dist, 1e-12)[:, None]) @ sensor_pose.rotation()
    in_fov = model.contains_direction(dirs_sensor)
    ijk = ijk[in_fov]
    if len(ijk) == 0:
        return 0
    seen = snapshot.visible_from(sensor_pose.position, ijk)
    return int(np.count_nonzero(seen))


def select_best_path(graph: PlanGraph, gains: dict, lam: float = 0.3) -> GainedPath:
    """Best root-to-vertex shortest path under discounted-gain scoring.

    Score of a path is the sum over its vertices of gain * exp(-lam * d),
    d being shortest-path distance from the root. Ties prefer shorter
    paths, then lower target vertex id. Zero score means the local graph
    has nothing left to see.
    """
    if len(graph) == 0:
        raise PlannerError("cannot score an empty graph")
    dist, parent = graph.shortest_paths(graph.root)
    discounted = {v: gains.get(v, 0.0) * np.exp(-lam * dist[v]) for v in dist}

    best = None  # (-score, length, vid)
    for vid in sorted(dist):
        path = graph.path_to(parent, vid)
        score = sum(discounted[v] for v in path)
        key = (-score, dist[vid], vid)
        if best is None or key < best[0]:
            best = (key, path)
    (neg_score, length, _), path = best
    return GainedPath(vids=path, exploration_gain=-neg_score, length=length)


@dataclass
class GlobalGraph:
    """Persistent mission-wide roadmap with remembered frontier candidates."""
    graph: PlanGraph = field(default_factory=PlanGraph)
    candidate_gains: dict = field(default_factory=dict)  # vid -> stored gain
    start_id: int | None = None

    def ensure_start(self, position, yaw: float = 0.0) -> int:
        if self.start_id is None:
            self.start_id = self.graph.add_vertex(position, yaw)
            self.graph.root = self.start_id
        return self.start_id

    def find_merge(self, position, radius: float) -> int | None:
        for vid in sorted(self.graph.vertices):
            if np.linalg.norm(self.graph.vertices[vid][0] - np.asarray(position)) <= radius:
                return vid
        return None


def update_global_graph(gg: GlobalGraph, local: PlanGraph, executed_vids: list,
                        gains: dict, snapshot: MapSnapshot,
                        params: ExplorationParams) -> list:
    """Fold an executed local path and leftover high-gain vertices into the
    global graph. Returns the global ids of the executed chain.

    Vertices merge with any existing global vertex within merge_radius,
    which makes repeated identical updates idempotent. Every new vertex
    attaches to the previous chain vertex or a nearby validated edge, so
    the global graph stays connected to the mission start.
    """
    half = np.asarray(params.robot_half_extents, dtype=float)
    chain = []
    prev = None
    for lv in executed_vids:
        pos, yaw = local.vertices[lv]
        gid = gg.find_merge(pos, params.merge_radius)
        if gid is None:
            gid = gg.graph.add_vertex(pos, yaw)
        if prev is not None and prev != gid and not gg.graph.has_edge(prev, gid):
            gg.graph.add_edge(prev, gid)
        chain.append(gid)
        prev = gid

    # Remember unexecuted high-gain vertices as frontier candidates.
    executed = set(executed_vids)
    for lv in sorted(local.vertices):
        if lv in executed:
            continue
        g = gains.get(lv, 0.0)
        if g < params.min_candidate_gain:
            continue
        pos, yaw = local.vertices[lv]
        gid = gg.find_merge(pos, params.merge_radius)
        if gid is None:
            attach = _nearest_connectable(gg, pos, half, snapshot, params.max_edge_len)
            if attach is None:
                continue
            gid = gg.graph.add_vertex(pos, yaw)
            gg.graph.add_edge(attach, gid)
        gg.candidate_gains[gid] = max(gg.candidate_gains.get(gid, 0.0), float(g))
    return chain


def _nearest_connectable(gg: GlobalGraph, position, half, snapshot: MapSnapshot,
                         max_edge_len: float):
    ids = sorted(gg.graph.vertices)
    if not ids:
        return None
    pos = np.array([gg.graph.vertices[v][0] for v in ids])
    d = np.linalg.norm(pos - np.asarray(position, float), axis=1)
    for j in np.argsort(d, kind="stable"):
        if d[j] > max_edge_len:
            return None
        if snapshot.edge_is_free(pos[j], position, half):
            return ids[j]
    return None


def mark_candidate_visited(gg: GlobalGraph, vid: int):
    gg.candidate_gains.pop(vid, None)


def plan_repositioning(gg: GlobalGraph, snapshot: MapSnapshot, current_vid: int,
                       model: SensorModel, params: ExplorationParams) -> Path | None:
    """Route to the best remembered frontier that still has something to
    show. Candidates are re-scored against the current map, highest
    stored gain first; stale ones are dropped. None means exploration is
    exhausted."""
    dist, parent = gg.graph.shortest_paths(current_vid)
    order = sorted(gg.candidate_gains, key=lambda v: (-gg.candidate_gains[v], v))
    for vid in order:
        pos, yaw = gg.graph.vertices[vid]
        live_gain = exploration_gain(snapshot, pos, yaw, model, params.gain_range)
        if live_gain < params.min_candidate_gain:
            del gg.candidate_gains[vid]
            continue
        gg.candidate_gains[vid] = float(live_gain)
        if vid not in dist:
            continue  # unreachable from here; keep for later
        vids = gg.graph.path_to(parent, vid)
        return _vids_to_path(gg.graph, vids)
    return None


def plan_homing(gg: GlobalGraph, current_vid: int) -> Path:
    """Shortest global-graph route back to the mission start vertex."""
    if gg.start_id is None:
        raise PlannerError("global graph has no start vertex")
    if current_vid not in gg.graph.vertices:
        raise PlannerError(f"unknown current vertex {current_vid}")
    dist, parent = gg.graph.shortest_paths(current_vid)
    if gg.start_id not in dist:
        raise PlannerError("start vertex unreachable, global graph corrupted")
    vids = gg.graph.path_to(parent, gg.start_id)
    return _vids_to_path(gg.graph, vids)


def _vids_to_path(graph: PlanGraph, vids: list) -> Path:
    positions = graph.path_positions(vids)
    yaws = np.array([graph.vertices[v][1] for v in vids])
    return Path(positions=positions, yaws=yaws, vids=list(vids))
