"""Mission orchestration: config, tick-driven execution, metrics, reports.

A mission runs its mode sequence (explore, inspect, home) over a single
simulated payload. Every tick is: sensors render at the true pose, the
sync layer stamps the frames, the map integrates them, the active
planner supplies a guidance command, and the safety layer turns it into
the velocity actually flown. Everything is seeded, so identical configs
produce byte-identical reports.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath

import numpy as np

from .errors import ConfigError, PlannerError
from .exploration import (ExplorationParams, GlobalGraph, exploration_gain,
                          local_bounds_around, mark_candidate_visited,
                          plan_homing, plan_repositioning, sample_local_graph,
                          select_best_path, update_global_graph)
from .geometry import Pose, wrap_angle
from .graphs import Path, PlanGraph
from .inspection import (InspectionParams, _connect_roadmap, connect_and_tour,
                         extract_surfaces, sample_viewpoints, select_cover)
from .mapio import load_map, load_world, save_map, save_world  # noqa: F401
from .mapping import FREE, OCCUPIED, UNKNOWN, OccupancyMap
from .safety import (DriftModel, PartialState, SafetyParams, VelocityCommand,
                     policy_step, track_path)
from .sensors import SensorModel, default_rig, render_frame
from .timesync import (ClockDomain, ExposureProfile, TriggerBuffer,
                       assign_frames_to_triggers, default_tolerance,
                       generate_triggers, interval_stats, ptp_estimate_offset)
from .world import GENERATORS, VoxelWorld, build_scenario, parse_descriptor

MODES = ("explore", "inspect", "home")

_DT = 0.05
_TAU = 0.2
_HALF = (0.3, 0.3, 0.175)
_MIN_FLIGHT_Z = 0.5  # keeps the ToF floor returns out of the braking band
_REACH_TOL = 0.3
_VP_TOL = 0.35  # how close a stop must be parked before it claims coverage


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class MissionConfig:
    generator: str = "empty_room"
    seed: int = 0
    size: tuple | None = None  # (x, y, z) metres; generator default if None
    resolution: float | None = None
    modes: tuple = ("explore", "home")
    bounds: tuple | None = None  # ((lo_xyz), (hi_xyz)) exploration box
    max_height: float | None = None  # flight ceiling; world top if None
    standoff: float = 2.0
    mission_seed: int = 1
    v_max: float = 1.0
    drift_rate: float = 0.0
    range_noise: float = 0.0
    sim_time_limit: float = 600.0
    output_dir: str | None = None
    map_in: str | None = None

    def validate(self):
        if not self.modes:
            raise ConfigError("mode sequence must not be empty")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ConfigError(f"unknown modes: {bad}")
        if "inspect" in self.modes and "explore" in self.modes:
            if self.modes.index("inspect") < self.modes.index("explore"):
                raise ConfigError("inspect cannot run before explore")
        if self.max_height is not None and self.max_height <= 0:
            raise ConfigError("max_height must be positive")
        if self.standoff <= 0:
            raise ConfigError("standoff must be positive")
        if self.v_max <= 0:
            raise ConfigError("v_max must be positive")
        if self.drift_rate < 0 or self.range_noise < 0:
            raise ConfigError("noise rates must be non-negative")
        if self.sim_time_limit <= 0:
            raise ConfigError("sim_time_limit must be positive")
        if self.bounds is not None:
            lo, hi = np.asarray(self.bounds[0]), np.asarray(self.bounds[1])
            if lo.shape != (3,) or hi.shape != (3,) or np.any(lo >= hi):
                raise ConfigError("bounds must be two ordered xyz corners")
        return self


_CONFIG_KEYS = {
    "generator": str, "seed": int, "size": "vec3", "resolution": float,
    "modes": "list", "bounds": "vec6", "max_height": float,
    "standoff": float, "mission_seed": int, "v_max": float,
    "drift_rate": float, "range_noise": float, "sim_time_limit": float,
    "output_dir": str, "map_in": str,
}


def _parse_floats(value, n, key):
    parts = [p.strip() for p in str(value).split(",") if p.strip()]
    if len(parts) != n:
        raise ConfigError(f"{key} needs {n} comma-separated numbers")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def parse_mission_config(text: str) -> MissionConfig:
    """Plain-text mission config: one `key = value` per line."""
    try:
        raw = parse_descriptor(text)
    except Exception as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    kwargs = {}
    for key, value in raw.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key: {key!r}")
        kind = _CONFIG_KEYS[key]
        try:
            if kind == "list":
                kwargs[key] = tuple(p.strip() for p in str(value).split(",")
                                    if p.strip())
            elif kind == "vec3":
                kwargs[key] = _parse_floats(value, 3, key)
            elif kind == "vec6":
                v = _parse_floats(value, 6, key)
                kwargs[key] = (v[:3], v[3:])
            else:
                kwargs[key] = kind(value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    if "modes" in raw and not kwargs.get("modes"):
        raise ConfigError("mode sequence must not be empty")
    return MissionConfig(**kwargs).validate()


def load_mission_config(path) -> MissionConfig:
    p = FsPath(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_mission_config(p.read_text())


def resolve_output_dir(config: MissionConfig) -> FsPath | None:
    if config.output_dir is None:
        return None
    out = FsPath(config.output_dir)
    if not out.is_absolute():
        out = FsPath(os.environ.get("PAYLOADSIM_OUT", ".")) / out
    return out


# ---------------------------------------------------------------------------
# Timing bench

_TRIGGER_RATE = 20.0

# Per-driver arrival jitter (s), measured on the bench rig.
_BENCH = {
    "front_cam": dict(exposure=5.0e-3, prior=3.0e-3, sigma=0.90934e-3),
    "left_cam": dict(exposure=5.0e-3, prior=3.2e-3, sigma=0.76297e-3),
    "right_cam": dict(exposure=5.0e-3, prior=3.1e-3, sigma=0.76367e-3),
    "radar": dict(exposure=8.0e-3, prior=2.0e-3, sigma=0.69721e-3, divisor=2),
}
_IMU_PERIOD = 5.101e-3  # free-running hardware rate, not a clock error
_IMU_SIGMA = 0.46245e-3
_LIDAR_PERIOD = 5.0e-3  # packet stream paced by its internal clock
_LIDAR_CLOCK = dict(offset=2.5e-3, drift_ppm=30.0, jitter_sigma=3.5355e-6)
_PTP_INTERVAL = 1.0
_PTP_DELAY = 0.2e-3
_TOF_PERIOD = 100.242e-3  # free-running module, no trigger input
_TOF_SIGMA = 0.62225e-3


@dataclass
class SyncRow:
    sensor: str
    mean_ms: float
    std_ms: float
    n_samples: int
    matched: int = -1  # trigger matches; -1 for untriggered streams


def _ptp_corrected(true_times: np.ndarray, clock: ClockDomain,
                   rng: np.random.Generator, horizon: float) -> np.ndarray:
    """Host-time stamps for a stream on a drifting clock, corrected by a
    periodically refreshed two-way offset estimate."""
    local = clock.local(true_times, rng)
    sync_times = np.arange(0.0, horizon, _PTP_INTERVAL)
    est = np.empty(sync_times.size)
    for i, ts in enumerate(sync_times):
        t2 = clock.local(ts + _PTP_DELAY)
        t3 = t2 + 0.1e-3
        t4 = ts + 2 * _PTP_DELAY + 0.1e-3
        est[i] = ptp_estimate_offset(ts, float(t2), float(t3), t4).offset
    idx = np.clip(np.searchsorted(sync_times, true_times, side="right") - 1,
                  0, sync_times.size - 1)
    return local - est[idx]


def simulate_sync_bench(duration: float = 520.0, seed: int = 0) -> list:
    """Timing statistics of the full rig over a simulated bench run.

    Triggered sensors ride a shared 20 Hz pulse line (the radar fires on
    every second pulse) and their arrivals are matched back to pulses;
    the IMU, LiDAR packet stream, and ToF module are free-running.
    Returns one SyncRow per sensor stream.
    """
    rng = np.random.default_rng(seed)
    pulse_clock = ClockDomain(kind="host")
    triggers = generate_triggers(pulse_clock, _TRIGGER_RATE, duration)
    trig_true = triggers.timestamps
    period = 1.0 / _TRIGGER_RATE

    rows = []
    for name, spec in _BENCH.items():
        div = spec.get("divisor", 1)
        fire = trig_true[::div]
        seqs = triggers.sequence_ids[::div]
        arrivals = fire + spec["exposure"] + spec["prior"] + \
            rng.normal(0.0, spec["sigma"], fire.size)
        profile = ExposureProfile(spec["exposure"], spec["prior"],
                                  default_tolerance(period))
        result = assign_frames_to_triggers(arrivals, triggers, profile)
        matched = sum(1 for f, s in result.pairs if s == seqs[f])
        mean, std = interval_stats(arrivals)
        rows.append(SyncRow(name, mean, std, arrivals.size, matched))

    n_imu = int(duration / _IMU_PERIOD)
    imu = np.arange(n_imu) * _IMU_PERIOD + rng.normal(0.0, _IMU_SIGMA, n_imu)
    mean, std = interval_stats(imu)
    rows.append(SyncRow("imu", mean, std, n_imu))

    lidar_clock = ClockDomain(kind="ptp_slave", **_LIDAR_CLOCK)
    n_lid = int(duration / _LIDAR_PERIOD)
    corrected = _ptp_corrected(np.arange(n_lid) * _LIDAR_PERIOD,
                               lidar_clock, rng, duration)
    mean, std = interval_stats(corrected)
    rows.append(SyncRow("lidar_imu", mean, std, n_lid))

    n_tof = int(duration / _TOF_PERIOD)
    tof = np.arange(n_tof) * _TOF_PERIOD + rng.normal(0.0, _TOF_SIGMA, n_tof)
    mean, std = interval_stats(tof)
    rows.append(SyncRow("tof", mean, std, n_tof))
    return rows


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class MissionMetrics:
    explored_fraction: float
    coverage_fraction: float  # nan when the mission had no inspect phase
    path_length: float
    collision_ticks: int
    reachable_free: int
    mapped_free_reachable: int


def compute_metrics(positions, world: VoxelWorld, snapshot=None,
                    coverage: tuple | None = None,
                    robot_half_extents=_HALF) -> MissionMetrics:
    """Mission-level numbers from a trajectory and the ground truth.

    Explored fraction is mapped-free over flood-fill-reachable free
    voxels; collisions are counted per logged tick by bounding-box
    intersection with occupied voxels.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    half = np.asarray(robot_half_extents, dtype=float)
    path_length = 0.0
    if len(positions) > 1:
        path_length = float(np.linalg.norm(np.diff(positions, axis=0),
                                           axis=1).sum())
    collisions = sum(1 for p in positions if world.box_collides(p, half))

    reachable = world.reachable_free_mask()
    n_reach = int(reachable.sum())
    n_mapped = 0
    if snapshot is not None:
        n_mapped = int(np.count_nonzero((snapshot.classes == FREE) & reachable))
    explored = n_mapped / n_reach if n_reach else 0.0

    cov = float("nan")
    if coverage is not None:
        covered, total = coverage
        cov = covered / total if total else float("nan")
    return MissionMetrics(explored_fraction=explored, coverage_fraction=cov,
                          path_length=path_length, collision_ticks=collisions,
                          reachable_free=n_reach, mapped_free_reachable=n_mapped)


@dataclass
class MissionReport:
    generator: str
    world_seed: int
    mission_seed: int
    modes: tuple
    sim_duration: float
    metrics: MissionMetrics
    phase_times: dict
    sync_rows: list
    final_position: np.ndarray
    start_distance: float
    surface_total: int = 0
    surface_covered: int = 0
    surface_inspectable: int = 0
    wall_time: float = 0.0  # measured, never serialized


# ---------------------------------------------------------------------------
# Point-to-point routing over the mapped free space


def plan_route(snapshot, start_pose: Pose, goal_pos, params: InspectionParams,
               rng: np.random.Generator, seed_graph: PlanGraph | None = None) -> Path | None:
    """Roadmap shortest path between two mapped-free poses, or None.

    `seed_graph` primes the roadmap with known-traversable vertices and
    edges; seeded edges are re-checked against the current map.
    """
    graph = PlanGraph(root=0)
    graph.add_vertex(np.asarray(start_pose.position, float), start_pose.yaw,
                     vid=0)
    goal_id = graph.add_vertex(np.asarray(goal_pos, float), 0.0)
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
    dist, parent = graph.shortest_paths(0)
    if goal_id not in dist:
        return None
    vids = graph.path_to(parent, goal_id)
    positions = graph.path_positions(vids)
    yaws = np.array([graph.yaw(v) for v in vids])
    return Path(positions=positions, yaws=yaws, vids=list(vids))


# ---------------------------------------------------------------------------
# Engine


class _MissionEngine:
    def __init__(self, config: MissionConfig):
        config.validate()
        self.cfg = config
        desc = {"generator": config.generator, "seed": config.seed}
        if config.size is not None:
            desc["size_x"], desc["size_y"], desc["size_z"] = config.size
        if config.resolution is not None:
            desc["resolution"] = config.resolution
        self.world = build_scenario(desc)

        self.rig = default_rig()
        self.lidar = self.rig["lidar"]
        self.tof = self.rig["tof"]
        if config.map_in is not None:
            self.occ_map = load_map(config.map_in)
            if (self.occ_map.shape != self.world.occupancy.shape
                    or abs(self.occ_map.resolution - self.world.resolution) > 1e-9):
                raise ConfigError("prior map does not match the scenario lattice")
        else:
            self.occ_map = OccupancyMap(resolution=self.world.resolution,
                                        shape=self.world.occupancy.shape)
        # Planners validate poses with the robot box grown by a tracking
        # margin: the carrot follower cuts corners by a few centimetres,
        # more at higher commanded speeds.
        margin = 0.15 + 0.05 * max(0.0, config.v_max - 1.0)
        self.plan_half = tuple(np.asarray(_HALF) + margin)
        self.occ_map.seed_free_region(self.world.start_pose.position,
                                      np.asarray(self.plan_half) + 0.05)

        self.pose = self.world.start_pose.copy()
        self.start_pos = self.pose.position.copy()
        self.est_position = self.start_pos.copy()
        self.vel_body = np.zeros(3)
        self.sim_time = 0.0
        self.phase = "idle"
        self.rows = []
        self.phase_times = {}
        self.world_top = self.world.extents[2] * self.world.resolution
        self.ceiling = min(config.max_height if config.max_height is not None
                           else self.world_top, self.world_top)

        self.rng = np.random.default_rng(config.mission_seed)
        self.stamp_rng = np.random.default_rng(config.mission_seed + 1)
        self.noise_rng = (np.random.default_rng(config.mission_seed + 2)
                          if config.range_noise > 0 else None)
        self.drift = DriftModel(config.drift_rate, config.mission_seed + 3)
        self.safety = SafetyParams(v_max=config.v_max)

        self.lidar_clock = ClockDomain(kind="ptp_slave", **_LIDAR_CLOCK)
        self.ptp_offset = 0.0
        self.next_ptp = 0.0
        self.next_fire = {"lidar": 0.0, "tof": 0.0}
        self.stamps = {"lidar": [], "tof": []}
        self.last_depth = np.full(self.tof.ray_directions().shape[:2], np.inf)

        self.global_graph = GlobalGraph()
        self.current_gid = self.global_graph.ensure_start(
            self.start_pos.copy(), self.pose.yaw)

        # Inspection bookkeeping, filled by the inspect phase.
        self.surfaces = None
        self.covered_by = np.zeros(0, dtype=int)
        self.surface_inspectable = 0
        self.inspect_snapshot = None
        self.inspect_viewpoints = []

    # -- per-tick pipeline --------------------------------------------------

    def _refresh_ptp(self):
        t = self.sim_time
        t2 = self.lidar_clock.local(t + _PTP_DELAY)
        t3 = t2 + 0.1e-3
        t4 = t + 2 * _PTP_DELAY + 0.1e-3
        self.ptp_offset = ptp_estimate_offset(t, float(t2), float(t3), t4).offset
        self.next_ptp = t + _PTP_INTERVAL

    def _sense_and_map(self):
        if self.sim_time >= self.next_ptp:
            self._refresh_ptp()
        est_pose = Pose(position=self.est_position, rpy=self.pose.rpy.copy())
        for name, model in (("tof", self.tof), ("lidar", self.lidar)):
            if self.sim_time + 1e-9 < self.next_fire[name]:
                continue
            self.next_fire[name] += model.period
            frame = render_frame(self.world, self.pose, model,
                                 timestamp=self.sim_time, rng=self.noise_rng)
            if name == "lidar":
                local = float(self.lidar_clock.local(self.sim_time,
                                                     self.stamp_rng))
                self.stamps[name].append(local - self.ptp_offset)
            else:
                jitter = float(self.stamp_rng.normal(0.0, _TOF_SIGMA))
                self.stamps[name].append(self.sim_time + jitter)
                self.last_depth = frame.ranges
            self.occ_map.integrate_scan(est_pose, frame)

    def _tick(self, goal_dir_body, speed: float, yaw_target: float | None = None
              ) -> VelocityCommand:
        self.est_position = self.drift.step(self.pose.position)
        self._sense_and_map()

        if goal_dir_body is None:
            yaw_rate = 0.0
            if yaw_target is not None:
                err = wrap_angle(yaw_target - self.pose.yaw)
                yaw_rate = float(np.clip(self.safety.yaw_gain * err,
                                         -self.safety.yaw_rate_max,
                                         self.safety.yaw_rate_max))
            cmd = VelocityCommand(linear=np.zeros(3), yaw_rate=yaw_rate,
                                  provenance="nominal")
        else:
            state = PartialState(velocity=self.vel_body.copy(),
                                 attitude=self.pose.rpy.copy(),
                                 goal_dir=goal_dir_body)
            params = self.safety if speed >= self.safety.v_max else \
                replace(self.safety, v_max=max(speed, 1e-3))
            cmd = policy_step(state, self.last_depth, self.tof, params)

        self.vel_body = self.vel_body + (cmd.linear - self.vel_body) * (_DT / _TAU)
        yaw = wrap_angle(self.pose.yaw + cmd.yaw_rate * _DT)
        rpy = np.array([0.0, 0.0, yaw])
        rot = Pose(position=self.pose.position, rpy=rpy).rotation()
        new_pos = self.pose.position + rot @ self.vel_body * _DT
        if new_pos[2] > self.ceiling:
            new_pos[2] = self.ceiling
        self.pose = Pose(position=new_pos, rpy=rpy)

        finite = self.last_depth[np.isfinite(self.last_depth)]
        min_depth = float(finite.min()) if finite.size else np.inf
        self.rows.append((self.sim_time, *new_pos, yaw, *self.est_position,
                          *cmd.linear, cmd.yaw_rate, cmd.provenance,
                          min_depth, self.phase))
        self.sim_time += _DT
        return cmd

    def _hover(self, duration: float, yaw_target: float | None = None):
        for _ in range(max(1, int(round(duration / _DT)))):
            self._tick(None, 0.0, yaw_target)

    def _follow(self, path: Path, stall_limit: float = 2.5) -> str:
        """Track a path tick-by-tick through the safety layer.

        Returns done, replan, blocked, or timeout.
        """
        budget = self.sim_time + max(20.0, 3.0 * path.length / self.cfg.v_max + 15.0)
        stall = 0.0
        goal = path.positions[-1]
        while self.sim_time < min(budget, self.cfg.sim_time_limit):
            est_pose = Pose(position=self.est_position, rpy=self.pose.rpy.copy())
            # Near obstacles the braking policy can hold the vehicle a hair
            # short of the final waypoint forever; parked-close counts.
            if np.linalg.norm(est_pose.position - goal) <= 0.15:
                return "done"
            tr = track_path(path, est_pose, v_max=self.cfg.v_max)
            if tr.done:
                return "done"
            if tr.replan:
                return "replan"
            cmd = self._tick(tr.goal_dir_body, tr.speed)
            if cmd.provenance == "stop":
                stall += _DT
                if stall > stall_limit:
                    return "blocked"
            else:
                stall = 0.0
        return "timeout"

    # -- phases -------------------------------------------------------------

    def _explore_params(self) -> ExplorationParams:
        return ExplorationParams(robot_half_extents=self.plan_half,
                                 max_height=self.ceiling - 0.05)

    def _clip_bounds(self, lo, hi):
        lo, hi = np.array(lo), np.array(hi)
        if self.cfg.bounds is not None:
            lo = np.maximum(lo, np.asarray(self.cfg.bounds[0], float))
            hi = np.minimum(hi, np.asarray(self.cfg.bounds[1], float))
        lo[2] = max(lo[2], _MIN_FLIGHT_Z)
        hi[2] = max(hi[2], lo[2] + 0.1)
        return lo, hi

    def _path_from(self, graph: PlanGraph, vids) -> Path:
        positions = graph.path_positions(vids)
        yaws = np.array([graph.yaw(v) for v in vids])
        return Path(positions=positions, yaws=yaws, vids=list(vids))

    def _resync_gid(self):
        gid = self.global_graph.graph.nearest_vertex(self.pose.position)
        if gid is not None:
            self.current_gid = gid

    def _run_explore(self):
        params = self._explore_params()
        gg = self.global_graph
        self._hover(0.2)
        root_failures = 0
        while self.sim_time < self.cfg.sim_time_limit:
            snap = self.occ_map.snapshot()
            lo, hi = self._clip_bounds(
                *local_bounds_around(self.pose.position, params, snap))
            try:
                graph = sample_local_graph(snap, self.pose, (lo, hi),
                                           params, self.rng)
            except PlannerError:
                root_failures += 1
                if root_failures > 3:
                    raise
                self._hover(0.3)
                continue
            root_failures = 0
            gains = {v: exploration_gain(snap, graph.position(v), graph.yaw(v),
                                         self.lidar, params.gain_range)
                     for v in sorted(graph.vertices)}
            best = select_best_path(graph, gains, params.lam)

            if best.exploration_gain >= params.min_candidate_gain and len(best.vids) > 1:
                status = self._follow(self._path_from(graph, best.vids))
                chain = update_global_graph(gg, graph, best.vids, gains,
                                            snap, params)
                if status == "done":
                    self.current_gid = chain[-1]
                    mark_candidate_visited(gg, self.current_gid)
                else:
                    self._resync_gid()
                continue

            # Local view exhausted: bank leftover candidates, then route to
            # the best remembered frontier anywhere on the global graph.
            update_global_graph(gg, graph, [graph.root], gains, snap, params)
            rep = plan_repositioning(gg, snap, self.current_gid,
                                     self.lidar, params)
            if rep is None:
                break
            target = rep.vids[-1]
            status = self._follow(rep)
            mark_candidate_visited(gg, target)
            if status == "done":
                self.current_gid = target
            else:
                self._resync_gid()

    def _run_inspect(self):
        cfg = self.cfg
        iparams = InspectionParams(standoff=cfg.standoff,
                                   max_z=self.ceiling - 0.05,
                                   robot_half_extents=self.plan_half)
        snap = self.occ_map.snapshot()
        surfaces = extract_surfaces(snap)
        self.surfaces = surfaces
        self.inspect_snapshot = snap
        self.covered_by = np.full(len(surfaces), -1, dtype=int)
        if len(surfaces) == 0:
            return
        candidates, uncoverable = sample_viewpoints(
            surfaces, cfg.standoff, self.rig["front_cam"], snap, iparams,
            self.rng)
        self.surface_inspectable = len(surfaces) - uncoverable.size
        selected, _ = select_cover(candidates, surfaces)
        if not selected:
            return
        # Greedy order front-loads coverage; its thin tail of one-voxel
        # stops costs tour time without moving the result. Keep stops
        # until nearly all coverable voxels are claimed.
        coverable = np.zeros(len(surfaces), dtype=bool)
        for vp in selected:
            coverable[vp.covered] = True
        target = 0.975 * int(coverable.sum())
        seen = np.zeros(len(surfaces), dtype=bool)
        kept, claimed = [], 0
        for vp in selected:
            kept.append(vp)
            fresh = vp.covered[~seen[vp.covered]]
            claimed += fresh.size
            seen[vp.covered] = True
            if claimed >= target:
                break
        tour = connect_and_tour(kept, self.pose, snap, iparams, self.rng,
                                seed_graph=self.global_graph.graph)
        selected = kept
        self.inspect_viewpoints = list(kept)
        by_id = {vp.vp_id: vp for vp in selected}

        prev = 0
        for stop, vp_id in zip(tour.stop_indices, tour.order):
            seg = Path(positions=tour.path.positions[prev:stop + 1],
                       yaws=tour.path.yaws[prev:stop + 1])
            prev = stop
            vp = by_id[vp_id]
            if seg.length > 1e-6 or len(seg) > 1:
                if self._follow(seg) != "done":
                    # Off the tour line; try one direct route to the stop.
                    if np.linalg.norm(self.pose.position - vp.position) > _VP_TOL:
                        route = plan_route(self.occ_map.snapshot(),
                                           Pose(position=self.est_position,
                                                rpy=self.pose.rpy.copy()),
                                           vp.position, iparams, self.rng,
                                           seed_graph=self.global_graph.graph)
                        if route is not None:
                            self._follow(route)
            if self.sim_time >= cfg.sim_time_limit:
                break
            # A stop only counts, and only claims coverage, when the
            # vehicle actually parked at its viewpoint.
            if np.linalg.norm(self.pose.position - vp.position) <= _VP_TOL:
                self._hover(0.5, yaw_target=vp.yaw)
                ids = vp.covered[self.covered_by[vp.covered] < 0]
                self.covered_by[ids] = vp_id
            if self.sim_time >= cfg.sim_time_limit:
                break

    def _run_home(self):
        gg = self.global_graph
        iparams = InspectionParams(max_z=self.ceiling - 0.05,
                                   robot_half_extents=self.plan_half)
        for attempt in range(4):
            snap = self.occ_map.snapshot()
            path = None
            if len(gg.graph) > 1 and attempt < 2:
                self._resync_gid()
                anchor = gg.graph.position(self.current_gid)
                if np.linalg.norm(anchor - self.pose.position) < 1.0:
                    try:
                        path = plan_homing(gg, self.current_gid)
                    except PlannerError:
                        path = None
            if path is None:
                path = plan_route(snap, self.pose, self.start_pos, iparams,
                                  self.rng, seed_graph=gg.graph)
            if path is None:
                continue
            if self._follow(path) == "done":
                return
        if np.linalg.norm(self.pose.position - self.start_pos) > 0.5:
            raise PlannerError("homing failed to reach the start region")

    # -- reporting ----------------------------------------------------------

    def _sync_rows(self) -> list:
        rows = []
        if self.sim_duration >= 2.0:
            rows = simulate_sync_bench(self.sim_duration,
                                       self.cfg.mission_seed + 7)
            rows = [r for r in rows if r.sensor not in ("lidar_imu", "tof")]
        for name in ("lidar", "tof"):
            ts = self.stamps[name]
            if len(ts) >= 2:
                mean, std = interval_stats(ts)
                label = "lidar_imu" if name == "lidar" else name
                rows.append(SyncRow(label, mean, std, len(ts)))
        return rows

    def run(self) -> MissionReport:
        started = time.perf_counter()
        for mode in self.cfg.modes:
            t0 = self.sim_time
            self.phase = mode
            if mode == "explore":
                self._run_explore()
            elif mode == "inspect":
                self._run_inspect()
            else:
                self._run_home()
            self.phase_times[mode] = self.phase_times.get(mode, 0.0) + \
                (self.sim_time - t0)
            if self.sim_time >= self.cfg.sim_time_limit:
                break
        self.sim_duration = self.sim_time

        positions = (np.array([r[1:4] for r in self.rows])
                     if self.rows else self.pose.position[None, :])
        coverage = None
        if self.surfaces is not None:
            coverage = (int((self.covered_by >= 0).sum()), len(self.surfaces))
        snapshot = self.occ_map.snapshot()
        metrics = compute_metrics(positions, self.world, snapshot, coverage)
        report = MissionReport(
            generator=self.cfg.generator, world_seed=self.cfg.seed,
            mission_seed=self.cfg.mission_seed, modes=tuple(self.cfg.modes),
            sim_duration=self.sim_duration, metrics=metrics,
            phase_times=dict(self.phase_times), sync_rows=self._sync_rows(),
            final_position=self.pose.position.copy(),
            start_distance=float(np.linalg.norm(self.pose.position - self.start_pos)),
            surface_total=len(self.surfaces) if self.surfaces is not None else 0,
            surface_covered=coverage[0] if coverage else 0,
            surface_inspectable=self.surface_inspectable,
            wall_time=time.perf_counter() - started)
        return report


def run_mission(config: MissionConfig) -> MissionReport:
    """Execute a configured mission and write its report set if an output
    directory is configured."""
    engine = _MissionEngine(config)
    report = engine.run()
    out = resolve_output_dir(config)
    if out is not None:
        write_report_set(out, engine, report)
    return report


# ---------------------------------------------------------------------------
# Report files

TRAJECTORY_HEADER = ("t", "x", "y", "z", "yaw", "est_x", "est_y", "est_z",
                     "vx", "vy", "vz", "yaw_rate", "provenance", "min_depth",
                     "phase")


def _metrics_lines(report: MissionReport) -> list:
    m = report.metrics
    cov = "nan" if np.isnan(m.coverage_fraction) else f"{m.coverage_fraction:.6f}"
    lines = [("explored_fraction", f"{m.explored_fraction:.6f}"),
             ("coverage_fraction", cov),
             ("path_length_m", f"{m.path_length:.6f}"),
             ("collision_ticks", str(m.collision_ticks)),
             ("reachable_free_voxels", str(m.reachable_free)),
             ("mapped_free_reachable_voxels", str(m.mapped_free_reachable)),
             ("surface_voxels", str(report.surface_total)),
             ("surface_covered", str(report.surface_covered)),
             ("surface_inspectable", str(report.surface_inspectable)),
             ("sim_duration_s", f"{report.sim_duration:.2f}"),
             ("final_distance_to_start_m", f"{report.start_distance:.6f}")]
    for phase, dt in report.phase_times.items():
        lines.append((f"phase_time_{phase}_s", f"{dt:.2f}"))
    return lines


def write_report_set(out_dir, engine: _MissionEngine, report: MissionReport):
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    save_world(engine.world, out / "world.pswd")
    save_map(engine.occ_map, out / "map.psom")

    with open(out / "trajectory.csv", "w") as f:
        f.write(",".join(TRAJECTORY_HEADER) + "\n")
        for r in engine.rows:
            vals = [f"{r[0]:.3f}"] + [f"{v:.6f}" for v in r[1:12]] + \
                [r[12], f"{r[13]:.6f}" if np.isfinite(r[13]) else "inf", r[14]]
            f.write(",".join(vals) + "\n")

    with open(out / "metrics.csv", "w") as f:
        f.write("metric,value\n")
        for key, val in _metrics_lines(report):
            f.write(f"{key},{val}\n")

    write_sync_csv(out / "sync_stats.csv", report.sync_rows)

    with open(out / "inspection.csv", "w") as f:
        f.write("surface_voxel,covered_by\n")
        if engine.surfaces is not None:
            for sid, ijk in enumerate(engine.surfaces.voxels):
                tag = "_".join(str(int(v)) for v in ijk)
                vp = engine.covered_by[sid]
                f.write(f"{tag},{vp if vp >= 0 else 'UNCOVERED'}\n")

    with open(out / "report.txt", "w") as f:
        f.write(format_report(report))


def write_sync_csv(path, rows):
    with open(path, "w") as f:
        f.write("sensor,mean_ms,std_ms,n_samples\n")
        for r in rows:
            f.write(f"{r.sensor},{r.mean_ms:.3f},{r.std_ms:.3f},{r.n_samples}\n")


def format_report(report: MissionReport) -> str:
    lines = ["mission report", "=" * 14,
             f"generator        : {report.generator}",
             f"world seed       : {report.world_seed}",
             f"mission seed     : {report.mission_seed}",
             f"modes            : {', '.join(report.modes)}",
             f"sim duration [s] : {report.sim_duration:.2f}", ""]
    for key, val in _metrics_lines(report):
        lines.append(f"{key:34s}: {val}")
    lines.append("")
    lines.append("sync statistics  (sensor, mean ms, std ms, n)")
    for r in report.sync_rows:
        lines.append(f"  {r.sensor:10s} {r.mean_ms:10.3f} {r.std_ms:8.3f} "
                     f"{r.n_samples:8d}")
    lines.append("")
    return "\n".join(lines)


def format_sync_table(rows) -> str:
    lines = ["sensor      mean_ms   std_ms  n_samples"]
    for r in rows:
        lines.append(f"{r.sensor:10s} {r.mean_ms:8.3f} {r.std_ms:8.3f} "
                     f"{r.n_samples:10d}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Replay and inspection of stored artifacts


def load_metrics_csv(path) -> dict:
    out = {}
    lines = FsPath(path).read_text().splitlines()
    for line in lines[1:]:
        key, val = line.split(",", 1)
        out[key] = val
    return out


def load_trajectory_csv(path) -> np.ndarray:
    lines = FsPath(path).read_text().splitlines()
    rows = [line.split(",") for line in lines[1:]]
    return np.array([[float(r[1]), float(r[2]), float(r[3])] for r in rows])


def replay_metrics(out_dir) -> tuple:
    """Recompute trajectory-derived metrics from stored artifacts.

    Returns (recomputed dict, stored dict, mismatched keys). Map-derived
    and coverage numbers are taken as stored; path length and collision
    count are recomputed from the trajectory against the saved world.
    """
    out = FsPath(out_dir)
    world = load_world(out / "world.pswd")
    occ_map = load_map(out / "map.psom")
    positions = load_trajectory_csv(out / "trajectory.csv")
    stored = load_metrics_csv(out / "metrics.csv")

    coverage = None
    if "surface_voxels" in stored and int(stored["surface_voxels"]) > 0:
        coverage = (int(stored["surface_covered"]), int(stored["surface_voxels"]))
    metrics = compute_metrics(positions, world, occ_map.snapshot(), coverage)
    recomputed = {
        "explored_fraction": f"{metrics.explored_fraction:.6f}",
        "coverage_fraction": ("nan" if np.isnan(metrics.coverage_fraction)
                              else f"{metrics.coverage_fraction:.6f}"),
        "path_length_m": f"{metrics.path_length:.6f}",
        "collision_ticks": str(metrics.collision_ticks),
        "reachable_free_voxels": str(metrics.reachable_free),
        "mapped_free_reachable_voxels": str(metrics.mapped_free_reachable),
    }
    mismatched = [k for k, v in recomputed.items() if stored.get(k) != v]
    return recomputed, stored, mismatched


def map_info(path) -> dict:
    """Header and layer summary of a stored map or world file."""
    p = FsPath(path)
    if p.suffix == ".pswd":
        world = load_world(p)
        occ = int(world.occupancy.sum())
        return {"file_kind": "world", "generator": world.generator,
                "seed": world.seed, "resolution": world.resolution,
                "extents": list(world.occupancy.shape),
                "occupied_voxels": occ,
                "free_voxels": int(world.occupancy.size - occ)}
    occ_map = load_map(p)
    classes = occ_map.snapshot().classes
    return {"file_kind": "map", "resolution": occ_map.resolution,
            "extents": list(occ_map.shape),
            "occupied_voxels": int((classes == OCCUPIED).sum()),
            "free_voxels": int((classes == FREE).sum()),
            "unknown_voxels": int((classes == UNKNOWN).sum())}
