"""Reactive velocity-setpoint navigation from raw depth images.

The policy keeps the learned-controller I/O contract (partial state +
depth in, velocity setpoint out) but decides geometrically: scale the
along-goal component by the clearance inside a cone around the commanded
direction, slide toward the freest image half when pinched, and yaw to
keep the depth sensor looking where the robot wants to go. The filter is
deterministic, so closed-loop runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Pose, wrap_angle
from .graphs import Path
from .sensors import SensorModel, render_frame
from .world import VoxelWorld

PROVENANCE = ("nominal", "safety_clamped", "stop")


@dataclass
class PartialState:
    velocity: np.ndarray  # body frame, m/s
    attitude: np.ndarray  # roll, pitch, yaw
    goal_dir: np.ndarray  # unit vector to goal, body frame

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        self.attitude = np.asarray(self.attitude, dtype=float).reshape(3)
        self.goal_dir = np.asarray(self.goal_dir, dtype=float).reshape(3)
        n = np.linalg.norm(self.goal_dir)
        if not np.isfinite(self.velocity).all() or n < 1e-9:
            raise ValueError("state needs finite speeds and a nonzero goal direction")
        self.goal_dir = self.goal_dir / n


@dataclass
class VelocityCommand:
    linear: np.ndarray  # body frame, m/s
    yaw_rate: float
    provenance: str  # nominal | safety_clamped | stop

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=float).reshape(3)
        if self.provenance not in PROVENANCE:
            raise ValueError(f"bad provenance {self.provenance!r}")


@dataclass
class SafetyParams:
    v_max: float = 1.0
    d_stop: float = 0.5  # hard clearance: no forward motion below this
    d_slow: float = 1.5  # clearance at which slowdown begins
    cone_half_angle: float = np.radians(25.0)
    lateral_gain: float = 0.6  # escape speed fraction when clamped
    yaw_gain: float = 1.8  # rad/s per rad of goal azimuth error
    yaw_rate_max: float = 1.2
    face_goal_angle: float = np.radians(40.0)  # beyond this, rotate first


def _cone_clearance(depth: np.ndarray, model: SensorModel, goal_dir: np.ndarray,
                    half_angle: float) -> float:
    """Nearest return inside the angular cone around goal_dir, +inf if the
    cone is clear. Depth grid pixels map to ray directions on the model's
    angle grid; the sensor is assumed unrotated on the body."""
    dirs = model.ray_directions()
    cosang = dirs @ goal_dir
    cone = cosang >= np.cos(half_angle)
    if not np.any(cone):
        return np.inf
    vals = depth[cone]
    vals = vals[np.isfinite(vals) & (vals > 0)]
    return float(vals.min()) if vals.size else np.inf


def policy_step(state: PartialState, depth: np.ndarray, model: SensorModel,
                params: SafetyParams) -> VelocityCommand:
    """One reactive decision from the latest depth image.

    Nominal command is v_max toward the goal. Clearance inside the motion
    cone scales the along-goal component down to a stop below d_stop; a
    lateral escape toward the freest image half replaces the lost speed.
    When the goal sits far outside the sensor's view, rotate first.
    """
    depth = np.asarray(depth, dtype=float)
    expected = model.ray_directions().shape[:2]
    if depth.shape != expected:
        raise ValueError(f"depth shape {depth.shape} does not match the sensor grid {expected}")
    g = state.goal_dir
    az_err = float(np.arctan2(g[1], g[0]))

    if abs(az_err) > params.face_goal_angle:
        # Goal outside the instrumented cone: turn in place toward it.
        yaw_rate = float(np.clip(params.yaw_gain * az_err,
                                 -params.yaw_rate_max, params.yaw_rate_max))
        return VelocityCommand(linear=np.zeros(3), yaw_rate=yaw_rate,
                               provenance="nominal")

    nominal = params.v_max * g
    d_near = _cone_clearance(depth, model, g, params.cone_half_angle)
    scale = float(np.clip((d_near - params.d_stop) / (params.d_slow - params.d_stop),
                          0.0, 1.0))
    yaw_rate = float(np.clip(params.yaw_gain * az_err,
                             -params.yaw_rate_max, params.yaw_rate_max))
    if scale >= 1.0:
        return VelocityCommand(linear=nominal, yaw_rate=yaw_rate, provenance="nominal")

    along = nominal * scale
    # Escape toward the half of the image with more open depth. The escape
    # direction is projected orthogonal to the goal direction so clamping
    # never reintroduces motion along the blocked cone axis.
    finite = np.where(np.isfinite(depth), depth, model.max_range)
    half = finite.shape[1] // 2
    neg_y_mean = float(finite[:, :half].mean())  # column 0 sits at -azimuth (-y)
    pos_y_mean = float(finite[:, half:].mean())
    lateral_sign = 1.0 if pos_y_mean >= neg_y_mean else -1.0
    side = np.array([0.0, lateral_sign, 0.0])
    side = side - (side @ g) * g
    n_side = np.linalg.norm(side)
    if n_side > 1e-9:
        side /= n_side
    lateral = side * params.v_max * params.lateral_gain * (1.0 - scale)
    linear = along + lateral
    speed = np.linalg.norm(linear)
    if speed > params.v_max:
        linear *= params.v_max / speed
    provenance = "stop" if scale == 0.0 else "safety_clamped"
    return VelocityCommand(linear=linear, yaw_rate=yaw_rate, provenance=provenance)


@dataclass
class TrackResult:
    goal_dir_body: np.ndarray | None
    speed: float
    deviation: float
    remaining: float
    done: bool
    replan: bool


def track_path(path: Path, pose: Pose, lookahead: float = 0.8,
               v_max: float = 1.0, recovery_radius: float = 1.5,
               taper_dist: float = 1.0) -> TrackResult:
    """Pure-pursuit target selection along a waypoint path.

    Aims at the point one lookahead arc ahead of the closest path point;
    speed tapers linearly to zero over the last taper_dist of arc. A pose
    farther than recovery_radius from the path asks for a replan.
    """
    if len(path) == 0:
        raise ValueError("cannot track an empty path")
    pts = path.positions
    pos = pose.position
    if len(pts) == 1:
        seg_starts = np.array([0.0])
        nearest_arc = 0.0
        deviation = float(np.linalg.norm(pts[0] - pos))
        total = 0.0
    else:
        diffs = np.diff(pts, axis=0)
        seg_len = np.linalg.norm(diffs, axis=1)
        seg_starts = np.r_[0.0, np.cumsum(seg_len)]
        total = float(seg_starts[-1])
        # Project onto each segment, take the closest.
        rel = pos - pts[:-1]
        denom = np.maximum(seg_len ** 2, 1e-12)
        t = np.clip(np.einsum("ij,ij->i", rel, diffs) / denom, 0.0, 1.0)
        proj = pts[:-1] + t[:, None] * diffs
        d = np.linalg.norm(proj - pos, axis=1)
        best = int(np.argmin(d))
        deviation = float(d[best])
        nearest_arc = float(seg_starts[best] + t[best] * seg_len[best])

    if deviation > recovery_radius:
        return TrackResult(goal_dir_body=None, speed=0.0, deviation=deviation,
                           remaining=float(total - nearest_arc), done=False,
                           replan=True)

    remaining = float(total - nearest_arc)
    if remaining < 1e-6 and deviation < 0.3:
        return TrackResult(goal_dir_body=None, speed=0.0, deviation=deviation,
                           remaining=0.0, done=True, replan=False)

    target_arc = min(nearest_arc + lookahead, total)
    target = _point_at_arc(pts, seg_starts, target_arc)
    to_target = target - pos
    n = np.linalg.norm(to_target)
    if n < 1e-9:
        to_target = pts[-1] - pos
        n = np.linalg.norm(to_target)
        if n < 1e-9:
            return TrackResult(goal_dir_body=None, speed=0.0, deviation=deviation,
                               remaining=remaining, done=True, replan=False)
    goal_world = to_target / n
    goal_body = pose.rotation().T @ goal_world
    speed = v_max * float(np.clip(remaining / taper_dist, 0.1, 1.0))
    return TrackResult(goal_dir_body=goal_body, speed=speed, deviation=deviation,
                       remaining=remaining, done=False, replan=False)


def _point_at_arc(pts: np.ndarray, seg_starts: np.ndarray, arc: float) -> np.ndarray:
    if len(pts) == 1:
        return pts[0]
    idx = int(np.searchsorted(seg_starts, arc, side="right")) - 1
    idx = min(max(idx, 0), len(pts) - 2)
    seg = pts[idx + 1] - pts[idx]
    seg_len = float(np.linalg.norm(seg))
    if seg_len < 1e-12:
        return pts[idx]
    s = (arc - seg_starts[idx]) / seg_len
    return pts[idx] + np.clip(s, 0.0, 1.0) * seg


class DriftModel:
    """Random-walk position error accumulating with distance traveled.

    Per meter of motion the estimate gains an independent Gaussian step of
    std `rate` per axis, so the expected error magnitude after L meters is
    rate * sqrt(L) * 2 * sqrt(2/pi)."""

    def __init__(self, rate: float, seed: int = 0):
        if rate < 0:
            raise ValueError("drift rate must be non-negative")
        self.rate = rate
        self.rng = np.random.default_rng(seed)
        self.offset = np.zeros(3)
        self._last: np.ndarray | None = None

    def step(self, true_position) -> np.ndarray:
        """Advance the walk by the distance moved; returns the estimate."""
        p = np.asarray(true_position, dtype=float)
        if self._last is not None and self.rate > 0:
            ds = float(np.linalg.norm(p - self._last))
            if ds > 0:
                self.offset = self.offset + self.rng.normal(
                    0.0, self.rate * np.sqrt(ds), 3)
        self._last = p.copy()
        return p + self.offset


def inject_drift(true_positions: np.ndarray, rate: float, seed: int = 0) -> np.ndarray:
    """Batch form of DriftModel over a recorded position stream."""
    model = DriftModel(rate, seed)
    return np.array([model.step(p) for p in np.asarray(true_positions, dtype=float)])


@dataclass
class RolloutLog:
    rows: list = field(default_factory=list)
    collisions: int = 0
    reached: bool = False
    sim_time: float = 0.0
    path_length: float = 0.0

    def add(self, t, true_pose: Pose, est_pos, cmd: VelocityCommand, min_depth: float):
        self.rows.append((float(t),
                          *[float(v) for v in true_pose.position],
                          float(true_pose.yaw),
                          *[float(v) for v in est_pos],
                          *[float(v) for v in cmd.linear],
                          float(cmd.yaw_rate), cmd.provenance, float(min_depth)))


ROLLOUT_HEADER = ("t", "x", "y", "z", "yaw", "est_x", "est_y", "est_z",
                  "vx", "vy", "vz", "yaw_rate", "provenance", "min_depth")


DRIFT_DEMO_RATE = 0.05  # m of walk std per sqrt-metre travelled
DRIFT_DEMO_SEED = 10


def drift_demo_case() -> tuple[VoxelWorld, Path, np.ndarray]:
    """Fixed room, straight path, and goal for the drift demonstration.

    The path clears a pillar by 0.2 m, so tracking it blindly is safe with
    perfect state. With drift rate DRIFT_DEMO_RATE and seed
    DRIFT_DEMO_SEED the estimate wanders enough that blind tracking drives
    the true pose into the pillar, while the depth-reactive policy, which
    senses from the true pose, passes it and still reaches the goal.
    """
    res = 0.25
    occ = np.zeros((48, 24, 12), dtype=bool)  # 12 x 6 x 3 m room
    occ[0, :, :] = occ[-1, :, :] = True
    occ[:, 0, :] = occ[:, -1, :] = True
    occ[:, :, 0] = occ[:, :, -1] = True
    occ[23:25, 14:16, :] = True  # pillar, south face 0.5 m off the path line
    start = Pose(position=np.array([1.5, 3.0, 1.5]))
    world = VoxelWorld(resolution=res, occupancy=occ, start_pose=start,
                       generator="empty_room", seed=0)
    goal = np.array([10.5, 3.0, 1.5])
    path = Path(positions=np.array([start.position, goal]), yaws=np.zeros(2))
    return world, path, goal


def simulate_navigation(world: VoxelWorld, tof: SensorModel, goal: np.ndarray,
                        params: SafetyParams, *, path: Path | None = None,
                        use_policy: bool = True, drift_rate: float = 0.0,
                        seed: int = 0, max_time: float = 120.0,
                        dt: float = 0.05, tau: float = 0.2,
                        robot_half_extents=(0.3, 0.3, 0.175),
                        stop_on_collision: bool = False) -> RolloutLog:
    """Closed-loop point-to-point run in a ground-truth world.

    Sensing happens at the true pose; guidance sees only the drift-
    corrupted estimate. With use_policy=False commands follow the path
    tracker blindly, which is exactly what the drift demonstration needs.
    """
    goal = np.asarray(goal, dtype=float)
    half = np.asarray(robot_half_extents, dtype=float)
    pose = world.start_pose.copy()
    vel_body = np.zeros(3)
    drift = DriftModel(drift_rate, seed)
    log = RolloutLog()
    colliding_prev = False

    t = 0.0
    while t < max_time:
        est_pos = drift.step(pose.position)
        est_pose = Pose(position=est_pos, rpy=pose.rpy.copy())

        frame = render_frame(world, pose, tof)
        depth = frame.ranges
        finite = depth[np.isfinite(depth)]
        min_depth = float(finite.min()) if finite.size else np.inf

        if path is not None:
            tr = track_path(path, est_pose, v_max=params.v_max)
            if tr.done:
                log.reached = bool(np.linalg.norm(pose.position - goal) < 0.5)
                break
            if tr.goal_dir_body is None:
                goal_dir = est_pose.rotation().T @ (goal - est_pos)
                n = np.linalg.norm(goal_dir)
                if n < 1e-9:
                    break
                goal_dir = goal_dir / n
                speed = params.v_max
            else:
                goal_dir, speed = tr.goal_dir_body, tr.speed
        else:
            to_goal = goal - est_pos
            n = float(np.linalg.norm(to_goal))
            if n < 0.3:
                log.reached = True
                break
            goal_dir = est_pose.rotation().T @ (to_goal / n)
            speed = params.v_max * min(1.0, n / 1.0)

        state = PartialState(velocity=vel_body, attitude=pose.rpy,
                             goal_dir=goal_dir)
        if use_policy:
            step_params = params if speed >= params.v_max else \
                replace(params, v_max=speed)
            cmd = policy_step(state, depth, tof, step_params)
        else:
            cmd = VelocityCommand(linear=speed * state.goal_dir,
                                  yaw_rate=float(np.clip(
                                      params.yaw_gain * np.arctan2(goal_dir[1], goal_dir[0]),
                                      -params.yaw_rate_max, params.yaw_rate_max)),
                                  provenance="nominal")

        log.add(t, pose, est_pos, cmd, min_depth)

        # First-order velocity response, then integrate in the world frame.
        vel_body = vel_body + (cmd.linear - vel_body) * (dt / tau)
        yaw = pose.yaw + cmd.yaw_rate * dt
        new_rpy = np.array([0.0, 0.0, wrap_angle(yaw)])
        rot = Pose(position=pose.position, rpy=new_rpy).rotation()
        new_pos = pose.position + rot @ vel_body * dt
        log.path_length += float(np.linalg.norm(new_pos - pose.position))
        pose = Pose(position=new_pos, rpy=new_rpy)

        colliding = world.box_collides(pose.position, half)
        if colliding and not colliding_prev:
            log.collisions += 1
            if stop_on_collision:
                t += dt
                break
        colliding_prev = colliding

        if np.linalg.norm(pose.position - goal) < 0.5:
            log.reached = True
            t += dt
            break
        t += dt

    log.sim_time = t
    return log
