"""Clock domains and the payload's synchronization scheme.

Three timestamp routes exist, mirroring the hardware:
  - PTP slaves (LiDAR): two-way exchanges estimate the clock offset, and
    device stamps are corrected by subtracting the latest estimate.
  - Triggered sensors (cameras, radar): frames are matched to hardware
    trigger pulses and inherit the pulse's host timestamp.
  - Free-running devices (ToF driver, IMU arrival stamping): host stamps
    at arrival, no correction.

All timestamps are seconds; statistics are reported in milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import SyncError

CLOCK_KINDS = ("host", "ptp_slave", "triggered", "free_running")

# Cost assigned to out-of-tolerance pairs; any sum of in-tolerance
# residuals is smaller, so minimizing total cost maximizes the number of
# valid assignments first.
_INVALID_COST = 1e9


@dataclass
class ClockDomain:
    offset: float = 0.0  # seconds
    drift_ppm: float = 0.0  # parts per million
    jitter_sigma: float = 0.0  # seconds, per-event Gaussian
    kind: str = "host"

    def __post_init__(self):
        if self.kind not in CLOCK_KINDS:
            raise SyncError(f"unknown clock kind {self.kind!r}")
        if self.jitter_sigma < 0:
            raise SyncError("jitter_sigma must be non-negative")
        if abs(self.drift_ppm) >= 1000:
            raise SyncError("clock drift magnitude must stay below 1000 ppm")

    def local(self, t, rng: np.random.Generator | None = None):
        """Map true time to this clock's reading, with per-event jitter."""
        t = np.asarray(t, dtype=float)
        out = t * (1.0 + self.drift_ppm * 1e-6) + self.offset
        if self.jitter_sigma > 0 and rng is not None:
            out = out + rng.normal(0.0, self.jitter_sigma, size=t.shape)
        return out if out.ndim else float(out)

    def true_offset_at(self, t: float) -> float:
        """Instantaneous local-minus-true offset at true time t."""
        return self.drift_ppm * 1e-6 * t + self.offset


@dataclass
class TriggerBuffer:
    capacity: int
    entries: list = field(default_factory=list)  # (sequence id, host timestamp)

    def push(self, seq: int, timestamp: float):
        if self.entries:
            last_seq, last_ts = self.entries[-1]
            if seq != last_seq + 1:
                raise SyncError("trigger sequence ids must be contiguous")
            if timestamp <= last_ts:
                raise SyncError("trigger timestamps must be strictly increasing")
        self.entries.append((seq, timestamp))
        if len(self.entries) > self.capacity:
            del self.entries[:len(self.entries) - self.capacity]

    def __len__(self):
        return len(self.entries)

    @property
    def sequence_ids(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries], dtype=int)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries], dtype=float)


@dataclass
class ExposureProfile:
    exposure_duration: float = 0.0  # seconds; chirp duration for radar
    processing_delay_prior: float = 0.0  # seconds
    delay_tolerance: float = 0.0  # seconds

    def __post_init__(self):
        if min(self.exposure_duration, self.processing_delay_prior,
               self.delay_tolerance) < 0:
            raise SyncError("exposure profile durations must be non-negative")


def default_tolerance(trigger_period: float) -> float:
    """40% of the trigger period; wide enough for jitter, narrow enough to
    never alias onto a neighboring pulse."""
    return 0.4 * trigger_period


@dataclass
class PtpEstimate:
    offset: float  # slave minus master, seconds
    path_delay: float  # one-way, seconds


def ptp_estimate_offset(t1: float, t2: float, t3: float, t4: float) -> PtpEstimate:
    """Two-way exchange: master sends t1, slave receives t2, slave replies
    t3, master receives t4. Exact under symmetric path delay."""
    if t1 >= t4:
        raise SyncError("master timestamps out of order (t1 must precede t4)")
    if t2 > t3:
        raise SyncError("slave timestamps out of order (t2 must not exceed t3)")
    offset = ((t2 - t1) - (t4 - t3)) / 2.0
    path_delay = ((t2 - t1) + (t4 - t3)) / 2.0
    if path_delay < 0:
        raise SyncError("negative path delay, exchange rejected")
    return PtpEstimate(offset=offset, path_delay=path_delay)


def generate_triggers(imu_clock: ClockDomain, rate: float, horizon: float,
                      capacity: int | None = None,
                      rng: np.random.Generator | None = None,
                      start_seq: int = 0) -> TriggerBuffer:
    """Emit floor(horizon * rate) pulses on the nominal grid, host-stamped
    through the given clock model."""
    if rate <= 0 or horizon <= 0:
        raise SyncError("rate and horizon must be positive")
    n = int(np.floor(horizon * rate))
    true_times = np.arange(n) / rate
    stamps = imu_clock.local(true_times, rng)
    buf = TriggerBuffer(capacity=capacity if capacity is not None else max(n, 1))
    for i in range(n):
        buf.push(start_seq + i, float(stamps[i]))
    return buf


def host_timestamp_imu(sample_times, host_clock: ClockDomain,
                       rng: np.random.Generator | None = None):
    """Arrival-time stamping of an IMU stream; no correction applied."""
    return host_clock.local(sample_times, rng)


def interval_stats(timestamps) -> tuple[float, float]:
    """Mean and population std of consecutive differences, in ms."""
    ts = np.asarray(timestamps, dtype=float)
    if ts.size < 2:
        raise SyncError("interval statistics need at least 2 timestamps")
    diffs = np.diff(ts)
    if np.any(diffs <= 0):
        raise SyncError("timestamps must be strictly increasing")
    return float(diffs.mean() * 1e3), float(diffs.std() * 1e3)


@dataclass
class AssignmentResult:
    pairs: list  # (frame index, trigger sequence id)
    corrected: dict  # frame index -> corrected timestamp (trigger stamp)
    residuals: dict  # frame index -> |arrival - prediction|
    unassigned: set  # frame indices with no in-tolerance trigger

    @property
    def total_cost(self) -> float:
        return float(sum(self.residuals.values()))


def assign_frames_to_triggers(arrivals, buffer: TriggerBuffer,
                              profile: ExposureProfile) -> AssignmentResult:
    """Injective min-cost matching of frame arrivals to trigger pulses.

    Predicted arrival for a pulse is trigger + exposure + delay prior.
    Maximizes the number of in-tolerance assignments, then minimizes
    total residual. Surplus or out-of-tolerance frames come back in the
    unassigned set; an assigned frame's corrected timestamp is its
    trigger's host timestamp.
    """
    arrivals = np.asarray(arrivals, dtype=float)
    if len(buffer) == 0:
        raise SyncError("trigger buffer is empty")
    trig_ts = buffer.timestamps
    trig_seq = buffer.sequence_ids
    tol = profile.delay_tolerance
    if len(buffer) >= 2:
        period = float(np.median(np.diff(trig_ts)))
        if tol >= period / 2:
            raise SyncError("delay tolerance must be below half the trigger period")
    predicted = trig_ts + profile.exposure_duration + profile.processing_delay_prior

    n = arrivals.size
    if n == 0:
        return AssignmentResult([], {}, {}, set())

    # Fast path: when every frame has exactly one in-tolerance trigger and
    # no trigger is claimed twice, that matching is the unique optimum.
    fast = _assign_unique(arrivals, predicted, tol)
    if fast is not None:
        cols = fast
    else:
        cols = _assign_windowed(arrivals, predicted, tol)

    pairs, corrected, residuals, unassigned = [], {}, {}, set()
    for i in range(n):
        j = cols[i]
        if j < 0:
            unassigned.add(i)
            continue
        pairs.append((i, int(trig_seq[j])))
        corrected[i] = float(trig_ts[j])
        residuals[i] = float(abs(arrivals[i] - predicted[j]))
    return AssignmentResult(pairs, corrected, residuals, unassigned)


def _assign_unique(arrivals: np.ndarray, predicted: np.ndarray, tol: float):
    """Nearest-trigger matching, valid only when provably optimal."""
    idx = np.searchsorted(predicted, arrivals)
    best = np.full(arrivals.size, -1, dtype=int)
    best_cost = np.full(arrivals.size, np.inf)
    for cand in (idx - 1, idx):
        ok = (cand >= 0) & (cand < predicted.size)
        cost = np.where(ok, np.abs(arrivals - predicted[np.clip(cand, 0, predicted.size - 1)]),
                        np.inf)
        better = cost < best_cost
        best[better] = cand[better]
        best_cost[better] = cost[better]
    valid = best_cost <= tol
    # Require a unique candidate: second-best must be out of tolerance.
    second = np.full(arrivals.size, np.inf)
    for cand in (idx - 1, idx):
        ok = (cand >= 0) & (cand < predicted.size)
        cost = np.where(ok, np.abs(arrivals - predicted[np.clip(cand, 0, predicted.size - 1)]),
                        np.inf)
        is_best = ok & (cand == best)
        cost = np.where(is_best, np.inf, cost)
        second = np.minimum(second, cost)
    if np.any(valid & (second <= tol)):
        return None
    chosen = best[valid]
    if np.unique(chosen).size != chosen.size:
        return None  # a trigger claimed twice, needs the full solver
    out = np.where(valid, best, -1)
    return out


def _assign_windowed(arrivals: np.ndarray, predicted: np.ndarray, tol: float,
                     window: int = 256) -> np.ndarray:
    """Optimal matching via the rectangular assignment solver, windowed in
    time so long benches stay tractable."""
    order = np.argsort(arrivals, kind="stable")
    out = np.full(arrivals.size, -1, dtype=int)
    used = np.zeros(predicted.size, dtype=bool)
    for lo in range(0, order.size, window):
        rows = order[lo:lo + window]
        arr = arrivals[rows]
        jlo = int(np.searchsorted(predicted, arr.min() - tol))
        jhi = int(np.searchsorted(predicted, arr.max() + tol, side="right"))
        cols = np.arange(jlo, jhi)
        cols = cols[~used[cols]]
        if cols.size == 0:
            continue
        cost = np.abs(arr[:, None] - predicted[cols][None, :])
        cost = np.where(cost <= tol, cost, _INVALID_COST)
        ri, ci = linear_sum_assignment(cost)
        for r, c in zip(ri, ci):
            if cost[r, c] < _INVALID_COST:
                out[rows[r]] = cols[c]
                used[cols[c]] = True
    return out
