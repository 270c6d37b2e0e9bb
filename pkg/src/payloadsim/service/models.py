"""Request and response schemas for the payload service."""

from __future__ import annotations

import math

from pydantic import BaseModel, Field

from ..mission import MissionReport, SyncRow


class MissionRequest(BaseModel):
    """A mission config in its plain-text form plus per-key overrides.

    Overrides are applied as extra config lines, so they go through the
    exact same parsing and validation as the file contents.
    """
    config_text: str = ""
    overrides: dict[str, str] = Field(default_factory=dict)

    def merged_text(self) -> str:
        lines = [self.config_text]
        lines += [f"{key} = {value}" for key, value in self.overrides.items()]
        return "\n".join(lines)


class MetricsModel(BaseModel):
    explored_fraction: float
    coverage_fraction: float | None  # None when no inspect phase ran
    path_length_m: float
    collision_ticks: int
    reachable_free_voxels: int
    mapped_free_reachable_voxels: int


class SyncRowModel(BaseModel):
    sensor: str
    mean_ms: float
    std_ms: float
    n_samples: int
    matched: int = -1

    @classmethod
    def from_row(cls, row: SyncRow) -> "SyncRowModel":
        return cls(sensor=row.sensor, mean_ms=row.mean_ms, std_ms=row.std_ms,
                   n_samples=row.n_samples, matched=row.matched)

    def to_row(self) -> SyncRow:
        return SyncRow(sensor=self.sensor, mean_ms=self.mean_ms,
                       std_ms=self.std_ms, n_samples=self.n_samples,
                       matched=self.matched)


class MissionResponse(BaseModel):
    generator: str
    world_seed: int
    mission_seed: int
    modes: list[str]
    sim_duration_s: float
    wall_time_s: float
    metrics: MetricsModel
    phase_times: dict[str, float]
    sync: list[SyncRowModel]
    final_position: list[float]
    start_distance_m: float
    surface_total: int
    surface_covered: int
    surface_inspectable: int
    output_dir: str | None
    report_text: str

    @classmethod
    def from_report(cls, report: MissionReport, output_dir,
                    report_text: str) -> "MissionResponse":
        m = report.metrics
        cov = None if math.isnan(m.coverage_fraction) else m.coverage_fraction
        return cls(
            generator=report.generator, world_seed=report.world_seed,
            mission_seed=report.mission_seed, modes=list(report.modes),
            sim_duration_s=report.sim_duration, wall_time_s=report.wall_time,
            metrics=MetricsModel(
                explored_fraction=m.explored_fraction, coverage_fraction=cov,
                path_length_m=m.path_length, collision_ticks=m.collision_ticks,
                reachable_free_voxels=m.reachable_free,
                mapped_free_reachable_voxels=m.mapped_free_reachable),
            phase_times=dict(report.phase_times),
            sync=[SyncRowModel.from_row(r) for r in report.sync_rows],
            final_position=[float(v) for v in report.final_position],
            start_distance_m=report.start_distance,
            surface_total=report.surface_total,
            surface_covered=report.surface_covered,
            surface_inspectable=report.surface_inspectable,
            output_dir=str(output_dir) if output_dir is not None else None,
            report_text=report_text)


class BenchRequest(BaseModel):
    duration: float = 520.0
    seed: int = 0


class BenchResponse(BaseModel):
    rows: list[SyncRowModel]
    table_text: str


class ReplayRequest(BaseModel):
    output_dir: str


class ReplayResponse(BaseModel):
    recomputed: dict[str, str]
    stored: dict[str, str]
    mismatched: list[str]
    match: bool


class MapInfoRequest(BaseModel):
    path: str


class MapInfoResponse(BaseModel):
    file_kind: str
    resolution: float
    extents: list[int]
    occupied_voxels: int
    free_voxels: int
    unknown_voxels: int | None = None
    generator: str | None = None
    seed: int | None = None


class ErrorBody(BaseModel):
    error_type: str
    message: str
