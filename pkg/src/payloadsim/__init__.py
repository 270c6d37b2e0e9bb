"""Deterministic desk-scale simulator for a multi-sensor autonomy payload.

Subsystems: ground-truth voxel worlds and exact raycasting, a simulated
sensor rig with hardware-trigger time synchronization, log-odds
volumetric mapping, sampling-based exploration and inspection planning,
depth-driven safe navigation, and a mission orchestrator with an HTTP
service and CLI on top.
"""

from .errors import (ConfigError, MapFormatError, PayloadSimError,
                     PlannerError, ScenarioError, SyncError)
from .exploration import (ExplorationParams, GainedPath, GlobalGraph,
                          exploration_gain, local_bounds_around,
                          plan_homing, plan_repositioning, sample_local_graph,
                          select_best_path, update_global_graph)
from .geometry import Pose, direction_from_angles, rotation_zyx, wrap_angle
from .graphs import Path, PlanGraph
from .inspection import (InspectionParams, SurfaceSet, TourResult, Viewpoint,
                         connect_and_tour, extract_surfaces, sample_viewpoints,
                         select_cover)
from .mapio import load_map, load_world, save_map, save_world
from .mapping import (FREE, OCCUPIED, UNKNOWN, ElevationMap, MapSnapshot,
                      OccupancyMap, build_elevation, extract_frontiers,
                      prune_untraversable)
from .mission import (MissionConfig, MissionMetrics, MissionReport, SyncRow,
                      compute_metrics, load_mission_config,
                      parse_mission_config, run_mission, simulate_sync_bench)
from .raycast import EMBEDDED, NO_RETURN, RayHit, raycast, raycast_batch
from .safety import (DriftModel, PartialState, SafetyParams, VelocityCommand,
                     inject_drift, policy_step, simulate_navigation,
                     track_path)
from .sensors import SensorFrame, SensorModel, default_rig, render_frame
from .timesync import (AssignmentResult, ClockDomain, ExposureProfile,
                       PtpEstimate, TriggerBuffer, assign_frames_to_triggers,
                       default_tolerance, generate_triggers, interval_stats,
                       ptp_estimate_offset)
from .world import VoxelWorld, build_scenario, parse_descriptor

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "MapFormatError", "PayloadSimError", "PlannerError",
    "ScenarioError", "SyncError",
    "ExplorationParams", "GainedPath", "GlobalGraph", "exploration_gain",
    "local_bounds_around", "plan_homing", "plan_repositioning",
    "sample_local_graph", "select_best_path", "update_global_graph",
    "Pose", "direction_from_angles", "rotation_zyx", "wrap_angle",
    "Path", "PlanGraph",
    "InspectionParams", "SurfaceSet", "TourResult", "Viewpoint",
    "connect_and_tour", "extract_surfaces", "sample_viewpoints", "select_cover",
    "load_map", "load_world", "save_map", "save_world",
    "FREE", "OCCUPIED", "UNKNOWN", "ElevationMap", "MapSnapshot",
    "OccupancyMap", "build_elevation", "extract_frontiers",
    "prune_untraversable",
    "MissionConfig", "MissionMetrics", "MissionReport", "SyncRow",
    "compute_metrics", "load_mission_config", "parse_mission_config",
    "run_mission", "simulate_sync_bench",
    "EMBEDDED", "NO_RETURN", "RayHit", "raycast", "raycast_batch",
    "DriftModel", "PartialState", "SafetyParams", "VelocityCommand",
    "inject_drift", "policy_step", "simulate_navigation", "track_path",
    "SensorFrame", "SensorModel", "default_rig", "render_frame",
    "AssignmentResult", "ClockDomain", "ExposureProfile", "PtpEstimate",
    "TriggerBuffer", "assign_frames_to_triggers", "default_tolerance",
    "generate_triggers", "interval_stats", "ptp_estimate_offset",
    "VoxelWorld", "build_scenario", "parse_descriptor",
    "__version__",
]
