"""Shared fixtures: each bundled mission runs once per test session.

The full mission runs are by far the most expensive things the suite
does, so they are executed a single time here and their artifacts
(engine state, report, on-disk report set) are shared by the module
tests and the acceptance gate.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import pytest

from payloadsim.mission import (_MissionEngine, MissionConfig, MissionReport,
                                load_mission_config, simulate_sync_bench,
                                write_report_set)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@dataclass
class MissionRun:
    name: str
    config: MissionConfig
    engine: _MissionEngine
    report: MissionReport
    out_dir: Path


def run_bundled_mission(name: str, out_dir: Path) -> MissionRun:
    config = load_mission_config(CONFIG_DIR / f"{name}.cfg")
    engine = _MissionEngine(config)
    report = engine.run()
    write_report_set(out_dir, engine, report)
    return MissionRun(name=name, config=config, engine=engine,
                      report=report, out_dir=out_dir)


@pytest.fixture(scope="session")
def empty_room_run(tmp_path_factory) -> MissionRun:
    return run_bundled_mission("empty_room",
                               tmp_path_factory.mktemp("empty_room"))


@pytest.fixture(scope="session")
def empty_room_rerun(tmp_path_factory) -> MissionRun:
    """Second, independent execution of the same config as empty_room_run."""
    return run_bundled_mission("empty_room",
                               tmp_path_factory.mktemp("empty_room_rerun"))


@pytest.fixture(scope="session")
def tunnel_run(tmp_path_factory) -> MissionRun:
    return run_bundled_mission("tunnel_network",
                               tmp_path_factory.mktemp("tunnel_network"))


@pytest.fixture(scope="session")
def tank_run(tmp_path_factory) -> MissionRun:
    return run_bundled_mission("closed_tank",
                               tmp_path_factory.mktemp("closed_tank"))


@pytest.fixture(scope="session")
def cluttered_run(tmp_path_factory) -> MissionRun:
    return run_bundled_mission("cluttered_room",
                               tmp_path_factory.mktemp("cluttered_room"))


@pytest.fixture(scope="session")
def tank_inspect_run(tmp_path_factory) -> MissionRun:
    return run_bundled_mission("closed_tank_inspect",
                               tmp_path_factory.mktemp("closed_tank_inspect"))


@pytest.fixture(scope="session")
def explore_runs(empty_room_run, tunnel_run, tank_run,
                 cluttered_run) -> list[MissionRun]:
    return [empty_room_run, tunnel_run, tank_run, cluttered_run]


@pytest.fixture(scope="session")
def bench_rows():
    """The 520 s synchronization bench, with its wall-clock duration."""
    t0 = time.perf_counter()
    rows = simulate_sync_bench(duration=520.0, seed=0)
    elapsed = time.perf_counter() - t0
    return rows, elapsed
