"""Scenario generators and the ground-truth voxel world."""
from __future__ import annotations

import numpy as np
import pytest

from oracles import flood_reachable
from payloadsim.errors import ScenarioError
from payloadsim.geometry import Pose
from payloadsim.world import (VoxelWorld, build_scenario, format_descriptor,
                              parse_descriptor)

GENERATORS = ("empty_room", "tunnel_network", "closed_tank", "cluttered_room")


def _boundary_mask(shape):
    m = np.zeros(shape, dtype=bool)
    m[0, :, :] = m[-1, :, :] = True
    m[:, 0, :] = m[:, -1, :] = True
    m[:, :, 0] = m[:, :, -1] = True
    return m


def test_parse_descriptor_coercion_and_comments():
    text = """
    # a comment line
    generator = empty_room
    seed = 12         # trailing comment
    resolution: 0.25
    size_x = 8
    label = mixed3text
    """
    desc = parse_descriptor(text)
    assert desc["generator"] == "empty_room"
    assert desc["seed"] == 12 and isinstance(desc["seed"], int)
    assert desc["resolution"] == 0.25 and isinstance(desc["resolution"], float)
    assert desc["size_x"] == 8
    assert desc["label"] == "mixed3text"


def test_parse_descriptor_malformed_lines():
    with pytest.raises(ScenarioError):
        parse_descriptor("generator empty_room\n")
    with pytest.raises(ScenarioError):
        parse_descriptor("generator =\n")
    with pytest.raises(ScenarioError):
        parse_descriptor("= empty_room\n")


def test_format_descriptor_round_trip():
    desc = {"generator": "closed_tank", "seed": 4, "resolution": 0.25,
            "size_x": 12.0}
    assert parse_descriptor(format_descriptor(desc)) == desc


def test_unknown_generator_rejected():
    with pytest.raises(ScenarioError):
        build_scenario({"generator": "moon_base"})
    with pytest.raises(ScenarioError):
        build_scenario({})


def test_undersized_world_rejected():
    with pytest.raises(ScenarioError):
        build_scenario({"generator": "empty_room", "size_x": 0.4,
                        "size_y": 8.0, "size_z": 3.0})


def test_bad_resolution_rejected():
    with pytest.raises(ScenarioError):
        build_scenario({"generator": "empty_room", "resolution": 0.0})
    with pytest.raises(ScenarioError):
        build_scenario({"generator": "empty_room", "resolution": -0.2})


def test_empty_room_is_boundary_shell_only():
    world = build_scenario({"generator": "empty_room", "seed": 0,
                            "size_x": 10.0, "size_y": 10.0, "size_z": 3.0,
                            "resolution": 0.2})
    assert world.extents == (50, 50, 15)
    assert np.array_equal(world.occupancy, _boundary_mask(world.extents))


def test_generator_default_dimensions():
    expected = {"empty_room": (50, 50, 15), "tunnel_network": (112, 80, 18),
                "closed_tank": (36, 28, 14), "cluttered_room": (40, 40, 12)}
    for gen, extents in expected.items():
        world = build_scenario({"generator": gen, "seed": 1})
        assert world.extents == extents, gen


def test_same_seed_worlds_bit_identical():
    a = build_scenario({"generator": "tunnel_network", "seed": 7})
    b = build_scenario({"generator": "tunnel_network", "seed": 7})
    assert np.array_equal(a.occupancy, b.occupancy)
    assert np.array_equal(a.start_pose.position, b.start_pose.position)
    c = build_scenario({"generator": "tunnel_network", "seed": 8})
    assert not np.array_equal(a.occupancy, c.occupancy)


def test_boundary_occupied_for_every_generator():
    for gen in GENERATORS:
        world = build_scenario({"generator": gen, "seed": 2})
        shell = _boundary_mask(world.extents)
        assert np.all(world.occupancy[shell]), gen


def test_start_pose_is_free_for_every_generator():
    for gen in GENERATORS:
        for seed in (0, 3, 9):
            world = build_scenario({"generator": gen, "seed": seed})
            assert world.is_free_point(world.start_pose.position), (gen, seed)


def test_free_space_connected_for_every_generator():
    """Every free voxel must be flood-fill reachable from the start."""
    for gen in GENERATORS:
        world = build_scenario({"generator": gen, "seed": 3})
        reach = flood_reachable(~world.occupancy,
                                world.voxel_at(world.start_pose.position))
        assert np.array_equal(reach, ~world.occupancy), gen


def test_cluttered_room_has_obstacles_and_free_goal():
    world = build_scenario({"generator": "cluttered_room", "seed": 3})
    interior = world.occupancy[1:-1, 1:-1, 1:-1]
    assert interior.any()
    assert world.goal_point is not None
    assert world.is_free_point(world.goal_point)
    reach = flood_reachable(~world.occupancy,
                            world.voxel_at(world.start_pose.position))
    assert reach[world.voxel_at(world.goal_point)]


def test_reachable_free_mask_matches_flood_oracle():
    world = build_scenario({"generator": "cluttered_room", "seed": 5})
    oracle = flood_reachable(~world.occupancy,
                             world.voxel_at(world.start_pose.position))
    assert np.array_equal(world.reachable_free_mask(), oracle)


def test_voxel_round_trip_and_bounds():
    world = build_scenario({"generator": "empty_room", "seed": 0})
    rng = np.random.default_rng(6)
    for _ in range(100):
        ijk = tuple(rng.integers(0, e) for e in world.extents)
        assert world.voxel_at(world.voxel_center(ijk)) == ijk
    assert world.in_bounds((0, 0, 0))
    assert not world.in_bounds((-1, 0, 0))
    assert not world.in_bounds((world.extents[0], 0, 0))
    assert world.is_occupied((-1, 0, 0))
    assert world.is_occupied((0, 0, world.extents[2]))


def test_box_collides_touch_versus_overlap():
    occ = np.zeros((10, 10, 10), dtype=bool)
    occ[5, :, :] = True
    world = VoxelWorld(resolution=0.5, occupancy=occ,
                       start_pose=Pose(position=np.array([1.0, 1.0, 1.0])))
    wall_x = 5 * 0.5
    # Face exactly on the wall plane: touching, not overlapping.
    assert not world.box_collides([wall_x - 0.3, 2.0, 2.0], (0.3, 0.3, 0.3))
    assert world.box_collides([wall_x - 0.3 + 1e-5, 2.0, 2.0], (0.3, 0.3, 0.3))
    assert not world.box_collides([2.0, 2.0, 2.0], (0.3, 0.3, 0.3))
    # Boxes poking outside the lattice count as collisions.
    assert world.box_collides([0.1, 2.0, 2.0], (0.3, 0.3, 0.3))


def test_size_m_property():
    world = build_scenario({"generator": "empty_room", "seed": 0,
                            "size_x": 8.0, "size_y": 8.0, "size_z": 3.0,
                            "resolution": 0.2})
    assert np.allclose(world.size_m, [8.0, 8.0, 3.0])
