import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jigsawbench.errors import ConfigError, GripperEmpty, GripperOccupied, NoBasePlate, PlacementInfeasible
from jigsawbench.geometry import Pose2, Rect, polygon_intersection_area
from jigsawbench.jigsaw import BASE_ID, assembled_poses, generate_set
from jigsawbench.world import (
    MOTION_OVERHEAD_S,
    TABLE,
    SceneObject,
    SpawnConstraints,
    WorldState,
    assembly_fit_check,
    blocking_overlap,
    builtin_profile,
    execute_pick,
    execute_place,
    load_profile,
    motion_time,
    spawn_random,
)

IDEAL = builtin_profile("ideal")
RNG = np.random.default_rng(0)


def assembled_world(code="000111", clearance=0.6, plate=Pose2(0, 0, 0), skip=()):
    js = generate_set(code, clearance)
    poses = assembled_poses(js, plate)
    objs = [SceneObject(BASE_ID, plate)] + [SceneObject(f, p) for f, p in poses.items() if f not in skip]
    return WorldState(TABLE, objs, js)


def same_layer_disjoint(world):
    for a, b in itertools.combinations(world.objects, 2):
        if a.z_layer == b.z_layer:
            assert blocking_overlap(world, a, world.footprint(a), b) == 0.0


# ---------------------------------------------------------------- profiles


def test_builtin_profiles():
    assert builtin_profile("ur10e_d435").arm.repeatability == 0.05
    assert builtin_profile("panda_d435").arm.joint_count == 7
    assert builtin_profile("ur5_d435i").camera.localization_sigma == 1.5
    with pytest.raises(ConfigError):
        builtin_profile("kuka_d435")


def test_profile_file(tmp_path):
    p = tmp_path / "rig.cfg"
    p.write_text("[profile]\nbase = ur10e_d435\n[arm]\nrepeatability = 0.2\n[camera]\nresolution_px = 640x480\n")
    prof = load_profile(p)
    assert prof.arm.repeatability == 0.2 and prof.camera.resolution_px == (640, 480)
    assert prof.arm.reach == 1300.0


@pytest.mark.parametrize("body", ["[arm]\nwingspan = 3\n", "[lens]\nfocal = 3\n", "[arm]\njoint_count = 5\n",
                                  "[camera]\nscale = 0\n", "[camera]\nlabel_confusion = 2\n"])
def test_profile_file_rejects(tmp_path, body):
    p = tmp_path / "bad.cfg"
    p.write_text(body)
    with pytest.raises(ConfigError):
        load_profile(p)


# ---------------------------------------------------------------- spawn


def test_spawn_disjoint_inside():
    js = generate_set("000101")
    w = spawn_random(js, TABLE, seed=3)
    assert len(w.objects) == 4
    fps = list(w.footprints().values())
    for fp in fps:
        assert TABLE.contains_rect(fp.bounds)
    for a, b in itertools.combinations(fps, 2):
        assert polygon_intersection_area(a, b) == 0.0


def test_spawn_deterministic():
    js = generate_set("000111")
    c = SpawnConstraints(include_base=True, min_gap=5.0)
    a = spawn_random(js, TABLE, seed=11, constraints=c)
    b = spawn_random(js, TABLE, seed=11, constraints=c)
    assert a.objects == b.objects


def test_spawn_infeasible():
    with pytest.raises(PlacementInfeasible):
        spawn_random(generate_set("000101"), Rect(0, 0, 50, 50), seed=0)


def test_spawn_base_requires_plate():
    with pytest.raises(NoBasePlate):
        spawn_random(generate_set("000101"), TABLE, 0, SpawnConstraints(include_base=True))


@given(st.integers(0, 10_000))
def test_spawn_with_plate_disjoint(seed):
    js = generate_set("000111", 0.6)
    w = spawn_random(js, TABLE, seed, SpawnConstraints(include_base=True, min_gap=10.0, rotation="free"))
    assert w.piece_count() == 5
    fps = list(w.footprints().values())
    for a, b in itertools.combinations(fps, 2):
        assert polygon_intersection_area(a, b) == 0.0


# ---------------------------------------------------------------- pick


def test_centroid_pick_ideal():
    w = spawn_random(generate_set("000101"), TABLE, seed=1)
    obj = w.objects[2]
    out = execute_pick(w, Pose2(obj.pose.x, obj.pose.y, 0), IDEAL, RNG)
    assert out.success and out.piece_id == obj.piece_id
    assert out.held_offset == pytest.approx((0.0, 0.0))
    assert w.piece_count() == 4 and len(w.objects) == 3


def test_pick_empty_table():
    w = WorldState(TABLE, [], generate_set("000101"))
    assert not execute_pick(w, Pose2(0, 0, 0), IDEAL, RNG).success


def test_pick_occupied():
    w = spawn_random(generate_set("000101"), TABLE, seed=1)
    o = w.objects[0]
    execute_pick(w, o.pose, IDEAL, RNG)
    with pytest.raises(GripperOccupied):
        execute_pick(w, w.objects[0].pose, IDEAL, RNG)


def test_pick_near_edge_fails_with_margin():
    js = generate_set("100101")  # straight cuts: rectangular fragments
    w = WorldState(TABLE, [SceneObject(1, Pose2(0, 0, 0))], js)
    edge_x = w.footprint(w.objects[0]).bounds.xmax
    prof = builtin_profile("ur10e_d435")
    assert not execute_pick(w, Pose2(edge_x - 1.0, 0, 0), prof, RNG).success
    assert execute_pick(w, Pose2(edge_x - 3.0, 0, 0), prof, RNG).success


def test_pick_top_of_stack():
    js = generate_set("000101")
    w = WorldState(TABLE, [SceneObject(1, Pose2(0, 0, 0), 0), SceneObject(2, Pose2(3, 3, 0), 1)], js)
    out = execute_pick(w, Pose2(1, 1, 0), IDEAL, RNG)
    assert out.piece_id == 2


# ---------------------------------------------------------------- place


def test_place_without_piece():
    w = WorldState(TABLE, [], generate_set("000101"))
    with pytest.raises(GripperEmpty):
        execute_place(w, Pose2(0, 0, 0), "simple", IDEAL, RNG)


def test_simple_exact_placement_seats():
    w = assembled_world(skip=(3,))
    slot = assembled_poses(w.jigsaw, w.plate.pose)[3]
    w.objects.append(SceneObject(3, Pose2(200, 200, 0)))
    execute_pick(w, Pose2(200, 200, 0), IDEAL, RNG)
    out = execute_place(w, slot, "simple", IDEAL, RNG)
    assert out.landing == slot and out.z_layer == 0
    assert assembly_fit_check(w, 3)
    same_layer_disjoint(w)


def _place_offset(mode, dx):
    w = assembled_world(skip=(2,), plate=Pose2(-40, 30, 0.4))
    slot = assembled_poses(w.jigsaw, w.plate.pose)[2]
    w.objects.append(SceneObject(2, Pose2(220, -220, 0)))
    execute_pick(w, Pose2(220, -220, 0), IDEAL, RNG)
    out = execute_place(w, Pose2(slot.x + dx, slot.y, slot.theta), mode, IDEAL, RNG)
    return w, out


def test_dexterous_snaps_within_capture():
    w, out = _place_offset("dexterous", 1.0)
    assert out.snapped and assembly_fit_check(w, 2)


def test_simple_misses_by_one_mm():
    w, out = _place_offset("simple", 1.0)
    assert not out.snapped and not assembly_fit_check(w, 2)


def test_dexterous_outside_capture_does_not_snap():
    _, out = _place_offset("dexterous", 2.5)
    assert not out.snapped


def test_dexterous_takes_longer():
    _, simple = _place_offset("simple", 1.0)
    _, dex = _place_offset("dexterous", 1.0)
    assert dex.elapsed > simple.elapsed


def test_placing_on_top_stacks():
    js = generate_set("000101")
    w = WorldState(TABLE, [SceneObject(1, Pose2(0, 0, 0)), SceneObject(2, Pose2(200, 0, 0))], js)
    execute_pick(w, Pose2(200, 0, 0), IDEAL, RNG)
    out = execute_place(w, Pose2(5, 5, 0), "simple", IDEAL, RNG)
    assert out.z_layer == 1
    same_layer_disjoint(w)


def test_fragment_in_cavity_not_stacked():
    w = assembled_world(skip=(1,))
    assert execute_pick(w, w.object(4).pose, IDEAL, RNG).piece_id == 4
    out = execute_place(w, assembled_poses(w.jigsaw, w.plate.pose)[4], "simple", IDEAL, RNG)
    assert out.z_layer == 0


@given(st.integers(0, 2**31), st.sampled_from(["simple", "dexterous"]))
def test_piece_count_conserved(seed, mode):
    js = generate_set("000111", 0.6)
    rng = np.random.default_rng(seed)
    w = spawn_random(js, TABLE, seed, SpawnConstraints(include_base=True, min_gap=10.0))
    prof = builtin_profile("ur10e_d435")
    slots = assembled_poses(js, w.plate.pose)
    for frag in list(w.fragments()):
        out = execute_pick(w, frag.pose, prof, rng)
        assert w.piece_count() == 5
        if out.success:
            execute_place(w, slots[frag.piece_id], mode, prof, rng)
            assert w.piece_count() == 5
            same_layer_disjoint(w)


# ---------------------------------------------------------------- fit check


@pytest.mark.parametrize("offset,expected", [(0.0, True), (0.2, True), (1.0, False)])
def test_fit_check_offsets(offset, expected):
    w = assembled_world()
    o = w.object(1)
    o.pose = Pose2(o.pose.x + offset, o.pose.y, o.pose.theta)
    assert assembly_fit_check(w, 1) is expected


def test_fit_check_rejects_stacked():
    w = assembled_world()
    w.object(3).z_layer = 1
    assert not assembly_fit_check(w, 3)


def test_fit_check_needs_plate():
    w = WorldState(TABLE, [SceneObject(1, Pose2(0, 0, 0))], generate_set("000101"))
    with pytest.raises(NoBasePlate):
        assembly_fit_check(w, 1)


# ---------------------------------------------------------------- motion


poses = st.builds(Pose2, st.floats(-300, 300), st.floats(-300, 300), st.just(0.0))
profiles = st.sampled_from([builtin_profile(n) for n in ("ur5_d435", "ur10e_d435", "panda_d435")])


def test_motion_zero_distance():
    assert motion_time(Pose2(1, 2, 0), Pose2(1, 2, 0), IDEAL) == MOTION_OVERHEAD_S


def test_motion_linear_in_distance():
    a = motion_time(Pose2(0, 0, 0), Pose2(100, 0, 0), IDEAL) - MOTION_OVERHEAD_S
    b = motion_time(Pose2(0, 0, 0), Pose2(200, 0, 0), IDEAL) - MOTION_OVERHEAD_S
    assert b == pytest.approx(2 * a)


@given(poses, poses)
def test_panda_faster(a, b):
    if a.distance(b) > 1e-6:
        assert motion_time(a, b, builtin_profile("panda_d435")) < motion_time(a, b, builtin_profile("ur10e_d435"))


@given(poses, poses, profiles)
def test_motion_symmetric(a, b, prof):
    assert motion_time(a, b, prof) == motion_time(b, a, prof)


@given(poses, poses, poses, profiles)
def test_motion_triangle(a, b, c, prof):
    direct = motion_time(a, c, prof)
    assert direct <= motion_time(a, b, prof) + motion_time(b, c, prof) - MOTION_OVERHEAD_S + 1e-9


def test_copy_is_independent():
    w = assembled_world()
    c = w.copy()
    c.objects[1].z_layer = 4
    assert w.objects[1].z_layer == 0
    assert math.isfinite(c.footprint(c.objects[0]).area)
