import numpy as np
import pytest

from jigsawbench.errors import BackgroundMissing, ConfigError, EmptyBox, OutOfBounds, StageError
from jigsawbench.geometry import Pose2, Rect, rect_iou
from jigsawbench.jigsaw import generate_set
from jigsawbench.pipeline import (
    ClassPrediction,
    DetectionBox,
    MotionPlan,
    PipelineConfig,
    PickPose,
    StageTimings,
    background_diff,
    foreground_centroid,
    get_stage,
    majority_label,
    register_stage,
    registered,
    run_pipeline,
    straight_line,
)
from jigsawbench.sensing import BACKGROUND, Observation, render, render_background
from jigsawbench.world import CAMERAS, HOME, TABLE, SceneObject, WorldState, builtin_profile, motion_time

IDEAL = builtin_profile("ideal")
CAM = CAMERAS["ideal"]


class TruthTrap(Exception):
    pass


class TrappedObservation(Observation):
    """Observation whose truth layer raises on any read."""

    def __getattribute__(self, name):
        if name == "truth":
            raise TruthTrap("truth layer read")
        return super().__getattribute__(name)


def trapped(obs):
    return TrappedObservation(obs.grid, obs.textures, obs.table, obs.scale, obs.background,
                              object.__getattribute__(obs, "truth"))


def observe(objects, code="000101"):
    w = WorldState(TABLE, objects, generate_set(code))
    bg = render_background(w, CAM)
    return w, render(w, CAM, None, bg.grid)


def grid_obs(grid, textures=None):
    grid = np.asarray(grid, dtype=np.int32)
    table = Rect(0, 0, grid.shape[1], grid.shape[0])
    return Observation(grid, textures or {}, table, 1.0, np.full(grid.shape, BACKGROUND, np.int32))


def four_apart():
    return [SceneObject(i, Pose2(x, y, 0)) for i, (x, y) in
            zip(range(1, 5), [(-150, -150), (150, -150), (-150, 150), (150, 150)])]


# ---------------------------------------------------------------- types


def test_type_invariants():
    with pytest.raises(ValueError):
        DetectionBox(Rect(0, 0, 1, 1), 1.5)
    with pytest.raises(ValueError):
        MotionPlan((HOME,), 1.0)
    with pytest.raises(ValueError):
        MotionPlan((HOME, HOME), -1.0)
    t = StageTimings(1, 2, 3, 4)
    t += StageTimings(1, 1, 1, 1)
    assert t.as_dict() == {"segmentation_s": 2, "recognition_s": 3, "pick_planning_s": 4, "motion_planning_s": 5}


# ---------------------------------------------------------------- segmenter


def test_four_separated_pieces_exact():
    w, obs = observe(four_apart())
    boxes = background_diff(obs, {})
    assert len(boxes) == 4
    truth = sorted(obs.truth.raster_rects.values(), key=lambda r: (r.ymin, r.xmin))
    for b, t in zip(boxes, truth):
        assert rect_iou(b.rect, t) == 1.0


def test_empty_scene_no_boxes():
    _, obs = observe([])
    assert background_diff(obs, {}) == []


def test_touching_pieces_merge():
    js = generate_set("000101")
    # fragments 1 and 2 in their assembled arrangement share a cut
    objs = [SceneObject(f, js.slot_poses[f]) for f in (1, 2)]
    _, obs = observe(objs)
    assert len(background_diff(obs, {})) == 1


def test_small_components_dropped():
    grid = np.full((30, 30), BACKGROUND)
    grid[2:5, 2:5] = 1  # 9 cells
    grid[10:25, 10:25] = 2  # 225 cells
    boxes = background_diff(grid_obs(grid), {})
    assert len(boxes) == 1 and boxes[0].rect == Rect(10, 10, 25, 25)
    assert len(background_diff(grid_obs(grid), {"min_cells": 5})) == 2


def test_boxes_ordered_row_major():
    grid = np.full((40, 40), BACKGROUND)
    grid[20:35, 2:17] = 1
    grid[2:17, 20:35] = 2
    grid[20:35, 20:35] = 3
    rects = [b.rect for b in background_diff(grid_obs(grid), {})]
    assert rects == [Rect(20, 2, 35, 17), Rect(2, 20, 17, 35), Rect(20, 20, 35, 35)]


def test_background_missing():
    _, obs = observe([])
    with pytest.raises(BackgroundMissing):
        background_diff(Observation(obs.grid, {}, obs.table, 1.0, None), {})
    with pytest.raises(BackgroundMissing):
        background_diff(Observation(obs.grid, {}, obs.table, 1.0, obs.grid[:10]), {})


# ---------------------------------------------------------------- recognizer


def test_majority_label_noise_free():
    w, obs = observe(four_apart())
    boxes = background_diff(obs, {})
    preds = majority_label(obs, boxes, {})
    truth = {obs.truth.raster_rects[o.piece_id]: w.jigsaw.piece(o.piece_id).texture for o in w.objects}
    assert [p.label for p in preds] == [truth[b.rect] for b in boxes]


def test_majority_tie_goes_to_lower_id():
    grid = np.full((20, 20), BACKGROUND)
    grid[0:10, 0:10] = 4
    grid[10:20, 0:10] = 2
    obs = grid_obs(grid, {2: "two", 4: "four"})
    pred = majority_label(obs, [DetectionBox(Rect(0, 0, 10, 20))], {})
    assert pred[0].label == "two" and pred[0].confidence == 0.5


def test_confusion_one_gives_wrong_labels():
    w = WorldState(TABLE, four_apart(), generate_set("000101"))
    cam = CAMERAS["ideal"].__class__(label_confusion=1.0, localization_sigma=0.0)
    obs = render(w, cam, np.random.default_rng(0), render_background(w, cam).grid)
    boxes = background_diff(obs, {})
    preds = majority_label(obs, boxes, {})
    truth = {obs.truth.raster_rects[o.piece_id]: w.jigsaw.piece(o.piece_id).texture for o in w.objects}
    assert all(p.label != truth[b.rect] for p, b in zip(preds, boxes))


# ---------------------------------------------------------------- pick planner


def test_rectangle_pick_is_centroid():
    grid = np.full((30, 30), BACKGROUND)
    grid[5:15, 10:30] = 1
    pick = foreground_centroid(grid_obs(grid), DetectionBox(Rect(10, 5, 30, 15)), {})
    assert (pick.x, pick.y, pick.angle) == (20.0, 10.0, 0.0)


def test_l_shape_falls_back_to_nearest_cell():
    grid = np.full((20, 20), BACKGROUND)
    grid[0:20, 0:2] = 1
    grid[18:20, 0:20] = 1
    obs = grid_obs(grid)
    pick = foreground_centroid(obs, DetectionBox(Rect(0, 0, 20, 20)), {})
    r, c = int(pick.y - 0.5), int(pick.x - 0.5)
    assert obs.grid[r, c] == 1
    # the raw centroid (about row 13.4, col 5) is background
    assert obs.grid[13, 5] == BACKGROUND


def test_single_cell_box():
    grid = np.full((5, 5), BACKGROUND)
    grid[2, 3] = 1
    pick = foreground_centroid(grid_obs(grid), DetectionBox(Rect(3, 2, 4, 3)), {})
    assert (pick.x, pick.y) == (3.5, 2.5)


def test_empty_box():
    grid = np.full((5, 5), BACKGROUND)
    with pytest.raises(EmptyBox):
        foreground_centroid(grid_obs(grid), DetectionBox(Rect(0, 0, 3, 3)), {})


# ---------------------------------------------------------------- motion planner


def test_home_to_home_overhead_only():
    plan = straight_line(PickPose(HOME.x, HOME.y), HOME, IDEAL, {})
    assert plan.waypoints[0] == HOME and plan.waypoints[-1] == HOME
    assert plan.planned_duration == pytest.approx(4 * motion_time(HOME, HOME, IDEAL))
    assert plan.planning_time >= 0


def test_longer_path_longer_plan():
    a = straight_line(PickPose(0, 0), Pose2(10, 0, 0), IDEAL, {})
    b = straight_line(PickPose(0, 0), Pose2(100, 0, 0), IDEAL, {})
    assert b.planned_duration > a.planned_duration


def test_panda_plans_faster():
    args = (PickPose(-100, 50), Pose2(120, 80, 0))
    assert (straight_line(*args, builtin_profile("panda_d435"), {}).planned_duration
            < straight_line(*args, builtin_profile("ur10e_d435"), {}).planned_duration)


def test_out_of_bounds():
    with pytest.raises(OutOfBounds):
        straight_line(PickPose(1000, 0), Pose2(0, 0, 0), IDEAL, {"table": TABLE})


# ---------------------------------------------------------------- registry and driver


def test_registry_lookup():
    assert "background_diff" in registered("segmenter")
    assert get_stage("segmenter", "oracle").reads_truth
    with pytest.raises(ConfigError):
        get_stage("segmenter", "ssd")
    with pytest.raises(ConfigError):
        register_stage("grasp_net", "x")


def test_missing_segmenter_is_config_error():
    _, obs = observe(four_apart())
    calls = []
    cfg = PipelineConfig(segmenter=None)
    with pytest.raises(ConfigError):
        run_pipeline("tiling", obs, IDEAL, cfg, lambda *a: calls.append(a) or HOME)
    assert calls == []


def _place_home(i, box, label, pick):
    return Pose2(0, 0, 0)


@pytest.mark.parametrize("kind", ["pick_place", "tiling", "assembly_simple"])
def test_baseline_never_reads_truth(kind):
    _, obs = observe(four_apart())
    out = run_pipeline(kind, trapped(obs), IDEAL, PipelineConfig(), _place_home)
    assert len(out.candidates) == 4


def test_trap_catches_oracle_stage():
    _, obs = observe(four_apart())
    with pytest.raises(StageError):
        run_pipeline("tiling", trapped(obs), IDEAL, PipelineConfig.oracle(), _place_home)


def test_pick_place_skips_recognition():
    _, obs = observe(four_apart())
    seen = []
    out = run_pipeline("pick_place", obs, IDEAL, PipelineConfig(),
                       lambda i, b, label, p: seen.append(label) or Pose2(0, 0, 0))
    assert out.timings.recognition_s == 0 and out.predictions == []
    assert seen == [None] * 4


def test_tiling_runs_all_four():
    _, obs = observe(four_apart())
    out = run_pipeline("tiling", obs, IDEAL, PipelineConfig(), _place_home)
    assert len(out.predictions) == 4 and out.timings.recognition_s > 0
    assert all(c.label for c in out.candidates)


def test_stage_errors_carry_identity():
    @register_stage("pick_planner", "test_broken")
    def broken(obs, box, params):
        raise RuntimeError("boom")

    _, obs = observe(four_apart())
    with pytest.raises(StageError) as exc:
        run_pipeline("tiling", obs, IDEAL, PipelineConfig(pick_planner="test_broken"), _place_home)
    assert exc.value.stage == "pick_planner"


def test_bad_recognizer_output():
    @register_stage("recognizer", "test_short")
    def short(obs, boxes, params):
        return [ClassPrediction(0, "x")]

    _, obs = observe(four_apart())
    with pytest.raises(StageError):
        run_pipeline("tiling", obs, IDEAL, PipelineConfig(recognizer="test_short"), _place_home)


def test_skip_and_decline():
    _, obs = observe(four_apart())
    out = run_pipeline("tiling", obs, IDEAL, PipelineConfig(), lambda i, *a: None if i % 2 else HOME,
                       skip=lambda box: box.rect.xmin > 0)
    expected = [i for i, b in enumerate(out.boxes) if b.rect.xmin <= 0 and i % 2 == 0]
    assert [c.box_index for c in out.candidates] == expected and expected


def test_baseline_deterministic():
    _, obs = observe(four_apart())
    a = run_pipeline("tiling", obs, IDEAL, PipelineConfig(), _place_home)
    b = run_pipeline("tiling", obs, IDEAL, PipelineConfig(), _place_home)
    assert a.boxes == b.boxes and a.predictions == b.predictions
    assert [c.pick for c in a.candidates] == [c.pick for c in b.candidates]
