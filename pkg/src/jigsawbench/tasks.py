"""The three benchmark tasks: setup, execution loop, scoring and metrics.

Task kinds: ``pick_place``, ``tiling``, ``assembly_simple`` and
``assembly_dexterous``. Scores are normalised to [0, 1]; piece-count scores
are quarters and the raw count is kept alongside.

Each trial draws from three independent streams derived from its seed:
scene layout, camera and actuation. Vision metrics come from the first
observation, taken before the arm moves, so they do not depend on the arm
profile.

Execution is open loop per round: observe, run the pipeline, then pick and
place every accepted box; repeat until no box is accepted or
``max_actions`` picks have been attempted. A box whose centre lies inside
the goal region counts as already handled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NoAttempts, NoBasePlate, NoFragmentsPlaced, TaskError
from .geometry import Pose2, Rect, min_area_rect, polygon_contains_polygon, polygon_intersection_area, Polygon, rect_iou, transform
from .jigsaw import CAVITY_H, CAVITY_W, JigsawCode, JigsawSet, assembled_poses, generate_set, layout_poses, parse_code
from .pipeline import DetectionBox, PickPose, PipelineConfig, StageTimings, run_pipeline
from .sensing import Observation, render, render_background
from .world import (
    TABLE,
    HardwareProfile,
    SceneObject,
    SpawnConstraints,
    WorldState,
    assembly_fit_check,
    execute_pick,
    execute_place,
    spawn_random,
)

TASK_KINDS = ("pick_place", "tiling", "assembly_simple", "assembly_dexterous")
DEFAULT_CODES = {"pick_place": "000101", "tiling": "000101",
                 "assembly_simple": "000111", "assembly_dexterous": "000111"}
DEFAULT_CLEARANCE_MM = 0.6
DEFAULT_MAX_ACTIONS = 8

A4_W, A4_H = 210.0, 297.0
SQUARE_MM = 100.0
SQUARE_OFFSETS = ((-52.5, 60.0), (52.5, 60.0), (-52.5, -60.0), (52.5, -60.0))
REGION_MARGIN_MM = 10.0  # around goal regions, and between spawned pieces
PLATE_CENTRE_SPREAD_MM = 60.0
AP_IOU_THRESHOLD = 0.5
UNIT_SNAP = 1e-9


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    code: JigsawCode
    clearance: float = DEFAULT_CLEARANCE_MM
    max_actions: int = DEFAULT_MAX_ACTIONS

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"unknown task kind {self.kind!r}; expected one of {TASK_KINDS}")
        if self.max_actions < 4:
            raise ConfigError("max_actions must be at least 4")
        if self.clearance < 0:
            raise ConfigError("clearance must be non-negative")
        if self.kind.startswith("assembly") and not self.code.has_base_plate:
            raise ConfigError(f"{self.kind} needs a code with a base plate (digit 5 = 1)")

    @classmethod
    def default(cls, kind: str, **kw) -> "TaskSpec":
        code = kw.pop("code", DEFAULT_CODES.get(kind, "000101"))
        return cls(kind, parse_code(code) if isinstance(code, str) else code, **kw)

    @property
    def place_mode(self) -> str:
        return "dexterous" if self.kind == "assembly_dexterous" else "simple"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "code": str(self.code), "clearance_mm": self.clearance,
                "max_actions": self.max_actions}


@dataclass(frozen=True)
class Goal:
    kind: str
    region: Rect  # boxes centred here are left alone
    sheet: Rect | None = None
    squares: tuple[Rect, ...] = ()
    frame: Pose2 | None = None  # tiling layout frame
    plate_pose: Pose2 | None = None

    def to_dict(self) -> dict:
        return {
            "region": self.region.as_list(),
            "sheet": self.sheet.as_list() if self.sheet else None,
            "squares": [s.as_list() for s in self.squares],
            "frame": self.frame.as_list() if self.frame else None,
            "plate_pose": self.plate_pose.as_list() if self.plate_pose else None,
        }


@dataclass(frozen=True)
class FunctionMetrics:
    mean_iou: float
    ap: float | None  # None when the task skips recognition
    success_rate: float
    grasp_time: float
    timings: StageTimings = field(default_factory=StageTimings)
    planned_duration: float = 0.0


@dataclass
class ActionRecord:
    round: int
    box_index: int
    label: str | None
    pick: PickPose
    target: Pose2
    success: bool
    piece_id: int | None = None
    landing: Pose2 | None = None
    placement_error_mm: float | None = None
    z_layer: int | None = None
    snapped: bool = False
    pick_time: float = 0.0
    place_time: float = 0.0
    planned_duration: float = 0.0

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "box_index": self.box_index,
            "label": self.label,
            "pick": [self.pick.x, self.pick.y, self.pick.angle],
            "target": self.target.as_list(),
            "success": self.success,
            "piece_id": self.piece_id,
            "landing": self.landing.as_list() if self.landing else None,
            "placement_error_mm": self.placement_error_mm,
            "z_layer": self.z_layer,
            "snapped": self.snapped,
            "pick_time_s": self.pick_time,
            "place_time_s": self.place_time,
            "planned_duration_s": self.planned_duration,
        }


@dataclass
class TaskResult:
    kind: str
    score: float
    raw_count: int | None
    area_rate: float | None
    completion: float | None
    stacking_flag: bool
    metrics: FunctionMetrics
    actions_used: int
    rounds: int
    log: list[ActionRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        """Deterministic part of the result (wall-clock timings excluded)."""
        m = self.metrics
        return {
            "score": self.score,
            "raw_count": self.raw_count,
            "area_rate": self.area_rate,
            "completion": self.completion,
            "stacking_flag": self.stacking_flag,
            "mean_iou": m.mean_iou,
            "ap": m.ap,
            "success_rate": m.success_rate,
            "grasp_time_s": m.grasp_time,
            "planned_duration_s": m.planned_duration,
            "actions_used": self.actions_used,
            "rounds": self.rounds,
            "log": [a.to_dict() for a in self.log],
        }


# --------------------------------------------------------------------------
# setup


def trial_streams(seed) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (scene, camera, actuation) generators for one trial seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return tuple(np.random.default_rng(child) for child in ss.spawn(3))  # type: ignore[return-value]


def build_goal(kind: str, jset: JigsawSet, plate_pose: Pose2 | None = None) -> Goal:
    s = jset.code.scale_factor
    if kind == "pick_place":
        sheet = Rect.centered(0.0, 0.0, A4_W * s, A4_H * s)
        squares = tuple(Rect.centered(dx * s, dy * s, SQUARE_MM * s, SQUARE_MM * s) for dx, dy in SQUARE_OFFSETS)
        return Goal(kind, sheet, sheet=sheet, squares=squares)
    if kind == "tiling":
        frame = Pose2(0.0, 0.0, 0.0)
        region = Rect.centered(0.0, 0.0, CAVITY_W * s + 2 * REGION_MARGIN_MM, CAVITY_H * s + 2 * REGION_MARGIN_MM)
        return Goal(kind, region, frame=frame)
    if plate_pose is None:
        raise ValueError("assembly goals need a plate pose")
    region = transform(jset.base.shape, plate_pose).bounds
    return Goal(kind, region, plate_pose=plate_pose)


def setup_task(spec: TaskSpec, seed) -> tuple[WorldState, Goal]:
    """Lay out the goal fixtures and scatter the fragments around them."""
    rng = seed if isinstance(seed, np.random.Generator) else trial_streams(seed)[0]
    jset = generate_set(spec.code, spec.clearance)
    constraints = dict(min_gap=REGION_MARGIN_MM, rotation="upright")
    plate = None
    if spec.kind.startswith("assembly"):
        if jset.base is None:
            raise NoBasePlate(f"code {spec.code} has no base plate")
        spread = PLATE_CENTRE_SPREAD_MM
        plate_pose = Pose2(float(rng.uniform(-spread, spread)), float(rng.uniform(-spread, spread)),
                           float(rng.uniform(-math.pi, math.pi)))
        plate = SceneObject(jset.base.id, plate_pose, 0)
        goal = build_goal(spec.kind, jset, plate_pose)
    else:
        goal = build_goal(spec.kind, jset)
    keepout = (goal.region.expanded(REGION_MARGIN_MM),)
    world = spawn_random(jset, TABLE, rng, SpawnConstraints(keepout=keepout, **constraints))
    if plate is not None:
        world.objects.insert(0, plate)
    return world, goal


# --------------------------------------------------------------------------
# scoring


def score_pick_place(world: WorldState, goal: Goal) -> tuple[float, int]:
    """Squares holding at least one fully contained fragment, over four."""
    footprints = [world.footprint(o) for o in world.fragments()]
    filled = 0
    for square in goal.squares:
        sq = square.to_polygon()
        if any(square.contains_rect(fp.bounds) or polygon_contains_polygon(sq, fp) for fp in footprints):
            filled += 1
    return filled / 4.0, filled


def score_tiling(world: WorldState) -> tuple[float, float, bool]:
    """``(area_rate, completion, stacking_flag)`` of the current scene."""
    frags = world.fragments()
    if not frags:
        raise NoFragmentsPlaced("no fragments on the table")
    shapes = [(o, world.footprint(o)) for o in frags]
    points = [v for _, fp in shapes for v in fp.vertices]
    mbr = min_area_rect(points)
    standard = world.jigsaw.standard_area
    ratio = standard / mbr.area if mbr.area > 0 else math.inf
    area_rate = 1.0 if ratio > 1.0 - UNIT_SNAP else ratio
    rect_poly = Polygon(tuple(mbr.corners()))
    covered = sum(polygon_intersection_area(fp, rect_poly) for o, fp in shapes if o.z_layer == 0)
    completion = min(1.0, covered / standard)
    stacking = any(o.z_layer > 0 for o in frags)
    return area_rate, completion, stacking


def score_assembly(world: WorldState) -> tuple[float, int]:
    if world.plate is None:
        raise NoBasePlate("no base plate in the scene")
    seated = sum(1 for f in world.jigsaw.fragments if assembly_fit_check(world, f.id))
    return seated / 4.0, seated


# --------------------------------------------------------------------------
# metrics


def greedy_match(pred: list[Rect], truth: list[Rect], min_iou: float = 0.0) -> list[tuple[int, int, float]]:
    """One-to-one matches ``(pred_index, truth_index, iou)`` taken in descending IoU order.

    Ties are broken on rectangle coordinates rather than list positions, so
    the matched IoU values do not depend on input order.
    """
    pairs = []
    for i, p in enumerate(pred):
        for j, t in enumerate(truth):
            iou = rect_iou(p, t)
            if iou > 0.0 and iou >= min_iou:
                pairs.append((-iou, t.as_list(), p.as_list(), i, j))
    pairs.sort()
    used_p, used_t, out = set(), set(), []
    for neg, _, _, i, j in pairs:
        if i in used_p or j in used_t:
            continue
        used_p.add(i)
        used_t.add(j)
        out.append((i, j, -neg))
    return out


def compute_iou_metric(detections: list[Rect], truth: list[Rect]) -> float:
    """Mean over truth boxes of the IoU of their greedy match (0 if unmatched)."""
    if not truth:
        raise ValueError("truth must be non-empty")
    return sum(iou for _, _, iou in greedy_match(detections, truth)) / len(truth)


def compute_ap(detections: list[Rect], labels: list[str], truth: list[Rect], truth_labels: list[str],
               threshold: float = AP_IOU_THRESHOLD) -> float:
    """Fraction of truth pieces whose matched detection carries their label (M / 4)."""
    if not truth:
        raise ValueError("truth must be non-empty")
    matches = greedy_match(detections, truth, threshold)
    correct = sum(1 for i, j, _ in matches if labels[i] == truth_labels[j])
    return correct / len(truth)


def compute_success_rate(outcomes: list[bool]) -> float:
    if not outcomes:
        raise NoAttempts("no pick attempts were made")
    return sum(1 for o in outcomes if o) / len(outcomes)


# --------------------------------------------------------------------------
# execution


ObsHook = Callable[[int, Observation], None]


class _Targets:
    """Goal-side bookkeeping: which square or slot each accepted box is sent to."""

    def __init__(self, spec: TaskSpec, world: WorldState, goal: Goal):
        self.spec, self.goal, self.jset = spec, goal, world.jigsaw
        self.claimed: set[int] = set()
        if spec.kind == "tiling":
            self.slots = layout_poses(self.jset, goal.frame)
        elif spec.kind.startswith("assembly"):
            self.slots = assembled_poses(self.jset, goal.plate_pose)
        else:
            self.slots = {}
        self.pending: dict[int, int] = {}  # box index -> claimed key, current round

    def in_goal(self, box: DetectionBox) -> bool:
        return self.goal.region.contains_point(box.rect.center)

    def place_for(self, i: int, box: DetectionBox, label: str | None, pick: PickPose) -> Pose2 | None:
        if self.spec.kind == "pick_place":
            free = [k for k in range(len(self.goal.squares)) if k not in self.claimed]
            if not free:
                return None
            key = free[0]
            cx, cy = self.goal.squares[key].center
            bx, by = box.rect.center
            target = Pose2(cx + pick.x - bx, cy + pick.y - by, 0.0)
        else:
            key = self.jset.fragment_for_label(label) if label else None
            if key is None or key in self.claimed:
                return None
            target = self.slots[key]
        self.claimed.add(key)
        self.pending[i] = key
        return target

    def release(self, i: int) -> None:
        key = self.pending.pop(i, None)
        if key is not None:
            self.claimed.discard(key)


def run_task(spec: TaskSpec, profile: HardwareProfile, config: PipelineConfig, seed,
             on_observation: ObsHook | None = None) -> tuple[TaskResult, StageTimings]:
    """Execute one seeded trial. Returns the result and the wall-clock stage timings."""
    config.validate(spec.kind)
    scene_rng, cam_rng, act_rng = trial_streams(seed)
    world, goal = setup_task(spec, scene_rng)
    empty = WorldState(world.table, [], world.jigsaw)
    background = render_background(empty, profile.camera).grid
    targets = _Targets(spec, world, goal)
    timings = StageTimings()
    log: list[ActionRecord] = []
    first_boxes = first_preds = None
    first_obs = None
    rounds = 0
    try:
        while len(log) < spec.max_actions:
            obs = render(world, profile.camera, cam_rng, background)
            if on_observation is not None:
                on_observation(rounds, obs)
            out = run_pipeline(spec.kind, obs, profile, config, targets.place_for, targets.in_goal)
            timings += out.timings
            if first_obs is None:
                first_obs, first_boxes, first_preds = obs, out.boxes, out.predictions
            if not out.candidates:
                break
            for cand in out.candidates:
                if len(log) >= spec.max_actions:
                    targets.release(cand.box_index)
                    continue
                rec = ActionRecord(rounds, cand.box_index, cand.label, cand.pick, cand.place, False,
                                   planned_duration=cand.plan.planned_duration)
                picked = execute_pick(world, cand.pick.as_pose(), profile, act_rng)
                rec.pick_time = picked.elapsed
                if picked.success:
                    placed = execute_place(world, cand.place, spec.place_mode, profile, act_rng)
                    rec.success = True
                    rec.piece_id = placed.piece_id
                    rec.landing = placed.landing
                    rec.placement_error_mm = math.hypot(placed.landing.x - cand.place.x,
                                                        placed.landing.y - cand.place.y)
                    rec.z_layer = placed.z_layer
                    rec.snapped = placed.snapped
                    rec.place_time = placed.elapsed
                else:
                    targets.release(cand.box_index)
                log.append(rec)
            targets.pending.clear()
            rounds += 1
        result = _finish(spec, world, goal, first_obs, first_boxes, first_preds, log, rounds, timings)
    except Exception as exc:
        partial = {"actions_used": len(log), "rounds": rounds, "log": [a.to_dict() for a in log]}
        raise TaskError(f"{spec.kind} trial failed: {exc}", partial) from exc
    return result, timings


def _finish(spec, world, goal, obs, boxes, preds, log, rounds, timings) -> TaskResult:
    truth = obs.truth
    frag_ids = truth.fragment_ids()
    truth_rects = [truth.raster_rects[i] for i in frag_ids]
    det_rects = [b.rect for b in boxes]
    mean_iou = compute_iou_metric(det_rects, truth_rects)
    ap = None
    if spec.kind != "pick_place":
        labels = [""] * len(boxes)
        for p in preds:
            labels[p.box_index] = p.label
        ap = compute_ap(det_rects, labels, truth_rects, [truth.textures[i] for i in frag_ids])
    success_rate = compute_success_rate([a.success for a in log]) if log else 0.0
    done = [a for a in log if a.success]
    grasp_time = sum(a.pick_time + a.place_time for a in done) / len(done) if done else 0.0
    planned = sum(a.planned_duration for a in log)
    metrics = FunctionMetrics(mean_iou, ap, success_rate, grasp_time, timings, planned)

    area_rate = completion = None
    stacking = any(o.z_layer > 0 for o in world.fragments())
    raw = None
    if spec.kind == "pick_place":
        score, raw = score_pick_place(world, goal)
    elif spec.kind == "tiling":
        area_rate, completion, stacking = score_tiling(world)
        score = area_rate
    else:
        score, raw = score_assembly(world)
    return TaskResult(spec.kind, score, raw, area_rate, completion, stacking, metrics,
                      len(log), rounds, log)
