"""The four manipulation functions as pluggable stages.

A stage is a plain callable registered under a function name and a stage
name. Signatures per function:

``segmenter(obs, params) -> list[DetectionBox]``
``recognizer(obs, boxes, params) -> list[ClassPrediction]``
``pick_planner(obs, box, params) -> PickPose``
``motion_planner(pick, place, profile, params) -> MotionPlan``

Stages registered with ``reads_truth=True`` receive the observation with its
ground-truth layer; every other stage sees the observation with the truth
layer stripped. The driver itself never touches ``obs.truth``.

Baseline ordering rules, fixed for reproducibility: detections are sorted by
their min corner (row, then column); majority-label ties go to the lower
piece id; when a box's centroid misses its foreground, the pick falls back
to the nearest foreground cell, ties resolved in row-major order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import BackgroundMissing, ConfigError, EmptyBox, OutOfBounds, StageError
from .geometry import Pose2, Rect, rect_iou
from .sensing import Observation
from .world import HOME, HardwareProfile, motion_time

FUNCTIONS = ("segmenter", "recognizer", "pick_planner", "motion_planner")
TASK_FUNCTIONS = {
    "pick_place": ("segmenter", "pick_planner", "motion_planner"),
    "tiling": FUNCTIONS,
    "assembly_simple": FUNCTIONS,
    "assembly_dexterous": FUNCTIONS,
}
DEFAULT_STAGES = {
    "segmenter": "background_diff",
    "recognizer": "majority_label",
    "pick_planner": "foreground_centroid",
    "motion_planner": "straight_line",
}
MIN_COMPONENT_CELLS = 100


@dataclass(frozen=True)
class DetectionBox:
    rect: Rect
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class ClassPrediction:
    box_index: int
    label: str
    confidence: float = 1.0


@dataclass(frozen=True)
class PickPose:
    x: float
    y: float
    angle: float = 0.0

    def as_pose(self) -> Pose2:
        return Pose2(self.x, self.y, self.angle)


@dataclass(frozen=True)
class MotionPlan:
    waypoints: tuple[Pose2, ...]
    planned_duration: float
    planning_time: float = 0.0

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("a motion plan needs at least two waypoints")
        if self.planned_duration < 0:
            raise ValueError("planned_duration must be non-negative")


@dataclass
class StageTimings:
    segmentation_s: float = 0.0
    recognition_s: float = 0.0
    pick_planning_s: float = 0.0
    motion_planning_s: float = 0.0

    def __iadd__(self, other: "StageTimings") -> "StageTimings":
        self.segmentation_s += other.segmentation_s
        self.recognition_s += other.recognition_s
        self.pick_planning_s += other.pick_planning_s
        self.motion_planning_s += other.motion_planning_s
        return self

    def as_dict(self) -> dict[str, float]:
        return {"segmentation_s": self.segmentation_s, "recognition_s": self.recognition_s,
                "pick_planning_s": self.pick_planning_s, "motion_planning_s": self.motion_planning_s}


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class Stage:
    function: str
    name: str
    fn: Callable
    reads_truth: bool = False


_REGISTRY: dict[str, dict[str, Stage]] = {f: {} for f in FUNCTIONS}


def register_stage(function: str, name: str, *, reads_truth: bool = False):
    """Decorator adding a stage implementation to the registry."""
    if function not in _REGISTRY:
        raise ConfigError(f"unknown pipeline function {function!r}")

    def deco(fn):
        _REGISTRY[function][name] = Stage(function, name, fn, reads_truth)
        return fn

    return deco


def get_stage(function: str, name: str) -> Stage:
    try:
        return _REGISTRY[function][name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY.get(function, {}))) or "none"
        raise ConfigError(f"no {function} stage named {name!r} (known: {known})") from None


def registered(function: str) -> list[str]:
    return sorted(_REGISTRY[function])


@dataclass(frozen=True)
class PipelineConfig:
    segmenter: str | None = DEFAULT_STAGES["segmenter"]
    recognizer: str | None = DEFAULT_STAGES["recognizer"]
    pick_planner: str | None = DEFAULT_STAGES["pick_planner"]
    motion_planner: str | None = DEFAULT_STAGES["motion_planner"]
    params: dict = field(default_factory=dict)

    @classmethod
    def oracle(cls) -> "PipelineConfig":
        return cls("oracle", "oracle", "oracle", "oracle")

    def stage(self, function: str) -> Stage:
        name = getattr(self, function)
        if not name:
            raise ConfigError(f"pipeline has no {function} configured")
        return get_stage(function, name)

    def validate(self, task_kind: str) -> None:
        if task_kind not in TASK_FUNCTIONS:
            raise ConfigError(f"unknown task kind {task_kind!r}")
        for function in TASK_FUNCTIONS[task_kind]:
            self.stage(function)

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in FUNCTIONS}
        d["params"] = dict(sorted(self.params.items()))
        return d


# --------------------------------------------------------------------------
# baseline stages


def _components(obs: Observation, min_cells: int):
    if obs.background is None:
        raise BackgroundMissing("observation carries no background capture")
    if obs.background.shape != obs.grid.shape:
        raise BackgroundMissing(f"background {obs.background.shape} does not match grid {obs.grid.shape}")
    labels, n = kernels.label_components(obs.grid != obs.background)
    if n == 0:
        return labels, []
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    keep = [k for k in range(1, n + 1) if counts[k] >= min_cells]
    return labels, keep


@register_stage("segmenter", "background_diff")
def background_diff(obs: Observation, params: dict) -> list[DetectionBox]:
    """Boxes around 4-connected foreground components of the background difference."""
    min_cells = int(params.get("min_cells", MIN_COMPONENT_CELLS))
    labels, keep = _components(obs, min_cells)
    out = []
    for k in keep:
        rr, cc = np.nonzero(labels == k)
        r0, r1, c0, c1 = int(rr.min()), int(rr.max()), int(cc.min()), int(cc.max())
        fill = len(rr) / ((r1 - r0 + 1) * (c1 - c0 + 1))
        out.append(((r0, c0), DetectionBox(obs.cell_rect(r0, c0, r1, c1), fill)))
    out.sort(key=lambda t: t[0])
    return [b for _, b in out]


@register_stage("recognizer", "majority_label")
def majority_label(obs: Observation, boxes: list[DetectionBox], params: dict) -> list[ClassPrediction]:
    """Most frequent apparent texture among the foreground cells of each box."""
    preds = []
    fg = obs.foreground()
    for i, box in enumerate(boxes):
        r0, c0, r1, c1 = obs.rect_cells(box.rect)
        window = obs.grid[r0:r1 + 1, c0:c1 + 1][fg[r0:r1 + 1, c0:c1 + 1]]
        if window.size == 0:
            preds.append(ClassPrediction(i, "", 0.0))
            continue
        ids, counts = np.unique(window, return_counts=True)  # ids ascending
        best = int(np.argmax(counts))  # first maximum, i.e. the lower piece id
        pid = int(ids[best])
        preds.append(ClassPrediction(i, obs.textures.get(pid, ""), float(counts[best]) / window.size))
    return preds


@register_stage("pick_planner", "foreground_centroid")
def foreground_centroid(obs: Observation, box: DetectionBox, params: dict) -> PickPose:
    """Centroid of the largest foreground component inside the box; angle 0."""
    r0, c0, r1, c1 = obs.rect_cells(box.rect)
    if r1 < r0 or c1 < c0:
        raise EmptyBox(f"box {box.rect} covers no cells")
    fg = obs.foreground()[r0:r1 + 1, c0:c1 + 1]
    labels, n = kernels.label_components(fg)
    if n == 0:
        raise EmptyBox(f"box {box.rect} contains no foreground")
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    counts[0] = 0
    region = labels == int(np.argmax(counts))
    rr, cc = np.nonzero(region)
    mr, mc = float(rr.mean()), float(cc.mean())
    ir, ic = int(math.floor(mr + 0.5)), int(math.floor(mc + 0.5))
    if not (0 <= ir < region.shape[0] and 0 <= ic < region.shape[1] and region[ir, ic]):
        d2 = (rr - mr) ** 2 + (cc - mc) ** 2
        k = int(np.argmin(d2))  # first minimum in row-major order
        mr, mc = float(rr[k]), float(cc[k])
    x, y = obs.cell_center(r0 + mr, c0 + mc)
    return PickPose(x, y, 0.0)


@register_stage("motion_planner", "straight_line")
def straight_line(pick: PickPose, place: Pose2, profile: HardwareProfile, params: dict) -> MotionPlan:
    """Home, pre-pick, pick, pre-place, place, joined by straight segments."""
    t0 = time.perf_counter()
    table = params.get("table")
    p = pick.as_pose()
    if table is not None:
        for name, pose in (("pick", p), ("place", place)):
            if not table.contains_point((pose.x, pose.y)):
                raise OutOfBounds(f"{name} pose ({pose.x:.1f}, {pose.y:.1f}) lies outside the table")
    # pre-poses sit directly above their targets, so they share x, y
    waypoints = (HOME, p, p, place, place)
    duration = sum(motion_time(a, b, profile) for a, b in zip(waypoints, waypoints[1:]))
    return MotionPlan(waypoints, duration, time.perf_counter() - t0)


register_stage("motion_planner", "oracle")(straight_line)


# --------------------------------------------------------------------------
# oracle stages: read the truth layer


def _truth_match(obs: Observation, box: DetectionBox) -> int | None:
    best, best_iou = None, 0.0
    for pid, rect in sorted(obs.truth.raster_rects.items()):
        iou = rect_iou(rect, box.rect)
        if iou > best_iou:
            best, best_iou = pid, iou
    return best


@register_stage("segmenter", "oracle", reads_truth=True)
def oracle_segmenter(obs: Observation, params: dict) -> list[DetectionBox]:
    rects = list(obs.truth.raster_rects.values())
    rects.sort(key=lambda r: (r.ymin, r.xmin))
    return [DetectionBox(r, 1.0) for r in rects]


@register_stage("recognizer", "oracle", reads_truth=True)
def oracle_recognizer(obs: Observation, boxes: list[DetectionBox], params: dict) -> list[ClassPrediction]:
    out = []
    for i, box in enumerate(boxes):
        pid = _truth_match(obs, box)
        out.append(ClassPrediction(i, obs.truth.textures[pid] if pid is not None else "", 1.0))
    return out


@register_stage("pick_planner", "oracle", reads_truth=True)
def oracle_pick(obs: Observation, box: DetectionBox, params: dict) -> PickPose:
    pid = _truth_match(obs, box)
    if pid is None:
        raise EmptyBox(f"box {box.rect} matches no piece")
    pose = obs.truth.poses[pid]
    return PickPose(pose.x, pose.y, 0.0)


# --------------------------------------------------------------------------
# driver


@dataclass
class Candidate:
    box_index: int
    box: DetectionBox
    label: str | None
    pick: PickPose
    place: Pose2
    plan: MotionPlan


@dataclass
class PipelineOutput:
    boxes: list[DetectionBox]
    predictions: list[ClassPrediction]
    candidates: list[Candidate]
    timings: StageTimings


def _view(stage: Stage, obs: Observation) -> Observation:
    return obs if stage.reads_truth else obs.without_truth()


def _call(stage: Stage, *args):
    try:
        return stage.fn(*args)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage attached
        raise StageError(stage.function, exc) from exc


PlaceFor = Callable[[int, DetectionBox, "str | None", PickPose], "Pose2 | None"]


def run_pipeline(task_kind: str, obs: Observation, profile: HardwareProfile,
                 config: PipelineConfig, place_for: PlaceFor,
                 skip: Callable[[DetectionBox], bool] | None = None) -> PipelineOutput:
    """Segment, optionally recognise, then plan a pick and a motion per accepted box.

    ``place_for(box_index, box, label, pick)`` returns the gripper pose to
    release at, or None to leave the box alone; boxes for which ``skip(box)``
    is true are not even pick-planned. Recognition is skipped for
    ``pick_place``.
    """
    config.validate(task_kind)
    functions = TASK_FUNCTIONS[task_kind]
    stages = {f: config.stage(f) for f in functions}
    params = config.params
    timings = StageTimings()

    t0 = time.perf_counter()
    seg = stages["segmenter"]
    boxes = list(_call(seg, _view(seg, obs), params))
    timings.segmentation_s = time.perf_counter() - t0

    predictions: list[ClassPrediction] = []
    if "recognizer" in stages:
        rec = stages["recognizer"]
        t0 = time.perf_counter()
        predictions = list(_call(rec, _view(rec, obs), boxes, params))
        timings.recognition_s = time.perf_counter() - t0
        if len(predictions) != len(boxes) or any(not 0 <= p.box_index < len(boxes) for p in predictions):
            raise StageError("recognizer", ValueError("predictions must map one-to-one onto boxes"))
    labels = {p.box_index: p.label for p in predictions}

    candidates = []
    pp, mp = stages["pick_planner"], stages["motion_planner"]
    motion_params = dict(params, table=obs.table)
    for i, box in enumerate(boxes):
        if skip is not None and skip(box):
            continue
        t0 = time.perf_counter()
        pick = _call(pp, _view(pp, obs), box, params)
        timings.pick_planning_s += time.perf_counter() - t0
        label = labels.get(i)
        place = place_for(i, box, label, pick)
        if place is None:
            continue
        t0 = time.perf_counter()
        plan = _call(mp, pick, place, profile, motion_params)
        timings.motion_planning_s += time.perf_counter() - t0
        candidates.append(Candidate(i, box, label, pick, place, plan))
    return PipelineOutput(boxes, predictions, candidates, timings)
