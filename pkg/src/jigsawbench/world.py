"""Simulated table scene, hardware profiles, and pick/place physics.

Pieces are rigid 2D footprints with a stacking layer. A suction gripper
captures the top-most piece under the commanded point; placements land with
arm and camera noise. In dexterous mode a landing close enough to the
piece's own cavity slot is pulled into it (compliant insertion).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, GripperEmpty, GripperOccupied, NoBasePlate, PlacementInfeasible
from .geometry import (
    Polygon,
    Pose2,
    Rect,
    convex_hull,
    distance_to_boundary,
    inset_polygon,
    polygon_contains_point,
    polygon_contains_polygon,
    polygon_intersection_area,
    transform,
)
from .jigsaw import BASE_ID, JigsawSet, assembled_poses

TABLE = Rect(-300.0, -300.0, 300.0, 300.0)
HOME = Pose2(0.0, -300.0, 0.0)  # suction cup parked 0.3 m from the workspace centre

MOTION_OVERHEAD_S = 0.2
WORKING_RADIUS_MM = 500.0
JOINT_EFFICIENCY = {6: 1.0, 7: 1.15}
CAPTURE_TRANSLATION_MM = 2.0
CAPTURE_ROTATION_RAD = math.radians(5.0)
OVERLAP_EPS_MM2 = 1e-6
MAX_SPAWN_ATTEMPTS = 10_000


# --------------------------------------------------------------------------
# hardware profiles


@dataclass(frozen=True)
class ArmProfile:
    joint_count: int = 6
    max_joint_speed: float = 1.0  # rad/s
    reach: float = 850.0  # mm
    repeatability: float = 0.1  # mm, 1 sigma


@dataclass(frozen=True)
class CameraProfile:
    resolution_px: tuple[int, int] = (1280, 720)
    scale: float = 1.0  # mm per pixel
    localization_sigma: float = 1.0  # mm
    label_confusion: float = 0.0


@dataclass(frozen=True)
class GripperProfile:
    type: str = "suction"
    capture_margin: float = 2.0  # mm
    approach_dwell: float = 0.5  # s


@dataclass(frozen=True)
class HardwareProfile:
    name: str
    arm: ArmProfile
    camera: CameraProfile
    gripper: GripperProfile

    def __post_init__(self):
        validate_profile(self)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "arm": {f.name: getattr(self.arm, f.name) for f in fields(ArmProfile)},
            "camera": {f.name: (list(v) if isinstance(v := getattr(self.camera, f.name), tuple) else v)
                       for f in fields(CameraProfile)},
            "gripper": {f.name: getattr(self.gripper, f.name) for f in fields(GripperProfile)},
        }


def validate_profile(p: HardwareProfile) -> None:
    a, c, g = p.arm, p.camera, p.gripper
    if a.joint_count not in JOINT_EFFICIENCY:
        raise ConfigError(f"joint_count must be 6 or 7, got {a.joint_count}")
    for name, value in (("max_joint_speed", a.max_joint_speed), ("reach", a.reach),
                        ("repeatability", a.repeatability), ("localization_sigma", c.localization_sigma),
                        ("capture_margin", g.capture_margin), ("approach_dwell", g.approach_dwell)):
        if not value >= 0:
            raise ConfigError(f"{name} must be non-negative, got {value}")
    if a.max_joint_speed <= 0 or a.reach <= 0:
        raise ConfigError("max_joint_speed and reach must be positive")
    if not c.scale > 0:
        raise ConfigError(f"camera scale must be positive, got {c.scale}")
    if not 0.0 <= c.label_confusion <= 1.0:
        raise ConfigError(f"label_confusion must be in [0, 1], got {c.label_confusion}")
    if g.type != "suction":
        raise ConfigError(f"only suction grippers are modelled, got {g.type!r}")


ARMS = {
    "ur5": ArmProfile(joint_count=6, max_joint_speed=1.0, reach=850.0, repeatability=0.1),
    "ur10e": ArmProfile(joint_count=6, max_joint_speed=1.0, reach=1300.0, repeatability=0.05),
    "panda": ArmProfile(joint_count=7, max_joint_speed=1.0, reach=855.0, repeatability=0.1),
    "ideal": ArmProfile(joint_count=6, max_joint_speed=1.0, reach=1300.0, repeatability=0.0),
}
CAMERAS = {
    "d435": CameraProfile((1280, 720), 1.0, 1.0, 0.0),
    "d435i": CameraProfile((1280, 720), 1.0, 1.5, 0.1),
    "ideal": CameraProfile((1280, 720), 1.0, 0.0, 0.0),
}
GRIPPERS = {
    "suction": GripperProfile("suction", 2.0, 0.5),
    "ideal": GripperProfile("suction", 0.0, 0.5),
}


def builtin_profile(name: str) -> HardwareProfile:
    """Resolve ``ideal`` or ``<arm>_<camera>[_<gripper>]``, e.g. ``ur10e_d435``."""
    key = name.lower()
    if key == "ideal":
        return HardwareProfile("ideal", ARMS["ideal"], CAMERAS["ideal"], GRIPPERS["ideal"])
    parts = key.split("_")
    if len(parts) not in (2, 3) or parts[0] not in ARMS or parts[1] not in CAMERAS:
        raise ConfigError(f"unknown hardware profile {name!r}; use ideal or <arm>_<camera> "
                          f"with arm in {sorted(ARMS)} and camera in {sorted(CAMERAS)}")
    gripper = parts[2] if len(parts) == 3 else "suction"
    if gripper not in GRIPPERS:
        raise ConfigError(f"unknown gripper {gripper!r}")
    return HardwareProfile(key, ARMS[parts[0]], CAMERAS[parts[1]], GRIPPERS[gripper])


_SECTION_TYPES = {"arm": ArmProfile, "camera": CameraProfile, "gripper": GripperProfile}


def _coerce(cls, key: str, raw: str):
    ftypes = {f.name: f.type for f in fields(cls)}
    if key not in ftypes:
        raise ConfigError(f"unknown {cls.__name__} key {key!r}")
    raw = raw.strip()
    try:
        if key == "resolution_px":
            w, h = raw.lower().replace(",", "x").split("x")
            return (int(w), int(h))
        if key == "joint_count":
            return int(raw)
        if key == "type":
            return raw
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def apply_overrides(profile: HardwareProfile, overrides: dict[str, str]) -> HardwareProfile:
    """Apply ``{"arm.repeatability": "0", ...}`` style overrides."""
    parts = {"arm": profile.arm, "camera": profile.camera, "gripper": profile.gripper}
    name = profile.name
    for dotted, raw in overrides.items():
        if dotted == "name":
            name = raw.strip()
            continue
        section, _, key = dotted.partition(".")
        if section not in _SECTION_TYPES or not key:
            raise ConfigError(f"unknown profile key {dotted!r}")
        parts[section] = replace(parts[section], **{key: _coerce(_SECTION_TYPES[section], key, raw)})
    return HardwareProfile(name, parts["arm"], parts["camera"], parts["gripper"])


def load_profile(path: str | Path) -> HardwareProfile:
    """Read a profile file with ``[profile]``, ``[arm]``, ``[camera]``, ``[gripper]`` sections.

    ``[profile]`` may name a built-in ``base`` to start from; otherwise the
    dataclass defaults are used. Unknown sections or keys raise ``ConfigError``.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read profile {path}: {exc}") from exc
    return profile_from_sections({s: dict(cp[s]) for s in cp.sections()}, default_name=Path(path).stem)


def profile_from_sections(sections: dict[str, dict[str, str]], default_name: str = "custom") -> HardwareProfile:
    unknown = set(sections) - {"profile", *_SECTION_TYPES}
    if unknown:
        raise ConfigError(f"unknown profile sections {sorted(unknown)}")
    head = dict(sections.get("profile", {}))
    extra = set(head) - {"name", "base"}
    if extra:
        raise ConfigError(f"unknown [profile] keys {sorted(extra)}")
    if "base" in head:
        profile = builtin_profile(head["base"])
    else:
        profile = HardwareProfile(default_name, ArmProfile(), CameraProfile(), GripperProfile())
    overrides = {"name": head.get("name", default_name if "base" not in head else profile.name)}
    for section in _SECTION_TYPES:
        for key, raw in sections.get(section, {}).items():
            overrides[f"{section}.{key}"] = raw
    return apply_overrides(profile, overrides)


# --------------------------------------------------------------------------
# motion model


def reach_factor(profile: HardwareProfile) -> float:
    """Effective lever arm (mm/rad) turning joint speed into Cartesian speed.

    The end-effector works at a fixed standoff from the workspace, so every
    arm that reaches the working radius gets the same lever arm.
    """
    return min(profile.arm.reach, WORKING_RADIUS_MM)


def joint_efficiency(joint_count: int) -> float:
    return JOINT_EFFICIENCY[joint_count]


def cartesian_speed(profile: HardwareProfile) -> float:
    return profile.arm.max_joint_speed * reach_factor(profile) * joint_efficiency(profile.arm.joint_count)


def motion_time(start: Pose2, goal: Pose2, profile: HardwareProfile) -> float:
    """Cruise time over the straight-line distance plus a fixed accel/decel overhead."""
    return start.distance(goal) / cartesian_speed(profile) + MOTION_OVERHEAD_S


# --------------------------------------------------------------------------
# scene


@dataclass
class SceneObject:
    piece_id: int
    pose: Pose2
    z_layer: int = 0


@dataclass
class HeldPiece:
    piece_id: int
    grip_pose: Pose2  # where the gripper closed
    relative: Pose2  # piece pose expressed in the gripper frame (noisy)


@dataclass
class PickOutcome:
    success: bool
    piece_id: int | None = None
    held_offset: tuple[float, float] | None = None
    elapsed: float = 0.0


@dataclass
class PlaceOutcome:
    success: bool
    piece_id: int | None = None
    landing: Pose2 | None = None
    z_layer: int = 0
    snapped: bool = False
    elapsed: float = 0.0


@dataclass
class WorldState:
    table: Rect
    objects: list[SceneObject]
    jigsaw: JigsawSet
    rng_seed: int = 0
    held: HeldPiece | None = None
    arm_pose: Pose2 = HOME

    def copy(self) -> "WorldState":
        return WorldState(self.table, [replace(o) for o in self.objects], self.jigsaw,
                          self.rng_seed, self.held, self.arm_pose)

    def object(self, piece_id: int) -> SceneObject | None:
        for o in self.objects:
            if o.piece_id == piece_id:
                return o
        return None

    def footprint(self, obj: SceneObject) -> Polygon:
        return transform(self.jigsaw.piece(obj.piece_id).shape, obj.pose)

    def footprints(self) -> dict[int, Polygon]:
        return {o.piece_id: self.footprint(o) for o in self.objects}

    @property
    def plate(self) -> SceneObject | None:
        return self.object(BASE_ID) if self.jigsaw.base is not None else None

    def fragments(self) -> list[SceneObject]:
        return [o for o in self.objects if o.piece_id != BASE_ID]

    def piece_count(self) -> int:
        return len(self.objects) + (1 if self.held is not None else 0)


def blocking_overlap(world: WorldState, a: SceneObject, a_shape: Polygon, b: SceneObject) -> float:
    """Area by which two scene objects collide.

    The base plate only blocks with its rim: a fragment inside the cavity
    rests on the plate floor rather than colliding with it.
    """
    b_shape = world.footprint(b)
    area = polygon_intersection_area(a_shape, b_shape)
    if area <= OVERLAP_EPS_MM2:
        return 0.0
    for plate, other in ((a, b_shape), (b, a_shape)):
        if plate.piece_id == BASE_ID:
            cavity = transform(world.jigsaw.cavity, plate.pose)
            area -= polygon_intersection_area(other, cavity)
    return area if area > OVERLAP_EPS_MM2 else 0.0


@dataclass(frozen=True)
class SpawnConstraints:
    include_base: bool = False
    rotation: str = "upright"  # "upright" (theta 0) or "free" (uniform)
    keepout: tuple[Rect, ...] = ()
    min_gap: float = 0.0  # mm between footprints
    base_rotation: str = "free"


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_random(jset: JigsawSet, table: Rect = TABLE, seed=0,
                 constraints: SpawnConstraints = SpawnConstraints()) -> WorldState:
    """Rejection-sample disjoint poses for the set's pieces inside ``table``."""
    rng = _as_rng(seed)
    if constraints.rotation not in ("upright", "free") or constraints.base_rotation not in ("upright", "free"):
        raise ValueError("rotation must be 'upright' or 'free'")
    pieces = list(jset.fragments)
    if constraints.include_base:
        if jset.base is None:
            raise NoBasePlate("spawn requested a base plate but the set has none")
        pieces.insert(0, jset.base)
    placed: list[tuple[SceneObject, Polygon]] = []
    gap = constraints.min_gap
    for piece in pieces:
        rotation = constraints.base_rotation if piece.kind == "base_plate" else constraints.rotation
        # the hull keeps the grown probe simple even where a slot would pinch shut
        probe = inset_polygon(convex_hull(piece.shape.vertices), -gap / 2.0) if gap > 0 else piece.shape
        for _ in range(MAX_SPAWN_ATTEMPTS):
            theta = float(rng.uniform(-math.pi, math.pi)) if rotation == "free" else 0.0
            x = float(rng.uniform(table.xmin, table.xmax))
            y = float(rng.uniform(table.ymin, table.ymax))
            pose = Pose2(x, y, theta)
            shape = transform(piece.shape, pose)
            if not table.contains_rect(shape.bounds):
                continue
            if any(k.overlaps(shape.bounds) for k in constraints.keepout):
                continue
            grown = transform(probe, pose) if gap > 0 else shape
            if any(polygon_intersection_area(grown, other) > 0.0 for _, other in placed):
                continue
            placed.append((SceneObject(piece.id, pose, 0), grown))
            break
        else:
            raise PlacementInfeasible(
                f"could not place piece {piece.id} after {MAX_SPAWN_ATTEMPTS} attempts")
    seed_value = seed if isinstance(seed, (int, np.integer)) else 0
    return WorldState(table, [o for o, _ in placed], jset, int(seed_value))


# --------------------------------------------------------------------------
# actions


def _top_piece_at(world: WorldState, x: float, y: float) -> SceneObject | None:
    # a fragment seated in the cavity lies on top of the plate sharing its layer
    best, best_key = None, None
    for obj in world.objects:
        if polygon_contains_point(world.footprint(obj), (x, y)):
            key = (obj.z_layer, obj.piece_id != BASE_ID)
            if best is None or key > best_key:
                best, best_key = obj, key
    return best


def execute_pick(world: WorldState, pick: Pose2, profile: HardwareProfile,
                 rng: np.random.Generator) -> PickOutcome:
    """Lower the suction cup at ``pick`` and try to lift the top-most piece there."""
    if world.held is not None:
        raise GripperOccupied(f"gripper already holds piece {world.held.piece_id}")
    elapsed = (motion_time(world.arm_pose, pick, profile) + motion_time(pick, pick, profile)
               + profile.gripper.approach_dwell)
    world.arm_pose = pick
    target = _top_piece_at(world, pick.x, pick.y)
    if target is None:
        return PickOutcome(False, elapsed=elapsed)
    shape = world.footprint(target)
    if profile.gripper.capture_margin > 0 and distance_to_boundary(shape, (pick.x, pick.y)) < profile.gripper.capture_margin:
        return PickOutcome(False, elapsed=elapsed)
    sigma = profile.arm.repeatability
    noise = rng.normal(0.0, sigma, 2) if sigma > 0 else np.zeros(2)
    dx = target.pose.x - pick.x + float(noise[0])
    dy = target.pose.y - pick.y + float(noise[1])
    grip = Pose2(pick.x, pick.y, pick.theta)
    held_world = Pose2(pick.x + dx, pick.y + dy, target.pose.theta)
    world.objects.remove(target)
    world.held = HeldPiece(target.piece_id, grip, grip.inverse().compose(held_world))
    return PickOutcome(True, target.piece_id, (dx, dy), elapsed)


def slot_pose(world: WorldState, piece_id: int) -> Pose2 | None:
    plate = world.plate
    if plate is None or piece_id == BASE_ID:
        return None
    return assembled_poses(world.jigsaw, plate.pose)[piece_id]


def execute_place(world: WorldState, target: Pose2, mode: str, profile: HardwareProfile,
                  rng: np.random.Generator) -> PlaceOutcome:
    """Carry the held piece to gripper pose ``target`` and release it."""
    if world.held is None:
        raise GripperEmpty("nothing to place")
    if mode not in ("simple", "dexterous"):
        raise ValueError(f"unknown place mode {mode!r}")
    held = world.held
    elapsed = (motion_time(world.arm_pose, target, profile) + motion_time(target, target, profile)
               + profile.gripper.approach_dwell)
    landing = target.compose(held.relative)
    sigma = profile.camera.localization_sigma
    if sigma > 0:
        noise = rng.normal(0.0, sigma, 2)
        landing = Pose2(landing.x + float(noise[0]), landing.y + float(noise[1]), landing.theta)
    snapped = False
    if mode == "dexterous":
        slot = slot_pose(world, held.piece_id)
        elapsed += profile.gripper.approach_dwell
        if slot is not None:
            elapsed += motion_time(landing, slot, profile)
            dtheta = abs(math.remainder(landing.theta - slot.theta, 2 * math.pi))
            if landing.distance(slot) <= CAPTURE_TRANSLATION_MM and dtheta <= CAPTURE_ROTATION_RAD:
                landing = slot
                snapped = True
    obj = SceneObject(held.piece_id, landing, 0)
    shape = world.footprint(obj)
    below = [o.z_layer for o in world.objects if blocking_overlap(world, obj, shape, o) > 0.0]
    obj.z_layer = max(below) + 1 if below else 0
    world.objects.append(obj)
    world.held = None
    world.arm_pose = HOME
    return PlaceOutcome(True, obj.piece_id, landing, obj.z_layer, snapped, elapsed)


def assembly_fit_check(world: WorldState, fragment_id: int) -> bool:
    """Fragment sits on layer 0 inside its cavity cell grown by half the clearance."""
    plate = world.plate
    if plate is None:
        raise NoBasePlate("no base plate in the scene")
    obj = world.object(fragment_id)
    if obj is None or obj.z_layer != 0:
        return False
    grown = world.jigsaw.fit_cells[fragment_id]
    return polygon_contains_polygon(transform(grown, plate.pose), world.footprint(obj))
