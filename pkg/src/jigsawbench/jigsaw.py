"""Five-piece jigsaw sets generated from six-digit jigsaw codes.

Code digits, left to right:

==  ===================  ==========================================
d0  shape family         0 dovetail tabs, 1 straight cuts, 2 tapered tabs
d1  size scale           linear factor ``1 + 0.25 * d1`` (0-3)
d2  thickness class      ``5 mm * (1 + d2)`` (0-3)
d3  texture theme        0 plain, 1 sheep, 2 cow, ... 9 dog
d4  base plate           0 absent, 1 present
d5  fragment-count class 1 = four fragments (only value implemented)
==  ===================  ==========================================

At scale 1 the assembled footprint is 140 x 198 mm (an A4 sheet divided by
1.5) and the cavity 120 x 178 mm. The cavity is cut once vertically and
once horizontally; every cut half carries a trapezoidal tab owned by one
neighbour, so each fragment has exactly one tab and one slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import BadDigit, BadLength, ClearanceTooLarge, GeometryError, NoBasePlate, UnsupportedValue
from .geometry import Polygon, Pose2, inset_polygon, polygon_area

TEXTURES = ("plain", "sheep", "cow", "pig", "horse", "goat", "duck", "chicken", "rabbit", "dog")
SHAPE_FAMILIES = ("dovetail", "straight", "tapered")
FRAGMENT_PARTS = {1: "tl", 2: "tr", 3: "bl", 4: "br"}
BASE_ID = 0

OUTER_W, OUTER_H = 140.0, 198.0
CAVITY_W, CAVITY_H = 120.0, 178.0
BASE_THICKNESS = 5.0

# (neck half-width, tip half-width, depth) in mm at scale 1
_TAB_PROFILES = {
    "dovetail": (6.0, 9.0, 6.0),
    "straight": None,
    "tapered": (9.0, 5.0, 6.0),
}

_RANGES = {"shape": 3, "scale": 4, "thickness": 4, "texture": 10, "base_plate": 2}


@dataclass(frozen=True)
class JigsawCode:
    shape: int
    scale: int
    thickness: int
    texture: int
    base_plate: int
    fragments: int

    @property
    def family(self) -> str:
        return SHAPE_FAMILIES[self.shape]

    @property
    def theme(self) -> str:
        return TEXTURES[self.texture]

    @property
    def scale_factor(self) -> float:
        return 1.0 + 0.25 * self.scale

    @property
    def thickness_mm(self) -> float:
        return BASE_THICKNESS * (1 + self.thickness)

    @property
    def has_base_plate(self) -> bool:
        return self.base_plate == 1

    @property
    def fragment_count(self) -> int:
        return 4

    def __str__(self) -> str:
        return format_code(self)


def parse_code(text: str) -> JigsawCode:
    """Parse a six-digit jigsaw code such as ``"000101"``."""
    if not isinstance(text, str) or len(text) != 6:
        raise BadLength(f"jigsaw code must have 6 characters, got {text!r}")
    if not all(ch in "0123456789" for ch in text):
        raise BadDigit(f"jigsaw code must be decimal digits, got {text!r}")
    d = [int(ch) for ch in text]
    names = ("shape", "scale", "thickness", "texture", "base_plate")
    for name, value in zip(names, d):
        if value >= _RANGES[name]:
            raise UnsupportedValue(f"{name} digit {value} not implemented (max {_RANGES[name] - 1})")
    if d[5] != 1:
        raise UnsupportedValue(f"fragment-count class {d[5]} not implemented (only 1 = four fragments)")
    return JigsawCode(*d)


def format_code(code: JigsawCode) -> str:
    return "".join(str(v) for v in (code.shape, code.scale, code.thickness,
                                     code.texture, code.base_plate, code.fragments))


@dataclass(frozen=True)
class PieceSpec:
    id: int
    kind: str  # "base_plate" or "fragment"
    shape: Polygon  # canonical frame, centred on the area centroid
    texture: str
    thickness: float


@dataclass(frozen=True)
class JigsawSet:
    code: JigsawCode
    base: PieceSpec | None
    fragments: tuple[PieceSpec, ...]
    cavity: Polygon  # plate frame
    standard_area: float
    clearance: float
    cells: dict[int, Polygon] = field(default_factory=dict)  # fragment id -> un-eroded cell, plate frame
    slot_poses: dict[int, Pose2] = field(default_factory=dict)  # fragment id -> pose in plate frame
    outer: Polygon | None = None  # plate outline, plate frame
    fit_cells: dict[int, Polygon] = field(default_factory=dict)  # cells grown by clearance / 2

    @property
    def pieces(self) -> tuple[PieceSpec, ...]:
        return ((self.base,) if self.base is not None else ()) + self.fragments

    def piece(self, piece_id: int) -> PieceSpec:
        for p in self.pieces:
            if p.id == piece_id:
                return p
        raise KeyError(piece_id)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f.texture for f in self.fragments)

    def fragment_for_label(self, label: str) -> int | None:
        for f in self.fragments:
            if f.texture == label:
                return f.id
        return None


def _rect(cx, cy, w, h) -> list[tuple[float, float]]:
    return [(cx - w / 2, cy - h / 2), (cx + w / 2, cy - h / 2),
            (cx + w / 2, cy + h / 2), (cx - w / 2, cy + h / 2)]


def _tab_points(axis: str, center: float, direction: float, profile):
    """Cut-line points of one tab, ordered along increasing ``axis`` coordinate."""
    if profile is None:
        return []
    neck, tip, depth = profile
    if axis == "y":  # vertical cut along x = 0, walking up
        return [(0.0, center - neck), (direction * depth, center - tip),
                (direction * depth, center + tip), (0.0, center + neck)]
    return [(center - neck, 0.0), (center - tip, direction * depth),
            (center + tip, direction * depth), (center + neck, 0.0)]


def _cells(family: str, s: float) -> dict[int, list[tuple[float, float]]]:
    W, H = CAVITY_W * s, CAVITY_H * s
    prof = _TAB_PROFILES[family]
    if prof is not None:
        prof = tuple(v * s for v in prof)
    # vertical cut: lower tab points -x (owned by br), upper tab points +x (owned by tl)
    v_lower = [(0.0, -H / 2)] + _tab_points("y", -H / 4, -1.0, prof) + [(0.0, 0.0)]
    v_upper = [(0.0, 0.0)] + _tab_points("y", H / 4, 1.0, prof) + [(0.0, H / 2)]
    # horizontal cut: left tab points +y (owned by bl), right tab points -y (owned by tr)
    h_left = [(-W / 2, 0.0)] + _tab_points("x", -W / 4, 1.0, prof) + [(0.0, 0.0)]
    h_right = [(0.0, 0.0)] + _tab_points("x", W / 4, -1.0, prof) + [(W / 2, 0.0)]

    def ring(*chains):
        out: list[tuple[float, float]] = []
        for chain in chains:
            for q in chain:
                if not out or out[-1] != q:
                    out.append(q)
        if out[0] == out[-1]:
            out.pop()
        return out

    return {
        3: ring([(-W / 2, -H / 2)], v_lower, list(reversed(h_left))),
        4: ring([(0.0, -H / 2), (W / 2, -H / 2), (W / 2, 0.0)], list(reversed(h_right)), list(reversed(v_lower))),
        2: ring(h_right, [(W / 2, H / 2), (0.0, H / 2)], list(reversed(v_upper))),
        1: ring(h_left, v_upper, [(-W / 2, H / 2)]),
    }


def generate_set(code: JigsawCode | str, clearance: float = 0.0) -> JigsawSet:
    """Build the deterministic jigsaw set for ``code``.

    Each fragment is its cavity cell eroded by ``clearance / 2``, so two
    neighbouring fragments in their assembled poses leave a gap of
    ``clearance`` along their shared cut.
    """
    if isinstance(code, str):
        code = parse_code(code)
    clearance = float(clearance)
    if clearance < 0:
        raise ValueError("clearance must be non-negative")
    s = code.scale_factor
    theme = code.theme
    cells = {fid: Polygon(tuple(pts)) for fid, pts in _cells(code.family, s).items()}
    fragments = []
    slot_poses = {}
    for fid in sorted(cells):
        try:
            shape = inset_polygon(cells[fid], clearance / 2.0)
        except GeometryError as exc:
            raise ClearanceTooLarge(f"clearance {clearance} mm degenerates fragment {fid}") from exc
        cx, cy = shape.centroid
        canonical = Polygon(tuple((x - cx, y - cy) for x, y in shape.vertices))
        fragments.append(PieceSpec(fid, "fragment", canonical,
                                   f"{theme}-{FRAGMENT_PARTS[fid]}", code.thickness_mm))
        slot_poses[fid] = Pose2(cx, cy, 0.0)
    cavity = Polygon(tuple(_rect(0.0, 0.0, CAVITY_W * s, CAVITY_H * s)))
    outer = Polygon(tuple(_rect(0.0, 0.0, OUTER_W * s, OUTER_H * s)))
    base = None
    if code.has_base_plate:
        base = PieceSpec(BASE_ID, "base_plate", outer, f"{theme}-plate", code.thickness_mm)
    return JigsawSet(
        code=code,
        base=base,
        fragments=tuple(fragments),
        cavity=cavity,
        standard_area=polygon_area(cavity),
        clearance=clearance,
        cells=cells,
        slot_poses=slot_poses,
        outer=outer,
        fit_cells={fid: inset_polygon(c, -clearance / 2.0) for fid, c in cells.items()},
    )


def assembled_poses(jset: JigsawSet, plate_pose: Pose2) -> dict[int, Pose2]:
    """Pose of each fragment seated in its cavity cell, for a plate at ``plate_pose``."""
    if jset.base is None:
        raise NoBasePlate("jigsaw set has no base plate")
    return layout_poses(jset, plate_pose)


def layout_poses(jset: JigsawSet, frame: Pose2) -> dict[int, Pose2]:
    """Assembled-arrangement poses relative to an arbitrary frame (no plate needed)."""
    return {fid: frame.compose(p) for fid, p in jset.slot_poses.items()}


def set_to_dict(jset: JigsawSet) -> dict:
    pieces = []
    for p in jset.pieces:
        entry = {
            "id": p.id,
            "kind": p.kind,
            "texture": p.texture,
            "thickness_mm": p.thickness,
            "vertices_mm": [list(v) for v in p.shape.vertices],
        }
        if p.kind == "fragment":
            entry["assembled_pose"] = jset.slot_poses[p.id].as_list()
        pieces.append(entry)
    return {
        "code": format_code(jset.code),
        "clearance_mm": jset.clearance,
        "pieces": pieces,
        "cavity": [list(v) for v in jset.cavity.vertices],
        "standard_area_mm2": jset.standard_area,
    }


def set_to_json(jset: JigsawSet) -> str:
    return json.dumps(set_to_dict(jset), indent=2)
