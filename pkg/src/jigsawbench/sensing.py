"""Synthetic top-down camera.

The observation grid covers the table at ``camera.scale`` mm per cell with
its origin at the table's min corner; ``grid[row, col]`` is the cell whose
centre is ``(xmin + (col + 0.5) * scale, ymin + (row + 0.5) * scale)``.
Cells hold the id of the top-most piece covering the centre, or
``BACKGROUND``.

Camera noise has two parts, both with sigma ``localization_sigma``. Each
outline vertex of a piece is displaced by an isotropic Gaussian, so the
perceived boundary wanders as a whole. Each cell's sampling point is then
displaced independently, so a cell at distance ``d`` from the perceived edge
flips with probability ``Phi(-d / sigma)``: only cells near edges are
affected, at a rate that grows with ``sigma / scale``. Label confusion swaps
a piece's apparent texture for another label of the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .geometry import Pose2, Rect
from .world import CameraProfile, WorldState

BACKGROUND = -1
JITTER_SIGMAS = 6.0  # coverage window margin, in units of sigma


@dataclass(frozen=True)
class GroundTruth:
    """Hidden layer for the metrics code and for oracle stages only."""

    rects: dict[int, Rect]  # exact footprint AABBs
    raster_rects: dict[int, Rect]  # AABB of each piece's noise-free covered cells
    textures: dict[int, str]
    poses: dict[int, Pose2]
    kinds: dict[int, str]

    def fragment_ids(self) -> list[int]:
        return sorted(i for i, k in self.kinds.items() if k == "fragment")


@dataclass(frozen=True, eq=False)
class Observation:
    grid: np.ndarray
    textures: dict[int, str]  # apparent texture per piece id (possibly confused)
    table: Rect
    scale: float
    background: np.ndarray | None = None
    truth: GroundTruth | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def cell_center(self, row: float, col: float) -> tuple[float, float]:
        return (self.table.xmin + (col + 0.5) * self.scale, self.table.ymin + (row + 0.5) * self.scale)

    def cell_rect(self, r0: int, c0: int, r1: int, c1: int) -> Rect:
        """Rect spanned by cells ``[r0, r1] x [c0, c1]`` (inclusive)."""
        s = self.scale
        return Rect(self.table.xmin + c0 * s, self.table.ymin + r0 * s,
                    self.table.xmin + (c1 + 1) * s, self.table.ymin + (r1 + 1) * s)

    def rect_cells(self, rect: Rect) -> tuple[int, int, int, int]:
        """Inclusive cell range ``(r0, c0, r1, c1)`` whose centres lie inside ``rect``."""
        s = self.scale
        rows, cols = self.grid.shape
        c0 = max(0, math.ceil((rect.xmin - self.table.xmin) / s - 0.5))
        c1 = min(cols - 1, math.floor((rect.xmax - self.table.xmin) / s - 0.5))
        r0 = max(0, math.ceil((rect.ymin - self.table.ymin) / s - 0.5))
        r1 = min(rows - 1, math.floor((rect.ymax - self.table.ymin) / s - 0.5))
        return r0, c0, r1, c1

    def foreground(self) -> np.ndarray:
        return self.grid != self.background

    def without_truth(self) -> "Observation":
        return Observation(self.grid, self.textures, self.table, self.scale, self.background, None)


def grid_shape(table: Rect, scale: float) -> tuple[int, int]:
    return (math.ceil(table.height / scale - 1e-9), math.ceil(table.width / scale - 1e-9))


def _draw_order(world: WorldState):
    return sorted(world.objects, key=lambda o: (o.z_layer, o.piece_id))


def _truth(world: WorldState, scale: float, shape) -> GroundTruth:
    rows, cols = shape
    rects, raster, textures, poses, kinds = {}, {}, {}, {}, {}
    for obj in world.objects:
        spec = world.jigsaw.piece(obj.piece_id)
        fp = world.footprint(obj)
        rects[obj.piece_id] = fp.bounds
        r0, c0, m = kernels.coverage(fp.array, world.table.xmin, world.table.ymin, scale, rows, cols)
        if m.size and m.any():
            rr, cc = np.nonzero(m)
            raster[obj.piece_id] = Rect(
                world.table.xmin + (c0 + int(cc.min())) * scale, world.table.ymin + (r0 + int(rr.min())) * scale,
                world.table.xmin + (c0 + int(cc.max()) + 1) * scale, world.table.ymin + (r0 + int(rr.max()) + 1) * scale,
            )
        else:
            raster[obj.piece_id] = fp.bounds
        textures[obj.piece_id] = spec.texture
        poses[obj.piece_id] = obj.pose
        kinds[obj.piece_id] = spec.kind
    return GroundTruth(rects, raster, textures, poses, kinds)


def _rasterize(world: WorldState, scale: float, shape, jx=None, jy=None, margin=0.0,
               outline=None) -> np.ndarray:
    rows, cols = shape
    grid = np.full(shape, BACKGROUND, dtype=np.int32)
    for obj in _draw_order(world):
        verts = world.footprint(obj).array
        if outline is not None:
            verts = verts + outline[obj.piece_id]
        r0, c0, m = kernels.coverage(verts, world.table.xmin, world.table.ymin, scale,
                                     rows, cols, jx, jy, margin)
        if m.size:
            window = grid[r0:r0 + m.shape[0], c0:c0 + m.shape[1]]
            window[m.astype(bool)] = obj.piece_id
    return grid


def render(world: WorldState, camera: CameraProfile, rng: np.random.Generator,
           background: np.ndarray | None = None) -> Observation:
    """Top-down observation of the current scene with camera noise applied."""
    scale = camera.scale
    shape = grid_shape(world.table, scale)
    sigma = camera.localization_sigma
    if sigma > 0:
        outline = {}
        for obj in sorted(world.objects, key=lambda o: o.piece_id):
            n = len(world.jigsaw.piece(obj.piece_id).shape.vertices)
            outline[obj.piece_id] = rng.normal(0.0, sigma, (n, 2))
        jx = rng.normal(0.0, sigma, shape)
        jy = rng.normal(0.0, sigma, shape)
        grid = _rasterize(world, scale, shape, jx, jy, 2 * JITTER_SIGMAS * sigma, outline)
    else:
        grid = _rasterize(world, scale, shape)
    labels = sorted({world.jigsaw.piece(o.piece_id).texture for o in world.objects}
                    | set(world.jigsaw.labels))
    textures = {}
    for obj in sorted(world.objects, key=lambda o: o.piece_id):
        true_label = world.jigsaw.piece(obj.piece_id).texture
        label = true_label
        if camera.label_confusion > 0 and rng.random() < camera.label_confusion:
            others = [lab for lab in labels if lab != true_label]
            label = others[int(rng.integers(len(others)))]
        textures[obj.piece_id] = label
    return Observation(grid, textures, world.table, scale, background, _truth(world, scale, shape))


def render_background(world: WorldState, camera: CameraProfile) -> Observation:
    """Noise-free image of the empty table (every movable piece removed)."""
    shape = grid_shape(world.table, camera.scale)
    grid = np.full(shape, BACKGROUND, dtype=np.int32)
    empty = GroundTruth({}, {}, {}, {}, {})
    return Observation(grid, {}, world.table, camera.scale, grid, empty)


def to_pgm(obs: Observation) -> str:
    """Plain-text PGM (P2) of the label grid: 0 is background, piece id + 1 otherwise.

    Row 0 of the file is the table's min-y row.
    """
    rows, cols = obs.grid.shape
    values = obs.grid + 1
    maxval = max(1, int(values.max()))
    lines = ["P2", f"# jigsawbench observation scale={obs.scale}mm", f"{cols} {rows}", str(maxval)]
    lines.extend(" ".join(map(str, row)) for row in values.tolist())
    return "\n".join(lines) + "\n"


def dump_pgm(obs: Observation, path: str | Path) -> None:
    Path(path).write_text(to_pgm(obs), encoding="ascii")
