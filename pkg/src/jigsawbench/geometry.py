"""Planar geometry in millimetres: poses, polygons, rectangles.

Polygons are simple and counter-clockwise. Non-convex polygons are split
into convex parts (ear clipping followed by Hertel-Mehlhorn merging) so that
intersection areas reduce to convex-convex clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import GeometryError

Point = tuple[float, float]

TWO_PI = 2.0 * math.pi
CONTAIN_RTOL = 1e-9


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    t = math.fmod(theta + math.pi, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    r = t - math.pi
    if r >= math.pi:
        r -= TWO_PI
    return r


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    def apply(self, pt: Sequence[float]) -> Point:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return (c * pt[0] - s * pt[1] + self.x, s * pt[0] + c * pt[1] + self.y)

    def compose(self, other: "Pose2") -> "Pose2":
        """``self * other``: express ``other`` (given in this frame) in the parent frame."""
        x, y = self.apply((other.x, other.y))
        return Pose2(x, y, self.theta + other.theta)

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)

    def distance(self, other: "Pose2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.theta]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``[xmin, xmax] x [ymin, ymax]``."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise GeometryError(f"inverted rect {self}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def contains_point(self, pt: Sequence[float]) -> bool:
        return self.xmin <= pt[0] <= self.xmax and self.ymin <= pt[1] <= self.ymax

    def contains_rect(self, other: "Rect") -> bool:
        return (self.xmin <= other.xmin and other.xmax <= self.xmax
                and self.ymin <= other.ymin and other.ymax <= self.ymax)

    def overlaps(self, other: "Rect") -> bool:
        return not (other.xmin > self.xmax or other.xmax < self.xmin
                    or other.ymin > self.ymax or other.ymax < self.ymin)

    def expanded(self, margin: float) -> "Rect":
        return Rect(self.xmin - margin, self.ymin - margin, self.xmax + margin, self.ymax + margin)

    def to_polygon(self) -> "Polygon":
        return Polygon(((self.xmin, self.ymin), (self.xmax, self.ymin),
                        (self.xmax, self.ymax), (self.xmin, self.ymax)))

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]

    @classmethod
    def centered(cls, cx: float, cy: float, width: float, height: float) -> "Rect":
        return cls(cx - width / 2, cy - height / 2, cx + width / 2, cy + height / 2)


@dataclass(frozen=True)
class OrientedRect:
    center: Point
    half_extents: tuple[float, float]
    theta: float

    @property
    def area(self) -> float:
        return 4.0 * self.half_extents[0] * self.half_extents[1]

    def corners(self) -> list[Point]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        hx, hy = self.half_extents
        out = []
        for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            lx, ly = sx * hx, sy * hy
            out.append((self.center[0] + c * lx - s * ly, self.center[1] + s * lx + c * ly))
        return out


@dataclass(frozen=True, eq=True)
class Polygon:
    vertices: tuple[Point, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices)
        )

    @classmethod
    def from_array(cls, arr) -> "Polygon":
        return cls(tuple(map(tuple, np.asarray(arr, dtype=np.float64).tolist())))

    def __len__(self) -> int:
        return len(self.vertices)

    @cached_property
    def array(self) -> np.ndarray:
        a = np.array(self.vertices, dtype=np.float64).reshape(-1, 2)
        a.setflags(write=False)
        return a

    @cached_property
    def bounds(self) -> Rect:
        a = self.array
        return Rect(float(a[:, 0].min()), float(a[:, 1].min()),
                    float(a[:, 0].max()), float(a[:, 1].max()))

    @cached_property
    def area(self) -> float:
        return polygon_area(self)

    @cached_property
    def centroid(self) -> Point:
        return polygon_centroid(self)

    @cached_property
    def perimeter(self) -> float:
        v = self.vertices
        return sum(math.dist(v[i], v[(i + 1) % len(v)]) for i in range(len(v)))

    @cached_property
    def convex_parts(self) -> tuple[np.ndarray, ...]:
        return tuple(convex_decompose(self))

    @cached_property
    def part_bounds(self) -> tuple[tuple[float, float, float, float], ...]:
        return tuple((float(p[:, 0].min()), float(p[:, 1].min()),
                      float(p[:, 0].max()), float(p[:, 1].max())) for p in self.convex_parts)

    def translated(self, dx: float, dy: float) -> "Polygon":
        return transform(self, Pose2(dx, dy, 0.0))


# --------------------------------------------------------------------------
# basic measures


def polygon_area(p: Polygon) -> float:
    """Signed shoelace area; positive for counter-clockwise input."""
    v = p.vertices
    n = len(v)
    if n < 3:
        return 0.0
    s = 0.0
    for i in range(n):
        x0, y0 = v[i]
        x1, y1 = v[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def polygon_centroid(p: Polygon) -> Point:
    v = p.vertices
    n = len(v)
    a = polygon_area(p)
    if n == 0:
        raise GeometryError("centroid of empty polygon")
    if a == 0.0:
        return (sum(x for x, _ in v) / n, sum(y for _, y in v) / n)
    cx = cy = 0.0
    for i in range(n):
        x0, y0 = v[i]
        x1, y1 = v[(i + 1) % n]
        cross = x0 * y1 - x1 * y0
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    return (cx / (6.0 * a), cy / (6.0 * a))


def transform(p: Polygon, pose: Pose2) -> Polygon:
    """Rotate every vertex by ``pose.theta`` then translate by ``(pose.x, pose.y)``."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    tx, ty = pose.x, pose.y
    out = Polygon(tuple((c * x - s * y + tx, s * x + c * y + ty) for x, y in p.vertices))
    parts = p.convex_parts  # decompose in the source frame, cached there for reuse
    if parts:
        rot = np.array([[c, s], [-s, c]])
        moved = []
        for part in parts:
            q = part @ rot + (tx, ty)
            q.setflags(write=False)
            moved.append(q)
        out.__dict__["convex_parts"] = tuple(moved)
    return out


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _dedupe(points: Sequence[Point], tol: float = 1e-12) -> list[Point]:
    """Drop repeated and collinear vertices of a closed ring."""
    pts = [tuple(map(float, q)) for q in points]
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        n = len(pts)
        for i in range(n):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
            scale = max(1.0, abs(a[0]) + abs(a[1]) + abs(c[0]) + abs(c[1]))
            if math.dist(a, b) <= tol * scale or abs(_orient(*a, *b, *c)) <= tol * scale * scale:
                del pts[i]
                changed = True
                break
    return pts


def is_convex(points: Sequence[Point]) -> bool:
    n = len(points)
    if n < 3:
        return False
    sign = 0
    for i in range(n):
        o = _orient(*points[i], *points[(i + 1) % n], *points[(i + 2) % n])
        if o != 0.0:
            s = 1 if o > 0 else -1
            if sign == 0:
                sign = s
            elif s != sign:
                return False
    return sign != 0


def _point_in_triangle(p, a, b, c, eps: float = 0.0) -> bool:
    return (_orient(*a, *b, *p) >= eps and _orient(*b, *c, *p) >= eps
            and _orient(*c, *a, *p) >= eps)


def _triangulate(pts: list[Point]) -> list[tuple[int, int, int]]:
    """Ear clipping of a CCW simple polygon without collinear vertices.

    Vertices touching a candidate ear block it; if that leaves no ear (which
    happens when rounding puts a vertex a hair inside a diagonal) the pass is
    repeated counting only vertices clearly inside.
    """
    try:
        return _clip_ears(pts, 0.0)
    except GeometryError:
        span = max(max(abs(x), abs(y)) for x, y in pts)
        return _clip_ears(pts, 1e-9 * max(1.0, span) ** 2)


def _clip_ears(pts: list[Point], eps: float) -> list[tuple[int, int, int]]:
    idx = list(range(len(pts)))
    tris: list[tuple[int, int, int]] = []
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if _orient(*a, *b, *c) <= 0.0:
                continue
            if any(_point_in_triangle(pts[j], a, b, c, eps)
                   for j in idx if j not in (i0, i1, i2) and pts[j] not in (a, b, c)):
                continue
            tris.append((i0, i1, i2))
            del idx[k]
            break
        else:
            raise GeometryError("ear clipping failed; polygon not simple")
        guard += 1
        if guard > 10 * len(pts):
            raise GeometryError("ear clipping did not terminate")
    tris.append(tuple(idx))  # type: ignore[arg-type]
    return tris


def _merge(pa: list[int], pb: list[int]) -> list[int] | None:
    """Join two index rings along a shared edge, or ``None`` if they share none."""
    na, nb = len(pa), len(pb)
    for i in range(na):
        u, v = pa[i], pa[(i + 1) % na]
        for j in range(nb):
            if pb[j] == v and pb[(j + 1) % nb] == u:
                # walk a from v around to u, then b from u around to v (exclusive)
                ring = [pa[(i + 1 + k) % na] for k in range(na)]
                ring += [pb[(j + 2 + k) % nb] for k in range(nb - 2)]
                return ring
    return None


def convex_decompose(p: Polygon) -> list[np.ndarray]:
    """Split a simple polygon into CCW convex parts."""
    pts = _dedupe(p.vertices)
    if len(pts) < 3:
        return []
    if polygon_area(Polygon(pts)) < 0:
        pts.reverse()
    if is_convex(pts):
        arr = np.array(pts, dtype=np.float64)
        arr.setflags(write=False)
        return [arr]
    parts = [list(t) for t in _triangulate(pts)]
    merged = True
    while merged:
        merged = False
        for i in range(len(parts)):
            for j in range(i + 1, len(parts)):
                ring = _merge(parts[i], parts[j])
                if ring is not None and is_convex([pts[k] for k in ring]):
                    parts[i] = ring
                    del parts[j]
                    merged = True
                    break
            if merged:
                break
    out = []
    for ring in parts:
        arr = np.array(_dedupe([pts[k] for k in ring]), dtype=np.float64)
        arr.setflags(write=False)
        out.append(arr)
    return out


# --------------------------------------------------------------------------
# overlap measures


def rect_iou(a: Rect, b: Rect) -> float:
    """Intersection over union of two axis-aligned rectangles; 0 when the union is empty."""
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    inter = iw * ih if iw > 0.0 and ih > 0.0 else 0.0
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def polygon_intersection_area(a: Polygon, b: Polygon) -> float:
    """Exact area of ``a`` intersected with ``b`` via convex-part clipping."""
    if a.vertices > b.vertices:
        a, b = b, a
    if not a.bounds.overlaps(b.bounds):
        return 0.0
    total = 0.0
    for pa, (ax0, ay0, ax1, ay1) in zip(a.convex_parts, a.part_bounds):
        for pb, (bx0, by0, bx1, by1) in zip(b.convex_parts, b.part_bounds):
            if bx0 >= ax1 or bx1 <= ax0 or by0 >= ay1 or by1 <= ay0:
                continue
            total += kernels.convex_clip_area(pa, pb)
    return total


def polygon_contains_point(p: Polygon, pt: Sequence[float], tol: float = 1e-9) -> bool:
    """True when ``pt`` is inside ``p`` or on its boundary (within ``tol`` mm)."""
    x, y = float(pt[0]), float(pt[1])
    v = p.vertices
    n = len(v)
    if n == 0:
        return False
    if n < 3:
        return any(_distance_to_segment(x, y, v[i], v[(i + 1) % n]) <= tol for i in range(n))
    inside = False
    for i in range(n):
        xi, yi = v[i]
        xj, yj = v[i - 1]
        if _distance_to_segment(x, y, (xj, yj), (xi, yi)) <= tol:
            return True
        if (yi > y) != (yj > y):
            if x < xi + (y - yi) * (xj - xi) / (yj - yi):
                inside = not inside
    return inside


def _distance_to_segment(x: float, y: float, a: Point, b: Point) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(x - ax, y - ay)
    t = ((x - ax) * dx + (y - ay) * dy) / L2
    t = 0.0 if t < 0.0 else 1.0 if t > 1.0 else t
    return math.hypot(x - ax - t * dx, y - ay - t * dy)


def distance_to_boundary(p: Polygon, pt: Sequence[float]) -> float:
    v = p.vertices
    return min(_distance_to_segment(pt[0], pt[1], v[i - 1], v[i]) for i in range(len(v)))


def polygon_contains_polygon(outer: Polygon, inner: Polygon) -> bool:
    """True when ``inner`` lies inside ``outer`` up to a 1e-9 relative area tolerance."""
    area_in = abs(inner.area)
    if area_in == 0.0:
        return all(polygon_contains_point(outer, q) for q in inner.vertices)
    if not outer.bounds.expanded(1e-9 * max(1.0, outer.bounds.width)).contains_rect(inner.bounds):
        return False
    inter = polygon_intersection_area(outer, inner)
    return inter >= area_in * (1.0 - CONTAIN_RTOL)


# --------------------------------------------------------------------------
# hulls and bounding rectangles


def convex_hull(points: Iterable[Sequence[float]]) -> Polygon:
    """Counter-clockwise convex hull (Andrew's monotone chain), collinear points dropped."""
    pts = sorted(set((float(q[0]), float(q[1])) for q in points))
    if len(pts) <= 2:
        return Polygon(tuple(pts))
    lower: list[Point] = []
    for q in pts:
        while len(lower) >= 2 and _orient(*lower[-2], *lower[-1], *q) <= 0.0:
            lower.pop()
        lower.append(q)
    upper: list[Point] = []
    for q in reversed(pts):
        while len(upper) >= 2 and _orient(*upper[-2], *upper[-1], *q) <= 0.0:
            upper.pop()
        upper.append(q)
    hull = lower[:-1] + upper[:-1]
    return Polygon(tuple(hull))


def min_area_rect(points: Iterable[Sequence[float]]) -> OrientedRect:
    """Minimum-area enclosing rectangle by rotating calipers over the convex hull."""
    hull = convex_hull(points).vertices
    n = len(hull)
    if n == 0:
        raise GeometryError("min_area_rect needs at least one point")
    if n == 1:
        return OrientedRect(hull[0], (0.0, 0.0), 0.0)
    if n == 2:
        (x0, y0), (x1, y1) = hull
        theta = normalize_angle(math.atan2(y1 - y0, x1 - x0))
        return OrientedRect(((x0 + x1) / 2, (y0 + y1) / 2), (math.dist(hull[0], hull[1]) / 2, 0.0), theta)

    def proj(k: int, ox: float, oy: float, ux: float, uy: float) -> float:
        return (hull[k][0] - ox) * ux + (hull[k][1] - oy) * uy

    def advance(k, ox, oy, ux, uy, sign):
        for _ in range(n):
            nk = (k + 1) % n
            if sign * proj(nk, ox, oy, ux, uy) >= sign * proj(k, ox, oy, ux, uy):
                k = nk
            else:
                break
        return k

    best = None
    right = top = left = 0
    for i in range(n):
        ox, oy = hull[i]
        ex, ey = hull[(i + 1) % n][0] - ox, hull[(i + 1) % n][1] - oy
        L = math.hypot(ex, ey)
        ux, uy = ex / L, ey / L
        nx, ny = -uy, ux
        if i == 0:
            right = max(range(n), key=lambda k: proj(k, ox, oy, ux, uy))
            top = max(range(n), key=lambda k: proj(k, ox, oy, nx, ny))
            left = min(range(n), key=lambda k: proj(k, ox, oy, ux, uy))
        else:
            right = advance(right, ox, oy, ux, uy, 1.0)
            top = advance(top, ox, oy, nx, ny, 1.0)
            left = advance(left, ox, oy, ux, uy, -1.0)
        umax = proj(right, ox, oy, ux, uy)
        umin = proj(left, ox, oy, ux, uy)
        hmax = proj(top, ox, oy, nx, ny)
        area = (umax - umin) * hmax
        if best is None or area < best[0]:
            best = (area, ox, oy, ux, uy, umin, umax, hmax)
    _, ox, oy, ux, uy, umin, umax, hmax = best
    mu = 0.5 * (umin + umax)
    mh = 0.5 * hmax
    center = (ox + ux * mu - uy * mh, oy + uy * mu + ux * mh)
    return OrientedRect(center, (0.5 * (umax - umin), 0.5 * hmax),
                        normalize_angle(math.atan2(uy, ux)))


def aabb(points: Iterable[Sequence[float]]) -> Rect:
    arr = np.asarray(list(points), dtype=np.float64).reshape(-1, 2)
    return Rect(float(arr[:, 0].min()), float(arr[:, 1].min()),
                float(arr[:, 0].max()), float(arr[:, 1].max()))


# --------------------------------------------------------------------------
# offsets


def is_simple(p: Polygon) -> bool:
    """No two non-adjacent edges intersect."""
    v = p.vertices
    n = len(v)
    if n < 3:
        return False
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            c, d = v[j], v[(j + 1) % n]
            if _segments_intersect(a, b, c, d):
                return False
    return True


def _segments_intersect(a, b, c, d) -> bool:
    d1 = _orient(*c, *d, *a)
    d2 = _orient(*c, *d, *b)
    d3 = _orient(*a, *b, *c)
    d4 = _orient(*a, *b, *d)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    for p, q, r, o in ((c, d, a, d1), (c, d, b, d2), (a, b, c, d3), (a, b, d, d4)):
        if o == 0 and min(p[0], q[0]) <= r[0] <= max(p[0], q[0]) and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]):
            return True
    return False


def inset_polygon(p: Polygon, distance: float) -> Polygon:
    """Offset every edge of a CCW polygon inward by ``distance`` (negative dilates).

    Vertices are mitred. Raises ``GeometryError`` when an edge collapses or
    reverses, the result self-intersects, or its area vanishes.
    """
    pts = _dedupe(p.vertices)
    if len(pts) < 3:
        raise GeometryError("cannot offset a degenerate polygon")
    if polygon_area(Polygon(pts)) < 0:
        pts.reverse()
    if distance == 0.0:
        return Polygon(tuple(pts))
    n = len(pts)
    lines = []
    for i in range(n):
        (x0, y0), (x1, y1) = pts[i], pts[(i + 1) % n]
        L = math.hypot(x1 - x0, y1 - y0)
        nx, ny = -(y1 - y0) / L, (x1 - x0) / L
        lines.append((x0 + distance * nx, y0 + distance * ny, (x1 - x0) / L, (y1 - y0) / L))
    out = []
    for i in range(n):
        px, py, ux, uy = lines[i - 1]
        qx, qy, vx, vy = lines[i]
        den = ux * vy - uy * vx
        if abs(den) < 1e-12:
            out.append((qx, qy))
            continue
        t = ((qx - px) * vy - (qy - py) * vx) / den
        out.append((px + t * ux, py + t * uy))
    for i in range(n):
        (ax, ay), (bx, by) = pts[i], pts[(i + 1) % n]
        (cx, cy), (dx, dy) = out[i], out[(i + 1) % n]
        if (dx - cx) * (bx - ax) + (dy - cy) * (by - ay) <= 0.0:
            raise GeometryError(f"edge {i} collapses at offset {distance}")
    result = Polygon(tuple(out))
    if result.area <= 0.0 or not is_simple(result):
        raise GeometryError(f"offset {distance} yields a degenerate polygon")
    return result
