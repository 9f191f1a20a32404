"""Brute-force cross-checks of the geometry code on random instances.

Every oracle uses an algorithm unrelated to the one it checks: Monte-Carlo
area sampling for rectangle IoU and polygon clipping, an exhaustive angle
sweep for the minimum-area rectangle, and angle-summing winding numbers for
point containment.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import Polygon, Pose2, Rect, convex_hull, min_area_rect, polygon_contains_point, polygon_intersection_area, rect_iou, transform
from .jigsaw import generate_set

KINDS = ("iou_mc", "mbr_sweep", "winding", "clip_mc")
DEFAULT_SAMPLES = {"iou_mc": 1000, "mbr_sweep": 1000, "winding": 100_000, "clip_mc": 200}
TOLERANCES = {"iou_mc": 0.01, "mbr_sweep": 0.001, "winding": 0.0, "clip_mc": 0.01}
MC_SAMPLES = 1_000_000
SWEEP_STEP_DEG = 0.1
MC_CHUNK = 250_000


@dataclass
class OracleReport:
    kind: str
    samples: int
    seed: int
    max_discrepancy: float
    tolerance: float
    passed: bool
    elapsed_s: float
    detail: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _mc_fraction(rng, bounds, inside_fns, n):
    """Fraction of ``n`` uniform samples in ``bounds`` falling inside each region and their overlap."""
    x0, y0, x1, y1 = bounds
    hits = np.zeros(len(inside_fns) + 1, dtype=np.int64)
    left = n
    while left > 0:
        m = min(MC_CHUNK, left)
        xs = rng.uniform(x0, x1, m)
        ys = rng.uniform(y0, y1, m)
        masks = [f(xs, ys) for f in inside_fns]
        for k, msk in enumerate(masks):
            hits[k] += int(np.count_nonzero(msk))
        hits[-1] += int(np.count_nonzero(np.logical_and.reduce(masks)))
        left -= m
    return hits / n


def _rect_fn(r: Rect):
    return lambda x, y: (x >= r.xmin) & (x <= r.xmax) & (y >= r.ymin) & (y <= r.ymax)


def _even_odd_fn(poly: Polygon):
    v = np.asarray(poly.vertices, dtype=np.float64)

    def inside(x, y):
        res = np.zeros(x.shape, dtype=bool)
        xj, yj = v[-1]
        for xi, yi in v:
            if yi != yj:
                cond = (yi > y) != (yj > y)
                xint = (xj - xi) * (y - yi) / (yj - yi) + xi
                res ^= cond & (x < xint)
            xj, yj = xi, yi
        return res

    return inside


def _random_rect(rng) -> Rect:
    w, h = rng.uniform(0.05, 0.6, 2)
    cx, cy = rng.uniform(0.2, 0.8, 2)
    return Rect(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def iou_mc(samples: int, seed: int, mc_samples: int = MC_SAMPLES) -> OracleReport:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(samples):
        a, b = _random_rect(rng), _random_rect(rng)
        box = (min(a.xmin, b.xmin), min(a.ymin, b.ymin), max(a.xmax, b.xmax), max(a.ymax, b.ymax))
        fa, fb, both = _mc_fraction(rng, box, [_rect_fn(a), _rect_fn(b)], mc_samples)
        union = fa + fb - both
        est = both / union if union > 0 else 0.0
        worst = max(worst, abs(est - rect_iou(a, b)))
    tol = TOLERANCES["iou_mc"]
    return OracleReport("iou_mc", samples, seed, worst, tol, worst < tol, time.perf_counter() - t0,
                        {"mc_samples": mc_samples})


def _random_convex(rng) -> Polygon:
    cx, cy = rng.uniform(-40, 40, 2)
    pts = rng.normal(0, rng.uniform(10, 40), (int(rng.integers(3, 12)), 2)) + (cx, cy)
    return convex_hull(pts.tolist())


def _random_fragment(rng, shapes) -> Polygon:
    shape = shapes[int(rng.integers(len(shapes)))]
    pose = Pose2(*rng.uniform(-30, 30, 2), float(rng.uniform(-math.pi, math.pi)))
    return transform(shape, pose)


def _fragment_shapes() -> list[Polygon]:
    shapes = []
    for code in ("000111", "100111", "200111"):
        js = generate_set(code, 0.6)
        shapes.extend(f.shape for f in js.fragments)
        shapes.append(js.base.shape)
    return shapes


def clip_mc(samples: int, seed: int, mc_samples: int = MC_SAMPLES) -> OracleReport:
    """Intersection area vs Monte-Carlo, error relative to the sampled bounding area."""
    rng = np.random.default_rng(seed)
    shapes = _fragment_shapes()
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(samples):
        if k % 2 == 0:
            a, b = _random_convex(rng), _random_convex(rng)
        else:
            a, b = _random_fragment(rng, shapes), _random_fragment(rng, shapes)
        ba, bb = a.bounds, b.bounds
        box = (min(ba.xmin, bb.xmin), min(ba.ymin, bb.ymin), max(ba.xmax, bb.xmax), max(ba.ymax, bb.ymax))
        area = (box[2] - box[0]) * (box[3] - box[1])
        _, _, both = _mc_fraction(rng, box, [_even_odd_fn(a), _even_odd_fn(b)], mc_samples)
        worst = max(worst, abs(both - polygon_intersection_area(a, b) / area))
    tol = TOLERANCES["clip_mc"]
    return OracleReport("clip_mc", samples, seed, worst, tol, worst < tol, time.perf_counter() - t0,
                        {"mc_samples": mc_samples, "normalised_by": "bounding area"})


def _aabb_areas(points: np.ndarray, ang: np.ndarray) -> np.ndarray:
    c, s = np.cos(ang)[:, None], np.sin(ang)[:, None]
    x = c * points[:, 0] + s * points[:, 1]
    y = -s * points[:, 0] + c * points[:, 1]
    return (x.max(axis=1) - x.min(axis=1)) * (y.max(axis=1) - y.min(axis=1))


def sweep_min_area(points: np.ndarray, step_deg: float = SWEEP_STEP_DEG, refine: bool = True) -> float:
    """Smallest axis-aligned bounding area over rotations in ``[0, 90)`` degrees.

    With ``refine``, every coarse local minimum within 10% of the best is
    re-swept at 1/100 of the step over one coarse step either side, which
    removes the grid error that elongated clouds suffer at 0.1 degrees.
    """
    ang = np.deg2rad(np.arange(0.0, 90.0, step_deg))
    areas = _aabb_areas(points, ang)
    best = float(areas.min())
    if not refine:
        return best
    local = (areas <= np.roll(areas, 1)) & (areas <= np.roll(areas, -1)) & (areas <= best * 1.1)
    fine = np.deg2rad(np.linspace(-step_deg, step_deg, 201))
    for a in ang[local]:
        best = min(best, float(_aabb_areas(points, a + fine).min()))
    return best


def mbr_sweep(samples: int, seed: int) -> OracleReport:
    """Rotating calipers vs a brute-force angle sweep (0.1 degree grid, locally refined).

    The calipers result must never exceed the sweep (it is exact) and must
    be within tolerance of it. The unrefined grid's error is reported too.
    """
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = worst_coarse = 0.0
    beaten = 0
    for _ in range(samples):
        n = int(rng.integers(3, 60))
        theta = rng.uniform(0, math.pi)
        sx, sy = rng.uniform(5, 100, 2)
        raw = rng.normal(0, 1, (n, 2)) * (sx, sy)
        rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        pts = raw @ rot.T + rng.uniform(-100, 100, 2)
        exact = min_area_rect(pts.tolist()).area
        swept = sweep_min_area(pts)
        coarse = sweep_min_area(pts, refine=False)
        if exact > swept * (1 + 1e-9):
            beaten += 1
        worst = max(worst, abs(exact - swept) / swept)
        worst_coarse = max(worst_coarse, abs(exact - coarse) / coarse)
    tol = TOLERANCES["mbr_sweep"]
    return OracleReport("mbr_sweep", samples, seed, worst, tol, worst <= tol and beaten == 0,
                        time.perf_counter() - t0,
                        {"step_deg": SWEEP_STEP_DEG, "sweep_beat_calipers": beaten,
                         "unrefined_grid_max_discrepancy": worst_coarse})


def winding_number(poly: Polygon, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Winding number of ``poly`` around each point by summing subtended angles."""
    v = np.asarray(poly.vertices, dtype=np.float64)
    total = np.zeros(x.shape)
    for (ax, ay), (bx, by) in zip(v, np.roll(v, -1, axis=0)):
        a1 = np.arctan2(ay - y, ax - x)
        a2 = np.arctan2(by - y, bx - x)
        d = a2 - a1
        d = (d + np.pi) % (2 * np.pi) - np.pi
        total += d
    return np.rint(total / (2 * np.pi)).astype(int)


def _random_star(rng) -> Polygon:
    n = int(rng.integers(3, 24))
    ang = np.sort(rng.uniform(0, 2 * math.pi, n))
    if len(np.unique(ang)) < 3:
        ang = np.linspace(0, 2 * math.pi, n, endpoint=False)
    r = rng.uniform(5, 50, n)
    cx, cy = rng.uniform(-50, 50, 2)
    return Polygon(tuple((float(cx + ri * math.cos(a)), float(cy + ri * math.sin(a))) for a, ri in zip(ang, r)))


def winding(samples: int, seed: int, points_per_polygon: int = 100) -> OracleReport:
    rng = np.random.default_rng(seed)
    shapes = _fragment_shapes()
    t0 = time.perf_counter()
    done = disagree = 0
    k = 0
    while done < samples:
        poly = _random_star(rng) if k % 2 == 0 else _random_fragment(rng, shapes)
        k += 1
        m = min(points_per_polygon, samples - done)
        b = poly.bounds.expanded(5.0)
        xs = rng.uniform(b.xmin, b.xmax, m)
        ys = rng.uniform(b.ymin, b.ymax, m)
        ref = winding_number(poly, xs, ys) != 0
        got = np.array([polygon_contains_point(poly, (float(x), float(y))) for x, y in zip(xs, ys)])
        disagree += int(np.count_nonzero(ref != got))
        done += m
    frac = disagree / samples
    return OracleReport("winding", samples, seed, frac, 0.0, disagree == 0, time.perf_counter() - t0,
                        {"disagreements": disagree, "agreement": 1.0 - frac})


def run_oracle(kind: str, samples: int | None = None, seed: int = 0, **kw) -> OracleReport:
    if kind not in KINDS:
        raise ValueError(f"unknown oracle {kind!r}; expected one of {KINDS}")
    n = DEFAULT_SAMPLES[kind] if samples is None else int(samples)
    fn = {"iou_mc": iou_mc, "mbr_sweep": mbr_sweep, "winding": winding, "clip_mc": clip_mc}[kind]
    return fn(n, seed, **kw)
