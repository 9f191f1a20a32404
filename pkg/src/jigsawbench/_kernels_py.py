"""Pure-Python/numpy implementations of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with an identical
signature and bit-identical results on the same inputs.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

BACKEND = "python"


def convex_clip_area(a: np.ndarray, b: np.ndarray) -> float:
    """Area of the intersection of two CCW convex polygons (Sutherland-Hodgman)."""
    out = [(float(x), float(y)) for x, y in a]
    nb = len(b)
    for j in range(nb):
        if len(out) < 3:
            return 0.0
        ex0 = float(b[j][0])
        ey0 = float(b[j][1])
        ex1 = float(b[(j + 1) % nb][0])
        ey1 = float(b[(j + 1) % nb][1])
        dx = ex1 - ex0
        dy = ey1 - ey0
        src = out
        out = []
        n = len(src)
        px, py = src[n - 1]
        ps = dx * (py - ey0) - dy * (px - ex0)
        for k in range(n):
            cx, cy = src[k]
            cs = dx * (cy - ey0) - dy * (cx - ex0)
            if cs >= 0.0:
                if ps < 0.0:
                    t = ps / (ps - cs)
                    out.append((px + t * (cx - px), py + t * (cy - py)))
                out.append((cx, cy))
            elif ps >= 0.0:
                t = ps / (ps - cs)
                out.append((px + t * (cx - px), py + t * (cy - py)))
            px, py, ps = cx, cy, cs
    n = len(out)
    if n < 3:
        return 0.0
    s = 0.0
    for k in range(n):
        x0, y0 = out[k]
        x1, y1 = out[(k + 1) % n]
        s += x0 * y1 - x1 * y0
    s *= 0.5
    return s if s > 0.0 else 0.0


def _window(verts, x0, y0, scale, rows, cols, margin):
    xmin = float(verts[:, 0].min()) - margin
    xmax = float(verts[:, 0].max()) + margin
    ymin = float(verts[:, 1].min()) - margin
    ymax = float(verts[:, 1].max()) + margin
    c0 = max(0, int(math.floor((xmin - x0) / scale - 0.5)))
    c1 = min(cols, int(math.ceil((xmax - x0) / scale - 0.5)) + 1)
    r0 = max(0, int(math.floor((ymin - y0) / scale - 0.5)))
    r1 = min(rows, int(math.ceil((ymax - y0) / scale - 0.5)) + 1)
    return r0, max(r0, r1), c0, max(c0, c1)


def coverage(verts, x0, y0, scale, rows, cols, jx=None, jy=None, margin=0.0):
    """Mask of grid cells whose (optionally jittered) centres fall inside a polygon.

    Returns ``(r0, c0, mask)`` where ``mask`` is a uint8 window whose top-left
    cell is ``(r0, c0)``. Inside-ness uses the half-open crossing rule.
    """
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    r0, r1, c0, c1 = _window(verts, x0, y0, scale, rows, cols, margin)
    if r1 <= r0 or c1 <= c0:
        return r0, c0, np.zeros((0, 0), dtype=np.uint8)
    cx = x0 + (np.arange(c0, c1, dtype=np.float64) + 0.5) * scale
    cy = y0 + (np.arange(r0, r1, dtype=np.float64) + 0.5) * scale
    px = np.broadcast_to(cx[None, :], (r1 - r0, c1 - c0))
    py = np.broadcast_to(cy[:, None], (r1 - r0, c1 - c0))
    if jx is not None:
        px = px + jx[r0:r1, c0:c1]
        py = py + jy[r0:r1, c0:c1]
    inside = np.zeros(px.shape, dtype=bool)
    n = len(verts)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(n):
            xi, yi = verts[i]
            xj, yj = verts[i - 1]
            if yi == yj:
                continue
            crosses = (yi > py) != (yj > py)
            xint = xi + (py - yi) * (xj - xi) / (yj - yi)
            inside ^= crosses & (px < xint)
    return r0, c0, inside.astype(np.uint8)


def label_components(mask: np.ndarray):
    """4-connected component labelling.

    Labels are 1..n, numbered in row-major order of each component's first
    cell; background is 0. Returns ``(labels, n)``.
    """
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    rows, cols = mask.shape
    labels = np.zeros((rows, cols), dtype=np.int32)
    flat_mask = mask.ravel().tolist()
    flat = [0] * (rows * cols)
    n = 0
    for start in np.flatnonzero(mask).tolist():
        if flat[start]:
            continue
        n += 1
        flat[start] = n
        queue = deque([start])
        while queue:
            idx = queue.popleft()
            r, c = divmod(idx, cols)
            if r > 0:
                k = idx - cols
                if flat_mask[k] and not flat[k]:
                    flat[k] = n
                    queue.append(k)
            if r + 1 < rows:
                k = idx + cols
                if flat_mask[k] and not flat[k]:
                    flat[k] = n
                    queue.append(k)
            if c > 0:
                k = idx - 1
                if flat_mask[k] and not flat[k]:
                    flat[k] = n
                    queue.append(k)
            if c + 1 < cols:
                k = idx + 1
                if flat_mask[k] and not flat[k]:
                    flat[k] = n
                    queue.append(k)
    labels.ravel()[:] = flat
    return labels, n
