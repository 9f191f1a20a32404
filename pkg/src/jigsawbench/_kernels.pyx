# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_kernels_py``.

Signatures and results match the pure-Python module exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"


cdef int _clip_edge(double* sx, double* sy, int n, double* ox, double* oy,
                    double ex0, double ey0, double ex1, double ey1) noexcept nogil:
    cdef double dx = ex1 - ex0
    cdef double dy = ey1 - ey0
    cdef int m = 0
    cdef int k
    cdef double px = sx[n - 1]
    cdef double py = sy[n - 1]
    cdef double ps = dx * (py - ey0) - dy * (px - ex0)
    cdef double cx, cy, cs, t
    for k in range(n):
        cx = sx[k]
        cy = sy[k]
        cs = dx * (cy - ey0) - dy * (cx - ex0)
        if cs >= 0.0:
            if ps < 0.0:
                t = ps / (ps - cs)
                ox[m] = px + t * (cx - px)
                oy[m] = py + t * (cy - py)
                m += 1
            ox[m] = cx
            oy[m] = cy
            m += 1
        elif ps >= 0.0:
            t = ps / (ps - cs)
            ox[m] = px + t * (cx - px)
            oy[m] = py + t * (cy - py)
            m += 1
        px = cx
        py = cy
        ps = cs
    return m


def convex_clip_area(a, b):
    """Area of the intersection of two CCW convex polygons (Sutherland-Hodgman)."""
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef int na = av.shape[0]
    cdef int nb = bv.shape[0]
    cdef int cap = 2 * (na + nb) + 4
    cdef double* buf = <double*> malloc(4 * cap * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* sx = buf
    cdef double* sy = buf + cap
    cdef double* ox = buf + 2 * cap
    cdef double* oy = buf + 3 * cap
    cdef double* tmp
    cdef int n = na
    cdef int j, k
    cdef double s = 0.0
    try:
        for k in range(na):
            sx[k] = av[k, 0]
            sy[k] = av[k, 1]
        for j in range(nb):
            if n < 3:
                return 0.0
            n = _clip_edge(sx, sy, n, ox, oy, bv[j, 0], bv[j, 1],
                           bv[(j + 1) % nb, 0], bv[(j + 1) % nb, 1])
            tmp = sx; sx = ox; ox = tmp
            tmp = sy; sy = oy; oy = tmp
        if n < 3:
            return 0.0
        for k in range(n):
            s += sx[k] * sy[(k + 1) % n] - sx[(k + 1) % n] * sy[k]
        s *= 0.5
        return s if s > 0.0 else 0.0
    finally:
        free(buf)


def coverage(verts, double x0, double y0, double scale, int rows, int cols,
             jx=None, jy=None, double margin=0.0):
    """Mask of grid cells whose (optionally jittered) centres fall inside a polygon.

    Returns ``(r0, c0, mask)``; see the pure-Python twin for details.
    """
    cdef const double[:, ::1] v = np.ascontiguousarray(verts, dtype=np.float64)
    cdef int n = v.shape[0]
    cdef double xmin = v[0, 0], xmax = v[0, 0], ymin = v[0, 1], ymax = v[0, 1]
    cdef int i, j, r, c
    for i in range(1, n):
        if v[i, 0] < xmin: xmin = v[i, 0]
        if v[i, 0] > xmax: xmax = v[i, 0]
        if v[i, 1] < ymin: ymin = v[i, 1]
        if v[i, 1] > ymax: ymax = v[i, 1]
    xmin -= margin
    xmax += margin
    ymin -= margin
    ymax += margin
    cdef int c0 = <int> floor((xmin - x0) / scale - 0.5)
    cdef int c1 = <int> ceil((xmax - x0) / scale - 0.5) + 1
    cdef int r0 = <int> floor((ymin - y0) / scale - 0.5)
    cdef int r1 = <int> ceil((ymax - y0) / scale - 0.5) + 1
    if c0 < 0: c0 = 0
    if r0 < 0: r0 = 0
    if c1 > cols: c1 = cols
    if r1 > rows: r1 = rows
    if r1 < r0: r1 = r0
    if c1 < c0: c1 = c0
    if r1 <= r0 or c1 <= c0:
        return r0, c0, np.zeros((0, 0), dtype=np.uint8)
    out = np.zeros((r1 - r0, c1 - c0), dtype=np.uint8)
    cdef unsigned char[:, ::1] m = out
    cdef bint jitter = jx is not None
    cdef const double[:, :] jxv
    cdef const double[:, :] jyv
    if jitter:
        jxv = jx
        jyv = jy
    cdef double px, py, xi, yi, xj, yj
    cdef bint inside
    for r in range(r0, r1):
        for c in range(c0, c1):
            px = x0 + (c + 0.5) * scale
            py = y0 + (r + 0.5) * scale
            if jitter:
                px = px + jxv[r, c]
                py = py + jyv[r, c]
            inside = False
            for i in range(n):
                j = i - 1 if i > 0 else n - 1
                xi = v[i, 0]
                yi = v[i, 1]
                xj = v[j, 0]
                yj = v[j, 1]
                if yi == yj:
                    continue
                if (yi > py) != (yj > py):
                    if px < xi + (py - yi) * (xj - xi) / (yj - yi):
                        inside = not inside
            if inside:
                m[r - r0, c - c0] = 1
    return r0, c0, out


def label_components(mask):
    """4-connected component labelling, labels numbered in row-major order."""
    cdef const unsigned char[:, ::1] mk = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef int rows = mk.shape[0]
    cdef int cols = mk.shape[1]
    labels = np.zeros((rows, cols), dtype=np.int32)
    cdef int[:, ::1] lab = labels
    cdef cnp.ndarray[cnp.int64_t, ndim=1] queue_arr = np.empty(max(1, rows * cols), dtype=np.int64)
    cdef long long* queue = <long long*> queue_arr.data
    cdef long long head, tail, idx, k
    cdef int r, c, rr, cc
    cdef int n = 0
    for r in range(rows):
        for c in range(cols):
            if mk[r, c] == 0 or lab[r, c] != 0:
                continue
            n += 1
            lab[r, c] = n
            head = 0
            tail = 0
            queue[tail] = <long long> r * cols + c
            tail += 1
            while head < tail:
                idx = queue[head]
                head += 1
                rr = <int> (idx // cols)
                cc = <int> (idx % cols)
                if rr > 0 and mk[rr - 1, cc] and lab[rr - 1, cc] == 0:
                    lab[rr - 1, cc] = n
                    queue[tail] = idx - cols
                    tail += 1
                if rr + 1 < rows and mk[rr + 1, cc] and lab[rr + 1, cc] == 0:
                    lab[rr + 1, cc] = n
                    queue[tail] = idx + cols
                    tail += 1
                if cc > 0 and mk[rr, cc - 1] and lab[rr, cc - 1] == 0:
                    lab[rr, cc - 1] = n
                    queue[tail] = idx - 1
                    tail += 1
                if cc + 1 < cols and mk[rr, cc + 1] and lab[rr, cc + 1] == 0:
                    lab[rr, cc + 1] = n
                    queue[tail] = idx + 1
                    tail += 1
    return labels, n
