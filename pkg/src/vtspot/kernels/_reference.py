"""Reference implementations of the hot numeric kernels.

The loop-based functions in this module double as the sources for the
numba-compiled twins in ``_jit``; the vectorized variants exist only where
plain numpy is competitive. Arithmetic is ordered identically in both
backends so results match bit for bit.
"""

import numpy as np


def bilinear_warp(data, dx, dy):
    """Backward-warp a (h, w, c) grid by per-cell displacements.

    Output at (y, x) is the bilinear sample of ``data`` at
    (x + dx[y, x], y + dy[y, x]); sample positions outside the grid clamp
    to the border. Zero displacement reproduces the input bit-exactly.
    """
    h, w, c = data.shape
    xs = np.arange(w, dtype=np.float64)[None, :] + dx
    ys = np.arange(h, dtype=np.float64)[:, None] + dy
    np.clip(xs, 0.0, w - 1.0, out=xs)
    np.clip(ys, 0.0, h - 1.0, out=ys)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    v00 = data[y0, x0]
    v01 = data[y0, x1]
    v10 = data[y1, x0]
    v11 = data[y1, x1]
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)


def bilinear_warp_loops(data, dx, dy):
    """Loop form of :func:`bilinear_warp`; source for the numba twin."""
    h, w, c = data.shape
    out = np.empty_like(data)
    for y in range(h):
        for x in range(w):
            sx = x + dx[y, x]
            sy = y + dy[y, x]
            if sx < 0.0:
                sx = 0.0
            elif sx > w - 1.0:
                sx = w - 1.0
            if sy < 0.0:
                sy = 0.0
            elif sy > h - 1.0:
                sy = h - 1.0
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = sx - x0
            fy = sy - y0
            for ch in range(c):
                v00 = data[y0, x0, ch]
                v01 = data[y0, x1, ch]
                v10 = data[y1, x0, ch]
                v11 = data[y1, x1, ch]
                out[y, x, ch] = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * (
                    (1.0 - fx) * v10 + fx * v11
                )
    return out


def convex_clip_area(subject, clip):
    """Area of the intersection of two convex quads in CCW vertex order.

    Sutherland-Hodgman clipping of ``subject`` against each directed edge
    of ``clip`` (interior is left of the edge), followed by the shoelace
    formula. Inputs are (4, 2) float64 arrays.
    """
    cur = np.empty((24, 2), dtype=np.float64)
    nxt = np.empty((24, 2), dtype=np.float64)
    m = 4
    for k in range(4):
        cur[k, 0] = subject[k, 0]
        cur[k, 1] = subject[k, 1]
    for e in range(4):
        ax = clip[e, 0]
        ay = clip[e, 1]
        bx = clip[(e + 1) % 4, 0]
        by = clip[(e + 1) % 4, 1]
        ex = bx - ax
        ey = by - ay
        cnt = 0
        for k in range(m):
            px = cur[k, 0]
            py = cur[k, 1]
            qx = cur[(k + 1) % m, 0]
            qy = cur[(k + 1) % m, 1]
            side_p = ex * (py - ay) - ey * (px - ax)
            side_q = ex * (qy - ay) - ey * (qx - ax)
            if side_q >= 0.0:
                if side_p < 0.0:
                    t = side_p / (side_p - side_q)
                    nxt[cnt, 0] = px + t * (qx - px)
                    nxt[cnt, 1] = py + t * (qy - py)
                    cnt += 1
                nxt[cnt, 0] = qx
                nxt[cnt, 1] = qy
                cnt += 1
            elif side_p >= 0.0:
                t = side_p / (side_p - side_q)
                nxt[cnt, 0] = px + t * (qx - px)
                nxt[cnt, 1] = py + t * (qy - py)
                cnt += 1
        m = cnt
        if m == 0:
            return 0.0
        for k in range(m):
            cur[k, 0] = nxt[k, 0]
            cur[k, 1] = nxt[k, 1]
    acc = 0.0
    for k in range(m):
        j = (k + 1) % m
        acc += cur[k, 0] * cur[j, 1] - cur[j, 0] * cur[k, 1]
    return abs(acc) * 0.5


def solve_assignment(cost):
    """Minimum-total-cost one-to-one assignment on a square cost matrix.

    Shortest-augmenting-path Hungarian method with dual potentials, O(n^3).
    Returns an int64 array mapping each row to its assigned column.
    """
    n = cost.shape[0]
    u = np.zeros(n, dtype=np.float64)
    v = np.zeros(n + 1, dtype=np.float64)
    col_to_row = np.full(n + 1, -1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        col_to_row[n] = i
        j0 = n
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = col_to_row[j0]
            delta = np.inf
            j1 = -1
            for j in range(n):
                if not used[j]:
                    cur = cost[i0, j] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[col_to_row[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if col_to_row[j0] == -1:
                break
        while j0 != n:
            j1 = way[j0]
            col_to_row[j0] = col_to_row[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=np.int64)
    for j in range(n):
        if col_to_row[j] >= 0:
            row_to_col[col_to_row[j]] = j
    return row_to_col
