"""Planar geometry for text regions: quads, IoU, bounds, and NMS."""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .kernels import convex_clip_area


def _hull_ccw(points):
    """Convex hull of 4 points in CCW order (Andrew monotone chain)."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) == 1:
        return [pts[0]]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= 0.0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return lower[:-1] + upper[:-1]


@dataclass(frozen=True)
class Quad:
    """Quadrilateral region, canonicalized to convex CCW vertex order.

    Concave or unordered inputs are replaced by their convex hull; hulls
    with fewer than 4 corners are padded by repeating the last vertex, which
    keeps the polygon simple and the area unchanged.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.shape != (4, 2):
            raise ContractError(f"quad needs 4 (x, y) vertices, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ContractError("quad vertices must be finite")
        hull = _hull_ccw(v)
        while len(hull) < 4:
            hull.append(hull[-1])
        start = min(range(4), key=lambda i: (hull[i][1], hull[i][0]))
        ordered = [hull[(start + k) % 4] for k in range(4)]
        canon = np.array(ordered, dtype=np.float64)
        canon.setflags(write=False)
        object.__setattr__(self, "vertices", canon)

    @property
    def area(self) -> float:
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        return abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))) * 0.5

    @property
    def bounds(self):
        """Axis-aligned (min_x, min_y, max_x, max_y)."""
        v = self.vertices
        return (
            float(v[:, 0].min()),
            float(v[:, 1].min()),
            float(v[:, 0].max()),
            float(v[:, 1].max()),
        )

    @property
    def centroid(self):
        c = self.vertices.mean(axis=0)
        return (float(c[0]), float(c[1]))

    def flat(self):
        """Vertices as the 8-float sequence x1,y1,...,x4,y4."""
        return [float(v) for v in self.vertices.reshape(8)]


@dataclass(frozen=True)
class ScoredQuad:
    """Quad with a detection confidence in [0, 1]."""

    quad: Quad
    score: float

    def __post_init__(self):
        s = float(self.score)
        if not np.isfinite(s) or not 0.0 <= s <= 1.0:
            raise ContractError(f"score must be finite in [0, 1], got {s}")
        object.__setattr__(self, "score", s)


def polygon_iou(a: Quad, b: Quad) -> float:
    """Intersection-over-union of two quads; degenerate quads score 0.

    The operand pair is ordered canonically before clipping so the result
    is bitwise symmetric in its arguments.
    """
    area_a = a.area
    area_b = b.area
    if area_a == 0.0 or area_b == 0.0:
        return 0.0
    ax0, ay0, ax1, ay1 = a.bounds
    bx0, by0, bx1, by1 = b.bounds
    if ax1 < bx0 or bx1 < ax0 or ay1 < by0 or by1 < ay0:
        return 0.0
    first, second = a.vertices, b.vertices
    if first.tobytes() > second.tobytes():
        first, second = second, first
    inter = float(convex_clip_area(first, second))
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def nms(candidates, iou_threshold: float):
    """Greedy score-descending suppression; ties keep the earlier input.

    Survivors are returned in selection order, so their scores are
    non-increasing; no two survivors overlap more than the threshold.
    """
    t = float(iou_threshold)
    if not 0.0 < t < 1.0:
        raise ContractError(f"iou_threshold must be in (0, 1), got {t}")
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].score, i))
    kept = []
    for i in order:
        if all(polygon_iou(candidates[i].quad, candidates[k].quad) <= t for k in kept):
            kept.append(i)
    return [candidates[i] for i in kept]
