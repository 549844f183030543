"""Rotated rectangles and exact IoU via convex polygon clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass

# Point-on-line tolerance for clipping, in pixel units.
CLIP_EPS = 1e-9

Point = tuple[float, float]


@dataclass(frozen=True)
class OrientedBox:
    """Rotated rectangle: center, size, and CCW rotation of the w-axis from +x."""

    cx: float
    cy: float
    w: float
    h: float
    angle: float = 0.0

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box sides must be positive, got w={self.w} h={self.h}")

    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> tuple[Point, Point, Point, Point]:
        """The 4 vertices in counter-clockwise order."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        hw, hh = self.w / 2.0, self.h / 2.0
        # CCW walk of the axis-aligned rectangle, then rotate + translate.
        local = ((hw, hh), (-hw, hh), (-hw, -hh), (hw, -hh))
        return tuple(
            (self.cx + c * x - s * y, self.cy + s * x + c * y) for x, y in local
        )


def shoelace_area(poly: list[Point]) -> float:
    """Signed area of a polygon (positive for CCW winding)."""
    n = len(poly)
    if n < 3:
        return 0.0
    total = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return total / 2.0


def ensure_ccw(poly: list[Point]) -> list[Point]:
    """Reverse winding if clockwise, keeping the first vertex first."""
    if shoelace_area(poly) < 0:
        return [poly[0]] + list(reversed(poly[1:]))
    return list(poly)


def clip_polygon(subject: list[Point], clipper: list[Point]) -> list[Point]:
    """Sutherland-Hodgman: clip `subject` against convex CCW `clipper`."""
    output = list(subject)
    n = len(clipper)
    for i in range(n):
        if not output:
            return []
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        # Half-plane test: left of (a -> b) is inside for CCW clipper.
        ex, ey = bx - ax, by - ay

        def side(p: Point) -> float:
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        current = output
        output = []
        prev = current[-1]
        prev_side = side(prev)
        for vertex in current:
            cur_side = side(vertex)
            if cur_side >= -CLIP_EPS:
                if prev_side < -CLIP_EPS:
                    output.append(_intersect(prev, vertex, (ax, ay), (bx, by)))
                output.append(vertex)
            elif prev_side >= -CLIP_EPS:
                output.append(_intersect(prev, vertex, (ax, ay), (bx, by)))
            prev, prev_side = vertex, cur_side
    return output


def _intersect(p1: Point, p2: Point, a: Point, b: Point) -> Point:
    """Intersection of segment p1-p2 with the infinite line a-b."""
    dx, dy = p2[0] - p1[0], p2[1] - p1[1]
    ex, ey = b[0] - a[0], b[1] - a[1]
    denom = ex * dy - ey * dx
    if abs(denom) < 1e-300:
        return p2
    # Solve cross(e, p1 + t*d - a) = 0 for t.
    t = (ey * (p1[0] - a[0]) - ex * (p1[1] - a[1])) / denom
    return (p1[0] + t * dx, p1[1] + t * dy)


def convex_intersection_area(a: list[Point], b: list[Point]) -> float:
    """Area of the intersection of two convex CCW polygons."""
    inter = clip_polygon(a, b)
    return abs(shoelace_area(inter))


def quad_iou(a: list[Point], b: list[Point]) -> float:
    """IoU of two convex quadrilaterals given as CCW corner lists."""
    # Canonical argument order makes iou(a, b) bitwise equal to iou(b, a).
    if tuple(b) < tuple(a):
        a, b = b, a
    area_a = abs(shoelace_area(a))
    area_b = abs(shoelace_area(b))
    inter = convex_intersection_area(a, b)
    union = area_a + area_b - inter
    if union < 1e-12:
        return 0.0
    return inter / union


def rotated_iou(a: OrientedBox, b: OrientedBox) -> float:
    """IoU of two rotated rectangles, in [0, 1]."""
    return quad_iou(list(a.corners()), list(b.corners()))
