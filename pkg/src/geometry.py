from __future__ import annotations

import math

from typing import Sequence, Tuple

import numpy as np

from scipy.spatial import ConvexHull

from errors import DegenerateError


Point = Tuple[float, float]
Polygon = Tuple[Point, ...]

# Distance within which a point counts as lying on a polygon edge
EDGE_TOLERANCE = 1e-9


def convex_hull(points) -> Polygon:
    '''
    Convex hull of a 2-d point set, counterclockwise and without a repeated
    closing vertex

    :raise DegenerateError if fewer than 3 distinct points or all are collinear
    '''

    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3 or np.linalg.matrix_rank(pts - pts[0]) < 2:
        raise DegenerateError("degenerate landscape: points are collinear")

    try:
        hull = ConvexHull(pts)
    except (RuntimeError, ValueError) as e:
        # Qhull rejects nearly flat inputs the rank test lets through
        raise DegenerateError(f"degenerate landscape: {e}") from e

    return tuple((float(pts[i][0]), float(pts[i][1])) for i in hull.vertices)


def contains(polygon: Polygon, point: Point) -> bool:
    '''
    Whether a point lies inside or on a counterclockwise convex polygon
    '''

    px, py = point
    count = len(polygon)
    for i in range(count):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % count]
        length = math.hypot(bx - ax, by - ay)
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if cross < -EDGE_TOLERANCE * length:
            return False

    return True


def segment_distance(point: Point, a: Point, b: Point) -> float:
    px, py = point
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay

    squared = dx * dx + dy * dy
    if squared == 0.0:
        return math.hypot(px - ax, py - ay)

    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / squared))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def distance_to_boundary(polygon: Polygon, point: Point) -> float:
    '''
    Euclidean distance from a point to the closest edge of a polygon
    '''

    count = len(polygon)
    return min(segment_distance(point, polygon[i], polygon[(i + 1) % count]) for i in range(count))


def polygon_area(polygon: Sequence[Point]) -> float:
    xs = np.array([p[0] for p in polygon])
    ys = np.array([p[1] for p in polygon])
    return 0.5 * abs(float(np.dot(xs, np.roll(ys, 1)) - np.dot(ys, np.roll(xs, 1))))


def vertex_centroid(polygon: Sequence[Point]) -> Point:
    '''
    Arithmetic mean of the vertices - inside any convex polygon
    '''

    return (sum(p[0] for p in polygon) / len(polygon), sum(p[1] for p in polygon) / len(polygon))
