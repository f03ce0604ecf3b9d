from __future__ import annotations

import json
import logging
import math

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from constants import CLOCKWISE_OFFSETS, DIAGONAL_STEP, MAX_TRF, Z_THRESHOLD
from errors import DegenerateError
from geometry import Polygon, contains, convex_hull, distance_to_boundary
from utils import TrfMiddle, direction_index, format_float, octant_of
from world import Cell, CellPath


logger = logging.getLogger(__name__)

# Feature pairs spanning the reward landscape, as (x, y)
LANDSCAPE_PLANES = (
    ("curliness", "total_length"),
    ("curliness", "farthest_distance"),
    ("farthest_distance", "total_length"),
)

FEATURE_NAMES = ("total_length", "curliness", "farthest_distance", "end_distance", "middle_distance")

_MOVE_INDEX = {offset: index for index, offset in enumerate(CLOCKWISE_OFFSETS)}


@dataclass(frozen=True)
class FeatureVector:
    '''
    Per-trajectory features. Lengths are counted in cells (time-steps) and
    distances are Euclidean, in cells, from the first cell
    '''

    total_length: int
    curliness: float
    farthest_distance: float
    end_distance: float
    middle_distance: float

    def as_row(self) -> "dict[str, float]":
        return {name: getattr(self, name) for name in FEATURE_NAMES}


class PartialFeatures:
    '''
    Landscape features of a path under construction, updated in constant time
    per appended cell. Curliness only depends on how many consecutive moves
    change direction: two one-hot movement vectors are either identical or
    sqrt(2) apart
    '''

    __slots__ = ("start", "last", "total_length", "turns", "last_move", "farthest_squared")

    def __init__(self, start: Cell, last: Cell, total_length: int, turns: int, last_move: int, farthest_squared: int):
        self.start = start
        self.last = last
        self.total_length = total_length
        self.turns = turns
        self.last_move = last_move
        self.farthest_squared = farthest_squared

    @classmethod
    def begin(cls, start: Cell) -> PartialFeatures:
        return cls(start, start, 1, 0, -1, 0)

    def extend(self, cell: Cell) -> PartialFeatures:
        move = _MOVE_INDEX[(cell[0] - self.last[0], cell[1] - self.last[1])]
        turns = self.turns + (1 if self.last_move >= 0 and move != self.last_move else 0)

        dr, dc = cell[0] - self.start[0], cell[1] - self.start[1]
        farthest_squared = max(self.farthest_squared, dr * dr + dc * dc)

        return PartialFeatures(self.start, cell, self.total_length + 1, turns, move, farthest_squared)

    @property
    def curliness(self) -> float:
        pairs = self.total_length - 2
        return DIAGONAL_STEP * self.turns / pairs if pairs > 0 else 0.0

    @property
    def farthest_distance(self) -> float:
        return math.sqrt(self.farthest_squared)


@dataclass(frozen=True)
class GroupMetrics:
    no_overlapping: int
    directions: int


def extract_features(path: CellPath) -> FeatureVector:
    '''
    Compute the features of a complete path

    :raise DegenerateError for paths shorter than two cells
    '''

    if len(path) < 2:
        raise DegenerateError("degenerate path")

    cells = np.asarray(path.cells, dtype=int)

    moves = np.diff(cells, axis=0)
    one_hot = np.zeros((len(moves), len(CLOCKWISE_OFFSETS)))
    for i, (dr, dc) in enumerate(moves):
        try:
            one_hot[i, direction_index(int(dr), int(dc))] = 1.0
        except ValueError:
            raise DegenerateError(f"Path cells {i} and {i + 1} are not 8-adjacent")

    if len(moves) > 1:
        curliness = float(np.linalg.norm(np.diff(one_hot, axis=0), axis=1).mean())
    else:
        curliness = 0.0

    offsets = cells - cells[0]
    distances = np.hypot(offsets[:, 0], offsets[:, 1])

    return FeatureVector(
        total_length=len(cells),
        curliness=curliness,
        farthest_distance=float(distances.max()),
        end_distance=float(distances[-1]),
        middle_distance=float(distances[len(cells) // 2]),
    )


def group_metrics(group: Sequence[CellPath]) -> GroupMetrics:
    '''
    Diversity of a group of paths sharing a start cell: how many distinct
    cells they cover and how many compass octants their end points face
    '''

    if not group:
        raise DegenerateError("A path group needs at least one path")

    start = group[0].start
    if any(path.start != start for path in group):
        raise DegenerateError("Paths of a group must share their start cell")

    covered = set()
    octants = set()
    for path in group:
        covered.update(path.cells)

        dr, dc = path.end[0] - start[0], path.end[1] - start[1]
        if dr != 0 or dc != 0:
            octants.add(octant_of(dr, dc))

    return GroupMetrics(no_overlapping=len(covered), directions=len(octants))


@dataclass(frozen=True)
class LandscapePlane:
    '''
    One feature-pair plane of the reward landscape. Both hulls are convex and
    counterclockwise; the inner hull wraps the z-score inliers
    '''

    x_feature: str
    y_feature: str
    outer_hull: Polygon
    inner_hull: Polygon
    max_trf: float = MAX_TRF
    trf_middle: TrfMiddle = TrfMiddle.LITERAL

    def point_of(self, features) -> "tuple[float, float]":
        return float(getattr(features, self.x_feature)), float(getattr(features, self.y_feature))


@dataclass(frozen=True)
class RewardLandscape:
    planes: Tuple[LandscapePlane, ...]
    max_trf: float = MAX_TRF
    z_threshold: float = Z_THRESHOLD
    trf_middle: TrfMiddle = TrfMiddle.LITERAL


def fit_plane(points, max_trf: float = MAX_TRF, z_threshold: float = Z_THRESHOLD, x_feature: str = "x",
              y_feature: str = "y", trf_middle: TrfMiddle = TrfMiddle.LITERAL) -> LandscapePlane:
    '''
    Fit the outer and inner hull of a single plane

    :raise DegenerateError if the points are collinear or fewer than 3 points are inliers
    '''

    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    outer = convex_hull(pts)

    mean = pts.mean(axis=0)
    std = pts.std(axis=0)
    z = np.divide(pts - mean, std, out=np.zeros_like(pts), where=std > 0)
    inliers = pts[np.all(np.abs(z) <= z_threshold, axis=1)]

    if len(inliers) < 3:
        raise DegenerateError(f"Only {len(inliers)} inliers in the {x_feature}/{y_feature} plane, need at least 3")

    inner = convex_hull(inliers)

    return LandscapePlane(x_feature, y_feature, outer, inner, float(max_trf), trf_middle)


def fit_landscape(corpus: Sequence[FeatureVector], max_trf: float = MAX_TRF, z_threshold: float = Z_THRESHOLD,
                  trf_middle: TrfMiddle = TrfMiddle.LITERAL) -> RewardLandscape:
    '''
    Fit the trajectory reward landscape over a corpus of feature vectors
    '''

    if len(corpus) < 3:
        raise DegenerateError(f"degenerate landscape: {len(corpus)} corpus points")

    planes = []
    for x_feature, y_feature in LANDSCAPE_PLANES:
        points = [(getattr(f, x_feature), getattr(f, y_feature)) for f in corpus]
        planes.append(fit_plane(points, max_trf, z_threshold, x_feature, y_feature, trf_middle))

    logger.info(f"Fitted a reward landscape over {len(corpus)} trajectories")

    return RewardLandscape(tuple(planes), float(max_trf), float(z_threshold), trf_middle)


def trf(plane: LandscapePlane, point: "tuple[float, float]") -> float:
    '''
    Trajectory reward of a feature point: the plateau value inside the inner
    hull, the distance to the inner hull between the hulls, and minus the
    distance to the outer hull outside it
    '''

    if contains(plane.inner_hull, point):
        return plane.max_trf

    if contains(plane.outer_hull, point):
        distance = distance_to_boundary(plane.inner_hull, point)
        if plane.trf_middle is TrfMiddle.INWARD:
            return plane.max_trf - distance

        return distance

    return -distance_to_boundary(plane.outer_hull, point)


def combined_score(landscape: RewardLandscape, features) -> float:
    '''
    Sum of the plane rewards. Accepts anything exposing the landscape
    features, so partial paths score the same way as complete ones
    '''

    total = 0.0
    for plane in landscape.planes:
        total += trf(plane, plane.point_of(features))

    return total


def save_landscape(landscape: RewardLandscape, path):
    document = {
        "max_trf": format_float(landscape.max_trf),
        "z_threshold": format_float(landscape.z_threshold),
        "trf_middle": landscape.trf_middle.value,
        "planes": [
            {
                "x": plane.x_feature,
                "y": plane.y_feature,
                "max_trf": format_float(plane.max_trf),
                "outer_hull": [[format_float(x), format_float(y)] for x, y in plane.outer_hull],
                "inner_hull": [[format_float(x), format_float(y)] for x, y in plane.inner_hull],
            }
            for plane in landscape.planes
        ],
    }

    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=1, sort_keys=True)
        f.write("\n")


def load_landscape(path) -> RewardLandscape:
    with open(path, encoding="utf-8") as f:
        document = json.load(f)

    try:
        trf_middle = TrfMiddle(document["trf_middle"])
        planes = tuple(
            LandscapePlane(
                plane["x"],
                plane["y"],
                tuple((float(x), float(y)) for x, y in plane["outer_hull"]),
                tuple((float(x), float(y)) for x, y in plane["inner_hull"]),
                float(plane["max_trf"]),
                trf_middle,
            )
            for plane in document["planes"]
        )
        return RewardLandscape(planes, float(document["max_trf"]), float(document["z_threshold"]), trf_middle)
    except (KeyError, ValueError, TypeError) as e:
        raise DegenerateError(f"Malformed landscape file {path}: {e}") from e
