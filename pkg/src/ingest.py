from __future__ import annotations

import logging
import math

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from scipy.stats import lognorm

from constants import (
    CORPUS_MEAN_STEPS, CORPUS_STEPS_MEAN, CORPUS_STEPS_STD, DEFAULT_POI_CHARGE, EARTH_RADIUS_M, MAX_WALK_RETRIES,
    MOMENTUM
)
from errors import CorpusError, IngestError, NoPathError, WorldError
from geometry import vertex_centroid
from planner import shortest_path
from utils import Tag, format_float
from world import Cell, CellPath, GridWorld, neighbors


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float
    timestamp: Optional[float] = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise WorldError(f"Latitude {self.lat} outside [-90, 90]")

        if not -180.0 <= self.lon <= 180.0:
            raise WorldError(f"Longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class GeoPoi:
    '''
    A tagged POI in geographic coordinates, before it is placed on the grid
    '''

    lat: float
    lon: float
    tag: Tag
    charge: float = DEFAULT_POI_CHARGE


@dataclass(frozen=True)
class RawTrajectory:
    id: str
    points: Tuple[GeoPoint, ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise WorldError(f"Trajectory {self.id} has {len(self.points)} points, needs at least 2")

        stamps = [p.timestamp for p in self.points if p.timestamp is not None]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            raise WorldError(f"Trajectory {self.id} has decreasing timestamps")


def _lines(path):
    '''
    Non-blank lines of a UTF-8 text file with their 1-based line numbers
    '''

    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if line:
                yield line_number, line


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False

    return True


def _parse_point(path, line_number: int, text: str, allow_time: bool = False) -> GeoPoint:
    fields = [field.strip() for field in text.split(",")]
    if len(fields) not in ((2, 3) if allow_time else (2,)):
        raise IngestError(path, line_number, f"expected lat,lon{'[,t]' if allow_time else ''}, got '{text}'")

    try:
        values = [float(field) for field in fields]
        return GeoPoint(*values)
    except ValueError as e:
        raise IngestError(path, line_number, f"bad number in '{text}'") from e
    except WorldError as e:
        raise IngestError(path, line_number, str(e)) from e


def load_pois(path) -> "tuple[list[GeoPoi], int]":
    '''
    Read a POI file of lat,lon,tag[,charge] records. A first nonblank line
    whose first field is not a number is a header. Records with a tag outside
    the six families are rejected and counted

    :return the POIs and the number of rejected records
    :raise IngestError on a malformed line
    '''

    pois = []
    rejected = 0
    for index, (line_number, line) in enumerate(_lines(path)):
        fields = [field.strip() for field in line.split(",")]
        if index == 0 and not _is_number(fields[0]):
            continue

        if len(fields) not in (3, 4):
            raise IngestError(path, line_number, f"expected lat,lon,tag[,charge], got {len(fields)} fields")

        point = _parse_point(path, line_number, ",".join(fields[:2]))

        try:
            tag = Tag.parse(fields[2])
        except KeyError:
            rejected += 1
            continue

        try:
            charge = float(fields[3]) if len(fields) == 4 and fields[3] else DEFAULT_POI_CHARGE
        except ValueError as e:
            raise IngestError(path, line_number, f"bad charge '{fields[3]}'") from e

        if charge < 0:
            raise IngestError(path, line_number, f"negative charge {charge}")

        pois.append(GeoPoi(point.lat, point.lon, tag, charge))

    if rejected:
        logger.warning(f"Rejected {rejected} POIs with unknown tags in {path}")

    logger.info(f"Loaded {len(pois)} POIs from {path}")

    return pois, rejected


def poi_from_polygon(vertices: Sequence["tuple[float, float]"], tag: Tag, charge: float = DEFAULT_POI_CHARGE) -> GeoPoi:
    '''
    Reduce a POI footprint given as (lat, lon) vertices to a point POI at the
    mean of its vertices
    '''

    if not vertices:
        raise WorldError("A POI polygon needs at least one vertex")

    lat, lon = vertex_centroid(vertices)
    return GeoPoi(lat, lon, tag, charge)


def load_roads(path) -> "list[list[tuple[float, float]]]":
    '''
    Read a road file with one lat1,lon1;lat2,lon2;... polyline per line

    :raise IngestError on a malformed line
    '''

    roads = []
    for line_number, line in _lines(path):
        polyline = []
        for vertex in line.split(";"):
            if not vertex.strip():
                continue

            point = _parse_point(path, line_number, vertex)
            polyline.append((point.lat, point.lon))

        if not polyline:
            raise IngestError(path, line_number, "empty polyline")

        roads.append(polyline)

    logger.info(f"Loaded {len(roads)} road polylines from {path}")

    return roads


def load_trajectories(path) -> "list[RawTrajectory]":
    '''
    Read a trajectory file with one id|lat,lon[,t];lat,lon[,t];... record per line

    :raise IngestError on a malformed line
    '''

    trajectories = []
    for line_number, line in _lines(path):
        trajectory_id, separator, body = line.partition("|")
        if not separator or not trajectory_id.strip():
            raise IngestError(path, line_number, "expected id|points")

        points = tuple(_parse_point(path, line_number, text, allow_time=True)
                       for text in body.split(";") if text.strip())
        try:
            trajectories.append(RawTrajectory(trajectory_id.strip(), points))
        except WorldError as e:
            raise IngestError(path, line_number, str(e)) from e

    return trajectories


def write_trajectories(trajectories: Sequence[RawTrajectory], path):
    with open(path, "w", encoding="utf-8") as f:
        for trajectory in trajectories:
            points = []
            for point in trajectory.points:
                fields = [format_float(point.lat), format_float(point.lon)]
                if point.timestamp is not None:
                    fields.append(format_float(point.timestamp))
                points.append(",".join(fields))

            f.write(f"{trajectory.id}|{';'.join(points)}\n")


def load_cell_paths(path) -> "list[tuple[str, CellPath]]":
    '''
    Read raw generated paths stored as id|row,col;row,col;...
    '''

    paths = []
    for line_number, line in _lines(path):
        path_id, separator, body = line.partition("|")
        if not separator:
            raise IngestError(path, line_number, "expected id|cells")

        try:
            cells = tuple(tuple(int(v) for v in cell.split(",")) for cell in body.split(";") if cell.strip())
            if any(len(cell) != 2 for cell in cells):
                raise ValueError("cells need a row and a column")
        except ValueError as e:
            raise IngestError(path, line_number, f"bad cell list: {e}") from e

        paths.append((path_id.strip(), CellPath(cells)))

    return paths


def write_cell_paths(paths: Sequence["tuple[str, CellPath]"], path):
    with open(path, "w", encoding="utf-8") as f:
        for path_id, cell_path in paths:
            f.write(f"{path_id}|{';'.join(f'{r},{c}' for r, c in cell_path)}\n")


def nearest_road_cell(world: GridWorld, position: "tuple[float, float]") -> Cell:
    '''
    Closest road cell to a fractional grid position. Ties go to the lowest
    row, then the lowest column
    '''

    cells = world.road_array()
    squared = ((cells - np.asarray(position, dtype=float)) ** 2).sum(axis=1)
    row, col = cells[int(np.argmin(squared))]
    return int(row), int(col)


def map_real_trajectory(world: GridWorld, trajectory: RawTrajectory) -> CellPath:
    '''
    Snap every point of a recorded trajectory to its nearest road cell and
    stitch consecutive cells together with shortest road paths

    :raise NoPathError naming the first pair of points with no road path between them
    '''

    snapped = [nearest_road_cell(world, world.projection.to_grid(p.lat, p.lon)) for p in trajectory.points]

    cells = [snapped[0]]
    for index, (a, b) in enumerate(zip(snapped, snapped[1:])):
        if a == b:
            continue

        try:
            segment = shortest_path(world, a, b)
        except NoPathError as e:
            raise NoPathError(f"Trajectory {trajectory.id}: points {index} and {index + 1}: {e}", index) from e

        cells.extend(segment.cells[1:])

    return CellPath(tuple(cells))


def _walk_lengths(n: int, mean_steps: float, rng: np.random.Generator) -> "list[int]":
    '''
    Stratified lognormal draws with the corpus coefficient of variation,
    scaled to the requested mean
    '''

    cv = CORPUS_STEPS_STD / CORPUS_STEPS_MEAN
    sigma = math.sqrt(math.log1p(cv * cv))
    mu = math.log(mean_steps) - sigma * sigma / 2.0

    quantiles = (rng.permutation(n) + rng.random(n)) / n
    lengths = lognorm.ppf(quantiles, s=sigma, scale=math.exp(mu))
    return [max(2, int(round(v))) for v in lengths]


def _momentum_walk(world: GridWorld, start: Cell, length: int, rng: np.random.Generator) -> Optional["list[Cell]"]:
    '''
    One walk of the given number of cells, or None if it runs into a dead end
    '''

    cells = [start]
    previous = None
    heading = None

    while len(cells) < length:
        current = cells[-1]
        options = [cell for cell in neighbors(world, current) if cell != previous]
        if not options:
            return None

        ahead = (current[0] + heading[0], current[1] + heading[1]) if heading is not None else None
        if ahead in options and (len(options) == 1 or rng.random() < MOMENTUM):
            nxt = ahead
        else:
            others = [cell for cell in options if cell != ahead]
            nxt = others[int(rng.integers(len(others)))]

        heading = (nxt[0] - current[0], nxt[1] - current[1])
        previous = current
        cells.append(nxt)

    return cells


def synth_corpus(world: GridWorld, n: int, seed: int, mean_steps: float = CORPUS_MEAN_STEPS) -> "list[CellPath]":
    '''
    Generate n random walks with momentum over the road graph. Walks never step
    straight back and keep their heading with a fixed probability. A walk that
    gets trapped restarts from a new random road cell

    :raise CorpusError if a walk stays trapped after the retry bound
    '''

    if n < 1:
        raise CorpusError(f"Corpus size must be at least 1, got {n}")

    rng = np.random.default_rng(seed)
    road_cells = world.road_cells()
    lengths = _walk_lengths(n, mean_steps, rng)

    corpus = []
    restarts = 0
    for length in lengths:
        for _ in range(MAX_WALK_RETRIES + 1):
            start = road_cells[int(rng.integers(len(road_cells)))]
            cells = _momentum_walk(world, start, length, rng)
            if cells is not None:
                corpus.append(CellPath(tuple(cells)))
                break

            restarts += 1
        else:
            raise CorpusError(f"Walk of {length} cells trapped {MAX_WALK_RETRIES + 1} times")

    if restarts:
        logger.warning(f"Restarted {restarts} trapped walks while generating the corpus")

    logger.info(f"Generated a corpus of {n} walks, mean length {np.mean([len(p) for p in corpus]):.1f} cells")

    return corpus


def point_spacings(trajectories: Sequence[RawTrajectory]) -> np.ndarray:
    '''
    Haversine distances in metres between consecutive recorded points,
    leaving out repeated positions
    '''

    spacings = []
    for trajectory in trajectories:
        lat = np.radians([p.lat for p in trajectory.points])
        lon = np.radians([p.lon for p in trajectory.points])

        a = np.sin(np.diff(lat) / 2.0) ** 2 + np.cos(lat[:-1]) * np.cos(lat[1:]) * np.sin(np.diff(lon) / 2.0) ** 2
        spacings.append(2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(a, 1.0))))

    if not spacings:
        return np.zeros(0)

    values = np.concatenate(spacings)
    return values[values > 0]
