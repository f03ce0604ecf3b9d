from __future__ import annotations

import json
import logging
import math

from dataclasses import dataclass
from typing import Iterable, Iterator, List, Sequence, Tuple

import numpy as np

from constants import CELL_SIZE_M, CLOCKWISE_OFFSETS, EARTH_RADIUS_M, MAX_MULTIPLIER, MIN_MULTIPLIER
from errors import WorldError
from utils import Tag, format_float


logger = logging.getLogger(__name__)

Cell = Tuple[int, int]


@dataclass(frozen=True)
class Poi:
    '''
    A point of interest on the grid. The charge is the dimensionless attraction
    magnitude |q| the POI exerts on every cell
    '''

    position: Cell
    tag: Tag
    charge: float = 1.0

    def __post_init__(self):
        if self.charge < 0:
            raise WorldError(f"POI charge must be nonnegative, got {self.charge}")


@dataclass(frozen=True)
class MultiplierSet:
    '''
    Per-tag attraction multipliers, ordered <B, A, N, O, Sh, Sp>
    '''

    values: Tuple[float, float, float, float, float, float]

    def __post_init__(self):
        if len(self.values) != len(Tag):
            raise WorldError(f"A multiplier set needs {len(Tag)} values, got {len(self.values)}")

        for value in self.values:
            if not MIN_MULTIPLIER <= value <= MAX_MULTIPLIER:
                raise WorldError(f"Multiplier {value} outside [{MIN_MULTIPLIER:g}, {MAX_MULTIPLIER:g}]")

        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def of(cls, values: Iterable[float]) -> MultiplierSet:
        return cls(tuple(values))

    @classmethod
    def uniform(cls, value: float = MIN_MULTIPLIER) -> MultiplierSet:
        return cls((value,) * len(Tag))

    def __getitem__(self, tag: Tag) -> float:
        return self.values[int(tag)]

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)


@dataclass(frozen=True)
class CellPath:
    '''
    A raw path: consecutive cells are 8-adjacent and every cell is a road cell
    '''

    cells: Tuple[Cell, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple((int(r), int(c)) for r, c in self.cells))

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.cells)

    def __getitem__(self, index):
        return self.cells[index]

    @property
    def start(self) -> Cell:
        return self.cells[0]

    @property
    def end(self) -> Cell:
        return self.cells[-1]

    def check(self, world: GridWorld):
        '''
        Verify the path invariants against a world

        :raise WorldError naming the first offending cell
        '''

        for index, cell in enumerate(self.cells):
            if not world.is_road(cell):
                raise WorldError(f"Path cell {index} {cell} is not a road cell")

            if index > 0:
                prev = self.cells[index - 1]
                if max(abs(cell[0] - prev[0]), abs(cell[1] - prev[1])) != 1:
                    raise WorldError(f"Path cells {index - 1} {prev} and {index} {cell} are not 8-adjacent")


@dataclass(frozen=True)
class Projection:
    '''
    Equirectangular projection anchored at the north-west corner of the grid.
    Rows grow south and columns grow east
    '''

    north: float
    west: float
    lat_center: float
    cell_size_m: float

    @property
    def metres_per_degree_lat(self) -> float:
        return EARTH_RADIUS_M * math.pi / 180.0

    @property
    def metres_per_degree_lon(self) -> float:
        return self.metres_per_degree_lat * math.cos(math.radians(self.lat_center))

    def to_grid(self, lat: float, lon: float) -> "tuple[float, float]":
        '''
        Fractional (row, col) of a geographic position
        '''

        row = (self.north - lat) * self.metres_per_degree_lat / self.cell_size_m
        col = (lon - self.west) * self.metres_per_degree_lon / self.cell_size_m
        return row, col

    def to_cell(self, lat: float, lon: float) -> Cell:
        row, col = self.to_grid(lat, lon)
        return math.floor(row + 0.5), math.floor(col + 0.5)

    def to_geo(self, row: float, col: float) -> "tuple[float, float]":
        lat = self.north - row * self.cell_size_m / self.metres_per_degree_lat
        lon = self.west + col * self.cell_size_m / self.metres_per_degree_lon
        return lat, lon


class GridWorld:
    '''
    The rasterised road network plus one attraction raster per tag.

    tag_fields[k][cell] holds the Coulomb sum |q| / d^2 over the POIs of tag k,
    with d measured in cells and clamped to at least one cell. Fields are
    defined everywhere; only road cells are traversable. A world never changes
    after it is built
    '''

    def __init__(self, road_mask: np.ndarray, pois: Sequence[Poi], cell_size_m: float = CELL_SIZE_M,
                 projection: Projection = None, dropped_pois: int = 0):
        mask = np.array(road_mask, dtype=bool)
        if mask.ndim != 2 or mask.size == 0:
            raise WorldError("Road mask must be a non-empty 2-d grid")

        if not mask.any():
            raise WorldError("no navigable cells")

        if cell_size_m <= 0:
            raise WorldError(f"cell_size_m must be positive, got {cell_size_m}")

        self.rows, self.cols = mask.shape
        self.cell_size_m = float(cell_size_m)
        self.projection = projection or Projection(0.0, 0.0, 0.0, self.cell_size_m)
        self.dropped_pois = dropped_pois

        for poi in pois:
            if not self.in_bounds(poi.position):
                raise WorldError(f"POI at {poi.position} lies outside the {self.rows}x{self.cols} grid")

        self.pois = tuple(pois)

        mask.flags.writeable = False
        self.road_mask = mask

        self.tag_fields = _coulomb_fields(self.rows, self.cols, self.pois)
        self.tag_fields.flags.writeable = False

        road_array = np.argwhere(mask)
        road_array.flags.writeable = False
        self._road_array = road_array
        self._road_cells = tuple((int(r), int(c)) for r, c in road_array)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.rows and 0 <= cell[1] < self.cols

    def is_road(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and bool(self.road_mask[cell[0], cell[1]])

    def road_cells(self) -> "list[Cell]":
        '''
        All road cells in row-major order
        '''

        return list(self._road_cells)

    def road_array(self) -> np.ndarray:
        '''
        Road cells as an (n, 2) array in row-major order
        '''

        return self._road_array

    def cell_index(self, cell: Cell) -> int:
        return cell[0] * self.cols + cell[1]


def _coulomb_fields(rows: int, cols: int, pois: Sequence[Poi]) -> np.ndarray:
    '''
    Precompute the per-tag attraction rasters. POIs are accumulated in input
    order so every cell sees the same summation order on every build
    '''

    fields = np.zeros((len(Tag), rows, cols))
    row_idx, col_idx = np.mgrid[0:rows, 0:cols]

    for poi in pois:
        squared = (row_idx - poi.position[0]) ** 2 + (col_idx - poi.position[1]) ** 2
        fields[int(poi.tag)] += abs(poi.charge) / np.maximum(squared, 1).astype(float)

    return fields


def build_grid_world(road_mask, pois: Sequence[Poi] = (), cell_size_m: float = CELL_SIZE_M,
                     projection: Projection = None) -> GridWorld:
    '''
    Build a world straight from a boolean road mask and POIs already in cells
    '''

    return GridWorld(road_mask, pois, cell_size_m, projection)


def build_world(roads: Sequence[Sequence["tuple[float, float]"]], pois: Sequence,
                cell_size_m: float = CELL_SIZE_M) -> GridWorld:
    '''
    Rasterise road polylines given as (lat, lon) vertex lists and place tagged
    geographic POIs on the grid. The grid spans the bounding box of the roads;
    POIs outside it are dropped and counted
    '''

    if cell_size_m <= 0:
        raise WorldError(f"cell_size_m must be positive, got {cell_size_m}")

    vertices = [vertex for polyline in roads for vertex in polyline]
    if not vertices:
        raise WorldError("no navigable cells")

    lats = [lat for lat, _ in vertices]
    lons = [lon for _, lon in vertices]
    north, south, west, east = max(lats), min(lats), min(lons), max(lons)

    if north == south and west == east:
        raise WorldError("Road bounding box is degenerate")

    projection = Projection(north, west, (north + south) / 2.0, float(cell_size_m))
    rows = projection.to_cell(south, west)[0] + 1
    cols = projection.to_cell(north, east)[1] + 1

    mask = np.zeros((rows, cols), dtype=bool)
    for polyline in roads:
        cells = [projection.to_cell(lat, lon) for lat, lon in polyline]
        if len(cells) == 1:
            cells = cells * 2

        for a, b in zip(cells, cells[1:]):
            for row, col in rasterize_segment(a, b):
                if 0 <= row < rows and 0 <= col < cols:
                    mask[row, col] = True

    grid_pois = []
    dropped = 0
    for poi in pois:
        cell = projection.to_cell(poi.lat, poi.lon)
        if 0 <= cell[0] < rows and 0 <= cell[1] < cols:
            grid_pois.append(Poi(cell, poi.tag, poi.charge))
        else:
            dropped += 1

    if dropped:
        logger.warning(f"Dropped {dropped} POIs outside the road bounding box")

    logger.info(f"Built a {rows}x{cols} world with {int(mask.sum())} road cells and {len(grid_pois)} POIs")

    return GridWorld(mask, grid_pois, cell_size_m, projection, dropped)


def rasterize_segment(a: Cell, b: Cell) -> "list[Cell]":
    '''
    Bresenham line between two cells. Consecutive cells of the result are
    8-adjacent and both endpoints are included
    '''

    (r0, c0), (r1, c1) = a, b
    dr, dc = abs(r1 - r0), -abs(c1 - c0)
    step_r = 1 if r0 < r1 else -1
    step_c = 1 if c0 < c1 else -1
    err = dr + dc

    cells = []
    while True:
        cells.append((r0, c0))
        if r0 == r1 and c0 == c1:
            return cells

        doubled = 2 * err
        if doubled >= dc:
            err += dc
            r0 += step_r
        if doubled <= dr:
            err += dr
            c0 += step_c


def attraction(world: GridWorld, cell: Cell, m: MultiplierSet) -> float:
    '''
    Attraction Q at a cell under the given multipliers: the dot product of the
    multipliers with the six per-tag fields at that cell

    :raise WorldError if the cell is outside the grid
    '''

    if not world.in_bounds(cell):
        raise WorldError(f"Cell {cell} outside the {world.rows}x{world.cols} grid")

    total = 0.0
    for tag in Tag:
        total += m[tag] * float(world.tag_fields[int(tag), cell[0], cell[1]])

    return total


def attraction_field(world: GridWorld, m: MultiplierSet) -> np.ndarray:
    '''
    Attraction of every cell under the given multipliers, as a new read-only
    array. Accumulates the tags in the same order as attraction() so both
    agree bit for bit
    '''

    total = np.zeros((world.rows, world.cols))
    for tag in Tag:
        total += m[tag] * world.tag_fields[int(tag)]

    total.flags.writeable = False
    return total


def max_field_value(world: GridWorld, m: MultiplierSet) -> float:
    '''
    Largest attraction over the whole grid, 0 for a world without POIs
    '''

    return float(attraction_field(world, m).max())


def neighbors(world: GridWorld, cell: Cell) -> "list[Cell]":
    '''
    Road neighbours of a cell, clockwise starting due north
    '''

    result = []
    for dr, dc in CLOCKWISE_OFFSETS:
        candidate = (cell[0] + dr, cell[1] + dc)
        if world.is_road(candidate):
            result.append(candidate)

    return result


def save_world(world: GridWorld, path):
    '''
    Write a world as a JSON document. Fields are not stored - they are rebuilt
    from the POIs on load
    '''

    document = {
        "rows": world.rows,
        "cols": world.cols,
        "cell_size_m": format_float(world.cell_size_m),
        "dropped_pois": world.dropped_pois,
        "projection": {
            "north": format_float(world.projection.north),
            "west": format_float(world.projection.west),
            "lat_center": format_float(world.projection.lat_center),
        },
        "road_mask": ["".join("1" if v else "0" for v in row) for row in world.road_mask],
        "pois": [[poi.position[0], poi.position[1], poi.tag.name.lower(), format_float(poi.charge)]
                 for poi in world.pois],
    }

    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=1, sort_keys=True)
        f.write("\n")


def load_world(path) -> GridWorld:
    with open(path, encoding="utf-8") as f:
        document = json.load(f)

    try:
        cell_size_m = float(document["cell_size_m"])
        projection = Projection(
            float(document["projection"]["north"]),
            float(document["projection"]["west"]),
            float(document["projection"]["lat_center"]),
            cell_size_m,
        )
        mask = np.array([[ch == "1" for ch in row] for row in document["road_mask"]], dtype=bool)
        pois: List[Poi] = [Poi((int(r), int(c)), Tag.parse(tag), float(charge))
                           for r, c, tag, charge in document["pois"]]
    except (KeyError, ValueError, TypeError) as e:
        raise WorldError(f"Malformed world file {path}: {e}") from e

    return GridWorld(mask, pois, cell_size_m, projection, int(document.get("dropped_pois", 0)))
