from __future__ import annotations

import logging
import math

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from constants import SPACING_MEAN_M, SPACING_STD_M
from errors import DegenerateError
from ingest import GeoPoint, RawTrajectory
from utils import step_cost
from world import Cell, CellPath, Projection


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpacingModel:
    '''
    Lognormal distribution of the distance between recorded points, in metres.
    mu and sigma are the mean and standard deviation of the log spacing
    '''

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DegenerateError(f"degenerate sigma: {self.sigma}")

    @property
    def mean(self) -> float:
        return math.exp(self.mu + self.sigma * self.sigma / 2.0)

    @property
    def std(self) -> float:
        variance = math.expm1(self.sigma * self.sigma) * math.exp(2.0 * self.mu + self.sigma * self.sigma)
        return math.sqrt(variance)


@dataclass(frozen=True)
class Trajectory:
    '''
    The subsample of a cell path kept to emulate GPS recording
    '''

    kept_indices: Tuple[int, ...]
    cells: Tuple[Cell, ...]

    def __len__(self) -> int:
        return len(self.cells)

    def to_raw(self, trajectory_id: str, projection: Projection) -> RawTrajectory:
        '''
        Geographic form of the trajectory, cell centres projected back to
        latitude and longitude
        '''

        return RawTrajectory(trajectory_id, tuple(GeoPoint(*projection.to_geo(r, c)) for r, c in self.cells))


def fit_spacing(samples) -> SpacingModel:
    '''
    Maximum-likelihood lognormal fit

    :raise DegenerateError on fewer than two samples, a nonpositive sample or a zero spread
    '''

    values = np.asarray(samples, dtype=float)
    if values.size < 2:
        raise DegenerateError(f"Need at least 2 spacing samples, got {values.size}")

    if np.any(values <= 0):
        raise DegenerateError("Spacing samples must be strictly positive")

    logs = np.log(values)
    mu = float(logs.mean())
    sigma = float(logs.std())
    if sigma == 0.0:
        raise DegenerateError("degenerate sigma")

    logger.info(f"Fitted spacing model over {values.size} samples: mu={mu:.4f} sigma={sigma:.4f}")

    return SpacingModel(mu, sigma)


def spacing_from_moments(mean: float = SPACING_MEAN_M, std: float = SPACING_STD_M) -> SpacingModel:
    '''
    Lognormal with the given mean and standard deviation in metres
    '''

    if mean <= 0 or std <= 0:
        raise DegenerateError(f"Spacing mean and std must be positive, got {mean} and {std}")

    variance = math.log1p((std / mean) ** 2)
    return SpacingModel(math.log(mean) - variance / 2.0, math.sqrt(variance))


def subsample(path: CellPath, model: SpacingModel, cell_size_m: float, seed: int) -> Trajectory:
    '''
    Walk the path and keep a cell each time the distance travelled since the
    last kept cell reaches the current spacing draw. A new spacing is drawn
    after every kept cell. The first and last cells are always kept
    '''

    if len(path) < 2:
        raise DegenerateError("degenerate path")

    rng = np.random.default_rng(seed)
    cells = path.cells

    kept = [0]
    spacing = rng.lognormal(model.mu, model.sigma)
    travelled = 0.0
    for index in range(1, len(cells) - 1):
        prev, cell = cells[index - 1], cells[index]
        travelled += step_cost(cell[0] - prev[0], cell[1] - prev[1]) * cell_size_m
        if travelled >= spacing:
            kept.append(index)
            travelled = 0.0
            spacing = rng.lognormal(model.mu, model.sigma)

    kept.append(len(cells) - 1)

    return Trajectory(tuple(kept), tuple(cells[i] for i in kept))
