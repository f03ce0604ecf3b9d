from pathlib import Path

import numpy as np
import pytest

from features import extract_features, fit_landscape
from ingest import synth_corpus
from utils import Tag
from world import Poi, build_grid_world


DATA_DIR = Path(__file__).resolve().parent.parent / "data"

# A single-track path with turns and diagonal steps; no two non-consecutive cells touch
ZIGZAG_CELLS = (
    (0, 0), (0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 4),
    (5, 5), (5, 6), (4, 7), (3, 7), (2, 7), (1, 8), (0, 9),
)


def street_mask(size: int = 61, block: int = 6) -> np.ndarray:
    '''
    Streets along every block-th row and column, framing the whole grid
    '''

    mask = np.zeros((size, size), dtype=bool)
    mask[::block, :] = True
    mask[:, ::block] = True
    return mask


def mask_from_cells(shape, cells) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for r, c in cells:
        mask[r, c] = True

    return mask


@pytest.fixture(scope="session")
def street_world():
    pois = [
        Poi((6, 12), Tag.NATURAL, 60.0),
        Poi((20, 40), Tag.SHOP, 80.0),
        Poi((45, 13), Tag.BUILDING, 30.0),
        Poi((50, 50), Tag.SPORT, 10.0),
        Poi((33, 27), Tag.AMENITY, 25.0),
    ]
    return build_grid_world(street_mask(), pois)


@pytest.fixture(scope="session")
def empty_street_world():
    return build_grid_world(street_mask())


@pytest.fixture
def corridor_world():
    return build_grid_world(np.ones((1, 15), dtype=bool))


@pytest.fixture
def zigzag_world():
    return build_grid_world(mask_from_cells((6, 10), ZIGZAG_CELLS), [Poi((5, 9), Tag.OFFICE, 5.0)])


@pytest.fixture(scope="session")
def street_corpus(street_world):
    return synth_corpus(street_world, 40, seed=5, mean_steps=40)


@pytest.fixture(scope="session")
def street_landscape(street_corpus):
    return fit_landscape([extract_features(path) for path in street_corpus])
