import math

from enum import Enum, IntEnum

from constants import CLOCKWISE_OFFSETS, DIAGONAL_STEP, FLOAT_FORMAT, ORTHOGONAL_STEP


class Tag(IntEnum):
    '''
    The six POI families. The integer value is the index of the family in a
    multiplier vector <B, A, N, O, Sh, Sp> and in the per-tag field stack
    '''

    BUILDING = 0
    AMENITY = 1
    NATURAL = 2
    OFFICE = 3
    SHOP = 4
    SPORT = 5

    @classmethod
    def parse(cls, name: str) -> "Tag":
        '''
        Look up a tag by its file name (case insensitive)

        :raise KeyError if the name is not one of the six families
        '''

        return cls[name.strip().upper()]


class Mode(Enum):
    ATTRACTION = "attraction"
    FEATURE = "feature"


class TrfMiddle(Enum):
    '''
    How the trajectory reward behaves between the inner and outer hull
    '''

    LITERAL = "literal"
    INWARD = "inward"


class SweepKind(Enum):
    ALPHA = "alpha"
    MULTIPLIERS = "multipliers"


class Octant(IntEnum):
    N = 0
    NE = 1
    E = 2
    SE = 3
    S = 4
    SW = 5
    W = 6
    NW = 7


def step_cost(dr: int, dc: int) -> float:
    '''
    Cost of a single 8-connected move, in cells
    '''

    return DIAGONAL_STEP if dr != 0 and dc != 0 else ORTHOGONAL_STEP


def direction_index(dr: int, dc: int) -> int:
    '''
    Position of a unit move in the clockwise neighbour template
    '''

    return CLOCKWISE_OFFSETS.index((dr, dc))


def cell_distance(a: "tuple[float, float]", b: "tuple[float, float]") -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def octant_of(dr: float, dc: float) -> Octant:
    '''
    Compass octant of a displacement given in (row, col) - rows grow south.
    Octants are centred on the compass points, so boundaries sit 22.5 degrees
    either side of them. A displacement exactly on a boundary belongs to the
    octant it closes when sweeping clockwise
    '''

    bearing = math.degrees(math.atan2(dc, -dr)) % 360.0
    return Octant(math.ceil((bearing - 22.5) / 45.0) % 8)


def format_float(value: float) -> str:
    '''
    Format a float so that it parses back to exactly the same value
    '''

    return format(value, FLOAT_FORMAT)
