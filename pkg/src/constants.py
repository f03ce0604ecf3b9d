import math

# World rasterisation - metres per cell edge. Attraction distances are measured in cells,
# so this only affects how geographic inputs land on the grid
CELL_SIZE_M = 10.0

# Mean earth radius in metres, used by the equirectangular projection and haversine spacing
EARTH_RADIUS_M = 6371008.8

# Neighbour template, clockwise starting due north. Offsets are (row, col) with rows growing south
#   7 0 1
#   6 . 2
#   5 4 3
CLOCKWISE_OFFSETS = (
    (-1, 0),   # N
    (-1, 1),   # NE
    (0, 1),    # E
    (1, 1),    # SE
    (1, 0),    # S
    (1, -1),   # SW
    (0, -1),   # W
    (-1, -1),  # NW
)

ORTHOGONAL_STEP = 1.0
DIAGONAL_STEP = math.sqrt(2)

# Multipliers are limited to the same range as the charges they scale
MIN_MULTIPLIER = 1.0
MAX_MULTIPLIER = 100.0

# The basic multiplier vector <B, A, N, O, Sh, Sp> whose permutations make up the multiplier sweep
BASE_MULTIPLIERS = (1.0, 25.0, 10.0, 75.0, 50.0, 100.0)

DEFAULT_POI_CHARGE = 1.0

# Reward landscape
MAX_TRF = 100.0
Z_THRESHOLD = 2.0

# Planner - alpha is expressed as a percentage of the target distance unless configured in cells
ALPHA_PERCENT = 50.0
EPSILON = 1e-6

# Expansions allowed per cell of target distance before a generation gives up
NODE_BUDGET_FACTOR = 50

# Synthetic corpus - time-step statistics of the recorded cyclist corpus.
# The corpus generator keeps the coefficient of variation and scales the mean
CORPUS_STEPS_MEAN = 2165.39
CORPUS_STEPS_STD = 1955.24
CORPUS_MEAN_STEPS = 200
MOMENTUM = 0.8
MAX_WALK_RETRIES = 100

# Space between recorded points in metres, used when a corpus carries no GPS spacing
SPACING_MEAN_M = 18.6
SPACING_STD_M = 35.9

# Alpha sweep grid - the stated endpoints plus every fifth percent
ALPHA_SWEEP = (1,) + tuple(range(5, 101, 5))

# Floats written to artifacts use enough digits to round-trip exactly
FLOAT_FORMAT = ".17g"

SEARCH_DUMP_HEADER = ("row", "col", "f", "visit_index")

WORKERS_ENV_VAR = "TRAILFORGE_WORKERS"

# SVG rendering through matplotlib. Grid figures grow with the world up to a cap
INCHES_PER_CELL = 0.12
MAX_FIGURE_INCHES = 16.0
PANEL_INCHES = 4.0
FIGURE_DPI = 72
SVG_HASH_SALT = "trailforge"
HEAT_CMAP = "YlOrRd"
SEARCH_CMAP = "coolwarm"
ROAD_COLOR = "#9A9A9A"
START_COLOR = "#D62728"
PATH_COLORS = ("#1F77B4", "#2CA02C", "#9467BD", "#8C564B", "#E377C2", "#17BECF")

# Artifact names inside the output directory
WORLD_FILE = "world.json"
LANDSCAPE_FILE = "landscape.json"
SPACING_FILE = "spacing.json"
CORPUS_FEATURES_FILE = "corpus_features.csv"
CORPUS_PATHS_FILE = "corpus_paths.txt"
TRAJECTORIES_FILE = "trajectories.txt"
PATHS_FILE = "paths.txt"
STATS_FILE = "stats.csv"
SEARCH_DIR = "search"
SWEEP_DIR = "sweep"
EVAL_DIR = "eval"
SVG_DIR = "svg"
