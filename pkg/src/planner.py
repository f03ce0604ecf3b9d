from __future__ import annotations

import heapq
import logging
import math
import time

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from constants import (
    CLOCKWISE_OFFSETS, DIAGONAL_STEP, EPSILON, FLOAT_FORMAT, NODE_BUDGET_FACTOR, ORTHOGONAL_STEP, SEARCH_DUMP_HEADER
)
from errors import BudgetExhaustedError, GenerationError, IngestError, NoPathError
from features import PartialFeatures, RewardLandscape, combined_score
from utils import Mode, cell_distance
from world import Cell, CellPath, GridWorld, MultiplierSet, attraction, max_field_value


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlphaPolicy:
    '''
    Where the heuristic starts shifting from attraction to distance. alpha is
    in cells; epsilon guards the denominator of the blend weight
    '''

    alpha: float
    epsilon: float = EPSILON

    def __post_init__(self):
        if not self.alpha > 0:
            raise GenerationError(f"alpha must be positive, got {self.alpha}")

        if not self.epsilon > 0:
            raise GenerationError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def from_percent(cls, percent: float, target_distance: float, epsilon: float = EPSILON) -> AlphaPolicy:
        return cls(percent / 100.0 * target_distance, epsilon)


class SearchNode:
    '''
    A node of the search tree. f is the priority and does not include g.
    The branch mask holds one bit per cell on the root-to-node branch; it is
    filled in when the node is expanded
    '''

    __slots__ = ("cell", "g", "h", "f", "parent", "partial_features", "orthogonal", "diagonal", "mask")

    def __init__(self, cell: Cell, g: float, h: float, parent: Optional[SearchNode] = None,
                 partial_features: Optional[PartialFeatures] = None, orthogonal: int = 0, diagonal: int = 0):
        self.cell = cell
        self.g = g
        self.h = h
        self.f = h
        self.parent = parent
        self.partial_features = partial_features
        self.orthogonal = orthogonal
        self.diagonal = diagonal
        self.mask = 0

    @property
    def state(self) -> "tuple[Cell, int, int]":
        return self.cell, self.orthogonal, self.diagonal

    def path(self) -> CellPath:
        cells = []
        node = self
        while node is not None:
            cells.append(node.cell)
            node = node.parent

        cells.reverse()
        return CellPath(tuple(cells))


@dataclass(frozen=True)
class GenerationRequest:
    start: Cell
    target_distance: float
    multipliers: MultiplierSet
    alpha_policy: AlphaPolicy
    mode: Mode = Mode.ATTRACTION
    landscape: Optional[RewardLandscape] = None
    seed: int = 0
    node_budget: Optional[int] = None
    log_search: bool = True

    @property
    def budget(self) -> int:
        if self.node_budget is not None:
            return self.node_budget

        return max(1, math.ceil(NODE_BUDGET_FACTOR * self.target_distance))

    def validate(self, world: GridWorld):
        '''
        :raise GenerationError on the first violated precondition
        '''

        if not self.target_distance > 0:
            raise GenerationError(f"target_distance must be positive, got {self.target_distance}")

        if not world.is_road(tuple(self.start)):
            raise GenerationError(f"Start {tuple(self.start)} is not a road cell")

        if self.mode is Mode.FEATURE and self.landscape is None:
            raise GenerationError("Feature mode needs a reward landscape")

        if self.node_budget is not None and self.node_budget <= 0:
            raise GenerationError(f"node_budget must be positive, got {self.node_budget}")


@dataclass(frozen=True)
class VisitEntry:
    cell: Cell
    f: float
    visit_index: int


@dataclass
class SearchStats:
    opened: int = 0
    closed: int = 0
    wall_time: float = 0.0
    visit_log: List[VisitEntry] = field(default_factory=list)


@dataclass(frozen=True)
class GenerationResult:
    path: CellPath
    stats: SearchStats
    achieved_distance: float
    # Landscape features of the returned path, feature mode only
    features: Optional[PartialFeatures] = None


def delta(policy: AlphaPolicy, d_end: float) -> float:
    '''
    Weight of the distance term: 0 while more than alpha cells remain, rising
    towards 1 as the remaining distance runs out
    '''

    return max(0.0, policy.alpha - d_end) / (policy.alpha + policy.epsilon)


def _blend(weight: float, desirability: float, d_end: float, target_distance: float) -> float:
    return (1.0 - weight) * (1.0 - desirability) + weight * (d_end / target_distance)


def _normalised_attraction(world: GridWorld, cell: Cell, m: MultiplierSet, top: Optional[float] = None) -> float:
    if top is None:
        top = max_field_value(world, m)

    if top <= 0.0:
        return 0.0

    return attraction(world, cell, m) / top


def _normalised_reward(landscape: RewardLandscape, features) -> float:
    scale = sum(plane.max_trf for plane in landscape.planes)
    reward = combined_score(landscape, features) / scale
    return max(0.0, min(1.0, reward))


def heuristic_attraction(world: GridWorld, cell: Cell, m: MultiplierSet, policy: AlphaPolicy, d_end: float,
                         target_distance: float, top: Optional[float] = None) -> float:
    '''
    Cost of a cell for the attraction-driven generator. Attraction is turned
    into a cost in [0, 1] against the strongest cell of the grid, so lower is
    better. top is that strongest attraction when the caller already knows it
    '''

    return _blend(delta(policy, d_end), _normalised_attraction(world, cell, m, top), d_end, target_distance)


def heuristic_feature(world: GridWorld, node: SearchNode, m: MultiplierSet, policy: AlphaPolicy, d_end: float,
                      landscape: RewardLandscape, target_distance: float, top: Optional[float] = None) -> float:
    '''
    Cost of a node for the feature-driven generator. The attraction of the
    node's cell is weighted by the landscape reward of the partial path ending
    there; negative rewards count as zero

    :raise GenerationError if no landscape is given
    '''

    if landscape is None:
        raise GenerationError("Feature heuristic needs a reward landscape")

    if node.partial_features is None:
        raise GenerationError("Feature heuristic needs a node carrying its partial path features")

    desirability = _normalised_attraction(world, node.cell, m, top) * _normalised_reward(landscape,
                                                                                         node.partial_features)
    return _blend(delta(policy, d_end), desirability, d_end, target_distance)


class DistanceBoundedSearch:
    '''
    Best-first search that grows a tree of paths out of the start cell until
    one of them covers the target distance.

    Priority is the heuristic cost alone. Equal priorities go to the deeper
    node first, then to the child inserted first; children are inserted in a
    seeded random order. A search state is (cell, orthogonal steps, diagonal
    steps) and is expanded once. A branch never revisits one of its own cells
    '''

    def __init__(self, world: GridWorld, request: GenerationRequest):
        request.validate(world)

        self.world = world
        self.request = request
        self.target = float(request.target_distance)
        self.policy = request.alpha_policy
        self.multipliers = request.multipliers
        self.landscape = request.landscape if request.mode is Mode.FEATURE else None
        self.top = max_field_value(world, request.multipliers)

        self.rng = np.random.default_rng(request.seed)
        self.stats = SearchStats()

        self._open = []
        self._counter = 0
        self._closed = set()

    def _cost(self, node: SearchNode) -> float:
        d_end = max(0.0, self.target - node.g)
        if self.landscape is None:
            return heuristic_attraction(self.world, node.cell, self.multipliers, self.policy, d_end, self.target,
                                        self.top)

        return heuristic_feature(self.world, node, self.multipliers, self.policy, d_end, self.landscape, self.target,
                                 self.top)

    def _node(self, cell: Cell, g: float, parent: Optional[SearchNode], partial: Optional[PartialFeatures],
              orthogonal: int = 0, diagonal: int = 0) -> SearchNode:
        node = SearchNode(cell, g, 0.0, parent, partial, orthogonal, diagonal)
        node.h = node.f = self._cost(node)
        return node

    def _key(self, node: SearchNode) -> tuple:
        return node.f, -node.g, self._counter

    def _push(self, node: SearchNode):
        heapq.heappush(self._open, (*self._key(node), node))
        self._counter += 1
        self.stats.opened += 1

    def _children(self, node: SearchNode) -> "list[SearchNode]":
        world = self.world
        row, col = node.cell
        children = []

        for dr, dc in CLOCKWISE_OFFSETS:
            cell = (row + dr, col + dc)
            if not world.is_road(cell):
                continue

            if node.mask >> world.cell_index(cell) & 1:
                continue

            if dr != 0 and dc != 0:
                g = node.g + DIAGONAL_STEP
                orthogonal, diagonal = node.orthogonal, node.diagonal + 1
            else:
                g = node.g + ORTHOGONAL_STEP
                orthogonal, diagonal = node.orthogonal + 1, node.diagonal

            if (cell, orthogonal, diagonal) in self._closed:
                continue

            partial = node.partial_features.extend(cell) if node.partial_features is not None else None
            children.append(self._node(cell, g, node, partial, orthogonal, diagonal))

        return children

    def run(self) -> GenerationResult:
        started = time.perf_counter()
        start = (int(self.request.start[0]), int(self.request.start[1]))
        budget = self.request.budget

        partial = PartialFeatures.begin(start) if self.landscape is not None else None
        self._push(self._node(start, 0.0, None, partial))

        deepest = None
        while self._open:
            node = heapq.heappop(self._open)[-1]
            if node.state in self._closed:
                continue

            self._closed.add(node.state)
            node.mask = (node.parent.mask if node.parent is not None else 0) | 1 << self.world.cell_index(node.cell)

            if self.request.log_search:
                self.stats.visit_log.append(VisitEntry(node.cell, node.f, self.stats.closed))
            self.stats.closed += 1

            if deepest is None or node.g > deepest.g:
                deepest = node

            if node.g >= self.target:
                self.stats.wall_time = time.perf_counter() - started
                logger.debug(f"Generated {self.request.mode.value} path from {start}: "
                             f"{self.stats.closed} closed, {self.stats.opened} opened")
                return GenerationResult(node.path(), self.stats, node.g, node.partial_features)

            if self.stats.closed >= budget:
                break

            children = self._children(node)
            for index in self.rng.permutation(len(children)):
                self._push(children[index])

        self.stats.wall_time = time.perf_counter() - started
        reason = "node budget exhausted" if self._open else "search space exhausted"
        raise BudgetExhaustedError(
            f"{reason} after {self.stats.closed} expansions, deepest path covers {deepest.g:.3f} of "
            f"{self.target:g} cells",
            deepest.path(),
            self.stats,
        )


def generate(world: GridWorld, request: GenerationRequest) -> GenerationResult:
    '''
    Generate a path from the request's start cell covering at least the target
    distance

    :raise GenerationError if the request is invalid
    :raise BudgetExhaustedError if the search gives up before the target distance
    '''

    return DistanceBoundedSearch(world, request).run()


def shortest_path(world: GridWorld, start: Cell, goal: Cell) -> CellPath:
    '''
    Classic A* between two road cells with the straight-line heuristic

    :raise NoPathError if either end is off-road or the goal is unreachable
    '''

    start, goal = tuple(start), tuple(goal)
    if not world.is_road(start) or not world.is_road(goal):
        raise NoPathError(f"Both {start} and {goal} must be road cells")

    open_list = [(cell_distance(start, goal), 0, start)]
    counter = 1
    came_from = {start: None}
    cost_so_far = {start: 0.0}
    closed = set()

    while open_list:
        _, _, cell = heapq.heappop(open_list)
        if cell == goal:
            break

        if cell in closed:
            continue
        closed.add(cell)

        for dr, dc in CLOCKWISE_OFFSETS:
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt in closed or not world.is_road(nxt):
                continue

            cost = cost_so_far[cell] + (DIAGONAL_STEP if dr != 0 and dc != 0 else ORTHOGONAL_STEP)
            if cost < cost_so_far.get(nxt, math.inf):
                cost_so_far[nxt] = cost
                came_from[nxt] = cell
                heapq.heappush(open_list, (cost + cell_distance(nxt, goal), counter, nxt))
                counter += 1
    else:
        raise NoPathError(f"No road path from {start} to {goal}")

    cells = []
    cell = goal
    while cell is not None:
        cells.append(cell)
        cell = came_from[cell]

    cells.reverse()
    return CellPath(tuple(cells))


def dump_search(stats: SearchStats, path):
    rows = [(entry.cell[0], entry.cell[1], entry.f, entry.visit_index) for entry in stats.visit_log]
    frame = pd.DataFrame(rows, columns=list(SEARCH_DUMP_HEADER))
    frame.to_csv(path, index=False, float_format=f"%{FLOAT_FORMAT}")


def load_search(path) -> "list[VisitEntry]":
    '''
    Read a search dump back into its visit log

    :raise IngestError on a bad header or row
    '''

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestError(path, 1, f"unreadable search dump: {e}") from e

    if tuple(frame.columns) != SEARCH_DUMP_HEADER:
        raise IngestError(path, 1, f"expected header {','.join(SEARCH_DUMP_HEADER)}")

    entries = []
    for line_number, (r, c, f_value, visit_index) in enumerate(frame.itertuples(index=False), start=2):
        try:
            entries.append(VisitEntry((int(r), int(c)), float(f_value), int(visit_index)))
        except ValueError as e:
            raise IngestError(path, line_number, f"bad search row: {e}") from e

    return entries
