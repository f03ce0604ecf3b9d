import math

import numpy as np
import pytest

from scipy.sparse import lil_matrix
from scipy.sparse.csgraph import dijkstra

from conftest import ZIGZAG_CELLS
from constants import CLOCKWISE_OFFSETS, EPSILON
from errors import BudgetExhaustedError, GenerationError, IngestError, NoPathError
from features import LandscapePlane, PartialFeatures, RewardLandscape, extract_features
from planner import (
    AlphaPolicy, DistanceBoundedSearch, GenerationRequest, SearchNode, SearchStats, VisitEntry, delta, dump_search,
    generate, heuristic_attraction, heuristic_feature, load_search, shortest_path
)
from utils import Mode, Tag, step_cost
from world import MultiplierSet, Poi, build_grid_world


WIDE = ((-1000.0, -1000.0), (1000.0, -1000.0), (1000.0, 1000.0), (-1000.0, 1000.0))
FAR = ((5000.0, 5000.0), (5001.0, 5000.0), (5001.0, 5001.0), (5000.0, 5001.0))


def landscape_of(outer, inner):
    return RewardLandscape(tuple(LandscapePlane(x, y, outer, inner) for x, y in (
        ("curliness", "total_length"),
        ("curliness", "farthest_distance"),
        ("farthest_distance", "total_length"),
    )))


def outcome(world, request):
    '''
    What a generation produced, successful or not, without the timings
    '''

    try:
        result = generate(world, request)
        return "ok", result.path, result.stats.opened, result.stats.closed, result.stats.visit_log
    except BudgetExhaustedError as e:
        return "exhausted", e.partial_path, e.stats.opened, e.stats.closed, e.stats.visit_log


def path_length(path):
    return sum(step_cost(b[0] - a[0], b[1] - a[1]) for a, b in zip(path, path.cells[1:]))


def test_delta():
    policy = AlphaPolicy(10.0)

    assert delta(policy, 20.0) == 0.0
    assert delta(policy, 10.0) == 0.0
    assert delta(policy, 5.0) == pytest.approx(0.5)
    assert delta(policy, 0.0) == pytest.approx(10.0 / (10.0 + EPSILON))
    assert delta(policy, 0.0) < 1.0


def test_alpha_policy():
    assert AlphaPolicy.from_percent(50, 30.0).alpha == 15.0

    with pytest.raises(GenerationError):
        AlphaPolicy(0.0)

    with pytest.raises(GenerationError):
        AlphaPolicy(5.0, epsilon=0.0)


def test_heuristic_attraction():
    world = build_grid_world(np.ones((1, 5), dtype=bool), [Poi((0, 0), Tag.SHOP, 4.0)])
    m = MultiplierSet.uniform()
    policy = AlphaPolicy(5.0)

    assert heuristic_attraction(world, (0, 0), m, policy, 8.0, 10.0) == 0.0
    assert heuristic_attraction(world, (0, 2), m, policy, 8.0, 10.0) == pytest.approx(0.75)

    weight = 3.0 / (5.0 + EPSILON)
    expected = (1 - weight) * 0.75 + weight * 0.2
    assert heuristic_attraction(world, (0, 2), m, policy, 2.0, 10.0) == pytest.approx(expected)


def test_heuristic_attraction_at_strongest_cell():
    rng = np.random.default_rng(9)
    pois = [Poi((int(rng.integers(20)), int(rng.integers(20))), Tag(int(rng.integers(6))), float(rng.uniform(1, 50)))
            for _ in range(10)]
    world = build_grid_world(np.ones((20, 20), dtype=bool), pois)
    m = MultiplierSet((1, 25, 10, 75, 50, 100))
    field = np.zeros((20, 20))
    for tag in Tag:
        field += m[tag] * world.tag_fields[int(tag)]
    best = tuple(int(v) for v in np.unravel_index(np.argmax(field), field.shape))

    assert heuristic_attraction(world, best, m, AlphaPolicy(5.0), 50.0, 60.0) == pytest.approx(0.0, abs=1e-12)
    assert all(heuristic_attraction(world, (r, c), m, AlphaPolicy(5.0), 50.0, 60.0) >= 0.0
               for r in range(20) for c in range(20))


def test_heuristic_without_pois():
    world = build_grid_world(np.ones((3, 3), dtype=bool))
    m = MultiplierSet.uniform()

    assert heuristic_attraction(world, (1, 1), m, AlphaPolicy(4.0), 10.0, 10.0) == 1.0
    assert heuristic_attraction(world, (1, 1), m, AlphaPolicy(4.0), 0.0, 10.0) == pytest.approx(0.0, abs=1e-6)


def test_heuristic_feature_inside_the_plateau():
    world = build_grid_world(np.ones((1, 5), dtype=bool), [Poi((0, 0), Tag.SHOP, 4.0)])
    m = MultiplierSet.uniform()
    policy = AlphaPolicy(5.0)
    node = SearchNode((0, 2), 2.0, 0.0, partial_features=PartialFeatures.begin((0, 0)).extend((0, 1)).extend((0, 2)))

    h = heuristic_feature(world, node, m, policy, 8.0, landscape_of(WIDE, WIDE), 10.0)

    assert h == pytest.approx(heuristic_attraction(world, (0, 2), m, policy, 8.0, 10.0))


def test_heuristic_feature_clamps_negative_rewards():
    world = build_grid_world(np.ones((1, 5), dtype=bool), [Poi((0, 0), Tag.SHOP, 4.0)])
    m = MultiplierSet.uniform()
    policy = AlphaPolicy(5.0)
    node = SearchNode((0, 1), 1.0, 0.0, partial_features=PartialFeatures.begin((0, 0)).extend((0, 1)))

    assert heuristic_feature(world, node, m, policy, 9.0, landscape_of(FAR, FAR), 10.0) == 1.0

    weight = 4.0 / (5.0 + EPSILON)
    expected = (1 - weight) + weight * 0.1
    assert heuristic_feature(world, node, m, policy, 1.0, landscape_of(FAR, FAR), 10.0) == pytest.approx(expected)


def test_heuristic_feature_needs_a_landscape():
    world = build_grid_world(np.ones((1, 5), dtype=bool))
    node = SearchNode((0, 0), 0.0, 0.0, partial_features=PartialFeatures.begin((0, 0)))

    with pytest.raises(GenerationError):
        heuristic_feature(world, node, MultiplierSet.uniform(), AlphaPolicy(1.0), 1.0, None, 2.0)


def test_corridor_generation(corridor_world):
    request = GenerationRequest((0, 0), 10.0, MultiplierSet.uniform(), AlphaPolicy.from_percent(50, 10.0))
    result = generate(corridor_world, request)

    assert result.path.cells == tuple((0, c) for c in range(11))
    assert result.achieved_distance == 10.0
    result.path.check(corridor_world)


def test_request_validation(zigzag_world, corridor_world):
    policy = AlphaPolicy(5.0)
    m = MultiplierSet.uniform()

    with pytest.raises(GenerationError, match="not a road cell"):
        generate(zigzag_world, GenerationRequest((1, 0), 5.0, m, policy))

    with pytest.raises(GenerationError):
        generate(corridor_world, GenerationRequest((0, 0), 0.0, m, policy))

    with pytest.raises(GenerationError, match="landscape"):
        generate(corridor_world, GenerationRequest((0, 0), 5.0, m, policy, mode=Mode.FEATURE))

    with pytest.raises(GenerationError):
        generate(corridor_world, GenerationRequest((0, 0), 5.0, m, policy, node_budget=0))


def test_generated_path_covers_the_target(street_world):
    for seed, start in enumerate([(0, 0), (30, 30), (12, 47), (60, 6)]):
        request = GenerationRequest(start, 30.0, MultiplierSet((1, 25, 10, 75, 50, 100)),
                                    AlphaPolicy.from_percent(100, 30.0), seed=seed, node_budget=20000)
        result = generate(street_world, request)

        result.path.check(street_world)
        assert result.path.start == start
        assert len(set(result.path.cells)) == len(result.path)
        assert path_length(result.path) == pytest.approx(result.achieved_distance, abs=1e-9)
        assert 30.0 <= result.achieved_distance < 30.0 + math.sqrt(2)


def test_generation_is_deterministic(street_world):
    request = GenerationRequest((18, 18), 40.0, MultiplierSet((1, 25, 10, 75, 50, 100)),
                                AlphaPolicy.from_percent(50, 40.0), seed=3)

    assert outcome(street_world, request) == outcome(street_world, request)


def test_search_counters(street_world):
    request = GenerationRequest((24, 36), 25.0, MultiplierSet.uniform(), AlphaPolicy.from_percent(100, 25.0),
                                seed=1, node_budget=20000)
    _, _, opened, closed, visit_log = outcome(street_world, request)

    assert 0 < closed <= opened
    assert [entry.visit_index for entry in visit_log] == list(range(closed))
    assert visit_log[0].cell == (24, 36)


def test_visit_log_can_be_disabled(corridor_world):
    request = GenerationRequest((0, 0), 5.0, MultiplierSet.uniform(), AlphaPolicy(2.0), log_search=False)
    result = generate(corridor_world, request)

    assert result.stats.visit_log == []
    assert result.stats.closed > 0


def test_multiplier_scale_invariance(street_world):
    def request(values):
        return GenerationRequest((6, 30), 30.0, MultiplierSet(values), AlphaPolicy.from_percent(50, 30.0), seed=2)

    base = (1, 2, 5, 10, 25, 50)
    doubled = tuple(2 * v for v in base)

    assert outcome(street_world, request(base)) == outcome(street_world, request(doubled))


def test_feature_mode_tracks_path_features(zigzag_world):
    request = GenerationRequest((0, 0), 12.0, MultiplierSet.uniform(), AlphaPolicy(6.0), mode=Mode.FEATURE,
                                landscape=landscape_of(WIDE, WIDE))
    result = generate(zigzag_world, request)
    features = extract_features(result.path)

    assert result.path.cells == ZIGZAG_CELLS[:12]
    assert result.features.total_length == features.total_length == 12
    assert result.features.curliness == pytest.approx(features.curliness)
    assert result.features.farthest_distance == pytest.approx(features.farthest_distance)


def test_modes_agree_without_pois(empty_street_world, street_landscape):
    def request(mode):
        return GenerationRequest((30, 12), 35.0, MultiplierSet.uniform(), AlphaPolicy.from_percent(50, 35.0),
                                 mode=mode, landscape=street_landscape, seed=4)

    attraction = outcome(empty_street_world, request(Mode.ATTRACTION))
    feature = outcome(empty_street_world, request(Mode.FEATURE))

    assert attraction[:4] == feature[:4]


class FirstInFirstOutSearch(DistanceBoundedSearch):
    def _key(self, node):
        return node.f, self._counter


def test_equal_priorities_favour_the_deeper_node():
    world = build_grid_world(np.ones((5, 5), dtype=bool))
    diagonals = {(1, 1), (1, 3), (3, 1), (3, 3)}
    firsts = set()

    for seed in range(8):
        request = GenerationRequest((2, 2), 4.0, MultiplierSet.uniform(), AlphaPolicy(0.5), seed=seed)
        visits = generate(world, request).stats.visit_log

        assert visits[0].cell == (2, 2)
        assert visits[1].cell in diagonals
        assert visits[0].f == visits[1].f == 1.0
        firsts.add(visits[1].cell)

    assert len(firsts) > 1


def test_first_in_first_out_floods_an_empty_street_world(empty_street_world):
    # 287 street cells lie within 20 moves of the start, all of them costing 1
    request = GenerationRequest((30, 12), 60.0, MultiplierSet.uniform(), AlphaPolicy.from_percent(50, 60.0),
                                seed=2, node_budget=250)

    result = generate(empty_street_world, request)
    assert result.achieved_distance >= 60.0
    assert result.stats.closed < 250

    with pytest.raises(BudgetExhaustedError, match="node budget exhausted"):
        FirstInFirstOutSearch(empty_street_world, request).run()


def test_search_priorities_are_the_heuristic_costs(street_world, street_landscape):
    m = MultiplierSet((1, 25, 10, 75, 50, 100))
    policy = AlphaPolicy.from_percent(100, 30.0)

    for mode in (Mode.ATTRACTION, Mode.FEATURE):
        request = GenerationRequest((30, 30), 30.0, m, policy, mode=mode, landscape=street_landscape, seed=6,
                                    node_budget=20000)
        _, path, _, _, visit_log = outcome(street_world, request)

        logged = {}
        for entry in visit_log:
            logged.setdefault(entry.cell, set()).add(entry.f)

        g = 0.0
        partial = PartialFeatures.begin(path.start)
        for index, cell in enumerate(path):
            if index > 0:
                prev = path[index - 1]
                g += step_cost(cell[0] - prev[0], cell[1] - prev[1])
                partial = partial.extend(cell)

            d_end = max(0.0, 30.0 - g)
            if mode is Mode.ATTRACTION:
                h = heuristic_attraction(street_world, cell, m, policy, d_end, 30.0)
            else:
                node = SearchNode(cell, g, 0.0, partial_features=partial)
                h = heuristic_feature(street_world, node, m, policy, d_end, street_landscape, 30.0)

            assert h in logged[cell]


def test_node_budget(street_world):
    request = GenerationRequest((0, 0), 30.0, MultiplierSet.uniform(), AlphaPolicy(10.0), node_budget=3)

    with pytest.raises(BudgetExhaustedError, match="node budget exhausted") as info:
        generate(street_world, request)

    assert info.value.stats.closed == 3
    info.value.partial_path.check(street_world)


def test_search_space_exhausted():
    world = build_grid_world(np.ones((1, 5), dtype=bool))
    request = GenerationRequest((0, 0), 10.0, MultiplierSet.uniform(), AlphaPolicy(5.0))

    with pytest.raises(BudgetExhaustedError, match="search space exhausted") as info:
        generate(world, request)

    assert info.value.partial_path.cells == tuple((0, c) for c in range(5))


def test_default_budget():
    request = GenerationRequest((0, 0), 10.5, MultiplierSet.uniform(), AlphaPolicy(1.0))

    assert request.budget == 525
    assert GenerationRequest((0, 0), 10.5, MultiplierSet.uniform(), AlphaPolicy(1.0), node_budget=7).budget == 7


def test_shortest_path_small():
    world = build_grid_world(np.ones((3, 6), dtype=bool))
    path = shortest_path(world, (0, 0), (2, 5))

    path.check(world)
    assert path.start == (0, 0)
    assert path.end == (2, 5)
    assert path_length(path) == pytest.approx(3 + 2 * math.sqrt(2))


def test_shortest_path_same_cell(corridor_world):
    assert shortest_path(corridor_world, (0, 3), (0, 3)).cells == ((0, 3),)


def test_shortest_path_unreachable():
    mask = np.zeros((3, 5), dtype=bool)
    mask[:, 0] = True
    mask[:, 4] = True

    with pytest.raises(NoPathError):
        shortest_path(build_grid_world(mask), (0, 0), (0, 4))

    with pytest.raises(NoPathError):
        shortest_path(build_grid_world(mask), (0, 0), (0, 2))


def test_shortest_path_matches_dijkstra():
    rng = np.random.default_rng(13)
    size = 30

    for _ in range(5):
        mask = rng.random((size, size)) < 0.6
        graph = lil_matrix((size * size, size * size))
        for r, c in np.argwhere(mask):
            for dr, dc in CLOCKWISE_OFFSETS:
                nr, nc = r + dr, c + dc
                if 0 <= nr < size and 0 <= nc < size and mask[nr, nc]:
                    graph[r * size + c, nr * size + nc] = step_cost(dr, dc)

        world = build_grid_world(mask)
        cells = world.road_cells()
        start = cells[int(rng.integers(len(cells)))]
        distances = dijkstra(graph.tocsr(), indices=start[0] * size + start[1])

        for index in rng.choice(len(cells), size=10, replace=False):
            goal = cells[int(index)]
            expected = distances[goal[0] * size + goal[1]]
            if np.isinf(expected):
                with pytest.raises(NoPathError):
                    shortest_path(world, start, goal)
            else:
                path = shortest_path(world, start, goal)
                path.check(world)
                assert path_length(path) == pytest.approx(expected, abs=1e-9)


def test_dump_and_load_search(tmp_path):
    path = tmp_path / "empty.csv"
    dump_search(SearchStats(), path)

    assert path.read_text() == "row,col,f,visit_index\n"
    assert load_search(path) == []

    stats = SearchStats(3, 3, 0.0, [VisitEntry((0, 0), 1.0, 0), VisitEntry((0, 1), 0.1 + 0.2, 1),
                                    VisitEntry((1, 1), 1 / 3, 2)])
    path = tmp_path / "search.csv"
    dump_search(stats, path)

    assert len(path.read_text().splitlines()) == 4
    assert load_search(path) == stats.visit_log


def test_load_search_rejects_bad_rows(tmp_path):
    path = tmp_path / "search.csv"
    path.write_text("row,col,f,visit_index\n0,0,0.5,0\n0,x,0.5,1\n")

    with pytest.raises(IngestError) as info:
        load_search(path)

    assert info.value.line_number == 3

    path.write_text("a,b\n")
    with pytest.raises(IngestError):
        load_search(path)
