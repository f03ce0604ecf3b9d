import math

import numpy as np
import pytest

from conftest import ZIGZAG_CELLS
from constants import CLOCKWISE_OFFSETS
from errors import WorldError
from ingest import GeoPoi
from utils import Tag
from world import (
    CellPath, MultiplierSet, Poi, Projection, attraction, attraction_field, build_grid_world, build_world,
    load_world, max_field_value, neighbors, rasterize_segment, save_world
)


def coulomb_oracle(rows, cols, pois):
    fields = np.zeros((len(Tag), rows, cols))
    for r in range(rows):
        for c in range(cols):
            for poi in pois:
                d2 = (r - poi.position[0]) ** 2 + (c - poi.position[1]) ** 2
                fields[int(poi.tag), r, c] += abs(poi.charge) / max(d2, 1)

    return fields


def random_pois(rng, rows, cols, count, tags):
    return [Poi((int(rng.integers(rows)), int(rng.integers(cols))), tags[int(rng.integers(len(tags)))],
                float(rng.uniform(1, 100)))
            for _ in range(count)]


def test_single_horizontal_road():
    projection = Projection(46.0, 14.0, 46.0, 10.0)
    east = 14.0 + 4 * 10.0 / projection.metres_per_degree_lon

    world = build_world([[(46.0, 14.0), (46.0, east)]], [], 10.0)

    assert world.rows == 1
    assert world.road_mask.sum() == 5
    assert world.road_mask[0].all()
    assert not world.tag_fields.any()


def test_one_poi_field():
    mask = np.ones((5, 5), dtype=bool)
    world = build_grid_world(mask, [Poi((0, 0), Tag.NATURAL, 4.0)])

    assert world.tag_fields[Tag.NATURAL, 0, 2] == 1.0
    assert world.tag_fields[Tag.NATURAL, 2, 0] == 1.0
    assert world.tag_fields[Tag.SHOP].sum() == 0.0


def test_fields_match_coulomb_oracle():
    rng = np.random.default_rng(20)
    pois = random_pois(rng, 50, 50, 20, [Tag.NATURAL, Tag.SHOP, Tag.SPORT])
    world = build_grid_world(np.ones((50, 50), dtype=bool), pois)

    np.testing.assert_allclose(world.tag_fields, coulomb_oracle(50, 50, pois), rtol=0, atol=1e-9)


def test_fields_are_defined_off_road():
    mask = np.zeros((5, 5), dtype=bool)
    mask[0, :] = True
    world = build_grid_world(mask, [Poi((4, 4), Tag.AMENITY, 2.0)])

    assert world.tag_fields[Tag.AMENITY, 3, 3] == pytest.approx(1.0)


def test_attraction_identity_multipliers():
    world = build_grid_world(np.ones((5, 5), dtype=bool), [Poi((0, 0), Tag.NATURAL, 4.0)])

    assert attraction(world, (0, 2), MultiplierSet.uniform()) == 1.0


def test_attraction_scales_one_tag():
    world = build_grid_world(np.ones((5, 5), dtype=bool), [Poi((0, 0), Tag.NATURAL, 2.0)])
    m = MultiplierSet((1, 1, 100, 1, 1, 1))

    assert world.tag_fields[Tag.NATURAL, 2, 0] == 0.5
    assert attraction(world, (2, 0), m) == pytest.approx(50.0)


def test_attraction_is_a_dot_product():
    rng = np.random.default_rng(3)
    pois = random_pois(rng, 12, 12, 18, list(Tag))
    world = build_grid_world(np.ones((12, 12), dtype=bool), pois)
    m = MultiplierSet((1, 25, 10, 75, 50, 100))

    for r, c in [(0, 0), (5, 7), (11, 3)]:
        expected = sum(m.values[k] * world.tag_fields[k, r, c] for k in range(len(Tag)))
        assert attraction(world, (r, c), m) == pytest.approx(expected, rel=1e-12)


def test_attraction_field_agrees_with_attraction():
    rng = np.random.default_rng(4)
    world = build_grid_world(np.ones((10, 10), dtype=bool), random_pois(rng, 10, 10, 8, list(Tag)))
    m = MultiplierSet((3, 1, 7, 2, 9, 4))
    field = attraction_field(world, m)

    for r in range(10):
        for c in range(10):
            assert field[r, c] == attraction(world, (r, c), m)


def test_attraction_out_of_bounds():
    world = build_grid_world(np.ones((3, 3), dtype=bool))

    with pytest.raises(WorldError):
        attraction(world, (3, 0), MultiplierSet.uniform())


def test_field_linearity():
    rng = np.random.default_rng(5)
    world = build_grid_world(np.ones((10, 10), dtype=bool), random_pois(rng, 10, 10, 10, list(Tag)))
    m = MultiplierSet((1, 2, 5, 10, 25, 50))
    doubled = MultiplierSet(tuple(2 * v for v in m.values))

    for cell in [(0, 0), (4, 6), (9, 9)]:
        assert attraction(world, cell, doubled) == pytest.approx(2 * attraction(world, cell, m), rel=1e-12)


def test_field_superposition():
    rng = np.random.default_rng(6)
    a = random_pois(rng, 20, 20, 6, list(Tag))
    b = random_pois(rng, 20, 20, 7, list(Tag))
    mask = np.ones((20, 20), dtype=bool)

    combined = build_grid_world(mask, a + b).tag_fields
    separate = build_grid_world(mask, a).tag_fields + build_grid_world(mask, b).tag_fields

    np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-9)


def test_single_poi_decays_with_distance():
    world = build_grid_world(np.ones((1, 12), dtype=bool), [Poi((0, 0), Tag.SPORT, 9.0)])
    values = [attraction(world, (0, c), MultiplierSet.uniform()) for c in range(12)]

    assert all(b <= a for a, b in zip(values, values[1:]))


def test_neighbors_full_neighbourhood():
    world = build_grid_world(np.ones((3, 3), dtype=bool))
    result = neighbors(world, (1, 1))

    assert len(result) == 8
    assert result[0] == (0, 1)
    assert result == [(1 + dr, 1 + dc) for dr, dc in CLOCKWISE_OFFSETS]


def test_neighbors_corridor():
    world = build_grid_world(np.ones((1, 5), dtype=bool))

    assert neighbors(world, (0, 2)) == [(0, 3), (0, 1)]


def test_neighbors_isolated_cell():
    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 1] = True

    assert neighbors(build_grid_world(mask), (1, 1)) == []


def test_neighbors_random_masks():
    rng = np.random.default_rng(7)
    for _ in range(10):
        mask = rng.random((20, 20)) < 0.5
        mask[0, 0] = True
        world = build_grid_world(mask)

        for r, c in world.road_cells()[:40]:
            expected = {(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                        if (dr or dc) and 0 <= r + dr < 20 and 0 <= c + dc < 20 and mask[r + dr, c + dc]}
            result = neighbors(world, (r, c))
            offsets = [(nr - r, nc - c) for nr, nc in result]

            assert set(result) == expected
            assert offsets == [o for o in CLOCKWISE_OFFSETS if o in offsets]


def test_max_field_value():
    world = build_grid_world(np.ones((8, 8), dtype=bool))
    assert max_field_value(world, MultiplierSet.uniform()) == 0.0

    world = build_grid_world(np.ones((8, 8), dtype=bool), [Poi((3, 4), Tag.OFFICE, 7.0)])
    m = MultiplierSet.uniform()
    top = max_field_value(world, m)

    assert top == 7.0
    assert all(top >= attraction(world, (r, c), m) for r in range(8) for c in range(8))


def test_poi_rejects_negative_charge():
    with pytest.raises(WorldError):
        Poi((0, 0), Tag.SHOP, -1.0)


def test_multiplier_set_bounds():
    with pytest.raises(WorldError):
        MultiplierSet((0.5, 1, 1, 1, 1, 1))

    with pytest.raises(WorldError):
        MultiplierSet((1, 1, 1, 1, 1, 101))

    with pytest.raises(WorldError):
        MultiplierSet((1, 1, 1))


def test_world_needs_a_road():
    with pytest.raises(WorldError, match="no navigable cells"):
        build_grid_world(np.zeros((4, 4), dtype=bool))

    with pytest.raises(WorldError, match="no navigable cells"):
        build_world([], [], 10.0)


def test_world_rejects_degenerate_bounding_box():
    with pytest.raises(WorldError):
        build_world([[(46.0, 14.0)]], [], 10.0)


def test_world_is_read_only(street_world):
    with pytest.raises(ValueError):
        street_world.tag_fields[0, 0, 0] = 1.0

    with pytest.raises(ValueError):
        street_world.road_mask[0, 0] = False


def test_queries_leave_the_world_untouched():
    world = build_grid_world(np.ones((8, 8), dtype=bool), [Poi((2, 3), Tag.SHOP, 9.0)])
    state = dict(vars(world))

    m = MultiplierSet((1, 25, 10, 75, 50, 100))
    field = attraction_field(world, m)
    max_field_value(world, MultiplierSet.uniform())
    world.road_cells().clear()
    neighbors(world, (4, 4))

    assert vars(world).keys() == state.keys()
    assert all(vars(world)[name] is value for name, value in state.items())
    assert len(world.road_cells()) == 64
    assert attraction_field(world, m) is not field

    with pytest.raises(ValueError):
        field[0, 0] = 0.0

    with pytest.raises(ValueError):
        world.road_array()[0, 0] = 1


def test_build_world_drops_outside_pois():
    north, west = 46.0, 14.0
    projection = Projection(north, west, north, 10.0)
    south = north - 9 * 10.0 / projection.metres_per_degree_lat
    east = west + 9 * 10.0 / projection.metres_per_degree_lon
    roads = [[(north, west), (north, east)], [(north, west), (south, west)]]
    pois = [
        GeoPoi(north, west, Tag.SHOP, 3.0),
        GeoPoi(north + 0.01, west, Tag.SHOP, 3.0),
        GeoPoi(south, east + 0.01, Tag.SPORT, 1.0),
    ]

    world = build_world(roads, pois, 10.0)

    assert world.dropped_pois == 2
    assert [poi.position for poi in world.pois] == [(0, 0)]
    assert world.road_mask[0, :].all()
    assert world.road_mask[:, 0].all()


def test_rasterize_segment_is_8_connected():
    for a, b in [((0, 0), (7, 3)), ((5, 9), (0, 0)), ((2, 2), (2, 8)), ((3, 3), (3, 3))]:
        cells = rasterize_segment(a, b)

        assert cells[0] == a
        assert cells[-1] == b
        assert all(max(abs(p[0] - q[0]), abs(p[1] - q[1])) == 1 for p, q in zip(cells, cells[1:]))


def test_projection_round_trip():
    projection = Projection(46.055, 14.5, 46.052, 10.0)
    lat, lon = projection.to_geo(12, 30)

    assert projection.to_cell(lat, lon) == (12, 30)
    assert projection.to_grid(lat, lon) == pytest.approx((12.0, 30.0))


def test_cell_path_check(zigzag_world):
    CellPath(ZIGZAG_CELLS).check(zigzag_world)

    with pytest.raises(WorldError, match="8-adjacent"):
        CellPath(((0, 0), (1, 2))).check(zigzag_world)

    with pytest.raises(WorldError, match="not a road cell"):
        CellPath(((0, 0), (1, 0))).check(zigzag_world)


def test_save_and_load_world(tmp_path, street_world):
    path = tmp_path / "world.json"
    save_world(street_world, path)
    loaded = load_world(path)

    assert (loaded.road_mask == street_world.road_mask).all()
    assert loaded.pois == street_world.pois
    assert loaded.projection == street_world.projection
    np.testing.assert_array_equal(loaded.tag_fields, street_world.tag_fields)


def test_load_world_rejects_malformed(tmp_path):
    path = tmp_path / "world.json"
    path.write_text('{"rows": 1}')

    with pytest.raises(WorldError):
        load_world(path)


def test_projection_scale():
    projection = Projection(0.0, 0.0, 60.0, 10.0)

    assert projection.metres_per_degree_lon == pytest.approx(projection.metres_per_degree_lat * 0.5)
    assert projection.metres_per_degree_lat == pytest.approx(111195.08, rel=1e-6)
    assert math.isclose(projection.to_grid(-1.0, 0.0)[0], projection.metres_per_degree_lat / 10.0)
