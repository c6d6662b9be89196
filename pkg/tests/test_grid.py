import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

import oracles
from helpers import ascii_grid, blank_partial, random_partial, scene
from pfnav.grid import (CategoryTable, MapFormatError, SemanticGrid, ShapeMismatchError, associate_components,
                        default_categories, dilate8, dumps_map, extract_frontiers, frontier_mask, loads_map,
                        read_map, reveal, reveal_all, unexplored_components, write_map)


def grids(max_side=12):
    """Random small (partial, complete) pairs."""
    @st.composite
    def build(draw):
        h = draw(st.integers(1, max_side))
        w = draw(st.integers(1, max_side))
        obstacle = np.array(draw(st.lists(st.booleans(), min_size=h * w, max_size=h * w))).reshape(h, w)
        explored = np.array(draw(st.lists(st.booleans(), min_size=h * w, max_size=h * w))).reshape(h, w)
        complete = SemanticGrid(obstacle, np.ones((h, w), bool), np.full((h, w), -1, np.int16), 0.05)
        partial = reveal(SemanticGrid.unexplored(h, w, 0.05), complete, explored)
        return partial, complete
    return build()


# -- categories and grid invariants -------------------------------------------

def test_default_table_has_six_goals_and_four_distractors():
    t = default_categories()
    assert len(t) == 10
    assert len(t.goal_ids) == 6
    assert t.resolve("toilet") == t.index("toilet")
    with pytest.raises(KeyError):
        t.resolve("piano")
    with pytest.raises(KeyError):
        t.resolve(10)


def test_category_table_rejects_bad_tables():
    with pytest.raises(ValueError):
        CategoryTable(("a", "a"), (True, False))
    with pytest.raises(ValueError):
        CategoryTable(("a",), (False,))
    with pytest.raises(ValueError):
        CategoryTable(("a", "b"), (True,))


def test_unexplored_cells_are_canonical():
    g = SemanticGrid(np.ones((2, 2), bool), np.array([[1, 0], [0, 0]], bool), np.full((2, 2), 3, np.int16), 0.05)
    assert g.obstacle.tolist() == [[True, False], [False, False]]
    assert g.objects.tolist() == [[3, -1], [-1, -1]]
    assert not g.obstacle.flags.writeable


def test_grid_validation():
    with pytest.raises(ShapeMismatchError):
        SemanticGrid(np.zeros((2, 2), bool), np.zeros((2, 3), bool), np.zeros((2, 2), np.int16), 0.05)
    with pytest.raises(ValueError):
        SemanticGrid.unexplored(2, 2, 0.0)
    with pytest.raises(ValueError):
        SemanticGrid(np.zeros((1, 1), bool), np.ones((1, 1), bool), np.full((1, 1), 99, np.int16), 0.05)


# -- components -----------------------------------------------------------------

def test_components_of_fully_explored_grid_are_empty(scene0):
    assert unexplored_components(scene0, scene0) == []


def test_two_pockets_of_four_and_six():
    complete = ascii_grid([
        "......",
        "......",
        "######",
        "..#...",
        "..#...",
    ])
    explored = np.zeros(complete.shape, bool)
    explored[:3] = True
    partial = reveal(blank_partial(complete), complete, explored)
    comps = unexplored_components(partial, complete)
    assert sorted(c.area_cells for c in comps) == [4, 6]


def test_open_three_by_three_is_one_component():
    complete = ascii_grid(["...", "...", "..."])
    comps = unexplored_components(blank_partial(complete), complete)
    assert [c.area_cells for c in comps] == [9]


def test_components_need_a_complete_reference():
    partial = ascii_grid(["??", ".."])
    with pytest.raises(ValueError):
        unexplored_components(partial, partial)


@settings(max_examples=60, deadline=None)
@given(grids())
def test_components_match_flood_fill(pair):
    partial, complete = pair
    hidden = ~complete.obstacle & ~partial.explored
    got = sorted(sorted(map(tuple, c.cells.tolist())) for c in unexplored_components(partial, complete))
    want = sorted(sorted(c) for c in oracles.flood_labels(hidden.tolist()))
    assert got == want
    assert sum(len(c) for c in want) == int(hidden.sum())


def test_component_area_sum_on_fifty_random_grids():
    rng = np.random.default_rng(5)
    for _ in range(50):
        h, w = rng.integers(3, 25, size=2)
        obstacle = rng.random((h, w)) < 0.3
        complete = SemanticGrid(obstacle, np.ones((h, w), bool), np.full((h, w), -1, np.int16), 0.05)
        partial = reveal(blank_partial(complete), complete, rng.random((h, w)) < 0.5)
        naive = 0
        for r in range(h):
            for c in range(w):
                naive += (not complete.obstacle[r, c]) and (not partial.explored[r, c])
        assert sum(c.area_cells for c in unexplored_components(partial, complete)) == naive


# -- frontiers ----------------------------------------------------------------------

def test_no_frontiers_on_fully_explored_grid(scene0):
    assert extract_frontiers(scene0) == []
    assert extract_frontiers(reveal_all(scene0)) == []


def test_center_only_explored_gives_single_cell_frontier():
    g = ascii_grid(["???", "?.?", "???"])
    fs = extract_frontiers(g)
    assert len(fs) == 1 and fs[0].cells.tolist() == [[1, 1]]


def test_half_explored_corridor_has_one_frontier_across_it():
    rows = ["#" * 10] + ["." * 5 + "?" * 5] * 8 + ["#" * 10]
    fs = extract_frontiers(ascii_grid(rows))
    assert len(fs) == 1
    assert sorted(fs[0].cells.tolist()) == [[r, 4] for r in range(1, 9)]


@settings(max_examples=60, deadline=None)
@given(grids())
def test_frontier_mask_matches_neighbour_scan(pair):
    partial, _ = pair
    want = oracles.frontier_cells(partial.explored.tolist(), partial.obstacle.tolist())
    got = set(map(tuple, np.argwhere(frontier_mask(partial)).tolist()))
    assert got == want
    # frontiers are explored, components unexplored: always disjoint
    assert not (frontier_mask(partial) & ~partial.explored).any()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.integers(0, 3), st.integers(0, 2 ** 32 - 1))
def test_dilate8_matches_scipy(h, w, it, seed):
    mask = np.random.default_rng(seed).random((h, w)) < 0.2
    want = ndimage.binary_dilation(mask, np.ones((3, 3), bool), iterations=it) if it else mask
    assert np.array_equal(dilate8(mask, it), want)


# -- association ----------------------------------------------------------------------

def _assoc(partial, complete):
    return associate_components(extract_frontiers(partial), unexplored_components(partial, complete))


def test_single_frontier_single_component():
    complete = ascii_grid(["....", "...."])
    partial = reveal(blank_partial(complete), complete, [(0, 0), (1, 0)])
    assert list(_assoc(partial, complete).values()) == [[1]]


def test_walled_off_component_has_no_association():
    complete = ascii_grid([
        "...#...",
        "...#...",
        "...#...",
    ])
    explored = np.zeros(complete.shape, bool)
    explored[:, :4] = True
    explored[:, 3] = True
    partial = reveal(blank_partial(complete), complete, explored)
    comps = unexplored_components(partial, complete)
    assert len(comps) == 1
    assert all(not v for v in _assoc(partial, complete).values())
    assert extract_frontiers(partial) == []


def test_two_frontiers_share_one_component():
    complete = ascii_grid([
        ".......",
        ".......",
        ".......",
        "...#...",
        "...#...",
        "...#...",
        "...#...",
    ])
    # left and right explored strips, both open onto the hidden top rows
    explored = np.zeros(complete.shape, bool)
    explored[3:] = True
    partial = reveal(blank_partial(complete), complete, explored)
    fs = extract_frontiers(partial)
    comps = unexplored_components(partial, complete)
    assert len(fs) == 2 and len(comps) == 1
    assert _assoc(partial, complete) == {1: [1], 2: [1]}


def test_association_matches_brute_force_on_generated_scenes():
    rng = np.random.default_rng(11)
    for seed in range(3):
        complete = scene(seed)
        partial = random_partial(complete, rng)
        fs = extract_frontiers(partial)
        cs = unexplored_components(partial, complete)
        got = associate_components(fs, cs)
        comp_sets = [set(map(tuple, c.cells.tolist())) for c in cs]
        for f in fs:
            want = [c.id for c, cells in zip(cs, comp_sets)
                    if any((r + dr, cc + dc) in cells for r, cc in f.cells.tolist() for dr, dc in oracles.N8)]
            assert got[f.id] == want


# -- reveal -------------------------------------------------------------------------------

def test_reveal_identities(scene0):
    empty = blank_partial(scene0)
    assert reveal(empty, scene0, []) is empty
    full = reveal_all(scene0)
    assert full == scene0 and full.complete


def test_reveal_patch_shows_object():
    complete = ascii_grid(["...", ".4.", "..."])
    partial = reveal(blank_partial(complete), complete, [(r, c) for r in range(3) for c in range(3)])
    assert partial.objects[1, 1] == 4


def test_reveal_out_of_bounds():
    complete = ascii_grid(["..", ".."])
    with pytest.raises(IndexError):
        reveal(blank_partial(complete), complete, [(2, 0)])


@settings(max_examples=40, deadline=None)
@given(grids(), st.integers(0, 2 ** 32 - 1))
def test_reveal_is_monotone_and_idempotent(pair, seed):
    partial, complete = pair
    cells = np.random.default_rng(seed).random(complete.shape) < 0.3
    once = reveal(partial, complete, cells)
    assert (once.explored >= partial.explored).all()
    assert reveal(once, complete, cells) == once
    agree = once.explored
    assert np.array_equal(once.obstacle[agree], complete.obstacle[agree])


# -- container --------------------------------------------------------------------------

def test_map_round_trip(tmp_path, scene0):
    rng = np.random.default_rng(2)
    for g in (scene0, random_partial(scene0, rng), blank_partial(scene0)):
        write_map(tmp_path / "m.map", g)
        assert read_map(tmp_path / "m.map") == g
        assert loads_map(dumps_map(g)) == g


@pytest.mark.parametrize("mutate", [
    lambda t: t.replace("SEMGRID 1", "SEMGRID 9"),
    lambda t: t.replace("width", "wide", 1),
    lambda t: t[: t.index("cells") + 10],
    lambda t: t.replace(" f", " q", 1),
    lambda t: t.replace("complete 0", "complete 1"),
])
def test_map_format_errors(mutate):
    g = ascii_grid(["..?", "#.."])
    with pytest.raises(MapFormatError):
        loads_map(mutate(dumps_map(g)))
