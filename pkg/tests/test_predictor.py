import sys

import numpy as np
import pytest

from helpers import ascii_grid, blank_partial, random_partial, scene
from pfnav.dataset import IDENTITY, MaskParams, Provenance, TrainingTuple, VIEW_CONE, generate_dataset
from pfnav.grid import frontier_mask, reveal
from pfnav.potentials import PotentialParams, area_potential, object_potential
from pfnav.predictor import (AREA_HEURISTIC, ORACLE, UNIFORM, ExternalPredictor, OraclePredictor, evaluate_predictor,
                             make_predictor, predict)
from pfnav.scenegen import SceneParams, generate_scene

SMALL = dict(width_m=4.0, height_m=4.0, room_count_range=(1, 2))


def test_oracle_delegates_to_potentials(scene0):
    partial = random_partial(scene0, np.random.default_rng(1))
    p = PotentialParams(d_max=2.0)
    area, obj = predict(ORACLE, partial, scene0, "tv", p)
    assert np.array_equal(area, area_potential(partial, scene0, p))
    assert np.array_equal(obj, object_potential(partial, scene0, "tv", p))


def test_oracle_needs_complete_map(scene0):
    with pytest.raises(ValueError):
        predict(ORACLE, blank_partial(scene0), None, "tv")
    with pytest.raises(ValueError):
        make_predictor("network")


def test_uniform_sets_every_frontier_cell_to_one():
    g = ascii_grid([
        "..?..?..?",
        "..?..?..?",
    ])
    area, obj = predict(UNIFORM, g, None, "chair")
    f = frontier_mask(g)
    assert np.array_equal(area, f.astype(float))
    assert not obj.any()


def test_area_heuristic_normalizes_by_largest_frontier():
    g = ascii_grid([
        "....#........",
        "....#........",
        "????#????????",
    ])
    area, obj = predict(AREA_HEURISTIC, g, None, "chair")
    assert set(area[1, :4]) == {0.5}
    assert set(area[1, 5:]) == {1.0}
    assert not area[0].any() and not obj.any()
    empty, _ = predict(AREA_HEURISTIC, ascii_grid(["..", ".."]), None, "chair")
    assert not empty.any()


def test_all_kinds_give_unit_fields_off_frontier_zero(scene0):
    partial = random_partial(scene0, np.random.default_rng(7))
    f = frontier_mask(partial)
    for kind in (ORACLE, AREA_HEURISTIC, UNIFORM):
        for field in predict(kind, partial, scene0, "bed"):
            assert ((field >= 0) & (field <= 1)).all()
            assert not field[~f].any()


@pytest.mark.parametrize("strategy", ["square", VIEW_CONE])
def test_oracle_scores_zero_on_generated_dataset(strategy):
    scenes = [(f"s{i}", generate_scene(SceneParams(seed=i, **SMALL))) for i in range(2)]
    ds = generate_dataset(scenes, 6, seed=3, mask_params=MaskParams(strategy=strategy))
    score = evaluate_predictor(ORACLE, ds, scenes=dict(scenes))
    assert (score.loss_area, score.loss_object) == (0.0, 0.0)
    assert score.evaluated == 6 and score.skipped == 0
    with pytest.raises(ValueError):
        evaluate_predictor(ORACLE, ds)


def _tuple(partial, area_value, obj_value):
    f = frontier_mask(partial)
    n = len(partial.categories)
    return TrainingTuple(partial, np.where(f, area_value, 0.0), np.where(f, obj_value, 0.0)[None].repeat(n, 0),
                         np.argwhere(f), Provenance("x", 0, IDENTITY))


def test_uniform_losses_by_hand():
    g = ascii_grid(["....??", "....??", "....??"])
    exact = evaluate_predictor(UNIFORM, [_tuple(g, 1.0, 0.0)])
    assert (exact.loss_area, exact.loss_object) == (0.0, 0.0)
    quarter = evaluate_predictor(UNIFORM, [_tuple(g, 0.25, 0.0)])
    assert quarter.loss_area == 0.5625
    assert quarter.loss_object == 0.0


def test_empty_frontier_tuples_are_skipped():
    done = ascii_grid(["...", "..."])
    g = ascii_grid(["..?"])
    score = evaluate_predictor(UNIFORM, [_tuple(done, 0.0, 0.0), _tuple(g, 1.0, 0.0)])
    assert (score.evaluated, score.skipped) == (1, 1)
    with pytest.raises(ValueError):
        evaluate_predictor(UNIFORM, [])


EXTERNAL = """
import sys
import numpy as np
from pfnav.grid import read_map, frontier_mask
from pfnav.render import write_pgm_field
g = read_map(sys.argv[1])
write_pgm_field(sys.argv[3], np.full(g.shape, 0.5))
write_pgm_field(sys.argv[4], np.full(g.shape, 1.0 if sys.argv[2] == "bed" else 0.0))
"""


def test_external_predictor_file_exchange(tmp_path):
    script = tmp_path / "pred.py"
    script.write_text(EXTERNAL)
    ext = ExternalPredictor([sys.executable, str(script)])
    partial = random_partial(scene(0), np.random.default_rng(2))
    f = frontier_mask(partial)
    area, obj = ext.predict(partial, "bed", PotentialParams())
    # 16-bit levels: within half a level of the written value
    assert np.abs(area - np.where(f, 0.5, 0.0)).max() <= 0.5 / 65535
    assert np.array_equal(obj, f.astype(float))
    _, other = ext.predict(partial, "tv", PotentialParams())
    assert not other.any()


def test_oracle_cache_follows_the_map():
    a, b = scene(0), scene(1)
    pred = OraclePredictor()
    pa = reveal(blank_partial(a), a, np.ones(a.shape, bool) & (np.arange(a.shape[1]) < 60))
    pb = reveal(blank_partial(b), b, np.ones(b.shape, bool) & (np.arange(b.shape[1]) < 60))
    assert np.array_equal(pred.predict(pa, "tv", PotentialParams(), a)[1], object_potential(pa, a, "tv"))
    assert np.array_equal(pred.predict(pb, "tv", PotentialParams(), b)[1], object_potential(pb, b, "tv"))
