"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line (collected again in the terminal summary)
and fails when its criterion fails. Criteria 5 and 6 share one evaluation of
all four policies on 200 episodes over 10 generated scenes.
"""
import math

import numpy as np
import pytest

import oracles
from helpers import ascii_grid, blank_partial, random_partial, scene
from pfnav.cli import main
from pfnav.dataset import (SQUARE, VIEW_CONE, MaskParams, apply_augmentation, dumps_dataset, exploration_mask,
                           generate_dataset, loads_dataset, recompute_targets)
from pfnav.evaluation import evaluate
from pfnav.geodesics import FMM, distance_field, shortest_path
from pfnav.grid import SemanticGrid, frontier_mask, reveal
from pfnav.metrics import dts, soft_spl, spl
from pfnav.potentials import (PotentialParams, area_potential, combine, combine_with_action_cost, object_potential,
                              pf_loss)
from pfnav.predictor import ORACLE, evaluate_predictor
from pfnav.scenegen import SceneParams, generate_scene
from pfnav.sim import POLICIES, PolicySpec

NAV_SCENES = 10
NAV_EPISODES = 20  # per scene: 200 in total
NAV_SEED = 0


def test_criterion_01_oracle_potentials_exact(verdict):
    rng = np.random.default_rng(2024)
    area_bad = obj_bad = 0
    for seed in range(50):
        complete = generate_scene(SceneParams(seed=seed))
        partial = random_partial(complete, rng)
        want = oracles.area_potential(partial.explored, partial.obstacle, complete.obstacle)
        area_bad += not np.array_equal(area_potential(partial, complete), want)
        goals = complete.categories.goal_ids
        cid = goals[seed % len(goals)]
        d_max = (1.0, 3.0, 10.0)[seed % 3]
        want = oracles.object_potential(partial.explored, partial.obstacle, complete.obstacle,
                                        complete.objects == cid, complete.resolution, d_max)
        obj_bad += not np.array_equal(object_potential(partial, complete, cid, PotentialParams(d_max=d_max)), want)
    verdict(1, "oracle potentials match brute force exactly on 50 scenes", area_bad == 0 and obj_bad == 0,
            f"area mismatches {area_bad}, object mismatches {obj_bad}")


def test_criterion_02_object_potential_endpoints(verdict):
    # toilet at the west end of a corridor; 0.25 m cells, so the 1 m zone ends at column 4
    complete = ascii_grid(["#" * 16, "4" + "." * 15, "#" * 16], resolution=0.25)
    got = {}
    for col in (4, 6, 8, 12):
        explored = np.zeros(complete.shape, bool)
        explored[:, :col + 1] = True
        partial = reveal(blank_partial(complete), complete, explored)
        got[col] = object_potential(partial, complete, "toilet", PotentialParams(d_max=1.0))[1, col]
    ok = got[4] == 1.0 and got[8] == 0.0 and got[12] == 0.0 and abs(got[6] - 0.5) <= 1e-12
    verdict(2, "object potential is 1 at d=0, 0 beyond d_max, 0.5 at d_max/2", ok,
            ", ".join(f"d={(c - 4) * 0.25:.2f} m -> {float(v)!r}" for c, v in got.items()))


def test_criterion_03_combination_reductions(verdict):
    rng = np.random.default_rng(3)
    a, o, d = rng.random((3, 50, 50))
    ok_a = np.array_equal(combine(a, o, PotentialParams(alpha=1.0)), a)
    ok_o = np.array_equal(combine(a, o, PotentialParams(alpha=0.0)), o)
    ok_g = all(np.array_equal(combine_with_action_cost(a, o, d, PotentialParams(alpha=al, beta=1.0 - al, gamma=0.0)),
                              combine(a, o, PotentialParams(alpha=al)))
               for al in (0.0, 0.25, 0.5, 0.9, 1.0))
    verdict(3, "alpha=1 and alpha=0 reduce bitwise; gamma=0 matches the plain combination", ok_a and ok_o and ok_g,
            f"alpha=1 {ok_a}, alpha=0 {ok_o}, gamma=0 {ok_g}")


def test_criterion_04_geodesic_engine(verdict):
    res = 0.05
    open_grid = SemanticGrid(np.zeros((60, 60), bool), np.ones((60, 60), bool), np.full((60, 60), -1, np.int16), res)
    rng = np.random.default_rng(4)
    ratios = []
    while len(ratios) < 100:
        a, b = tuple(rng.integers(60, size=2)), tuple(rng.integers(60, size=2))
        if a != b:
            ratios.append(distance_field(open_grid, [a])[b] / (math.dist(a, b) * res))
    ok_bound = min(ratios) >= 1.0 and max(ratios) <= 1.083
    dj = distance_field(open_grid, [(30, 30)]).dist
    fm = distance_field(open_grid, [(30, 30)], mode=FMM).dist
    rel = float(np.max(np.abs(fm[dj > 0] - dj[dj > 0]) / dj[dj > 0]))
    g = scene(0)
    free = np.argwhere(~g.obstacle)
    path_ok = True
    for _ in range(30):
        s, t = (tuple(free[i]) for i in rng.integers(len(free), size=2))
        f = distance_field(g, [s])
        path_ok &= shortest_path(f, t).length_m == f[t]
    verdict(4, "octile bound, fmm within 10%, path length equals field value",
            ok_bound and rel < 0.10 and path_ok,
            f"ratio range [{min(ratios):.4f}, {max(ratios):.4f}], fmm max rel err {rel:.4f}, paths exact {path_ok}")


@pytest.fixture(scope="module")
def navigation():
    scenes = [(f"scene_{i:04d}", generate_scene(SceneParams(seed=i))) for i in range(NAV_SCENES)]
    ev = evaluate([PolicySpec(n) for n in POLICIES], scenes, NAV_EPISODES, seed=NAV_SEED)
    return ev.aggregate()


def _summary(agg, names):
    return "; ".join(f"{n} success {agg[n]['success']:.3f} spl {agg[n]['spl']:.3f}" for n in names)


def test_criterion_05_potentials_beat_frontier_exploration(navigation, verdict):
    poni, fbe = navigation["poni"], navigation["fbe"]
    assert poni["episodes"] == NAV_SCENES * NAV_EPISODES
    ok = poni["success"] >= fbe["success"] and poni["spl"] >= fbe["spl"] + 0.05
    verdict(5, "oracle potentials beat nearest-frontier exploration on 200 episodes", ok,
            _summary(navigation, ["poni", "fbe"]))


def test_criterion_06_combined_beats_single_potentials(navigation, verdict):
    c, a, o = navigation["poni"], navigation["area_only"], navigation["object_only"]
    ok = c["spl"] >= a["spl"] and c["spl"] >= o["spl"] and c["success"] >= a["success"] - 0.02
    verdict(6, "combined potential at least matches area-only and object-only", ok,
            _summary(navigation, ["poni", "area_only", "object_only"]))


def test_criterion_07_metrics(verdict):
    checks = {
        "spl 10/20": spl(True, 10.0, 20.0) == 0.5,
        "spl failure": spl(False, 10.0, 10.0) == 0.0,
        "dts zero in zone": dts(0.0) == 0.0 and dts(0.3) > 0,
        "softspl = spl at d_T=0": all(soft_spl(o, 0.0, o, a) == spl(True, o, a)
                                      for o, a in ((10.0, 20.0), (3.0, 3.0), (5.0, 7.5))),
    }
    verdict(7, "metric unit checks", all(checks.values()), ", ".join(f"{k} {v}" for k, v in checks.items()))


def _sealed_rooms():
    rows = ["#" * 70] + ["#" + "." * 30 + "#" * 4 + "." * 34 + "#"] * 38 + ["#" * 70]
    return ascii_grid(rows)


def test_criterion_08_dataset_contract(tmp_path, verdict, capsys):
    args = ["dataset-gen", "--num-scenes", "2", "--count", "6", "--seed", "8"]
    main(args + ["--out", str(tmp_path / "a.pfd")])
    main(args + ["--out", str(tmp_path / "b.pfd")])
    same_bytes = (tmp_path / "a.pfd").read_bytes() == (tmp_path / "b.pfd").read_bytes()

    scenes = [(f"s{i}", generate_scene(SceneParams(seed=i))) for i in range(2)]
    lookup = dict(scenes)
    recompute_ok = round_trip_ok = True
    for strategy in (SQUARE, VIEW_CONE):
        tuples = generate_dataset(scenes, 6, seed=5, mask_params=MaskParams(strategy=strategy))
        for t in tuples:
            complete = apply_augmentation(lookup[t.provenance.scene_id], t.provenance.augmentation)
            area, objs = recompute_targets(t.partial, complete)
            recompute_ok &= np.array_equal(area, t.target_area) and np.array_equal(objs, t.target_objects)
            recompute_ok &= np.array_equal(np.argwhere(frontier_mask(t.partial)), t.frontier_cells)
        round_trip_ok &= loads_dataset(dumps_dataset(tuples))[1] == tuples

    # view cones from anywhere in the west room never see into the sealed east room
    g = _sealed_rooms()
    west = np.argwhere(~g.obstacle[:, :32])
    rng = np.random.default_rng(8)
    leaked = 0
    for _ in range(40):
        a, b = (tuple(west[i]) for i in rng.integers(len(west), size=2))
        path = shortest_path(distance_field(g, [b]), a)
        mask = exploration_mask(g, path, MaskParams(strategy=VIEW_CONE, cone_radius_m=3.0, cone_fov_deg=90.0))
        leaked += int(mask[:, 35:].sum())
    verdict(8, "dataset determinism, exact targets, round trip, both masks, occlusion",
            same_bytes and recompute_ok and round_trip_ok and leaked == 0,
            f"identical bytes {same_bytes}, targets exact {recompute_ok}, round trip {round_trip_ok}, "
            f"occluded cells revealed {leaked}")


def test_criterion_09_predictor_contract(verdict):
    scenes = [(f"s{i}", generate_scene(SceneParams(seed=10 + i))) for i in range(2)]
    scores = []
    for strategy in (SQUARE, VIEW_CONE):
        ds = generate_dataset(scenes, 5, seed=9, mask_params=MaskParams(strategy=strategy))
        s = evaluate_predictor(ORACLE, ds, scenes=dict(scenes))
        scores.append((s.loss_area, s.loss_object))
    zero = np.zeros((2, 3))
    pred = zero.copy()
    pred[0, 0], pred[1, 2] = 0.1, 0.3
    cells = [(0, 0), (1, 2)]
    by_hand = (pf_loss(zero, [zero], zero, [zero], cells) == (0.0, 0.0)
               and pf_loss(zero, [zero], np.ones((2, 3)), [np.ones((2, 3))], cells) == (1.0, 1.0)
               and abs(pf_loss(pred, [zero], zero, [zero], cells)[0] - 0.05) <= 1e-15)
    verdict(9, "oracle predictor scores (0, 0); loss arithmetic matches hand values",
            all(s == (0.0, 0.0) for s in scores) and by_hand, f"oracle losses {scores}, hand examples {by_hand}")


def test_criterion_10_eval_determinism(tmp_path, verdict, capsys):
    args = ["eval", "--seed", "1", "--num-scenes", "1", "--episodes", "2", "--policy", "poni", "--policy", "fbe"]
    codes = [main(args + ["--report", str(tmp_path / f"{n}.json")]) for n in "ab"]
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    verdict(10, "eval reports are byte-identical across runs", codes == [0, 0] and a == b,
            f"exit codes {codes}, {len(a)} bytes")
