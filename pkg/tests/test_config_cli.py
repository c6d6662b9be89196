import json

import numpy as np
import pytest

from helpers import ascii_grid, blank_partial, random_partial, scene
from pfnav.cli import main, read_manifest
from pfnav.config import ConfigError, RunConfig, config_from_dict, dumps_config, load_config, loads_config
from pfnav.dataset import read_dataset, read_dataset_meta
from pfnav.grid import write_map
from pfnav.potentials import object_potential
from pfnav.render import (count_trajectory_pixels, draw_trajectory, load_png, map_image, overlay_field,
                          read_pgm_field)


# -- config -----------------------------------------------------------------------------------

def test_config_round_trip():
    cfg = RunConfig().with_values(**{"potential.alpha": 0.3, "mask.strategy": "view-cone", "seeds.eval": 9,
                                     "scene.room_count_range": [2, 4]})
    assert loads_config(dumps_config(cfg)) == cfg
    assert dumps_config(loads_config(dumps_config(cfg))) == dumps_config(cfg)


@pytest.mark.parametrize("data, field", [
    ({"potential": {"alpha": 1.5}}, "potential.alpha"),
    ({"potential": {"color": 1}}, "potential.color"),
    ({"sensors": {}}, "sensors"),
    ({"resolution_m": -1}, "resolution_m"),
    ({"resolution_m": "fine"}, "resolution_m"),
    ({"sensor": {"fov_deg": 0}}, "sensor"),
    ({"mask": []}, "mask"),
])
def test_config_errors_name_the_field(data, field):
    with pytest.raises(ConfigError) as err:
        config_from_dict(data)
    assert field in str(err.value)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
    with pytest.raises(ConfigError):
        RunConfig().with_values(**{"potential.colour": 1})


# -- CLI ----------------------------------------------------------------------------------------

def test_scene_gen_writes_maps_and_manifest(tmp_path, capsys):
    assert main(["scene-gen", "--seed", "7", "--count", "3", "--out", str(tmp_path / "s")]) == 0
    maps = sorted(p.name for p in (tmp_path / "s").glob("*.map"))
    assert maps == ["scene_0007.map", "scene_0008.map", "scene_0009.map"]
    manifest = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert [e["seed"] for e in manifest["scenes"]] == [7, 8, 9]
    loaded = read_manifest(tmp_path / "s" / "manifest.json")
    assert [sid for sid, _ in loaded] == ["scene_0007", "scene_0008", "scene_0009"]
    assert all(g.complete for _, g in loaded)


def test_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"potential": {"alpha": 1.5}}))
    assert main(["scene-gen", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "potential.alpha" in capsys.readouterr().err
    cfg.write_text(json.dumps({"potentials": {}}))
    assert main(["scene-gen", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    with pytest.raises(SystemExit) as err:
        main(["scene-gen", "--bogus"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
    assert main(["eval", "--policy", "random"]) == 2
    assert main(["render", "--map", str(tmp_path / "none.map"), "--out", str(tmp_path / "o.png")]) == 1


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"potential": {"alpha": 0.2, "d_max": 4.0}, "seeds": {"scene": 3}}))
    dump = tmp_path / "eff.json"
    assert main(["scene-gen", "--config", str(cfg), "--alpha", "0.7", "--seed", "5", "--dump-config", str(dump),
                 "--out", str(tmp_path / "s")]) == 0
    eff = load_config(dump)
    assert eff.potential.alpha == 0.7 and eff.potential.d_max == 4.0 and eff.seeds.scene == 5
    # the dump re-parses to an equal config
    assert dumps_config(eff) == dump.read_text()


def test_eval_is_byte_identical_across_runs(tmp_path, capsys):
    args = ["eval", "--policy", "poni", "--predictor", "oracle", "--seed", "1", "--num-scenes", "1",
            "--episodes", "2"]
    assert main(args + ["--report", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--report", str(tmp_path / "b.json")]) == 0
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    assert a == b
    report = json.loads(a)
    assert report["policies"] == ["poni"] and len(report["episodes"]) == 2
    assert set(report["aggregate"]["poni"]) >= {"success", "spl", "softspl", "dts_m"}
    assert "poni" in capsys.readouterr().err


def test_dataset_gen_both_masks(tmp_path, capsys):
    assert main(["scene-gen", "--seed", "2", "--count", "2", "--out", str(tmp_path / "s")]) == 0
    for mask in ("square", "view-cone"):
        out = tmp_path / f"{mask}.pfd"
        assert main(["dataset-gen", "--scenes", str(tmp_path / "s" / "manifest.json"), "--count", "3",
                     "--mask", mask, "--seed", "4", "--out", str(out)]) == 0
        tuples = read_dataset(out)
        assert len(tuples) == 3
        assert read_dataset_meta(out)["mask"] == mask
    again = tmp_path / "again.pfd"
    main(["dataset-gen", "--scenes", str(tmp_path / "s" / "manifest.json"), "--count", "3", "--mask", "view-cone",
          "--seed", "4", "--out", str(again)])
    assert again.read_bytes() == (tmp_path / "view-cone.pfd").read_bytes()


# -- render ---------------------------------------------------------------------------------------

def test_empty_map_renders_uniform_unexplored(tmp_path):
    g = blank_partial(ascii_grid(["....", "...."]))
    write_map(tmp_path / "e.map", g)
    assert main(["render", "--map", str(tmp_path / "e.map"), "--out", str(tmp_path / "e.png")]) == 0
    img = load_png(tmp_path / "e.png")
    assert img.shape == (2, 4, 3)
    assert len(np.unique(img.reshape(-1, 3), axis=0)) == 1


def test_zero_field_overlay_is_identity(scene0):
    img = map_image(random_partial(scene0, np.random.default_rng(0)))
    assert np.array_equal(overlay_field(img, np.zeros(scene0.shape)), img)


def test_area_overlay_and_pgm_dump(tmp_path, scene0):
    partial = random_partial(scene0, np.random.default_rng(3))
    write_map(tmp_path / "p.map", partial)
    write_map(tmp_path / "c.map", scene0)
    assert main(["render", "--map", str(tmp_path / "p.map"), "--complete", str(tmp_path / "c.map"),
                 "--overlay", "pf:object:bed", "--pgm", str(tmp_path / "bed.pgm"), "--scale", "2",
                 "--out", str(tmp_path / "bed.png")]) == 0
    assert load_png(tmp_path / "bed.png").shape == (2 * scene0.shape[0], 2 * scene0.shape[1], 3)
    want = object_potential(partial, scene0, "bed")
    assert np.abs(read_pgm_field(tmp_path / "bed.pgm") - want).max() <= 0.5 / 65535
    # oracle overlays on a partial map need the complete map
    assert main(["render", "--map", str(tmp_path / "p.map"), "--overlay", "pf:area",
                 "--out", str(tmp_path / "a.png")]) == 2
    assert main(["render", "--map", str(tmp_path / "p.map"), "--overlay", "heat",
                 "--out", str(tmp_path / "a.png")]) == 2


def test_trajectory_overlay_marks_each_visited_cell(tmp_path, capsys):
    assert main(["scene-gen", "--seed", "0", "--count", "1", "--out", str(tmp_path / "s")]) == 0
    manifest = tmp_path / "s" / "manifest.json"
    assert main(["eval", "--scenes", str(manifest), "--policy", "fbe", "--episodes", "1",
                 "--report", str(tmp_path / "r.json")]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    ep = report["episodes"][0]
    traj = [tuple(p[:2]) for p in ep["results"]["fbe"]["trajectory"]]
    out = tmp_path / "t.png"
    assert main(["render", "--map", str(tmp_path / "s" / "scene_0000.map"),
                 "--overlay", f"trajectory:{tmp_path / 'r.json'},{ep['episode_id']}", "--out", str(out)]) == 0
    assert count_trajectory_pixels(load_png(out)) == len(set(traj))
    assert main(["render", "--map", str(tmp_path / "s" / "scene_0000.map"),
                 "--overlay", f"trajectory:{tmp_path / 'r.json'},nope:9", "--out", str(out)]) == 2


def test_trajectory_drawing_on_synthetic_path():
    g = scene(0)
    img = draw_trajectory(map_image(g), [(20, 20), (20, 20), (20, 25), (25, 25)])
    assert count_trajectory_pixels(img) == 3


def test_bench_writes_timings(tmp_path, capsys):
    assert main(["bench", "--repeat", "1", "--out", str(tmp_path / "b.json")]) == 0
    out = json.loads((tmp_path / "b.json").read_text())
    assert all(v >= 0 for v in out["timings"].values())
