"""Command line entry point: ``pfnav <subcommand> [flags]``.

Subcommands: scene-gen, dataset-gen, eval, render, bench. Every subcommand
accepts ``--config file.json`` (see :mod:`pfnav.config`); explicit flags
override values from the file.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import dataset as ds
from .config import ConfigError, RunConfig, dumps_config, load_config
from .evaluation import dumps_report, evaluate
from .geodesics import DIJKSTRA, FMM, distance_field, success_zone_distance
from .grid import SemanticGrid, atomic_write, read_map, reveal, write_map
from .potentials import area_potential, combine, object_potential
from .predictor import KINDS, ORACLE, ExternalPredictor, make_predictor
from .render import draw_trajectory, map_image, overlay_field, save_png, write_pgm_field
from .scenegen import SceneParams, generate_scene
from .sim import POLICIES, EpisodeSpec, PolicySpec, Pose, run_episode

MANIFEST_VERSION = 1


class UsageError(Exception):
    pass


# -- scenes and manifests ----------------------------------------------------

def scene_params(cfg: RunConfig, seed: int) -> SceneParams:
    s = cfg.scene
    return SceneParams(seed=seed, width_m=s.width_m, height_m=s.height_m, room_count_range=s.room_count_range,
                       door_width_m=s.door_width_m, resolution=cfg.resolution_m)


def scene_id(seed: int) -> str:
    return f"scene_{seed:04d}"


def write_scenes(out_dir, cfg: RunConfig, seed: int, count: int) -> dict:
    """Generate ``count`` scenes with seeds ``seed .. seed+count-1`` and a manifest.json beside them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        s = seed + i
        name = scene_id(s)
        write_map(out / f"{name}.map", generate_scene(scene_params(cfg, s)))
        entries.append({"id": name, "seed": s, "path": f"{name}.map"})
    manifest = {"version": MANIFEST_VERSION, "resolution_m": cfg.resolution_m, "scenes": entries}
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def read_manifest(path) -> list[tuple[str, SemanticGrid]]:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read scene manifest {path}: {exc}") from None
    if manifest.get("version") != MANIFEST_VERSION:
        raise UsageError(f"unsupported manifest version {manifest.get('version')!r}")
    return [(e["id"], read_map(path.parent / e["path"])) for e in manifest["scenes"]]


def generated_scenes(cfg: RunConfig, count: int) -> list[tuple[str, SemanticGrid]]:
    seed = cfg.seeds.scene
    return [(scene_id(seed + i), generate_scene(scene_params(cfg, seed + i))) for i in range(count)]


# -- subcommands ---------------------------------------------------------------

def cmd_scene_gen(args, cfg: RunConfig) -> int:
    if args.count < 1:
        raise UsageError("--count must be positive")
    manifest = write_scenes(args.out, cfg, cfg.seeds.scene, args.count)
    print(f"wrote {len(manifest['scenes'])} scenes to {args.out}")
    return 0


def cmd_dataset_gen(args, cfg: RunConfig) -> int:
    if args.count < 1:
        raise UsageError("--count must be positive")
    scenes = read_manifest(args.scenes) if args.scenes else generated_scenes(cfg, args.num_scenes)
    tuples = ds.generate_dataset(scenes, args.count, cfg.seeds.dataset, cfg.mask, cfg.potential,
                                 augment_map=not args.no_augment)
    meta = {"seed": cfg.seeds.dataset, "count": args.count, "mask": cfg.mask.strategy,
            "scenes": [sid for sid, _ in scenes], "config": cfg.to_dict()}
    ds.write_dataset(args.out, tuples, meta)
    print(f"wrote {len(tuples)} tuples to {args.out}")
    return 0


def _policies(args, cfg: RunConfig) -> list[PolicySpec]:
    names = args.policy or list(POLICIES)
    predictor = args.predictor or ORACLE
    if args.predictor_cmd and predictor != "external":
        raise UsageError("--predictor-cmd requires --predictor external")
    if predictor == "external" and not args.predictor_cmd:
        raise UsageError("--predictor external requires --predictor-cmd")
    for n in names:
        if n not in POLICIES:
            raise UsageError(f"unknown policy {n!r}; expected one of {', '.join(POLICIES)}")
    if len(set(names)) != len(names):
        raise UsageError("--policy given twice with the same name")
    return [PolicySpec(n, predictor, cfg.potential) for n in names]


def cmd_eval(args, cfg: RunConfig) -> int:
    pols = _policies(args, cfg)
    if args.episodes < 1:
        raise UsageError("--episodes must be positive")
    scenes = read_manifest(args.scenes) if args.scenes else generated_scenes(cfg, args.num_scenes)
    ext = ExternalPredictor(args.predictor_cmd.split()) if args.predictor == "external" else None
    ev = evaluate(pols, scenes, args.episodes, cfg.seeds.eval, cfg.sensor, cfg.motion,
                  cfg.episode.budget_steps, cfg.episode.success_radius_m,
                  progress=_progress if args.verbose else None, predictor=ext)
    report = ev.report()
    report["run_config"] = cfg.to_dict()
    text = dumps_report(report)
    if args.report:
        atomic_write(args.report, text)
    else:
        sys.stdout.write(text)
    for name, agg in report["aggregate"].items():
        print(f"{name:>24}: success {agg['success']:.3f}  spl {agg['spl']:.3f}  "
              f"softspl {agg['softspl']:.3f}  dts {agg['dts_m']:.2f} m", file=sys.stderr)
    return 0


def _progress(label, spec):
    print(f"{spec.episode_id} {label}", file=sys.stderr)


def _parse_overlay(text: str):
    if text == "none":
        return ("none",)
    if text == "pf:area":
        return ("area",)
    if text.startswith("pf:object:") and len(text) > len("pf:object:"):
        return ("object", text[len("pf:object:"):])
    if text == "pf:combined":
        return ("combined",)
    if text.startswith("trajectory:"):
        parts = text[len("trajectory:"):].split(",")
        if len(parts) != 2 or not all(parts):
            raise UsageError("trajectory overlay needs trajectory:<report>,<episode id>")
        return ("trajectory", parts[0], parts[1])
    raise UsageError(f"unknown overlay {text!r}")


def _field_for(kind, grid, complete, cfg, args):
    predictor = args.predictor or ORACLE
    if predictor == ORACLE and complete is None:
        if not grid.complete:
            raise UsageError("potential overlays with the oracle need --complete <map>")
        complete = grid
    pred = ExternalPredictor(args.predictor_cmd.split()) if predictor == "external" else make_predictor(predictor)
    category = kind[1] if kind[0] == "object" else grid.categories.goal_ids[0]
    try:
        area, obj = pred.predict(grid, category, cfg.potential, complete)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    if kind[0] == "area":
        return area
    if kind[0] == "object":
        return obj
    return combine(area, obj, cfg.potential)


def _trajectory(report_path, episode_id, policy):
    try:
        report = json.loads(Path(report_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read report {report_path}: {exc}") from None
    for ep in report.get("episodes", []):
        if ep["episode_id"] == episode_id:
            results = ep["results"]
            name = policy or report["policies"][0]
            if name not in results:
                raise UsageError(f"policy {name!r} is not in the report")
            return [(p[0], p[1]) for p in results[name]["trajectory"]]
    raise UsageError(f"episode {episode_id!r} is not in {report_path}")


def cmd_render(args, cfg: RunConfig) -> int:
    overlay = _parse_overlay(args.overlay)
    grid = read_map(args.map)
    complete = read_map(args.complete) if args.complete else None
    img = map_image(grid)
    values = None
    if overlay[0] == "trajectory":
        cells = _trajectory(overlay[1], overlay[2], args.policy)
        if any(not grid.in_bounds(c) for c in cells):
            raise UsageError("trajectory does not fit the map")
        img = draw_trajectory(img, cells)
    elif overlay[0] != "none":
        values = _field_for(overlay, grid, complete, cfg, args)
        img = overlay_field(img, values)
    save_png(args.out, img, args.scale)
    if args.pgm:
        if values is None:
            raise UsageError("--pgm needs a potential overlay")
        write_pgm_field(args.pgm, values)
    return 0


def _timed(fn, repeat):
    fn()  # warm-up, includes kernel compilation
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cmd_bench(args, cfg: RunConfig) -> int:
    scene = generate_scene(scene_params(cfg, cfg.seeds.scene))
    goal = scene.categories.goal_ids[0]
    goal = next((g for g in scene.categories.goal_ids if (scene.objects == g).any()), goal)
    free = np.argwhere(~scene.obstacle)
    src = [tuple(free[len(free) // 2])]
    rng = np.random.default_rng(cfg.seeds.scene)
    mask = np.zeros(scene.shape, bool)
    r, c = free[rng.integers(len(free))]
    mask[max(r - 30, 0):r + 30, max(c - 30, 0):c + 30] = True
    partial = reveal(SemanticGrid.unexplored(*scene.shape, scene.resolution, scene.categories), scene, mask)
    zone = success_zone_distance(scene, goal)
    zf = zone.dist
    start = tuple(int(v) for v in free[np.argmax(np.where(np.isfinite(zf), zf, -1))])
    spec = EpisodeSpec(scene, Pose(start, 0), goal, cfg.episode.budget_steps, cfg.episode.success_radius_m)
    timings = {
        "distance_field_dijkstra_s": _timed(lambda: distance_field(scene, src, mode=DIJKSTRA), args.repeat),
        "distance_field_fmm_s": _timed(lambda: distance_field(scene, src, mode=FMM), args.repeat),
        "area_potential_s": _timed(lambda: area_potential(partial, scene, cfg.potential), args.repeat),
        "object_potential_s": _timed(lambda: object_potential(partial, scene, goal, cfg.potential), args.repeat),
        "episode_poni_s": _timed(lambda: run_episode(PolicySpec("poni", params=cfg.potential), spec,
                                                     cfg.sensor, cfg.motion), 1),
    }
    out = {"grid_shape": list(scene.shape), "repeat": args.repeat,
           "timings": {k: round(v, 6) for k, v in timings.items()}}
    text = json.dumps(out, indent=1, sort_keys=True) + "\n"
    if args.out:
        atomic_write(args.out, text)
    sys.stdout.write(text)
    return 0


# -- argument parsing ------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pfnav", description="Frontier potential functions for object-goal navigation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON run config; explicit flags override it")
        sp.add_argument("--dump-config", metavar="PATH", help="write the effective config and continue")
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--d-max", type=float)
        sp.add_argument("--resolution", type=float)

    sp = sub.add_parser("scene-gen", help="generate floor plans and a manifest")
    common(sp)
    sp.add_argument("--seed", type=int, help="seed of the first scene")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_scene_gen, seed_field="scene")

    sp = sub.add_parser("dataset-gen", help="build a training-tuple dataset")
    common(sp)
    sp.add_argument("--scenes", help="scene manifest.json (default: generate --num-scenes scenes)")
    sp.add_argument("--num-scenes", type=int, default=4)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--mask", choices=[ds.SQUARE, ds.VIEW_CONE])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--no-augment", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_dataset_gen, seed_field="dataset")

    sp = sub.add_parser("eval", help="run navigation policies and write a JSON report")
    common(sp)
    sp.add_argument("--policy", action="append", help=f"one of {', '.join(POLICIES)}; repeatable (default: all)")
    sp.add_argument("--predictor", choices=list(KINDS) + ["external"])
    sp.add_argument("--predictor-cmd", help="command for --predictor external")
    sp.add_argument("--scenes", help="scene manifest.json (default: generate --num-scenes scenes)")
    sp.add_argument("--num-scenes", type=int, default=2)
    sp.add_argument("--episodes", type=int, default=5, help="episodes per scene")
    sp.add_argument("--budget", type=int, help="step budget per episode")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--report", help="output JSON (default: stdout)")
    sp.add_argument("--verbose", action="store_true")
    sp.set_defaults(func=cmd_eval, seed_field="eval")

    sp = sub.add_parser("render", help="draw a map with an optional overlay")
    common(sp)
    sp.add_argument("--map", required=True)
    sp.add_argument("--complete", help="complete map, needed for oracle potential overlays on a partial map")
    sp.add_argument("--overlay", default="none",
                    help="none | pf:area | pf:object:<category> | pf:combined | trajectory:<report>,<episode>")
    sp.add_argument("--predictor", choices=list(KINDS) + ["external"])
    sp.add_argument("--predictor-cmd")
    sp.add_argument("--policy", help="policy whose trajectory to draw (default: first in report)")
    sp.add_argument("--scale", type=int, default=1)
    sp.add_argument("--pgm", help="also dump the overlay field as a 16-bit PGM")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_render, seed_field=None)

    sp = sub.add_parser("bench", help="time the core kernels on a generated scene")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--repeat", type=int, default=3)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench, seed_field="scene")
    return p


def effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {"potential.alpha": args.alpha, "potential.d_max": args.d_max, "resolution_m": args.resolution}
    if getattr(args, "mask", None):
        overrides["mask.strategy"] = args.mask
    if getattr(args, "budget", None) is not None:
        overrides["episode.budget_steps"] = args.budget
    if args.seed_field and getattr(args, "seed", None) is not None:
        overrides[f"seeds.{args.seed_field}"] = args.seed
    return cfg.with_values(**overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args)
        if args.dump_config:
            atomic_write(args.dump_config, dumps_config(cfg))
        return args.func(args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"pfnav {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: report, do not dump a traceback
        if os.environ.get("PFNAV_DEBUG"):
            raise
        print(f"pfnav {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
