"""Batch evaluation: episode sampling, policy runs and the JSON report.

Report schema (``REPORT_VERSION`` 1)::

    {
      "version": 1,
      "config": {...},                 # seed, episodes_per_scene, sensor/motion params
      "policies": ["poni", ...],
      "aggregate": {policy: {"episodes", "success", "spl", "softspl", "dts_m", "collisions"}},
      "episodes": [{"episode_id", "scene_id", "goal", "goal_name", "start": [r, c, h],
                    "results": {policy: EpisodeResult.to_dict()}}]
    }
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .geodesics import success_zone_distance
from .grid import SemanticGrid, atomic_write
from .predictor import Predictor
from .sim import EpisodeResult, EpisodeSpec, MotionParams, PolicySpec, Pose, SensorParams, run_episode

REPORT_VERSION = 1
MIN_START_M = 2.0
MAX_START_M = 30.0


def sample_episodes(scene: SemanticGrid, count: int, seed: int, scene_id: str = "", *, budget_steps: int = 500,
                    success_radius_m: float = 1.0, turn_deg: int = 30, max_tries: int = 1000
                    ) -> list[EpisodeSpec]:
    """Episodes with a start 2-30 m (geodesic) from the goal's success zone."""
    rng = np.random.default_rng(seed)
    goals = [g for g in scene.categories.goal_ids if (scene.objects == g).any()]
    if not goals:
        raise ValueError(f"scene {scene_id!r} holds no goal category")
    free = np.argwhere(~scene.obstacle)
    zones: dict[int, np.ndarray] = {}
    specs = []
    for i in range(count):
        for _ in range(max_tries):
            goal = int(goals[rng.integers(len(goals))])
            if goal not in zones:
                zones[goal] = success_zone_distance(scene, goal, success_radius_m).dist
            r, c = free[rng.integers(len(free))]
            d = zones[goal][r, c]
            if MIN_START_M <= d <= MAX_START_M:
                break
        else:
            raise ValueError(f"no valid start found in scene {scene_id!r}")
        heading = int(rng.integers(360 // turn_deg)) * turn_deg
        specs.append(EpisodeSpec(scene, Pose((int(r), int(c)), heading), goal, budget_steps, success_radius_m,
                                 episode_id=f"{scene_id}:{i}", seed=int(rng.integers(2 ** 31))))
    return specs


def _mean(values):
    return float(np.mean(values)) if len(values) else 0.0


def aggregate(results: Sequence[EpisodeResult]) -> dict:
    return {
        "episodes": len(results),
        "success": _mean([float(r.success) for r in results]),
        "spl": _mean([r.spl for r in results]),
        "softspl": _mean([r.softspl for r in results]),
        "dts_m": _mean([r.dts_m for r in results]),
        "collisions": _mean([float(r.collisions) for r in results]),
    }


@dataclass
class Evaluation:
    policies: list[str]
    specs: list[EpisodeSpec]
    scene_ids: list[str]
    results: dict[str, list[EpisodeResult]]
    config: dict

    def aggregate(self) -> dict:
        return {name: aggregate(self.results[name]) for name in self.policies}

    def report(self) -> dict:
        episodes = []
        for i, spec in enumerate(self.specs):
            episodes.append({
                "episode_id": spec.episode_id,
                "scene_id": self.scene_ids[i],
                "goal": spec.goal,
                "goal_name": spec.scene.categories.names[spec.goal],
                "start": spec.start.as_list(),
                "results": {name: self.results[name][i].to_dict() for name in self.policies},
            })
        return {"version": REPORT_VERSION, "config": self.config, "policies": list(self.policies),
                "aggregate": self.aggregate(), "episodes": episodes}


def policy_label(p: PolicySpec) -> str:
    return p.name if p.predictor == "oracle" or p.name == "fbe" else f"{p.name}:{p.predictor}"


def evaluate(policies: Sequence[PolicySpec | str], scenes: Sequence[tuple[str, SemanticGrid]],
             episodes_per_scene: int, seed: int, sensors: SensorParams = SensorParams(),
             motion: MotionParams = MotionParams(), budget_steps: int = 500, success_radius_m: float = 1.0,
             progress=None, predictor: Predictor | None = None) -> Evaluation:
    """Run every policy on the same episode list.

    ``predictor`` replaces the one each policy names (FBE never uses one).

    Episodes for scene ``i`` are sampled from ``seed`` and ``i`` only, so adding
    scenes or policies leaves earlier episodes unchanged.
    """
    if not scenes:
        raise ValueError("at least one scene is required")
    pols = [PolicySpec(p) if isinstance(p, str) else p for p in policies]
    labels = [policy_label(p) for p in pols]
    if len(set(labels)) != len(labels):
        raise ValueError("policy list has duplicates")
    specs, ids = [], []
    for i, (sid, grid) in enumerate(scenes):
        sub_seed = int(np.random.default_rng([seed, i]).integers(2 ** 63))
        new = sample_episodes(grid, episodes_per_scene, sub_seed, sid, budget_steps=budget_steps,
                              success_radius_m=success_radius_m, turn_deg=motion.turn_deg)
        specs.extend(new)
        ids.extend([sid] * len(new))
    results: dict[str, list[EpisodeResult]] = {lab: [] for lab in labels}
    for spec in specs:
        for lab, pol in zip(labels, pols):
            results[lab].append(run_episode(pol, spec, sensors, motion, predictor=predictor))
            if progress is not None:
                progress(lab, spec)
    config = {
        "seed": seed,
        "episodes_per_scene": episodes_per_scene,
        "budget_steps": budget_steps,
        "success_radius_m": success_radius_m,
        "sensors": asdict(sensors),
        "motion": asdict(motion),
        "policy_params": {lab: {"name": p.name, "predictor": p.predictor, "resample_every": p.resample_every,
                                **asdict(p.potential_params)} for lab, p in zip(labels, pols)},
        "scenes": [sid for sid, _ in scenes],
    }
    return Evaluation(labels, specs, ids, results, config)


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


def write_report(path, report: dict) -> None:
    atomic_write(path, dumps_report(report))
