"""Potential-function predictors behind one interface.

Every predictor maps (partial map, goal category) to an (area, object)
pair of [0, 1] fields. The oracle reads the complete map; the heuristics
see only the partial map. :class:`ExternalPredictor` shells out to any
program that speaks the file exchange described on the class.
"""
from __future__ import annotations

import os
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .dataset import TrainingTuple, apply_augmentation
from .geodesics import DistanceField, success_zone_distance
from .grid import SemanticGrid, check_same_shape, frontier_mask, label_frontiers, write_map
from .potentials import PotentialParams, area_potential, object_potential, pf_loss

ORACLE = "oracle"
AREA_HEURISTIC = "frontier-area-heuristic"
UNIFORM = "uniform-frontier"
KINDS = (ORACLE, AREA_HEURISTIC, UNIFORM)


class Predictor(Protocol):
    kind: str
    needs_complete: bool

    def predict(self, partial: SemanticGrid, category: int | str, params: PotentialParams,
                complete: SemanticGrid | None = None) -> tuple[np.ndarray, np.ndarray]:
        ...


class OraclePredictor:
    """Exact analytical potentials computed on the complete map.

    Success-zone fields are cached per category for the most recent complete
    map, so repeated calls within an episode only pay for the frontier work.
    Use one instance per worker.
    """

    kind = ORACLE
    needs_complete = True

    def __init__(self, success_radius: float = 1.0):
        self.success_radius = success_radius
        self._for: SemanticGrid | None = None
        self._zones: dict[int, DistanceField] = {}

    def zone_field(self, complete: SemanticGrid, category: int | str) -> DistanceField:
        if complete is not self._for:
            self._for, self._zones = complete, {}
        cid = complete.categories.resolve(category)
        if cid not in self._zones:
            self._zones[cid] = success_zone_distance(complete, cid, self.success_radius)
        return self._zones[cid]

    def prime(self, complete: SemanticGrid, category: int | str, zone: DistanceField) -> None:
        """Seed the cache with a zone field the caller already computed."""
        if complete is not self._for:
            self._for, self._zones = complete, {}
        self._zones[complete.categories.resolve(category)] = zone

    def predict(self, partial, category, params, complete=None):
        if complete is None:
            raise ValueError("the oracle predictor needs the complete map")
        check_same_shape(partial, complete)
        try:
            zone = self.zone_field(complete, category)
        except KeyError as exc:
            raise ValueError(str(exc)) from None
        area = area_potential(partial, complete, params)
        obj = object_potential(partial, complete, category, params, zone_field=zone)
        return area, obj


class FrontierAreaHeuristic:
    """Frontier size relative to the largest frontier; no object signal."""

    kind = AREA_HEURISTIC
    needs_complete = False

    def predict(self, partial, category, params, complete=None):
        labels, n = label_frontiers(partial)
        area = np.zeros(partial.shape)
        if n:
            sizes = np.bincount(labels.ravel(), minlength=n + 1).astype(float)
            sizes[0] = 0.0
            area = (sizes / sizes.max())[labels]
        return area, np.zeros(partial.shape)


class UniformFrontier:
    kind = UNIFORM
    needs_complete = False

    def predict(self, partial, category, params, complete=None):
        return frontier_mask(partial).astype(float), np.zeros(partial.shape)


class ExternalPredictor:
    """Runs ``command + [map_path, category_name, area_out, object_out]``.

    The program reads the partial map container and writes both fields as
    16-bit PGM files (value = level / 65535), the same format as the
    ``render`` field dumps. Output is zeroed off frontier cells.
    """

    kind = "external"
    needs_complete = False

    def __init__(self, command: Sequence[str], timeout: float = 60.0):
        self.command = list(command)
        self.timeout = timeout

    def predict(self, partial, category, params, complete=None):
        from .render import read_pgm_field

        name = partial.categories.names[partial.categories.resolve(category)]
        with tempfile.TemporaryDirectory() as tmp:
            map_path = os.path.join(tmp, "partial.map")
            area_path = os.path.join(tmp, "area.pgm")
            obj_path = os.path.join(tmp, "object.pgm")
            write_map(map_path, partial)
            subprocess.run(self.command + [map_path, name, area_path, obj_path],
                           check=True, timeout=self.timeout, capture_output=True)
            area = read_pgm_field(area_path)
            obj = read_pgm_field(obj_path)
        if area.shape != partial.shape or obj.shape != partial.shape:
            raise ValueError("external predictor returned fields of the wrong shape")
        frontier = frontier_mask(partial)
        return np.where(frontier, area, 0.0), np.where(frontier, obj, 0.0)


def make_predictor(kind: str, success_radius: float = 1.0) -> Predictor:
    if kind == ORACLE:
        return OraclePredictor(success_radius)
    if kind == AREA_HEURISTIC:
        return FrontierAreaHeuristic()
    if kind == UNIFORM:
        return UniformFrontier()
    raise ValueError(f"unknown predictor kind {kind!r}; expected one of {KINDS}")


def predict(kind: str | Predictor, partial: SemanticGrid, complete: SemanticGrid | None, category: int | str,
            params: PotentialParams = PotentialParams()) -> tuple[np.ndarray, np.ndarray]:
    pred = make_predictor(kind) if isinstance(kind, str) else kind
    return pred.predict(partial, category, params, complete)


@dataclass(frozen=True)
class PredictorScore:
    loss_area: float
    loss_object: float
    evaluated: int
    skipped: int


def evaluate_predictor(kind: str | Predictor, dataset: Sequence[TrainingTuple],
                       params: PotentialParams = PotentialParams(),
                       scenes: Mapping[str, SemanticGrid] | Callable[[str], SemanticGrid] | None = None,
                       success_radius: float = 1.0) -> PredictorScore:
    """Mean frontier-masked losses over a dataset.

    Predictors that need the complete map get it by looking up the tuple's
    scene id in ``scenes`` and replaying the recorded augmentation. Tuples
    without frontier cells are skipped and counted.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    pred = make_predictor(kind, success_radius) if isinstance(kind, str) else kind
    lookup = scenes if callable(scenes) or scenes is None else scenes.__getitem__
    la, lc, done, skipped = 0.0, 0.0, 0, 0
    for t in dataset:
        if len(t.frontier_cells) == 0:
            skipped += 1
            continue
        complete = None
        if pred.needs_complete:
            if lookup is None:
                raise ValueError(f"{pred.kind} predictor needs the complete scenes")
            complete = apply_augmentation(lookup(t.provenance.scene_id), t.provenance.augmentation)
        n = len(t.partial.categories)
        objs = np.zeros((n,) + t.partial.shape)
        area = None
        for i in range(n):
            area_i, objs[i] = pred.predict(t.partial, i, params, complete)
            area = area_i if area is None else area
        if area is None:
            area, _ = pred.predict(t.partial, t.partial.categories.goal_ids[0], params, complete)
        a, c = pf_loss(area, objs, t.target_area, t.target_objects, t.frontier_cells)
        la += a
        lc += c
        done += 1
    if done == 0:
        return PredictorScore(float("nan"), float("nan"), 0, skipped)
    return PredictorScore(la / done, lc / done, done, skipped)
