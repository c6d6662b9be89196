"""Area, object and distance potentials on map frontiers, goal sampling and the frontier loss."""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .geodesics import DistanceField, bounded_field, field_from_mask, success_zone_distance
from .grid import (GridCell, SemanticGrid, ShapeMismatchError, associate_labels, cells_to_mask,
                   check_same_shape, frontier_mask, label_components, label_frontiers)

TOTAL_FREE_SPACE = "total-free-space"
FIXED_CONSTANT = "fixed-constant"


class NoGoalError(RuntimeError):
    """The filtered potential has no positive cell; the caller must pick a fallback goal."""


@dataclass(frozen=True)
class PotentialParams:
    """Weights and scales for the potentials.

    ``area_norm_constant`` is an area in square meters, used only when
    ``area_norm`` is ``"fixed-constant"``. ``beta``/``gamma`` switch on the
    action-cost combination.
    """

    alpha: float = 0.5
    d_max: float = 3.0
    beta: float | None = None
    gamma: float | None = None
    area_norm: str = TOTAL_FREE_SPACE
    area_norm_constant: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.d_max > 0:
            raise ValueError(f"d_max must be positive, got {self.d_max}")
        if self.area_norm not in (TOTAL_FREE_SPACE, FIXED_CONSTANT):
            raise ValueError(f"area_norm must be {TOTAL_FREE_SPACE!r} or {FIXED_CONSTANT!r}")
        if self.area_norm == FIXED_CONSTANT and not (self.area_norm_constant or 0) > 0:
            raise ValueError("area_norm_constant must be positive for fixed-constant normalization")
        if (self.beta is None) != (self.gamma is None):
            raise ValueError("beta and gamma must be given together")
        if self.beta is not None:
            if min(self.alpha, self.beta, self.gamma) < 0:
                raise ValueError("alpha, beta and gamma must be non-negative")
            if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
                raise ValueError("alpha + beta + gamma must equal 1")

    def with_alpha(self, alpha: float) -> "PotentialParams":
        d = asdict(self)
        d.update(alpha=alpha, beta=None, gamma=None)
        return PotentialParams(**d)


def _check_field(u: np.ndarray, shape) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != tuple(shape):
        raise ShapeMismatchError(f"field shape {u.shape} != {tuple(shape)}")
    return u


def area_potential(partial: SemanticGrid, complete: SemanticGrid, params: PotentialParams = PotentialParams()
                   ) -> np.ndarray:
    """Share of unexplored free space reachable through each frontier.

    Every cell of a frontier carries the summed area of the unexplored
    components 8-adjacent to it, divided by the normalizer and clamped to 1.
    """
    check_same_shape(partial, complete)
    if params.area_norm == TOTAL_FREE_SPACE:
        norm = float(np.count_nonzero(~complete.obstacle))
    else:
        norm = params.area_norm_constant / complete.resolution ** 2
    if norm <= 0:
        raise ValueError("area normalizer is zero")

    flabels, nf = label_frontiers(partial)
    out = np.zeros(partial.shape)
    if nf == 0:
        return out
    clabels, nc = label_components(partial, complete)
    if nc == 0:
        return out
    areas = np.bincount(clabels.ravel(), minlength=nc + 1)
    pairs = associate_labels(flabels, clabels)
    per_frontier = np.zeros(nf + 1)
    np.add.at(per_frontier, pairs[:, 0], areas[pairs[:, 1]])
    values = np.minimum(per_frontier / norm, 1.0)
    values[0] = 0.0
    return values[flabels]


def object_potential(partial: SemanticGrid, complete: SemanticGrid, category: int | str,
                     params: PotentialParams = PotentialParams(), *, success_radius: float = 1.0,
                     zone_field: DistanceField | None = None) -> np.ndarray:
    """``max(1 - d/d_max, 0)`` on frontier cells, ``d`` the geodesic distance to the success zone.

    ``zone_field`` may be passed to reuse a precomputed success-zone distance.
    """
    check_same_shape(partial, complete)
    if zone_field is None:
        zone_field = success_zone_distance(complete, category, success_radius)
    frontier = frontier_mask(partial)
    values = np.maximum(1.0 - zone_field.dist / params.d_max, 0.0)
    return np.where(frontier, values, 0.0)


def object_potentials(partial: SemanticGrid, complete: SemanticGrid, params: PotentialParams = PotentialParams(),
                      *, success_radius: float = 1.0) -> np.ndarray:
    """Object potentials for every category, stacked as (N, H, W)."""
    return np.stack([object_potential(partial, complete, i, params, success_radius=success_radius)
                     for i in range(len(complete.categories))])


def combine(area: np.ndarray, obj: np.ndarray, params: PotentialParams = PotentialParams()) -> np.ndarray:
    area = np.asarray(area, dtype=float)
    obj = _check_field(obj, area.shape)
    return params.alpha * area + (1.0 - params.alpha) * obj


def distance_potential(partial: SemanticGrid, agent: GridCell, horizon: float) -> np.ndarray:
    """1 at the agent, decaying linearly to 0 at ``horizon`` meters, on explored free cells."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    r, c = agent
    if not partial.in_bounds(agent):
        raise IndexError(f"agent cell {agent} is outside the map")
    if partial.obstacle[r, c]:
        raise ValueError(f"agent cell {agent} is an obstacle")
    src = np.zeros(partial.shape, bool)
    src[r, c] = True
    d = field_from_mask(~partial.obstacle, src, partial.resolution).dist
    return np.where(partial.free, np.maximum(1.0 - d / horizon, 0.0), 0.0)


def combine_with_action_cost(area: np.ndarray, obj: np.ndarray, distance: np.ndarray,
                             params: PotentialParams) -> np.ndarray:
    if params.beta is None or params.gamma is None:
        raise ValueError("action-cost combination needs beta and gamma")
    if abs(params.alpha + params.beta + params.gamma - 1.0) > 1e-9:
        raise ValueError("alpha + beta + gamma must equal 1")
    area = np.asarray(area, dtype=float)
    obj = _check_field(obj, area.shape)
    distance = _check_field(distance, area.shape)
    return params.alpha * area + params.beta * obj + params.gamma * distance


def sample_long_term_goal(potential: np.ndarray, partial: SemanticGrid, agent: GridCell,
                          agent_field: DistanceField | None = None) -> GridCell:
    """Argmax of the potential after zeroing explored non-frontier cells.

    Unexplored cells keep their values. Ties go to the cell nearest to the
    agent (octile distance on the partial map), then to the smallest
    (row, col). Raises :class:`NoGoalError` when nothing positive remains.
    """
    u = _check_field(potential, partial.shape)
    keep = ~partial.explored | frontier_mask(partial)
    filtered = np.where(keep, u, 0.0)
    best = filtered.max() if filtered.size else 0.0
    if not best > 0:
        raise NoGoalError("filtered potential is zero everywhere")
    cand = np.argwhere(filtered == best)
    if len(cand) == 1:
        return int(cand[0, 0]), int(cand[0, 1])
    if agent_field is None:
        src = np.zeros(partial.shape, bool)
        src[agent] = True
        trav = ~partial.obstacle
        trav[agent] = True
        targets = np.zeros(partial.shape, bool)
        targets[cand[:, 0], cand[:, 1]] = True
        agent_field = bounded_field(trav, src, targets, partial.resolution)
    d = agent_field.dist[cand[:, 0], cand[:, 1]]
    order = np.lexsort((cand[:, 1], cand[:, 0], d))
    r, c = cand[order[0]]
    return int(r), int(c)


def pf_loss(predicted_area: np.ndarray, predicted_objects: Sequence[np.ndarray] | np.ndarray,
            target_area: np.ndarray, target_objects: Sequence[np.ndarray] | np.ndarray,
            frontier_cells) -> tuple[float, float]:
    """Frontier-masked mean squared errors ``(L_a, L_c)``.

    ``L_c`` averages over frontier cells and the N object channels.
    """
    pa = np.asarray(predicted_area, dtype=float)
    ta = _check_field(target_area, pa.shape)
    po = np.asarray(predicted_objects, dtype=float).reshape(-1, *pa.shape)
    to = np.asarray(target_objects, dtype=float).reshape(-1, *pa.shape)
    if po.shape != to.shape:
        raise ShapeMismatchError(f"predicted objects {po.shape} vs targets {to.shape}")
    mask = cells_to_mask(frontier_cells, pa.shape)
    nf = int(mask.sum())
    if nf == 0:
        raise ValueError("frontier set is empty")
    loss_area = float(((pa[mask] - ta[mask]) ** 2).sum() / nf)
    n = po.shape[0]
    loss_obj = float(((po[:, mask] - to[:, mask]) ** 2).sum() / (nf * n)) if n else 0.0
    return loss_area, loss_obj
