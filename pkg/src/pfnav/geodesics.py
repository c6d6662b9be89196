"""Geodesic distance fields and shortest paths on the obstacle channel."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .grid import GridCell, SemanticGrid, ShapeMismatchError, cells_to_mask

UNREACHABLE = math.inf
DIJKSTRA = "dijkstra-octile"
FMM = "fmm-upwind"
MODES = (DIJKSTRA, FMM)
SQRT2 = math.sqrt(2.0)
_NO_TARGETS = np.zeros(1, dtype=np.bool_)


class NoPathError(RuntimeError):
    """The requested start cannot reach any source."""


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Per-cell geodesic distance in meters; ``UNREACHABLE`` (inf) where no path exists."""

    dist: np.ndarray
    resolution: float
    mode: str = DIJKSTRA

    @property
    def shape(self) -> tuple[int, int]:
        return self.dist.shape

    @property
    def height(self) -> int:
        return self.dist.shape[0]

    @property
    def width(self) -> int:
        return self.dist.shape[1]

    def __getitem__(self, cell: GridCell) -> float:
        return float(self.dist[cell])

    def reachable(self, cell: GridCell) -> bool:
        return bool(np.isfinite(self.dist[cell]))


@dataclass(frozen=True)
class PathPlan:
    cells: list[GridCell]
    length_m: float

    def __len__(self) -> int:
        return len(self.cells)


def octile_length(axial, diagonal, resolution: float):
    """Canonical metric length of a path with the given step counts."""
    return (axial + diagonal * SQRT2) * resolution


def field_from_mask(traversable: np.ndarray, sources: np.ndarray, resolution: float,
                    mode: str = DIJKSTRA) -> DistanceField:
    """Distance field from boolean masks; no argument checking beyond shape."""
    trav = np.ascontiguousarray(traversable, dtype=np.bool_)
    src = np.flatnonzero(sources).astype(np.int64)
    if mode == DIJKSTRA:
        axial, diag = _kernels.octile_dijkstra(trav, src, _NO_TARGETS, 0)
        dist = np.where(axial >= 0, octile_length(axial, diag, resolution), UNREACHABLE)
    elif mode == FMM:
        dist = _kernels.fast_marching(trav, src) * resolution
    else:
        raise ValueError(f"unknown distance mode {mode!r}; expected one of {MODES}")
    return DistanceField(dist, float(resolution), mode)


def bounded_field(traversable: np.ndarray, sources: np.ndarray, targets: np.ndarray, resolution: float,
                  stop_after: int = 1) -> DistanceField:
    """Octile field grown only until ``stop_after`` target cells are settled.

    Values up to the distance of the last settled target are exact, and
    every target at that distance is settled; larger values are upper
    bounds or ``UNREACHABLE``. Steepest descent from any settled cell is
    identical to descent on the full field.
    """
    trav = np.ascontiguousarray(traversable, dtype=np.bool_)
    tgt = np.ascontiguousarray(targets, dtype=np.bool_).ravel()
    src = np.flatnonzero(sources).astype(np.int64)
    axial, diag = _kernels.octile_dijkstra(trav, src, tgt, max(int(stop_after), 1))
    dist = np.where(axial >= 0, octile_length(axial, diag, resolution), UNREACHABLE)
    return DistanceField(dist, float(resolution))


def distance_field(grid: SemanticGrid, sources: Iterable[GridCell] | np.ndarray,
                   traversable: np.ndarray | None = None, mode: str = DIJKSTRA) -> DistanceField:
    """Geodesic distance from the nearest source to every cell.

    ``traversable`` defaults to every cell not known to be an obstacle
    (unexplored cells count as traversable). Diagonal steps are refused when
    both axial cells they cut past are untraversable.
    """
    if mode not in MODES:
        raise ValueError(f"unknown distance mode {mode!r}; expected one of {MODES}")
    if traversable is None:
        traversable = ~grid.obstacle
    traversable = np.asarray(traversable, dtype=bool)
    if traversable.shape != grid.shape:
        raise ShapeMismatchError("traversable mask does not match the grid")
    src = cells_to_mask(sources, grid.shape)
    if not src.any():
        raise ValueError("at least one source cell is required")
    if (src & ~traversable).any():
        r, c = np.argwhere(src & ~traversable)[0]
        raise ValueError(f"source ({r}, {c}) is not traversable")
    return field_from_mask(traversable, src, grid.resolution, mode)


def shortest_path(field: DistanceField, start: GridCell) -> PathPlan:
    """Steepest descent from ``start`` to a zero-distance cell."""
    r, c = int(start[0]), int(start[1])
    if not (0 <= r < field.height and 0 <= c < field.width):
        raise IndexError(f"start {start} is outside the field")
    if not field.reachable((r, c)):
        raise NoPathError(f"start {start} cannot reach any source")
    axial_cost = field.resolution
    diag_cost = field.resolution * SQRT2
    cells = _kernels.descend(field.dist, axial_cost, diag_cost, r, c, field.dist.size)
    if len(cells) == 0:
        raise NoPathError(f"descent from {start} stalled")
    steps = np.abs(np.diff(cells, axis=0)).sum(axis=1)
    n_diag = int((steps == 2).sum())
    n_axial = len(steps) - n_diag
    path = [(int(a), int(b)) for a, b in cells]
    return PathPlan(path, float(octile_length(n_axial, n_diag, field.resolution)))


def success_zone_mask(complete: SemanticGrid, category: int | str, d_s: float = 1.0) -> np.ndarray:
    """Free cells within geodesic distance ``d_s`` of any cell holding ``category``."""
    cid = complete.categories.resolve(category)
    goal = complete.objects == cid
    free = ~complete.obstacle
    if not goal.any():
        return np.zeros(complete.shape, dtype=bool)
    to_goal = field_from_mask(free | goal, goal, complete.resolution)
    return free & (to_goal.dist <= d_s + 1e-9)


def success_zone_distance(complete: SemanticGrid, category: int | str, d_s: float = 1.0) -> DistanceField:
    """Geodesic distance (free space of the complete map) to the category's success zone."""
    if not complete.complete:
        raise ValueError("success zones are computed on a complete map")
    try:
        zone = success_zone_mask(complete, category, d_s)
    except KeyError as exc:
        raise ValueError(str(exc)) from None
    if not zone.any():
        return DistanceField(np.full(complete.shape, UNREACHABLE), complete.resolution)
    return field_from_mask(~complete.obstacle, zone, complete.resolution)
