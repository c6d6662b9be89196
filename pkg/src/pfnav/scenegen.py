"""Procedural indoor floor plans with semantically placed objects.

Rooms come from a recursive binary partition of the building footprint;
every partition wall gets one door, so the room adjacency is a tree and free
space stays connected. Object categories prefer room types through
``placement_priors``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import EIGHT, NO_OBJECT, CategoryTable, SemanticGrid, default_categories

ROOM_TYPES = ("living", "bedroom", "kitchen", "bathroom", "office")

DEFAULT_PRIORS: dict[str, tuple[tuple[str, float], ...]] = {
    "chair": (("kitchen", 0.5), ("office", 0.3), ("living", 0.2)),
    "couch": (("living", 1.0),),
    "potted plant": (("living", 0.6), ("bedroom", 0.2), ("office", 0.2)),
    "bed": (("bedroom", 1.0),),
    "toilet": (("bathroom", 1.0),),
    "tv": (("living", 0.7), ("bedroom", 0.3)),
    "table": (("kitchen", 0.6), ("living", 0.4)),
    "sink": (("bathroom", 0.5), ("kitchen", 0.5)),
    "refrigerator": (("kitchen", 1.0),),
    "bathtub": (("bathroom", 1.0),),
}


class SceneGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneParams:
    seed: int = 0
    width_m: float = 8.0
    height_m: float = 8.0
    room_count_range: tuple[int, int] = (3, 6)
    door_width_m: float = 0.9
    category_table: CategoryTable = field(default_factory=default_categories)
    placement_priors: dict = field(default_factory=lambda: dict(DEFAULT_PRIORS))
    resolution: float = 0.05
    wall_thickness_m: float = 0.1
    margin_m: float = 0.5
    min_room_m: float = 2.0
    instances_range: tuple[int, int] = (1, 2)
    wall_hug_prob: float = 0.7

    def __post_init__(self):
        if not (self.width_m > 0 and self.height_m > 0):
            raise ValueError("scene dimensions must be positive")
        lo, hi = self.room_count_range
        if not 1 <= lo <= hi:
            raise ValueError("room_count_range must satisfy 1 <= min <= max")
        if self.door_width_m / self.resolution < 2:
            raise ValueError("doors must be at least two cells wide")
        if self.resolution <= 0 or self.wall_thickness_m <= 0 or self.margin_m < 0:
            raise ValueError("resolution and wall thickness must be positive, margin non-negative")
        ilo, ihi = self.instances_range
        if not 1 <= ilo <= ihi:
            raise ValueError("instances_range must satisfy 1 <= min <= max")
        for name, prior in self.placement_priors.items():
            self.category_table.index(name)
            if any(w < 0 for _, w in prior):
                raise ValueError(f"negative placement weight for {name!r}")

    def cells(self, meters: float) -> int:
        return max(1, int(round(meters / self.resolution)))


@dataclass(frozen=True)
class Room:
    r0: int
    c0: int
    r1: int
    c1: int
    kind: str

    @property
    def area_cells(self) -> int:
        return (self.r1 - self.r0) * (self.c1 - self.c0)


@dataclass(eq=False)
class SceneLayout:
    grid: SemanticGrid
    rooms: list[Room]
    doors: np.ndarray


def _split_rooms(params: SceneParams, rng: np.random.Generator, obstacle: np.ndarray,
                 interior: tuple[int, int, int, int]):
    t = params.cells(params.wall_thickness_m)
    min_room = params.cells(params.min_room_m)
    door = params.cells(params.door_width_m)
    doors = np.zeros(obstacle.shape, bool)
    target = int(rng.integers(params.room_count_range[0], params.room_count_range[1] + 1))
    rects = [interior]
    frozen: set[tuple[int, int, int, int]] = set()

    while len(rects) < target:
        options = [r for r in rects if r not in frozen and (
            r[2] - r[0] >= 2 * min_room + t or r[3] - r[1] >= 2 * min_room + t)]
        if not options:
            break
        rect = max(options, key=lambda r: ((r[2] - r[0]) * (r[3] - r[1]), -r[0], -r[1]))
        r0, c0, r1, c1 = rect
        horizontal = (r1 - r0) >= (c1 - c0)
        if horizontal and r1 - r0 < 2 * min_room + t:
            horizontal = False
        if not horizontal and c1 - c0 < 2 * min_room + t:
            horizontal = True
        lo_bound = (r0 if horizontal else c0) + min_room
        hi_bound = (r1 if horizontal else c1) - min_room - t
        span = (c1 - c0) if horizontal else (r1 - r0)
        if span < door + 2 * t:
            frozen.add(rect)
            continue
        placed = False
        for _ in range(24):
            p = int(rng.integers(lo_bound, hi_bound + 1))
            if horizontal:
                near = doors[max(p - t - 1, 0):p + 2 * t + 1, max(c0 - t - 1, 0):c1 + t + 1]
            else:
                near = doors[max(r0 - t - 1, 0):r1 + t + 1, max(p - t - 1, 0):p + 2 * t + 1]
            if near.any():
                continue
            q = int(rng.integers((c0 if horizontal else r0) + t, (c1 if horizontal else r1) - t - door + 1))
            if horizontal:
                obstacle[p:p + t, c0:c1] = True
                obstacle[p:p + t, q:q + door] = False
                doors[p:p + t, q:q + door] = True
                new = [(r0, c0, p, c1), (p + t, c0, r1, c1)]
            else:
                obstacle[r0:r1, p:p + t] = True
                obstacle[q:q + door, p:p + t] = False
                doors[q:q + door, p:p + t] = True
                new = [(r0, c0, r1, p), (r0, p + t, r1, c1)]
            rects.remove(rect)
            rects.extend(new)
            placed = True
            break
        if not placed:
            frozen.add(rect)
    if len(rects) < params.room_count_range[0]:
        raise SceneGenerationError(
            f"could only fit {len(rects)} rooms, need at least {params.room_count_range[0]}")
    return sorted(rects), doors


def _assign_room_types(rects, rng: np.random.Generator) -> list[Room]:
    order = sorted(range(len(rects)), key=lambda i: (-(rects[i][2] - rects[i][0]) * (rects[i][3] - rects[i][1]), i))
    kinds = [""] * len(rects)
    fixed = ["living", "bathroom", "bedroom", "kitchen"]
    slots = [order[0], order[-1]] + order[1:-1]
    for n, i in enumerate(slots):
        if kinds[i]:
            continue
        kinds[i] = fixed[n] if n < len(fixed) else str(rng.choice(["bedroom", "kitchen", "office"]))
    return [Room(*r, kinds[i]) for i, r in enumerate(rects)]


def _place_objects(params: SceneParams, rng: np.random.Generator, rooms: list[Room],
                   obstacle: np.ndarray, doors: np.ndarray) -> np.ndarray:
    objects = np.full(obstacle.shape, NO_OBJECT, np.int16)
    keepout = ndimage.binary_dilation(doors, iterations=params.cells(0.5))
    table = params.category_table

    def candidates(room: Room, hug: bool) -> np.ndarray:
        sl = (slice(room.r0, room.r1), slice(room.c0, room.c1))
        free = ~obstacle[sl] & ~keepout[sl]
        near_obj = ndimage.binary_dilation(objects[sl] >= 0, structure=EIGHT, iterations=2)
        free &= ~near_obj
        wall = ndimage.binary_dilation(obstacle, iterations=1)[sl] & ~obstacle[sl]
        if hug:
            ok = free & wall & ~(objects[sl] >= 0)
        else:
            ok = free & ~ndimage.binary_dilation(obstacle, iterations=3)[sl]
        cells = np.argwhere(ok)
        return cells + [room.r0, room.c0]

    for cid, name in enumerate(table.names):
        prior = dict(params.placement_priors.get(name, ()))
        count = int(rng.integers(params.instances_range[0], params.instances_range[1] + 1))
        for _ in range(count):
            weights = np.array([prior.get(r.kind, 0.0) for r in rooms], dtype=float)
            if weights.sum() <= 0:
                weights = np.ones(len(rooms))
            room_order = [int(i) for i in rng.choice(len(rooms), size=int(np.count_nonzero(weights)), replace=False,
                                                      p=weights / weights.sum())]
            room_order += [i for i in range(len(rooms)) if i not in room_order]
            hug = bool(rng.random() < params.wall_hug_prob)
            placed = False
            for ri in room_order:
                for mode in (hug, not hug):
                    cells = candidates(rooms[ri], mode)
                    if len(cells) == 0:
                        continue
                    blob = [tuple(cells[rng.integers(len(cells))])]
                    size = int(rng.integers(1, 4))
                    allowed = set(map(tuple, cells))
                    while len(blob) < size:
                        nbrs = [(r + dr, c + dc) for r, c in blob for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0))
                                if (r + dr, c + dc) in allowed and (r + dr, c + dc) not in blob]
                        if not nbrs:
                            break
                        blob.append(nbrs[rng.integers(len(nbrs))])
                    for r, c in blob:
                        obstacle[r, c] = True
                        objects[r, c] = cid
                    placed = True
                    break
                if placed:
                    break
            if not placed and table.goal_flags[cid]:
                raise SceneGenerationError(f"no room left to place a {name!r}")
    return objects


def generate_layout(params: SceneParams = SceneParams()) -> SceneLayout:
    """Generate a complete scene and keep the room rectangles and door cells."""
    hb, wb = params.cells(params.height_m), params.cells(params.width_m)
    m = params.cells(params.margin_m) if params.margin_m > 0 else 0
    t = params.cells(params.wall_thickness_m)
    if min(hb, wb) - 2 * t < params.cells(params.min_room_m):
        raise SceneGenerationError("the building is smaller than one room")
    last_error: Exception | None = None
    for attempt in range(8):
        rng = np.random.default_rng([params.seed, attempt])
        obstacle = np.ones((hb + 2 * m, wb + 2 * m), bool)
        interior = (m + t, m + t, m + hb - t, m + wb - t)
        obstacle[interior[0]:interior[2], interior[1]:interior[3]] = False
        try:
            rects, doors = _split_rooms(params, rng, obstacle, interior)
            rooms = _assign_room_types(rects, rng)
            objects = _place_objects(params, rng, rooms, obstacle, doors)
        except SceneGenerationError as exc:
            last_error = exc
            continue
        _, n_free = ndimage.label(~obstacle, structure=EIGHT)
        if n_free != 1:
            last_error = SceneGenerationError("free space is not connected")
            continue
        grid = SemanticGrid(obstacle, np.ones_like(obstacle), objects, params.resolution, params.category_table)
        return SceneLayout(grid, rooms, doors)
    raise SceneGenerationError(f"scene generation failed for seed {params.seed}: {last_error}")


def generate_scene(params: SceneParams = SceneParams()) -> SemanticGrid:
    return generate_layout(params).grid


@dataclass(frozen=True)
class SceneStats:
    free_area_m2: float
    room_count: int
    instance_counts: dict[str, int]


def scene_stats(grid: SemanticGrid, door_width_m: float = 0.9) -> SceneStats:
    """Free area, room count and per-category instance counts of a complete map.

    Rooms are counted as components of free space (objects included) after an
    erosion wide enough to close every door gap.
    """
    if not grid.complete:
        raise ValueError("scene statistics need a complete map")
    free = ~grid.obstacle
    radius = int(math.ceil(door_width_m / grid.resolution / 2.0)) + 1
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    disk = yy ** 2 + xx ** 2 <= radius ** 2
    floor = free | (grid.objects >= 0)
    core = ndimage.binary_erosion(floor, structure=disk, border_value=0)
    _, rooms = ndimage.label(core, structure=EIGHT)
    counts = {}
    for cid, name in enumerate(grid.categories.names):
        _, n = ndimage.label(grid.objects == cid, structure=EIGHT)
        counts[name] = int(n)
    return SceneStats(float(free.sum()) * grid.resolution ** 2, int(rooms), counts)
