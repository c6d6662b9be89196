"""Semantic grid maps, connectivity analysis and frontier extraction.

A :class:`SemanticGrid` stores three per-cell channels (explored, obstacle,
object category) plus a metric resolution. Unexplored cells are kept in a
canonical form (no obstacle, no category) so that equality and file
round-trips are exact.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

GridCell = tuple[int, int]

NO_OBJECT = -1
DEFAULT_RESOLUTION = 0.05
MAP_FORMAT_VERSION = 1

# 8-connectivity structuring element
EIGHT = np.ones((3, 3), dtype=bool)
NEIGHBORS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


class ShapeMismatchError(ValueError):
    """Two grids (or a grid and a field) do not share dimensions."""


class MapFormatError(ValueError):
    """A map container file could not be parsed."""


@dataclass(frozen=True)
class CategoryTable:
    names: tuple[str, ...]
    goal_flags: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "goal_flags", tuple(bool(g) for g in self.goal_flags))
        if len(self.names) != len(self.goal_flags):
            raise ValueError("names and goal_flags must have the same length")
        if any(not n for n in self.names):
            raise ValueError("category names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("category names must be unique")
        if not any(self.goal_flags):
            raise ValueError("at least one category must be a navigation goal")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown category {name!r}") from None

    def resolve(self, category: int | str) -> int:
        """Category id for an id or a name; raises ``KeyError`` if unknown."""
        if isinstance(category, str):
            return self.index(category)
        cid = int(category)
        if not 0 <= cid < len(self.names):
            raise KeyError(f"unknown category id {category}")
        return cid

    @property
    def goal_ids(self) -> list[int]:
        return [i for i, g in enumerate(self.goal_flags) if g]


GOAL_CATEGORIES = ("chair", "couch", "potted plant", "bed", "toilet", "tv")
DISTRACTOR_CATEGORIES = ("table", "sink", "refrigerator", "bathtub")


def default_categories() -> CategoryTable:
    """Six goal categories plus four distractors."""
    names = GOAL_CATEGORIES + DISTRACTOR_CATEGORIES
    flags = (True,) * len(GOAL_CATEGORIES) + (False,) * len(DISTRACTOR_CATEGORIES)
    return CategoryTable(names, flags)


@dataclass(eq=False)
class SemanticGrid:
    """Top-down semantic map.

    ``obstacle`` and ``objects`` are only meaningful on explored cells; they
    are forced to ``False`` / ``NO_OBJECT`` elsewhere. Arrays are made
    read-only, so a grid can be shared freely; operations return new grids.
    """

    obstacle: np.ndarray
    explored: np.ndarray
    objects: np.ndarray
    resolution: float
    categories: CategoryTable = field(default_factory=default_categories)

    def __post_init__(self):
        explored = np.array(self.explored, dtype=bool)
        obstacle = np.array(self.obstacle, dtype=bool)
        objects = np.array(self.objects, dtype=np.int16)
        if explored.ndim != 2 or obstacle.shape != explored.shape or objects.shape != explored.shape:
            raise ShapeMismatchError("obstacle, explored and objects must be 2D arrays of one shape")
        obstacle &= explored
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        objects[~explored] = NO_OBJECT
        if objects.size and (objects.min() < NO_OBJECT or objects.max() >= len(self.categories)):
            raise ValueError("object channel holds an unknown category id")
        for arr in (explored, obstacle, objects):
            arr.flags.writeable = False
        self.explored, self.obstacle, self.objects = explored, obstacle, objects
        self.resolution = float(self.resolution)

    @classmethod
    def unexplored(cls, height: int, width: int, resolution: float = DEFAULT_RESOLUTION,
                   categories: CategoryTable | None = None) -> "SemanticGrid":
        shape = (height, width)
        return cls(np.zeros(shape, bool), np.zeros(shape, bool), np.full(shape, NO_OBJECT, np.int16),
                   resolution, categories or default_categories())

    @property
    def shape(self) -> tuple[int, int]:
        return self.explored.shape

    @property
    def height(self) -> int:
        return self.explored.shape[0]

    @property
    def width(self) -> int:
        return self.explored.shape[1]

    @property
    def complete(self) -> bool:
        return bool(self.explored.all())

    @property
    def free(self) -> np.ndarray:
        """Explored, non-obstacle cells."""
        return self.explored & ~self.obstacle

    def in_bounds(self, cell: GridCell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def __eq__(self, other):
        if not isinstance(other, SemanticGrid):
            return NotImplemented
        return (self.shape == other.shape
                and self.resolution == other.resolution
                and self.categories == other.categories
                and np.array_equal(self.explored, other.explored)
                and np.array_equal(self.obstacle, other.obstacle)
                and np.array_equal(self.objects, other.objects))

    __hash__ = None

    def __repr__(self):
        return (f"SemanticGrid({self.height}x{self.width}, res={self.resolution}, "
                f"explored={int(self.explored.sum())}, complete={self.complete})")


@dataclass(frozen=True, eq=False)
class Component:
    """Connected set of unexplored free cells; ``cells`` is an (n, 2) array."""

    id: int
    cells: np.ndarray

    @property
    def area_cells(self) -> int:
        return len(self.cells)


@dataclass(frozen=True, eq=False)
class Frontier:
    id: int
    cells: np.ndarray

    def __len__(self) -> int:
        return len(self.cells)


def check_same_shape(a: SemanticGrid, b: SemanticGrid) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"grid shapes differ: {a.shape} vs {b.shape}")
    if a.resolution != b.resolution:
        raise ShapeMismatchError(f"grid resolutions differ: {a.resolution} vs {b.resolution}")


def dilate8(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Binary dilation by the 3x3 square, ``iterations`` times; outside counts as False."""
    out = np.asarray(mask, dtype=bool).copy()
    for _ in range(iterations):
        rows = out.copy()
        rows[1:] |= out[:-1]
        rows[:-1] |= out[1:]
        out = rows.copy()
        out[:, 1:] |= rows[:, :-1]
        out[:, :-1] |= rows[:, 1:]
    return out


def frontier_mask(grid: SemanticGrid) -> np.ndarray:
    """Explored free cells with at least one unexplored 8-neighbour."""
    return grid.free & dilate8(~grid.explored)


def label_frontiers(grid: SemanticGrid) -> tuple[np.ndarray, int]:
    return ndimage.label(frontier_mask(grid), structure=EIGHT)


def unexplored_free_mask(grid: SemanticGrid, complete: SemanticGrid) -> np.ndarray:
    check_same_shape(grid, complete)
    return ~complete.obstacle & ~grid.explored


def label_components(grid: SemanticGrid, complete: SemanticGrid) -> tuple[np.ndarray, int]:
    return ndimage.label(unexplored_free_mask(grid, complete), structure=EIGHT)


def _cells_by_label(labels: np.ndarray, n: int) -> list[np.ndarray]:
    rows, cols = np.nonzero(labels)
    lab = labels[rows, cols]
    order = np.argsort(lab, kind="stable")
    cells = np.stack([rows[order], cols[order]], axis=1)
    splits = np.cumsum(np.bincount(lab, minlength=n + 1)[1:])[:-1]
    return np.split(cells, splits) if n else []


def unexplored_components(grid: SemanticGrid, complete: SemanticGrid) -> list[Component]:
    """Maximal 8-connected groups of cells free in ``complete`` but unexplored in ``grid``."""
    if not complete.complete:
        raise ValueError("reference map must be complete")
    labels, n = label_components(grid, complete)
    return [Component(i + 1, cells) for i, cells in enumerate(_cells_by_label(labels, n))]


def extract_frontiers(grid: SemanticGrid) -> list[Frontier]:
    labels, n = label_frontiers(grid)
    return [Frontier(i + 1, cells) for i, cells in enumerate(_cells_by_label(labels, n))]


def associate_labels(frontier_labels: np.ndarray, component_labels: np.ndarray) -> np.ndarray:
    """Unique (frontier label, component label) pairs that touch under 8-connectivity.

    Returns an (m, 2) int array sorted lexicographically.
    """
    h, w = frontier_labels.shape
    pad_c = np.pad(component_labels, 1)
    fr, fc = np.nonzero(frontier_labels)
    flab = frontier_labels[fr, fc]
    pairs = []
    for dr, dc in NEIGHBORS_8:
        clab = pad_c[fr + 1 + dr, fc + 1 + dc]
        hit = clab > 0
        pairs.append(np.stack([flab[hit], clab[hit]], axis=1))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    allp = np.concatenate(pairs).astype(np.int64)
    if len(allp) == 0:
        return allp.reshape(0, 2)
    return np.unique(allp, axis=0)


def associate_components(frontiers: Sequence[Frontier],
                         components: Sequence[Component]) -> dict[int, list[int]]:
    """Map each frontier id to the ids of components with a cell 8-adjacent to it.

    Every frontier appears as a key (possibly with an empty list).
    """
    result: dict[int, list[int]] = {f.id: [] for f in frontiers}
    if not frontiers or not components:
        return result
    allcells = [f.cells for f in frontiers] + [c.cells for c in components]
    extent = np.concatenate(allcells).max(axis=0) + 1
    flab = np.zeros(extent, dtype=np.int64)
    clab = np.zeros(extent, dtype=np.int64)
    for f in frontiers:
        flab[f.cells[:, 0], f.cells[:, 1]] = f.id
    for c in components:
        clab[c.cells[:, 0], c.cells[:, 1]] = c.id
    for fid, cid in associate_labels(flab, clab):
        result[int(fid)].append(int(cid))
    return result


def cells_to_mask(cells, shape: tuple[int, int]) -> np.ndarray:
    """Boolean mask from a mask array or an iterable of (row, col); raises IndexError out of bounds."""
    if isinstance(cells, np.ndarray) and cells.dtype == bool:
        if cells.shape != shape:
            raise ShapeMismatchError(f"mask shape {cells.shape} != grid shape {shape}")
        return cells
    arr = np.asarray(list(cells) if not isinstance(cells, np.ndarray) else cells, dtype=np.int64)
    mask = np.zeros(shape, dtype=bool)
    if arr.size == 0:
        return mask
    arr = arr.reshape(-1, 2)
    bad = (arr[:, 0] < 0) | (arr[:, 0] >= shape[0]) | (arr[:, 1] < 0) | (arr[:, 1] >= shape[1])
    if bad.any():
        r, c = arr[np.argmax(bad)]
        raise IndexError(f"cell ({r}, {c}) is outside the {shape[0]}x{shape[1]} grid")
    mask[arr[:, 0], arr[:, 1]] = True
    return mask


def reveal(grid: SemanticGrid, complete: SemanticGrid, cells: Iterable[GridCell] | np.ndarray) -> SemanticGrid:
    """Copy ``complete`` into ``grid`` on the given cells and mark them explored."""
    check_same_shape(grid, complete)
    mask = cells_to_mask(cells, grid.shape)
    if not mask.any():
        return grid
    explored = grid.explored | mask
    obstacle = np.where(mask, complete.obstacle, grid.obstacle)
    objects = np.where(mask, complete.objects, grid.objects)
    return SemanticGrid(obstacle, explored, objects, grid.resolution, grid.categories)


def reveal_all(complete: SemanticGrid) -> SemanticGrid:
    return reveal(SemanticGrid.unexplored(*complete.shape, complete.resolution, complete.categories),
                  complete, np.ones(complete.shape, bool))


# -- map container -----------------------------------------------------------
#
# SEMGRID <version>
# width <w>
# height <h>
# resolution <float repr>
# categories <n>
# <json name> <0|1>            (n lines, goal flag)
# complete <0|1>
# cells
# <h lines of w space-separated tokens>
#
# Cell tokens: "u" unexplored, "f" explored free, "x" explored obstacle;
# explored tokens may carry a category id suffix, e.g. "x3".

def dumps_map(grid: SemanticGrid) -> str:
    lines = [f"SEMGRID {MAP_FORMAT_VERSION}", f"width {grid.width}", f"height {grid.height}",
             f"resolution {grid.resolution!r}", f"categories {len(grid.categories)}"]
    for name, flag in zip(grid.categories.names, grid.categories.goal_flags):
        lines.append(f"{json.dumps(name)} {int(flag)}")
    lines.append(f"complete {int(grid.complete)}")
    lines.append("cells")
    base = np.where(~grid.explored, "u", np.where(grid.obstacle, "x", "f"))
    cat = np.where(grid.objects >= 0, grid.objects.astype(str), "")
    tokens = np.char.add(base.astype("<U1"), cat.astype(str))
    lines.extend(" ".join(row) for row in tokens)
    return "\n".join(lines) + "\n"


def loads_map(text: str) -> SemanticGrid:
    lines = text.splitlines()
    pos = 0

    def take(key):
        nonlocal pos
        if pos >= len(lines):
            raise MapFormatError(f"unexpected end of file, expected {key!r}")
        parts = lines[pos].split(" ", 1)
        if parts[0] != key or len(parts) != 2:
            raise MapFormatError(f"line {pos + 1}: expected {key!r}")
        pos += 1
        return parts[1]

    version = take("SEMGRID")
    if version.strip() != str(MAP_FORMAT_VERSION):
        raise MapFormatError(f"unsupported map format version {version!r}")
    try:
        width, height = int(take("width")), int(take("height"))
        resolution = float(take("resolution"))
        ncat = int(take("categories"))
        names, flags = [], []
        for _ in range(ncat):
            name_json, flag = lines[pos].rsplit(" ", 1)
            names.append(json.loads(name_json))
            flags.append(flag == "1")
            pos += 1
        complete_flag = take("complete").strip() == "1"
    except (ValueError, IndexError) as exc:
        raise MapFormatError(f"line {pos + 1}: malformed header ({exc})") from None
    if pos >= len(lines) or lines[pos] != "cells":
        raise MapFormatError(f"line {pos + 1}: expected 'cells'")
    pos += 1
    rows = lines[pos:pos + height]
    if len(rows) != height:
        raise MapFormatError(f"expected {height} cell rows, found {len(rows)}")
    tokens = np.array([r.split(" ") for r in rows], dtype=object) if height else np.zeros((0, width), object)
    if tokens.shape != (height, width):
        raise MapFormatError("cell rows do not match the declared width")
    kinds = np.vectorize(lambda t: t[:1], otypes=[str])(tokens) if tokens.size else np.zeros((height, width), str)
    if not np.isin(kinds, ["u", "f", "x"]).all():
        raise MapFormatError("unknown cell token")
    try:
        cats = np.vectorize(lambda t: int(t[1:]) if len(t) > 1 else NO_OBJECT, otypes=[np.int16])(tokens) \
            if tokens.size else np.zeros((height, width), np.int16)
    except ValueError:
        raise MapFormatError("bad category id in cell token") from None
    explored = kinds != "u"
    grid = SemanticGrid(kinds == "x", explored, cats, resolution, CategoryTable(tuple(names), tuple(flags)))
    if grid.complete != complete_flag:
        raise MapFormatError("complete flag disagrees with the explored channel")
    return grid


def atomic_write(path: str | os.PathLike, data: str | bytes) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        # mkstemp creates 0600; give the file the usual umask-derived mode
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_map(path: str | os.PathLike, grid: SemanticGrid) -> None:
    atomic_write(path, dumps_map(grid))


def read_map(path: str | os.PathLike) -> SemanticGrid:
    with open(path) as fh:
        return loads_map(fh.read())
