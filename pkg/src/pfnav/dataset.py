"""Supervised tuples (partial map, area target, object targets) from complete maps.

A tuple is made by sampling two free cells, following the shortest path
between them, marking what is seen along the way (square patches or
occluded view cones), and computing the analytical potentials of the
resulting partial map.

Dataset file layout (all integers little-endian)::

    PFDATA <version>\\n
    <header json>\\n                      {"count": n, "meta": {...}}
    RECORD <index> <hdr_len> <payload_len>\\n
    <record json, hdr_len bytes><payload, payload_len bytes>
    ...

The payload is zlib-compressed; decompressed it holds, in order: explored (uint8, H*W), obstacle (uint8, H*W),
objects (int16, H*W), target_area (float64, H*W), target_objects
(float64, N*H*W), frontier cells (int32, F*2).
"""
from __future__ import annotations

import io
import json
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geodesics import PathPlan, field_from_mask, shortest_path, success_zone_distance
from .grid import (NO_OBJECT, CategoryTable, GridCell, SemanticGrid, atomic_write, frontier_mask, reveal)
from .potentials import PotentialParams, area_potential, object_potential
from .raycast import direction_deg, rays_for_arc, visible_cells

SQUARE = "square"
VIEW_CONE = "view-cone"
DATASET_FORMAT_VERSION = 1
_MAGIC = b"PFDATA"
HEADING_LOOKBACK = 5  # earlier path cells used to orient a view cone


class DatasetFormatError(ValueError):
    def __init__(self, message: str, record_index: int | None = None):
        prefix = f"record {record_index}: " if record_index is not None else ""
        super().__init__(prefix + message)
        self.record_index = record_index


class DatasetError(RuntimeError):
    """A tuple could not be generated from the given map."""


@dataclass(frozen=True)
class MaskParams:
    strategy: str = SQUARE
    square_side_m: float = 3.0
    cone_radius_m: float = 3.0
    cone_fov_deg: float = 90.0

    def __post_init__(self):
        if self.strategy not in (SQUARE, VIEW_CONE):
            raise ValueError(f"mask strategy must be {SQUARE!r} or {VIEW_CONE!r}, got {self.strategy!r}")
        if not (self.square_side_m > 0 and self.cone_radius_m > 0):
            raise ValueError("mask lengths must be positive")
        if not 0 < self.cone_fov_deg <= 360:
            raise ValueError("cone_fov_deg must lie in (0, 360]")


@dataclass(frozen=True)
class Augmentation:
    """Rotation by ``k`` quarter turns (counter-clockwise) then a cell shift."""

    k: int = 0
    shift_row: int = 0
    shift_col: int = 0

    def as_list(self) -> list[int]:
        return [self.k, self.shift_row, self.shift_col]


IDENTITY = Augmentation()


@dataclass(frozen=True)
class Provenance:
    scene_id: str
    seed: int
    augmentation: Augmentation = IDENTITY


@dataclass(eq=False)
class TrainingTuple:
    partial: SemanticGrid
    target_area: np.ndarray
    target_objects: np.ndarray
    frontier_cells: np.ndarray
    provenance: Provenance

    def __eq__(self, other):
        if not isinstance(other, TrainingTuple):
            return NotImplemented
        return (self.partial == other.partial and self.provenance == other.provenance
                and _same_bits(self.target_area, other.target_area)
                and _same_bits(self.target_objects, other.target_objects)
                and np.array_equal(self.frontier_cells, other.frontier_cells))

    __hash__ = None


def _same_bits(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and a.dtype == b.dtype and a.tobytes() == b.tobytes()


# -- augmentation ------------------------------------------------------------

def _content_bbox(obstacle: np.ndarray, objects: np.ndarray):
    content = ~obstacle | (objects >= 0)
    rows = np.flatnonzero(content.any(axis=1))
    cols = np.flatnonzero(content.any(axis=0))
    if len(rows) == 0:
        return None
    return rows[0], rows[-1] + 1, cols[0], cols[-1] + 1


def apply_augmentation(complete: SemanticGrid, aug: Augmentation) -> SemanticGrid:
    """Rotate, then move the map content by the recorded shift.

    Content is every free or object cell; everything outside it becomes
    explored obstacle. Raises ``ValueError`` when the content would leave the
    original dimensions.
    """
    if not complete.complete:
        raise ValueError("augmentation applies to complete maps")
    obstacle = np.rot90(complete.obstacle, aug.k)
    objects = np.rot90(complete.objects, aug.k)
    h, w = complete.shape
    new_obs = np.ones((h, w), bool)
    new_obj = np.full((h, w), NO_OBJECT, np.int16)
    box = _content_bbox(obstacle, objects)
    if box is not None:
        r0, r1, c0, c1 = box
        nr0, nc0 = r0 + aug.shift_row, c0 + aug.shift_col
        nr1, nc1 = nr0 + (r1 - r0), nc0 + (c1 - c0)
        if nr0 < 0 or nc0 < 0 or nr1 > h or nc1 > w:
            raise ValueError(f"augmentation {aug} moves map content out of bounds")
        new_obs[nr0:nr1, nc0:nc1] = obstacle[r0:r1, c0:c1]
        new_obj[nr0:nr1, nc0:nc1] = objects[r0:r1, c0:c1]
    return SemanticGrid(new_obs, np.ones((h, w), bool), new_obj, complete.resolution, complete.categories)


def sample_augmentation(complete: SemanticGrid, seed) -> Augmentation:
    """Uniform quarter-turn count and a uniform shift that keeps the content in bounds."""
    rng = np.random.default_rng(seed)
    h, w = complete.shape
    k0 = int(rng.integers(4))
    for k in [(k0 + i) % 4 for i in range(4)]:
        box = _content_bbox(np.rot90(complete.obstacle, k), np.rot90(complete.objects, k))
        if box is None:
            return Augmentation(k, 0, 0)
        r0, r1, c0, c1 = box
        if r1 - r0 > h or c1 - c0 > w:
            continue
        nr0 = int(rng.integers(0, h - (r1 - r0) + 1))
        nc0 = int(rng.integers(0, w - (c1 - c0) + 1))
        return Augmentation(k, nr0 - int(r0), nc0 - int(c0))
    return IDENTITY


def augment(complete: SemanticGrid, seed) -> SemanticGrid:
    return apply_augmentation(complete, sample_augmentation(complete, seed))


# -- exploration masks -------------------------------------------------------

def _path_array(path: PathPlan | Sequence[GridCell] | np.ndarray) -> np.ndarray:
    cells = path.cells if isinstance(path, PathPlan) else path
    arr = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    if len(arr) == 0:
        raise ValueError("path is empty")
    return arr


def path_headings(cells: np.ndarray, lookback: int = HEADING_LOOKBACK) -> np.ndarray:
    """Heading (deg) of travel into each cell, from up to ``lookback`` cells earlier.

    The first cell has no travel direction and gets NaN. Headings of a prefix
    never depend on the cells after it.
    """
    out = np.full(len(cells), np.nan)
    for i in range(1, len(cells)):
        out[i] = direction_deg(tuple(cells[max(i - lookback, 0)]), tuple(cells[i]))
    return out


def square_side_cells(side_m: float, resolution: float) -> int:
    return max(1, int(round(side_m / resolution)))


def exploration_mask(complete: SemanticGrid, path: PathPlan | Sequence[GridCell] | np.ndarray,
                     params: MaskParams = MaskParams()) -> np.ndarray:
    """Cells seen along ``path``.

    Square mode stamps an S x S patch on each path cell, spanning rows
    ``r - S//2`` to ``r - S//2 + S - 1`` (likewise for columns), with no
    occlusion. View-cone mode casts rays over a sector facing the direction of
    travel (a full circle at the start cell) and stops each ray at the first
    obstacle.
    """
    cells = _path_array(path)
    h, w = complete.shape
    if ((cells < 0) | (cells >= [h, w])).any():
        raise IndexError("path leaves the map")
    if complete.obstacle[cells[:, 0], cells[:, 1]].any():
        raise ValueError("path crosses an obstacle cell")
    mask = np.zeros((h, w), bool)
    if params.strategy == SQUARE:
        s = square_side_cells(params.square_side_m, complete.resolution)
        half = s // 2
        for r, c in cells:
            mask[max(r - half, 0):max(r - half + s, 0), max(c - half, 0):max(c - half + s, 0)] = True
        return mask
    radius = params.cone_radius_m / complete.resolution
    rays = rays_for_arc(radius, params.cone_fov_deg)
    obstacle = np.ascontiguousarray(complete.obstacle)
    full_turn = rays_for_arc(radius, 360.0)
    for (r, c), heading in zip(cells, path_headings(cells)):
        if np.isnan(heading):
            # the start cell has no travel direction yet: look all around
            visible_cells(obstacle, (r, c), 0.0, 360.0, radius, full_turn, out=mask)
        else:
            visible_cells(obstacle, (r, c), heading, params.cone_fov_deg, radius, rays, out=mask)
    return mask


# -- tuples ------------------------------------------------------------------

def _tuple_targets(partial: SemanticGrid, complete: SemanticGrid, pf_params: PotentialParams,
                   success_radius: float) -> tuple[np.ndarray, np.ndarray]:
    area = area_potential(partial, complete, pf_params)
    objs = np.stack([object_potential(partial, complete, i, pf_params,
                                      zone_field=success_zone_distance(complete, i, success_radius))
                     for i in range(len(complete.categories))]) if len(complete.categories) else \
        np.zeros((0,) + complete.shape)
    return area, objs


def recompute_targets(partial: SemanticGrid, complete: SemanticGrid, pf_params: PotentialParams = PotentialParams(),
                      success_radius: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Area and per-category object targets for a partial map of ``complete``."""
    return _tuple_targets(partial, complete, pf_params, success_radius)


def make_tuple(complete: SemanticGrid, seed: int, mask_params: MaskParams = MaskParams(),
               pf_params: PotentialParams = PotentialParams(), *, scene_id: str = "",
               augment_map: bool = True, success_radius: float = 1.0, max_tries: int = 20) -> TrainingTuple:
    if not complete.complete:
        raise ValueError("tuples are generated from complete maps")
    rng = np.random.default_rng(seed)
    aug = sample_augmentation(complete, int(rng.integers(2 ** 63))) if augment_map else IDENTITY
    scene = apply_augmentation(complete, aug)
    free = np.argwhere(~scene.obstacle)
    if len(free) < 2:
        raise DatasetError("map has fewer than two free cells")
    path = None
    for _ in range(max_tries):
        i, j = rng.choice(len(free), size=2, replace=False)
        src = np.zeros(scene.shape, bool)
        src[tuple(free[j])] = True
        fld = field_from_mask(~scene.obstacle, src, scene.resolution)
        start = (int(free[i][0]), int(free[i][1]))
        if fld.reachable(start):
            path = shortest_path(fld, start)
            break
    if path is None:
        raise DatasetError(f"no connected endpoint pair after {max_tries} tries")
    mask = exploration_mask(scene, path, mask_params)
    partial = reveal(SemanticGrid.unexplored(*scene.shape, scene.resolution, scene.categories), scene, mask)
    area, objs = _tuple_targets(partial, scene, pf_params, success_radius)
    fcells = np.argwhere(frontier_mask(partial)).astype(np.int64)
    return TrainingTuple(partial, area, objs, fcells, Provenance(scene_id, int(seed), aug))


def tuple_seed(base_seed: int, index: int) -> int:
    """Per-tuple seed; depends only on (base_seed, index), not on generation order."""
    return int(np.random.default_rng([base_seed, index]).integers(2 ** 63))


def generate_dataset(scenes: Sequence[tuple[str, SemanticGrid]], count: int, seed: int,
                     mask_params: MaskParams = MaskParams(), pf_params: PotentialParams = PotentialParams(),
                     augment_map: bool = True) -> list[TrainingTuple]:
    """``count`` tuples cycling over ``scenes``."""
    if not scenes and count:
        raise ValueError("at least one scene is required")
    return [make_tuple(scenes[i % len(scenes)][1], tuple_seed(seed, i), mask_params, pf_params,
                       scene_id=scenes[i % len(scenes)][0], augment_map=augment_map)
            for i in range(count)]


# -- container ---------------------------------------------------------------

def _record_bytes(index: int, t: TrainingTuple) -> bytes:
    p = t.partial
    hdr = {
        "scene_id": t.provenance.scene_id,
        "seed": t.provenance.seed,
        "augmentation": t.provenance.augmentation.as_list(),
        "height": p.height,
        "width": p.width,
        "resolution": repr(p.resolution),
        "categories": list(p.categories.names),
        "goal_flags": [int(g) for g in p.categories.goal_flags],
        "n_objects": int(t.target_objects.shape[0]),
        "n_frontier": int(len(t.frontier_cells)),
    }
    hb = json.dumps(hdr, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(p.explored.astype("u1").tobytes())
    buf.write(p.obstacle.astype("u1").tobytes())
    buf.write(p.objects.astype("<i2").tobytes())
    buf.write(np.ascontiguousarray(t.target_area, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(t.target_objects, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(t.frontier_cells, dtype="<i4").tobytes())
    payload = zlib.compress(buf.getvalue(), 6)
    return f"RECORD {index} {len(hb)} {len(payload)}\n".encode() + hb + payload


def dumps_dataset(tuples: Iterable[TrainingTuple], meta: dict | None = None) -> bytes:
    tuples = list(tuples)
    head = json.dumps({"count": len(tuples), "meta": meta or {}}, sort_keys=True).encode()
    parts = [_MAGIC + f" {DATASET_FORMAT_VERSION}\n".encode(), head + b"\n"]
    parts.extend(_record_bytes(i, t) for i, t in enumerate(tuples))
    return b"".join(parts)


def write_dataset(path, tuples: Iterable[TrainingTuple], meta: dict | None = None) -> None:
    atomic_write(path, dumps_dataset(tuples, meta))


def _parse_record(index: int, hdr: dict, packed: bytes) -> TrainingTuple:
    try:
        payload = zlib.decompress(packed)
    except zlib.error as exc:
        raise DatasetFormatError(f"corrupt payload ({exc})", index) from None
    try:
        h, w = int(hdr["height"]), int(hdr["width"])
        n, nf = int(hdr["n_objects"]), int(hdr["n_frontier"])
        cats = CategoryTable(tuple(hdr["categories"]), tuple(bool(g) for g in hdr["goal_flags"]))
        resolution = float(hdr["resolution"])
        aug = Augmentation(*[int(v) for v in hdr["augmentation"]])
        prov = Provenance(str(hdr["scene_id"]), int(hdr["seed"]), aug)
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"bad record header ({exc})", index) from None
    sizes = [h * w, h * w, 2 * h * w, 8 * h * w, 8 * n * h * w, 8 * nf]
    if len(payload) != sum(sizes):
        raise DatasetFormatError(f"payload has {len(payload)} bytes, expected {sum(sizes)}", index)
    offs = np.cumsum([0] + sizes)
    explored = np.frombuffer(payload, "u1", h * w, offs[0]).reshape(h, w).astype(bool)
    obstacle = np.frombuffer(payload, "u1", h * w, offs[1]).reshape(h, w).astype(bool)
    objects = np.frombuffer(payload, "<i2", h * w, offs[2]).reshape(h, w).astype(np.int16)
    area = np.frombuffer(payload, "<f8", h * w, offs[3]).reshape(h, w).astype(np.float64)
    objs = np.frombuffer(payload, "<f8", n * h * w, offs[4]).reshape(n, h, w).astype(np.float64)
    fcells = np.frombuffer(payload, "<i4", 2 * nf, offs[5]).reshape(nf, 2).astype(np.int64)
    try:
        partial = SemanticGrid(obstacle, explored, objects, resolution, cats)
    except ValueError as exc:
        raise DatasetFormatError(str(exc), index) from None
    return TrainingTuple(partial, area, objs, fcells, prov)


def loads_dataset(data: bytes) -> tuple[dict, list[TrainingTuple]]:
    first = data.find(b"\n")
    line = data[:first].split(b" ") if first >= 0 else []
    if len(line) != 2 or line[0] != _MAGIC:
        raise DatasetFormatError("not a dataset file")
    if line[1] != str(DATASET_FORMAT_VERSION).encode():
        raise DatasetFormatError(f"unsupported dataset format version {line[1].decode(errors='replace')}")
    second = data.find(b"\n", first + 1)
    if second < 0:
        raise DatasetFormatError("missing dataset header")
    try:
        head = json.loads(data[first + 1:second])
        count = int(head["count"])
    except (ValueError, KeyError, TypeError) as exc:
        raise DatasetFormatError(f"bad dataset header ({exc})") from None
    pos = second + 1
    out = []
    for i in range(count):
        eol = data.find(b"\n", pos)
        if eol < 0:
            raise DatasetFormatError("truncated record marker", i)
        parts = data[pos:eol].split(b" ")
        try:
            if len(parts) != 4 or parts[0] != b"RECORD" or int(parts[1]) != i:
                raise ValueError
            hlen, plen = int(parts[2]), int(parts[3])
        except ValueError:
            raise DatasetFormatError("bad record marker", i) from None
        start = eol + 1
        if start + hlen + plen > len(data):
            raise DatasetFormatError(
                f"truncated: need {hlen + plen} bytes, {len(data) - start} remain", i)
        try:
            hdr = json.loads(data[start:start + hlen])
        except ValueError:
            raise DatasetFormatError("record header is not valid JSON", i) from None
        out.append(_parse_record(i, hdr, data[start + hlen:start + hlen + plen]))
        pos = start + hlen + plen
    if pos != len(data):
        raise DatasetFormatError(f"{len(data) - pos} trailing bytes after the last record", count)
    return head.get("meta", {}), out


def read_dataset(path) -> list[TrainingTuple]:
    with open(path, "rb") as fh:
        return loads_dataset(fh.read())[1]


def read_dataset_meta(path) -> dict:
    with open(path, "rb") as fh:
        return loads_dataset(fh.read())[0]
