"""Raster output: map images, red field overlays, trajectories and 16-bit PGM field dumps.

Images are 1 pixel per cell (optionally scaled by pixel repetition). Pose
cells of a trajectory use dedicated colours, so the number of pixels in
``TRAJECTORY_COLORS`` equals the number of distinct cells the agent visited.
"""
from __future__ import annotations

import io
from typing import Sequence

import numpy as np
from PIL import Image

from .grid import SemanticGrid, atomic_write, frontier_mask

UNEXPLORED = (224, 224, 224)
FREE = (255, 255, 255)
OBSTACLE = (96, 96, 96)
FRONTIER = (0, 150, 255)
PATH = (150, 150, 255)
POSE = (0, 0, 200)
START = (0, 170, 0)
END = (200, 0, 200)
TRAJECTORY_COLORS = (POSE, START, END)

# one colour per category id; ids beyond the table wrap around
CATEGORY_PALETTE = np.array([
    (230, 25, 75), (245, 130, 48), (60, 180, 75), (145, 30, 180), (70, 240, 240),
    (240, 50, 230), (210, 245, 60), (250, 190, 190), (0, 128, 128), (170, 110, 40),
    (128, 0, 0), (170, 255, 195), (128, 128, 0), (255, 215, 180), (0, 0, 128),
    (255, 225, 25), (220, 190, 255), (128, 128, 128), (0, 0, 0), (255, 250, 200),
], dtype=np.uint8)


def map_image(grid: SemanticGrid, frontiers: bool = True) -> np.ndarray:
    """(H, W, 3) uint8 image of the map with category colours and frontier cells."""
    img = np.empty(grid.shape + (3,), np.uint8)
    img[:] = UNEXPLORED
    img[grid.free] = FREE
    img[grid.explored & grid.obstacle] = OBSTACLE
    cats = grid.objects >= 0
    img[cats] = CATEGORY_PALETTE[grid.objects[cats] % len(CATEGORY_PALETTE)]
    if frontiers:
        img[frontier_mask(grid)] = FRONTIER
    return img


def overlay_field(img: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Blend towards pure red in proportion to the [0, 1] field value."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    if v.shape != img.shape[:2]:
        raise ValueError("field and image shapes differ")
    out = img.copy()
    hot = v > 0
    red = np.array([255.0, 0.0, 0.0])
    blend = (1.0 - v[hot, None]) * img[hot].astype(float) + v[hot, None] * red
    out[hot] = np.round(blend).astype(np.uint8)
    return out


def _line_cells(a, b):
    (r0, c0), (r1, c1) = a, b
    n = max(abs(r1 - r0), abs(c1 - c0))
    if n == 0:
        return [(r0, c0)]
    return [(int(round(r0 + (r1 - r0) * i / n)), int(round(c0 + (c1 - c0) * i / n))) for i in range(n + 1)]


def draw_trajectory(img: np.ndarray, cells: Sequence[tuple[int, int]]) -> np.ndarray:
    """Polyline through the pose cells, then pose, start and end markers on top."""
    out = img.copy()
    cells = [(int(r), int(c)) for r, c in cells]
    if not cells:
        return out
    for a, b in zip(cells, cells[1:]):
        for r, c in _line_cells(a, b):
            out[r, c] = PATH
    for r, c in cells:
        out[r, c] = POSE
    out[cells[0]] = START
    out[cells[-1]] = END
    return out


def count_trajectory_pixels(img: np.ndarray) -> int:
    return int(sum(np.all(img == np.array(col, np.uint8), axis=-1).sum() for col in TRAJECTORY_COLORS))


def field_gray(values: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    return np.repeat(np.round(v * 255).astype(np.uint8)[..., None], 3, axis=-1)


def png_bytes(img: np.ndarray, scale: int = 1) -> bytes:
    if scale < 1:
        raise ValueError("scale must be >= 1")
    if scale > 1:
        img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(img, dtype=np.uint8), "RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_png(path, img: np.ndarray, scale: int = 1) -> None:
    atomic_write(path, png_bytes(img, scale))


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


# -- field dumps: binary PGM, maxval 65535, big-endian samples ---------------

PGM_MAX = 65535


def pgm_bytes(values: np.ndarray) -> bytes:
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    if v.ndim != 2:
        raise ValueError("a field dump needs a 2D array")
    h, w = v.shape
    data = np.round(v * PGM_MAX).astype(">u2").tobytes()
    return f"P5\n{w} {h}\n{PGM_MAX}\n".encode() + data


def write_pgm_field(path, values: np.ndarray) -> None:
    atomic_write(path, pgm_bytes(values))


def parse_pgm_field(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace before the raster
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h, maxval = (int(t) for t in tokens[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    raster = np.frombuffer(data, dtype, w * h, pos) if w * h else np.zeros(0)
    return raster.reshape(h, w).astype(float) / maxval


def read_pgm_field(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_pgm_field(fh.read())
