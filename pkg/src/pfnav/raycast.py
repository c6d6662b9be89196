"""Occluded visibility on the obstacle channel."""
from __future__ import annotations

import math

import numpy as np

from . import _kernels

RAY_STEP = 0.5  # cells between samples; walls are >= 2 cells thick


def heading_to_vector(heading_deg: float) -> tuple[float, float]:
    """(d_row, d_col) unit vector; 0 deg points along +col, angles turn counter-clockwise."""
    a = math.radians(heading_deg)
    return -math.sin(a), math.cos(a)


def direction_deg(src: tuple[float, float], dst: tuple[float, float]) -> float:
    return math.degrees(math.atan2(-(dst[0] - src[0]), dst[1] - src[1]))


def ray_angles(heading_deg: float, fov_deg: float, rays: int) -> np.ndarray:
    """Evenly spread ray angles (radians) across the field of view."""
    if rays < 1:
        raise ValueError("need at least one ray")
    if fov_deg >= 360.0:
        return np.radians(heading_deg + np.arange(rays) * 360.0 / rays)
    if rays == 1:
        return np.radians(np.array([heading_deg], dtype=float))
    return np.radians(heading_deg + np.linspace(-fov_deg / 2.0, fov_deg / 2.0, rays))


def visible_cells(obstacle: np.ndarray, origin: tuple[int, int], heading_deg: float, fov_deg: float,
                  range_cells: float, rays: int, out: np.ndarray | None = None) -> np.ndarray:
    """Cells crossed by rays from ``origin`` up to and including the first obstacle.

    When ``out`` is given the cells are OR-ed into it in place.
    """
    if out is None:
        out = np.zeros(obstacle.shape, dtype=bool)
    obstacle = np.ascontiguousarray(obstacle, dtype=np.bool_)
    _kernels.march_rays(obstacle, int(origin[0]), int(origin[1]),
                        ray_angles(heading_deg, fov_deg, rays), float(range_cells), RAY_STEP, out)
    return out


def rays_for_arc(range_cells: float, fov_deg: float) -> int:
    """Enough rays that neighbouring rays stay about one cell apart at full range."""
    return max(8, int(math.ceil(range_cells * math.radians(min(fov_deg, 360.0)))) + 1)
