"""Map builders shared by the tests."""
from functools import lru_cache

import numpy as np

from pfnav.grid import NO_OBJECT, SemanticGrid, default_categories, reveal
from pfnav.scenegen import SceneParams, generate_scene


def ascii_grid(rows, resolution=0.05, categories=None):
    """'#' wall, '.' free, '?' unexplored, digit d = obstacle cell holding category d."""
    h, w = len(rows), len(rows[0])
    explored = np.ones((h, w), bool)
    obstacle = np.zeros((h, w), bool)
    objects = np.full((h, w), NO_OBJECT, np.int16)
    for r, row in enumerate(rows):
        assert len(row) == w
        for c, ch in enumerate(row):
            if ch == "?":
                explored[r, c] = False
            elif ch == "#":
                obstacle[r, c] = True
            elif ch.isdigit():
                obstacle[r, c] = True
                objects[r, c] = int(ch)
            else:
                assert ch == "."
    return SemanticGrid(obstacle, explored, objects, resolution, categories or default_categories())


def blank_partial(complete):
    return SemanticGrid.unexplored(*complete.shape, complete.resolution, complete.categories)


def random_partial(complete, rng, patches=4, max_half=30):
    """Reveal a few random rectangles of ``complete``."""
    mask = np.zeros(complete.shape, bool)
    h, w = complete.shape
    for _ in range(patches):
        r, c = rng.integers(h), rng.integers(w)
        hr, hc = rng.integers(2, max_half + 1, size=2)
        mask[max(r - hr, 0):r + hr, max(c - hc, 0):c + hc] = True
    return reveal(blank_partial(complete), complete, mask)


@lru_cache(maxsize=None)
def scene(seed=0):
    return generate_scene(SceneParams(seed=seed))

