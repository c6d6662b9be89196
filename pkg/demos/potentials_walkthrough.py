"""Walk through the frontier potentials on one generated house.

Generates a floor plan, reveals a patch around a start cell as if the
agent had looked around, then computes the area and object potentials
on the frontier and picks a long-term goal from their combination.
Writes PNG overlays into ./demo_out.
"""
from pathlib import Path

import numpy as np

from pfnav import (PotentialParams, SceneParams, SemanticGrid, area_potential, combine, extract_frontiers,
                   generate_scene, object_potential, reveal, sample_long_term_goal, scene_stats)
from pfnav.render import map_image, overlay_field, save_png

out = Path("demo_out")
out.mkdir(exist_ok=True)

complete = generate_scene(SceneParams(seed=3))
print("scene:", scene_stats(complete))

# reveal a 2 m square around a free cell near the middle
free = np.argwhere(~complete.obstacle)
start = tuple(int(v) for v in free[len(free) // 2])
half = int(round(1.0 / complete.resolution))
mask = np.zeros(complete.shape, bool)
r, c = start
mask[max(r - half, 0):r + half + 1, max(c - half, 0):c + half + 1] = True
partial = reveal(SemanticGrid.unexplored(*complete.shape, complete.resolution, complete.categories), complete, mask)
print(f"start {start}, explored cells {int(partial.explored.sum())}, frontiers {len(extract_frontiers(partial))}")

params = PotentialParams()
area = area_potential(partial, complete, params)
# a goal category whose nearest instance is within d_max of the frontier
objs = {complete.categories.names[g]: object_potential(partial, complete, g, params)
        for g in complete.categories.goal_ids if (complete.objects == g).any()}
for name, field in objs.items():
    print(f"  object potential max {name!r}: {field.max():.3f}")
goal = max(objs, key=lambda name: objs[name].max())
obj = objs[goal]
pf = combine(area, obj, params)
print(f"area potential max {area.max():.3f}, goal {goal!r}")

ltg = sample_long_term_goal(pf, partial, start)
print(f"long-term goal at {ltg}, combined value {pf[ltg]:.3f}")

base = map_image(partial)
for name, field in (("area", area), ("object", obj), ("combined", pf)):
    path = out / f"pf_{name}.png"
    save_png(path, overlay_field(base, field), scale=3)
    print("wrote", path)
