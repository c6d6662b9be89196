"""Compare the four exploration policies on a few generated houses.

poni picks frontiers by the combined potential, area_only and
object_only use one potential each, fbe goes to the nearest frontier.
All of them use oracle potentials here, so the numbers show what the
potentials are worth when predicted perfectly.
"""
import sys

from pfnav import SceneParams, evaluate, generate_scene
from pfnav.sim import POLICIES, PolicySpec

num_scenes = int(sys.argv[1]) if len(sys.argv) > 1 else 3
episodes = int(sys.argv[2]) if len(sys.argv) > 2 else 4

scenes = [(f"scene_{i:04d}", generate_scene(SceneParams(seed=i))) for i in range(num_scenes)]
ev = evaluate([PolicySpec(name) for name in POLICIES], scenes, episodes, seed=0)

print(f"{num_scenes} scenes x {episodes} episodes")
print(f"{'policy':12s} {'success':>8s} {'spl':>6s} {'softspl':>8s} {'dts_m':>6s}")
for name, row in ev.aggregate().items():
    print(f"{name:12s} {row['success']:8.3f} {row['spl']:6.3f} {row['softspl']:8.3f} {row['dts_m']:6.2f}")
