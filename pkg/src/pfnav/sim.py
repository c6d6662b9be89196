"""Episodic object-goal navigation on complete semantic maps.

The agent sees the world through :func:`sense` (ray casting on the complete
map), keeps its own partial map, and alternates between choosing a long-term
goal and stepping towards it with a deterministic local policy. Motion is
continuous inside cells: a forward step moves ``forward_m`` along the
heading and collides with true obstacles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from . import _kernels
from .geodesics import DistanceField, bounded_field, field_from_mask, success_zone_distance
from .grid import GridCell, SemanticGrid, dilate8, frontier_mask, reveal
from .metrics import dts, soft_spl, spl
from .potentials import NoGoalError, PotentialParams, combine, sample_long_term_goal
from .predictor import ORACLE, OraclePredictor, Predictor, make_predictor
from .raycast import direction_deg, heading_to_vector, rays_for_arc, visible_cells

PONI = "poni"
FBE = "fbe"
AREA_ONLY = "area_only"
OBJECT_ONLY = "object_only"
POLICIES = (PONI, FBE, AREA_ONLY, OBJECT_ONLY)

STOPPED = "stopped"
BUDGET_EXHAUSTED = "budget_exhausted"


class Action(str, Enum):
    MOVE_FORWARD = "move_forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    STOP = "stop"


@dataclass(frozen=True)
class Pose:
    cell: GridCell
    heading_deg: int = 0

    def as_list(self) -> list[int]:
        return [int(self.cell[0]), int(self.cell[1]), int(self.heading_deg)]


@dataclass(frozen=True)
class SensorParams:
    range_m: float = 5.0
    fov_deg: float = 90.0
    rays: int | None = None  # None: enough rays for ~1 cell spacing at full range

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError("sensor range must be positive")
        if not 0 < self.fov_deg <= 360:
            raise ValueError("fov_deg must lie in (0, 360]")
        if self.rays is not None and self.rays < 1:
            raise ValueError("rays must be positive")

    def ray_count(self, resolution: float) -> int:
        return self.rays or rays_for_arc(self.range_m / resolution, self.fov_deg)


@dataclass(frozen=True)
class MotionParams:
    forward_m: float = 0.25
    turn_deg: int = 30
    dilation_cells: int = 1

    def __post_init__(self):
        if not self.forward_m > 0:
            raise ValueError("forward_m must be positive")
        if not (0 < self.turn_deg < 360 and 360 % self.turn_deg == 0):
            raise ValueError("turn_deg must divide 360")
        if self.dilation_cells < 0:
            raise ValueError("dilation_cells must be non-negative")


@dataclass(frozen=True)
class PolicySpec:
    name: str = PONI
    predictor: str = ORACLE
    params: PotentialParams = PotentialParams()
    resample_every: int | None = None

    def __post_init__(self):
        if self.name not in POLICIES:
            raise ValueError(f"unknown policy {self.name!r}; expected one of {POLICIES}")
        if self.resample_every is not None and self.resample_every < 1:
            raise ValueError("resample_every must be >= 1")

    @property
    def potential_params(self) -> PotentialParams:
        if self.name == AREA_ONLY:
            return self.params.with_alpha(1.0)
        if self.name == OBJECT_ONLY:
            return self.params.with_alpha(0.0)
        return self.params

    @property
    def default_resample(self) -> int:
        return 25 if self.name == FBE else 1


@dataclass(eq=False)
class EpisodeSpec:
    scene: SemanticGrid
    start: Pose
    goal: int
    budget_steps: int = 500
    success_radius_m: float = 1.0
    resample_every: int | None = None
    episode_id: str = ""
    seed: int = 0

    def __post_init__(self):
        if not self.scene.complete:
            raise ValueError("episodes run on complete maps")
        if self.budget_steps <= 0:
            raise ValueError("budget_steps must be positive")
        if not self.scene.in_bounds(self.start.cell) or self.scene.obstacle[self.start.cell]:
            raise ValueError(f"start cell {self.start.cell} is not free")
        self.goal = self.scene.categories.resolve(self.goal)
        if not (self.scene.objects == self.goal).any():
            raise ValueError(f"goal category {self.goal} is absent from the scene")


@dataclass
class EpisodeResult:
    success: bool
    spl: float
    softspl: float
    dts_m: float
    agent_path_m: float
    oracle_path_m: float
    steps: int
    trajectory: list[Pose]
    stop_reason: str
    collisions: int = 0
    goal_log: list[tuple[int, GridCell, str]] = field(default_factory=list)
    flags: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "success": bool(self.success),
            "spl": self.spl,
            "softspl": self.softspl,
            "dts_m": self.dts_m,
            "agent_path_m": self.agent_path_m,
            "oracle_path_m": self.oracle_path_m,
            "steps": self.steps,
            "stop_reason": self.stop_reason,
            "collisions": self.collisions,
            "flags": dict(sorted(self.flags.items())),
            "trajectory": [p.as_list() for p in self.trajectory],
        }


# -- sensing -----------------------------------------------------------------

def sense(complete: SemanticGrid, partial: SemanticGrid, pose: Pose, sensors: SensorParams = SensorParams()
          ) -> SemanticGrid:
    """Reveal every cell crossed by the sensor rays, including the blocking cell."""
    seen = visible_cells(complete.obstacle, pose.cell, pose.heading_deg, sensors.fov_deg,
                         sensors.range_m / complete.resolution, sensors.ray_count(complete.resolution))
    if (seen & ~partial.explored).any():
        return reveal(partial, complete, seen)
    return partial


# -- planning and local policy ----------------------------------------------

def planning_traversable(partial: SemanticGrid, agent: GridCell, dilation: int = 1,
                         blocked: np.ndarray | None = None, goal: GridCell | None = None) -> np.ndarray:
    """Cells the planner may use: not a known (dilated) obstacle.

    Unexplored cells count as traversable. Dilation is undone in a small
    box around the agent so it can always leave its own cell, and around
    ``goal`` (which itself is always traversable) so goals next to
    obstacles stay reachable.
    """
    obs = partial.obstacle if blocked is None else partial.obstacle | blocked
    grown = dilate8(obs, dilation)
    for cell in (agent,) if goal is None else (agent, goal):
        r, c = cell
        box = (slice(max(r - dilation, 0), r + dilation + 1), slice(max(c - dilation, 0), c + dilation + 1))
        grown[box] = obs[box]
        grown[r, c] = False
    return ~grown


def _single(shape, cell) -> np.ndarray:
    m = np.zeros(shape, bool)
    m[cell] = True
    return m


def plan_path(traversable: np.ndarray, agent: GridCell, goal: GridCell, resolution: float
              ) -> tuple[np.ndarray, GridCell, bool, DistanceField]:
    """Shortest path (agent first) to ``goal``, or to the reachable cell nearest to it.

    Returns (cells, goal actually used, substituted flag, goal-sourced field).
    The field is exact up to the agent's own distance.
    """
    shape = traversable.shape
    if traversable[goal]:
        fld = bounded_field(traversable, _single(shape, goal), _single(shape, agent), resolution)
        if fld.reachable(agent):
            return _descend(fld, agent), goal, False, fld
    reach = field_from_mask(traversable, _single(shape, agent), resolution).dist
    rows, cols = np.ogrid[:shape[0], :shape[1]]
    d2 = np.where(np.isfinite(reach), (rows - goal[0]) ** 2 + (cols - goal[1]) ** 2, np.iinfo(np.int64).max)
    cells = np.argwhere(d2 == d2.min())
    order = np.lexsort((cells[:, 1], cells[:, 0], reach[cells[:, 0], cells[:, 1]]))
    sub = (int(cells[order[0], 0]), int(cells[order[0], 1]))
    fld = bounded_field(traversable, _single(shape, sub), _single(shape, agent), resolution)
    return _descend(fld, agent), sub, True, fld


def _descend(fld: DistanceField, start: GridCell) -> np.ndarray:
    cells = _kernels.descend(fld.dist, 1.0, math.sqrt(2.0), int(start[0]), int(start[1]), fld.dist.size)
    if len(cells) == 0:
        raise RuntimeError(f"descent from {start} stalled")
    return cells


def _path_cells_length(cells: np.ndarray) -> float:
    steps = np.abs(np.diff(cells, axis=0)).sum(axis=1)
    return float((steps == 1).sum() + math.sqrt(2.0) * (steps == 2).sum())


def _wrap(deg: float) -> float:
    """Angle in (-180, 180]."""
    d = math.fmod(deg, 360.0)
    if d > 180.0:
        d -= 360.0
    elif d <= -180.0:
        d += 360.0
    return d


def action_along_path(position: tuple[float, float], heading_deg: float, path: np.ndarray,
                      motion: MotionParams, resolution: float, known_obstacle: np.ndarray | None = None,
                      field: DistanceField | None = None) -> tuple[Action, bool]:
    """Turn towards the path point one forward step ahead, or move.

    Returns (action, goal_reached). When the remaining path is shorter than
    half a forward step the goal counts as reached and the agent turns left
    to look around. With ``known_obstacle`` a forward step must not cross a
    known obstacle. When the step along the heading closest to the path is
    blocked, the agent heads for the clear step whose landing cell is
    closest to the goal on ``field``, provided it is closer than the agent.
    That choice depends on the position only, so turning cannot oscillate.
    If no clear step gets closer the goal counts as reached.
    """
    step_cells = motion.forward_m / resolution
    if len(path) <= 1 or _path_cells_length(path) < step_cells / 2.0:
        return Action.TURN_LEFT, True
    k = min(len(path) - 1, int(math.ceil(step_cells)))
    tr, tc = path[k]
    target = direction_deg((position[0] - 0.5, position[1] - 0.5), (float(tr), float(tc)))
    err = _wrap(target - heading_deg)
    turn = Action.TURN_LEFT if err > 0 or err == 180.0 else Action.TURN_RIGHT
    if known_obstacle is None:
        return (Action.MOVE_FORWARD if abs(err) <= motion.turn_deg / 2.0 + 1e-9 else turn), False
    aligned = round(target / motion.turn_deg) * motion.turn_deg
    if field is None or try_forward(known_obstacle, position, aligned, step_cells)[0] is not None:
        if abs(err) <= motion.turn_deg / 2.0 + 1e-9 and \
                try_forward(known_obstacle, position, heading_deg, step_cells)[0] is not None:
            return Action.MOVE_FORWARD, False
        return turn, False
    best = _best_clear_heading(known_obstacle, position, heading_deg, path[0], motion, step_cells, field)
    if best is None:
        # no forward step gets closer: this is as near as discrete steps allow
        return Action.TURN_LEFT, True
    if best == heading_deg % 360:
        return Action.MOVE_FORWARD, False
    e = _wrap(best - heading_deg)
    return (Action.TURN_LEFT if e > 0 or e == 180.0 else Action.TURN_RIGHT), False


def _best_clear_heading(known_obstacle, position, heading_deg, agent_cell, motion, step_cells, field):
    """Heading whose clear forward step lands closest to the goal; None if none gets closer."""
    here = field.dist[agent_cell[0], agent_cell[1]]
    best, best_key = None, None
    for h in range(0, 360, motion.turn_deg):
        landing, _ = try_forward(known_obstacle, position, h, step_cells)
        if landing is None:
            continue
        d = field.dist[int(math.floor(landing[0])), int(math.floor(landing[1]))]
        if not d < here:
            continue
        key = (d, abs(_wrap(h - heading_deg)), -_wrap(h - heading_deg))
        if best_key is None or key < best_key:
            best, best_key = h, key
    return best


def local_policy_step(partial: SemanticGrid, pose: Pose, goal: GridCell, motion: MotionParams = MotionParams(),
                      blocked: np.ndarray | None = None) -> Action:
    """One deterministic action towards ``goal`` on the partial obstacle map."""
    if not partial.in_bounds(goal):
        raise IndexError(f"goal {goal} is outside the map")
    trav = planning_traversable(partial, pose.cell, motion.dilation_cells, blocked, goal)
    path, _, _, fld = plan_path(trav, pose.cell, goal, partial.resolution)
    center = (pose.cell[0] + 0.5, pose.cell[1] + 0.5)
    known = partial.obstacle if blocked is None else partial.obstacle | blocked
    return action_along_path(center, pose.heading_deg, path, motion, partial.resolution, known, fld)[0]


def try_forward(obstacle: np.ndarray, position: tuple[float, float], heading_deg: float, distance_cells: float
                ) -> tuple[tuple[float, float] | None, GridCell | None]:
    """Move in a straight line; returns (new position, None) or (None, first blocked cell)."""
    dy, dx = heading_to_vector(heading_deg)
    h, w = obstacle.shape
    n = max(1, int(math.ceil(distance_cells / 0.25)))
    for i in range(1, n + 1):
        t = distance_cells * i / n
        y, x = position[0] + t * dy, position[1] + t * dx
        r, c = int(math.floor(y)), int(math.floor(x))
        if not (0 <= r < h and 0 <= c < w):
            return None, (min(max(r, 0), h - 1), min(max(c, 0), w - 1))
        if obstacle[r, c]:
            return None, (r, c)
    return (position[0] + distance_cells * dy, position[1] + distance_cells * dx), None


# -- long-term goals ---------------------------------------------------------

def nearest_frontier(partial: SemanticGrid, agent: GridCell, traversable: np.ndarray,
                     exclude: np.ndarray | None = None) -> GridCell | None:
    """Frontier cell closest to the agent (geodesic, then (row, col)); None if none is reachable."""
    frontier = frontier_mask(partial)
    if exclude is not None:
        frontier &= ~exclude
    for trav in (traversable, None):
        if trav is None:
            trav = ~partial.obstacle
            trav[agent] = True
        targets = frontier & trav
        if not targets.any():
            continue
        fld = bounded_field(trav, _single(partial.shape, agent), targets, partial.resolution)
        cand = np.argwhere(targets & np.isfinite(fld.dist))
        if len(cand) == 0:
            continue
        d = fld.dist[cand[:, 0], cand[:, 1]]
        i = np.lexsort((cand[:, 1], cand[:, 0], d))[0]
        return int(cand[i, 0]), int(cand[i, 1])
    return None


def nearest_goal_cell(partial: SemanticGrid, goal: int, agent: GridCell, traversable: np.ndarray,
                      exclude: np.ndarray | None = None) -> GridCell:
    cells = partial.objects == goal
    if exclude is not None and (cells & ~exclude).any():
        cells &= ~exclude
    trav = traversable | cells
    fld = bounded_field(trav, _single(partial.shape, agent), cells, partial.resolution)
    cand = np.argwhere(cells)
    d = fld.dist[cand[:, 0], cand[:, 1]]
    e = (cand[:, 0] - agent[0]) ** 2 + (cand[:, 1] - agent[1]) ** 2
    i = np.lexsort((cand[:, 1], cand[:, 0], e, d))[0]
    return int(cand[i, 0]), int(cand[i, 1])


def _goal_still_valid(partial: SemanticGrid, ltg: GridCell, frontier: np.ndarray) -> bool:
    return (not partial.explored[ltg]) or bool(frontier[ltg])


# -- episode loop ------------------------------------------------------------

def run_episode(policy: PolicySpec | str, spec: EpisodeSpec, sensors: SensorParams = SensorParams(),
                motion: MotionParams = MotionParams(), *, predictor: Predictor | None = None,
                initial_partial: SemanticGrid | None = None, sensing: bool = True) -> EpisodeResult:
    """Run one episode to ``stop`` or budget exhaustion.

    ``initial_partial`` seeds the agent's map; with ``sensing=False`` the
    agent senses only at the first step.
    """
    if isinstance(policy, str):
        policy = PolicySpec(policy)
    scene = spec.scene
    res = scene.resolution
    goal = spec.goal
    zone = success_zone_distance(scene, goal, spec.success_radius_m)
    if predictor is None and policy.name != FBE:
        predictor = make_predictor(policy.predictor, spec.success_radius_m)
    if isinstance(predictor, OraclePredictor) and predictor.success_radius == spec.success_radius_m:
        predictor.prime(scene, goal, zone)
    pf_params = policy.potential_params
    every = spec.resample_every or policy.resample_every or policy.default_resample
    rng = np.random.default_rng(spec.seed)

    partial = initial_partial if initial_partial is not None else \
        SemanticGrid.unexplored(*scene.shape, res, scene.categories)
    blocked = np.zeros(scene.shape, bool)
    # frontier cells around goals the agent reached and looked around from
    # without resolving them (e.g. a wall interior no ray can hit)
    exhausted = np.zeros(scene.shape, bool)
    spins = 0
    full_turn = 360 // motion.turn_deg
    pose = spec.start
    position = (pose.cell[0] + 0.5, pose.cell[1] + 0.5)
    trajectory = [pose]
    goal_log: list[tuple[int, GridCell, str]] = []
    flags: dict[str, int] = {}
    ltg: GridCell | None = None
    ltg_kind = ""
    last_sample = -1
    sampled_on = None
    reached = False
    agent_path = 0.0
    collisions = 0
    stop_reason = BUDGET_EXHAUSTED
    steps = 0
    step_cells = motion.forward_m / res

    def flag(name):
        flags[name] = flags.get(name, 0) + 1

    for t in range(spec.budget_steps):
        if sensing or t == 0:
            partial = sense(scene, partial, pose, sensors)
        cell = pose.cell
        goal_seen = bool((partial.objects == goal).any())
        steps = t + 1
        if goal_seen and zone.dist[cell] == 0.0:
            stop_reason = STOPPED
            break

        trav = planning_traversable(partial, cell, motion.dilation_cells, blocked)
        frontier = None
        spins = spins + 1 if reached else 0
        if spins >= full_turn:
            r0, c0, k = ltg[0], ltg[1], int(math.ceil(step_cells))
            exhausted[max(r0 - k, 0):r0 + k + 1, max(c0 - k, 0):c0 + k + 1] = True
            spins = 0
            flag("exhausted_goal")
        need = ltg is None or reached or (t - last_sample) >= every
        if not need and not goal_seen:
            frontier = frontier_mask(partial)
            need = not _goal_still_valid(partial, ltg, frontier)
        if not need and goal_seen and ltg_kind != "goal":
            need = True
        if need and goal_seen and ltg_kind == "goal" and not reached and partial is sampled_on \
                and not exhausted[ltg]:
            # nothing new was seen: the nearest goal cell cannot have changed
            need = False
        if need:
            if goal_seen:
                ltg, ltg_kind = nearest_goal_cell(partial, goal, cell, trav, exhausted), "goal"
            elif policy.name == FBE:
                ltg, ltg_kind = nearest_frontier(partial, cell, trav, exhausted), "frontier"
            else:
                area, obj = predictor.predict(partial, goal, pf_params, scene)
                try:
                    pot = np.where(exhausted, 0.0, combine(area, obj, pf_params))
                    ltg, ltg_kind = sample_long_term_goal(pot, partial, cell), "potential"
                except NoGoalError:
                    ltg, ltg_kind = nearest_frontier(partial, cell, trav, exhausted), "frontier"
                    flag("fallback_frontier")
            if ltg is None:
                free = np.argwhere(partial.free)
                ltg, ltg_kind = tuple(int(v) for v in free[rng.integers(len(free))]), "random"
                flag("fallback_random")
            goal_log.append((t, ltg, ltg_kind))
            last_sample = t
            sampled_on = partial

        path, used, substituted, fld = plan_path(
            planning_traversable(partial, cell, motion.dilation_cells, blocked, ltg), cell, ltg, res)
        if substituted:
            flag("substituted_goal")
        action, reached = action_along_path(position, pose.heading_deg, path, motion, res,
                                            partial.obstacle | blocked, fld)

        if action == Action.MOVE_FORWARD:
            new_pos, hit = try_forward(scene.obstacle, position, pose.heading_deg, step_cells)
            if new_pos is None:
                collisions += 1
                blocked[hit] = True
            else:
                position = new_pos
                agent_path += motion.forward_m
                pose = Pose((int(math.floor(new_pos[0])), int(math.floor(new_pos[1]))), pose.heading_deg)
        elif action == Action.TURN_LEFT:
            pose = Pose(pose.cell, (pose.heading_deg + motion.turn_deg) % 360)
        elif action == Action.TURN_RIGHT:
            pose = Pose(pose.cell, (pose.heading_deg - motion.turn_deg) % 360)
        trajectory.append(pose)

    d_init = float(zone.dist[spec.start.cell])
    d_final = float(zone.dist[pose.cell])
    success = stop_reason == STOPPED and d_final == 0.0
    return EpisodeResult(
        success=success,
        spl=spl(success, d_init, agent_path),
        softspl=soft_spl(d_init, d_final, d_init, agent_path),
        dts_m=dts(d_final),
        agent_path_m=agent_path,
        oracle_path_m=d_init,
        steps=steps,
        trajectory=trajectory,
        stop_reason=stop_reason,
        collisions=collisions,
        goal_log=goal_log,
        flags=flags,
    )
