"""Frontier potential functions for object-goal navigation on semantic grid maps."""
from .grid import (CategoryTable, MapFormatError, SemanticGrid, ShapeMismatchError, default_categories,
                   extract_frontiers, frontier_mask, read_map, reveal, unexplored_components, write_map)
from .geodesics import (DIJKSTRA, FMM, DistanceField, NoPathError, PathPlan, distance_field, shortest_path,
                        success_zone_distance, success_zone_mask)
from .potentials import (NoGoalError, PotentialParams, area_potential, combine, combine_with_action_cost,
                         object_potential, object_potentials, pf_loss, sample_long_term_goal)
from .scenegen import SceneParams, generate_layout, generate_scene, scene_stats
from .dataset import MaskParams, TrainingTuple, generate_dataset, make_tuple, read_dataset, write_dataset
from .predictor import evaluate_predictor, make_predictor, predict
from .metrics import dts, soft_spl, spl
from .sim import EpisodeResult, EpisodeSpec, MotionParams, PolicySpec, Pose, SensorParams, run_episode
from .evaluation import evaluate, sample_episodes
from .config import ConfigError, RunConfig

__version__ = "0.1.0"
