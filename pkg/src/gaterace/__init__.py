"""Obstacle-aware drone racing simulator: randomized tracks, rate-controlled
quadrotor dynamics, depth sensing and batch-parallel episodic environments."""

from .config import (
    CameraParams,
    DragParams,
    DroneParams,
    EnvConfig,
    GuidanceParams,
    ObsNormParams,
    RandomizationBounds,
    RewardWeights,
    difficulty_preset,
    load_config,
    save_config,
)
from .controller import ControlCommand, hover_throttle
from .dynamics import RigidBodyState, RotorState, Wrench
from .env import BatchEnv, Cause, DroneRacingEnv, StepResult
from .reward import RewardBreakdown
from .rollout import (
    Metrics,
    ScriptedGuidancePolicy,
    TrajectoryLog,
    benchmark_throughput,
    compute_metrics,
    run_episodes,
)
from .sensors import DepthImage, ObservationBundle
from .track import (
    Obstacle,
    ObstacleSet,
    TrackSpec,
    Waypoint,
    generate_track,
    load_track,
    make_rng,
    save_track,
    straight_track,
)

__version__ = "0.1.0"

__all__ = [
    "BatchEnv", "CameraParams", "Cause", "ControlCommand", "DepthImage",
    "DragParams", "DroneParams", "DroneRacingEnv", "EnvConfig", "GuidanceParams",
    "Metrics", "Obstacle", "ObstacleSet", "ObsNormParams", "ObservationBundle",
    "RandomizationBounds", "RewardBreakdown", "RewardWeights", "RigidBodyState",
    "RotorState", "ScriptedGuidancePolicy", "StepResult", "TrackSpec",
    "TrajectoryLog", "Waypoint", "Wrench", "benchmark_throughput",
    "compute_metrics", "difficulty_preset", "generate_track", "hover_throttle",
    "load_config", "load_track", "make_rng", "run_episodes", "save_config",
    "save_track", "straight_track",
]
