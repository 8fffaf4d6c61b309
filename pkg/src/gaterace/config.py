"""Typed configuration: drone/drag/camera parameters, randomization bounds,
reward weights and difficulty presets.

Configs load from YAML key/value files (see `docs in README`); unspecified keys
take the defaults below. Everything is immutable after load and safe to share
across env instances.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

SEED_ENV_VAR = "GATERACE_SEED"


class ConfigError(ValueError):
    """Raised when a config file is malformed or violates an invariant."""


def _arr(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class DroneParams:
    """Rigid-body and actuator constants for a 5-inch-class racing quad.

    Polynomials are coefficient lists in ascending order, evaluated at rotor
    speed in rev/s (thrust N, torque N*m) or motor command in [0,1] (rev/s).
    Rotor order: rear-right, front-right, rear-left, front-left. spin_directions
    hold the sign of the yaw torque each rotor exerts on the body.
    """
    mass: float = 0.75                      # kg
    inertia: tuple = (0.0023, 0.0025, 0.0045)  # kg m^2, diagonal
    rotor_constant: float = 35.0            # 1/s, first-order lag
    rotor_inertia: float = 6.0e-6           # kg m^2 about spin axis
    rotor_positions: tuple = (
        (-0.0813, -0.0813, 0.0),
        (0.0813, -0.0813, 0.0),
        (-0.0813, 0.0813, 0.0),
        (0.0813, 0.0813, 0.0),
    )
    spin_directions: tuple = (1, -1, -1, 1)
    thrust_poly: tuple = (0.0, 0.0, 2.943e-5)     # f_p(W) = 2.943e-5 W^2
    torque_poly: tuple = (0.0, 0.0, 4.4145e-7)
    motor_poly: tuple = (25.0, 308.75, 166.25)    # W_s(u), monotone on [0,1]
    collision_half_extents: tuple = (0.12, 0.12, 0.05)  # m

    def validate(self):
        if not self.mass > 0:
            raise ConfigError("mass > 0")
        if not all(j > 0 for j in self.inertia):
            raise ConfigError("inertia diagonal entries > 0")
        if not self.rotor_constant > 0:
            raise ConfigError("rotor_constant > 0")
        if sorted(self.spin_directions) != [-1, -1, 1, 1]:
            raise ConfigError("spin_directions must contain exactly two of each sign")
        if self.thrust_poly[0] != 0.0:
            raise ConfigError("thrust_poly(0) = 0")
        if not all(h > 0 for h in self.collision_half_extents):
            raise ConfigError("collision_half_extents all > 0")
        if len(self.rotor_positions) != 4:
            raise ConfigError("rotor_positions must list 4 rotors")


@dataclass(frozen=True)
class DragParams:
    """Polynomial drag model; quadratic terms are applied sign-preserving."""
    air_density: float = 1.204   # kg/m^3
    area_t: float = 0.05         # m^2, translational
    area_r: float = 0.02         # m^2, rotational
    c0: tuple = (2.5, 2.5, 2.5)  # quadratic, linear velocity
    c1: tuple = (0.05, 0.05, 0.05)
    c2: tuple = (0.02, 0.02, 0.02)  # quadratic, angular velocity
    c3: tuple = (0.01, 0.01, 0.01)

    def validate(self):
        if not self.air_density > 0:
            raise ConfigError("air_density > 0")
        if self.area_t < 0 or self.area_r < 0:
            raise ConfigError("area_t, area_r >= 0")
        for name in ("c0", "c1", "c2", "c3"):
            if any(c < 0 for c in getattr(self, name)):
                raise ConfigError(f"{name} entries >= 0")


@dataclass(frozen=True)
class CameraParams:
    """Forward depth camera, tilted up from the body x-axis about body y."""
    mount_position: tuple = (0.1, 0.0, 0.02)  # m, body frame
    tilt_angle: float = 0.35                  # rad, pitch up
    hfov: float = math.pi / 2                 # rad
    width: int = 480
    height: int = 270
    d_max: float = 20.0                       # m
    yz_jitter: float = 0.03                   # m, reset randomization in body yz
    tilt_jitter: float = 0.15                 # rad, reset randomization

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("width, height >= 1")
        if not 0 < self.hfov < math.pi:
            raise ConfigError("0 < hfov < pi")
        if not self.d_max > 0:
            raise ConfigError("d_max > 0")


@dataclass(frozen=True)
class TreeParams:
    trunk_radius_range: tuple = (0.1, 0.3)   # m
    trunk_height_range: tuple = (3.0, 6.0)   # m
    branch_count_range: tuple = (2, 4)
    branch_radius_scale: float = 0.5         # fraction of trunk radius
    branch_length_scale: float = 0.6         # fraction of trunk height


@dataclass(frozen=True)
class OrbitParams:
    radius_range: tuple = (2.5, 4.0)         # m, ring radius around the waypoint
    size_range: tuple = (0.3, 0.8)           # m, characteristic obstacle size
    waypoints: tuple = (0, 1)                # indices that receive orbiters


@dataclass(frozen=True)
class RandomizationBounds:
    """Sampling bounds for tracks, obstacles and waypoint geometry.

    rel_pose tuples are (azimuth, elevation, distance, roll, exit-pitch) in
    rad/rad/m/rad/rad, applied between consecutive waypoints.
    """
    rel_pose_lo: tuple = (-0.3, -0.3, 6.0, 0.0, 0.0)
    rel_pose_hi: tuple = (0.3, 0.3, 18.0, 3.14, 0.2)
    wp_size_range: tuple = (1.4, 2.0)        # m
    init_wp_rpy_bounds: float = 0.2          # rad, roll/pitch of waypoint 0
    n_wall: int = 12
    n_tree: int = 4
    n_orbit: int = 0
    wall_size_lo: tuple = (0.2, 1.5, 1.5)    # m
    wall_size_hi: tuple = (0.2, 2.5, 2.5)
    tree_params: TreeParams = field(default_factory=TreeParams)
    orbit_params: OrbitParams = field(default_factory=OrbitParams)
    bar_probability: float = 0.5
    env_bounds: tuple = ((-40.0, -40.0, -20.0), (40.0, 40.0, 20.0))  # m
    wall_jitter: float = 1.0                 # m, lateral offset off the segment
    clearance_margin: float = 0.5            # m, pass-region keep-out extrusion

    def validate(self):
        if any(l > h for l, h in zip(self.rel_pose_lo, self.rel_pose_hi)):
            raise ConfigError("rel_pose_lo <= rel_pose_hi component-wise")
        if not (self.rel_pose_lo[2] > 0 and self.rel_pose_hi[2] > 0):
            raise ConfigError("rel_pose distance bounds > 0")
        if self.wp_size_range[0] > self.wp_size_range[1]:
            raise ConfigError("wp_size_range lo <= hi")
        if min(self.n_wall, self.n_tree, self.n_orbit) < 0:
            raise ConfigError("obstacle counts >= 0")
        if any(l > h for l, h in zip(self.wall_size_lo, self.wall_size_hi)):
            raise ConfigError("wall_size_lo <= wall_size_hi component-wise")
        if not 0.0 <= self.bar_probability <= 1.0:
            raise ConfigError("bar_probability in [0, 1]")
        lo, hi = self.env_bounds
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError("env_bounds non-degenerate")


@dataclass(frozen=True)
class RewardWeights:
    """Per-term weights plus post-weight sparse magnitudes.

    Sparse events keep their configured magnitude in the logged term so the
    logged columns line up with the weighted total directly.
    """
    w_prog: float = 1.0
    w_prec: float = 0.02
    w_cmd: float = 1.0
    w_col: float = 1.0
    w_guid: float = 0.5
    w_wp: float = 1.0
    w_time: float = 1.0
    w_vel: float = 1.0
    collision_value: float = -10.0
    waypoint_value: float = 5.0
    timeout_value: float = -10.0

    def weights(self):
        return np.array([self.w_prog, self.w_prec, self.w_cmd, self.w_col,
                         self.w_guid, self.w_wp, self.w_time, self.w_vel])

    def validate(self):
        if not np.all(np.isfinite(self.weights())):
            raise ConfigError("reward weights finite")
        if not self.collision_value < 0:
            raise ConfigError("collision_value < 0")
        if not self.waypoint_value > 0:
            raise ConfigError("waypoint_value > 0")
        if self.timeout_value > 0:
            raise ConfigError("timeout_value <= 0")


@dataclass(frozen=True)
class GuidanceParams:
    """Shaping-field constants; the radial scale differs on the two gate sides."""
    k0: float = 5.0        # m, field support along the gate axis
    k1: float = 1.0
    k2_front: float = 0.25  # m^2, wrong (exit) side
    k2_back: float = 0.5    # m^2, approach side

    def validate(self):
        if not (self.k0 > 0 and self.k1 > 0 and self.k2_front > 0 and self.k2_back > 0):
            raise ConfigError("guidance constants > 0")


@dataclass(frozen=True)
class ShapingParams:
    """Constants of the dense shaping terms other than guidance."""
    perception_c: float = -2.0  # < 0; exponent scale on misalignment^4
    cmd_c1: float = 0.05        # action-change penalty
    cmd_c2: float = 0.01        # body-rate magnitude penalty
    vel_k3: float = -0.01       # lateral velocity, < 0
    vel_k4: float = -0.01       # backward velocity, < 0

    def validate(self):
        if self.perception_c >= 0:
            raise ConfigError("perception_c < 0")
        if self.cmd_c1 < 0 or self.cmd_c2 < 0:
            raise ConfigError("cmd_c1, cmd_c2 >= 0")
        if self.vel_k3 > 0 or self.vel_k4 > 0:
            raise ConfigError("vel_k3, vel_k4 <= 0")


@dataclass(frozen=True)
class ObsNormParams:
    p_max: float = 40.0    # m
    v_max: float = 25.0    # m/s
    omega_max: float = 12.0  # rad/s
    l_max: float = 20.0    # m

    def validate(self):
        if min(self.p_max, self.v_max, self.omega_max, self.l_max) <= 0:
            raise ConfigError("observation normalization ranges > 0")


@dataclass(frozen=True)
class InitRandomization:
    """Agent reset randomization: spawn zone behind waypoint 0 plus state noise."""
    spawn_zone_length: float = 3.0   # m, kept free of obstacles behind waypoint 0
    spawn_zone_radius: float = 1.2   # m
    spawn_back_range: tuple = (0.3, 2.4)  # m behind the waypoint plane
    spawn_lateral_radius: float = 0.8     # m
    speed_range: tuple = (0.0, 3.0)  # m/s
    body_rate_range: float = 1.0     # rad/s, each axis
    action_range: float = 0.5        # initial previous-action magnitude
    attitude_angle_range: float = 0.5  # rad, rotation about the alignment vector
    eval_multiplier: float = 2.0     # widens attitude/velocity/action ranges


@dataclass(frozen=True)
class ControllerParams:
    """Rate-loop tuning: actual-rates curve, PID gains, mixer idle."""
    max_rate: tuple = (10.47, 10.47, 10.47)   # rad/s at full deflection
    center_sensitivity: tuple = (3.5, 3.5, 3.5)  # rad/s slope at center
    expo: tuple = (0.5, 0.5, 0.5)
    kp: tuple = (0.04, 0.04, 0.2)
    ki: tuple = (0.2, 0.2, 0.5)
    kd: tuple = (0.001, 0.001, 0.0)
    i_limit: float = 0.3
    mixer_idle: float = 0.05

    def validate(self):
        for name in ("kp", "ki", "kd"):
            if any(g < 0 for g in getattr(self, name)):
                raise ConfigError(f"{name} >= 0")
        if any(r <= 0 for r in self.max_rate):
            raise ConfigError("max_rate > 0")
        if not 0 <= self.mixer_idle < 1:
            raise ConfigError("mixer_idle in [0, 1)")


@dataclass(frozen=True)
class EnvConfig:
    drone: DroneParams = field(default_factory=DroneParams)
    drag: DragParams = field(default_factory=DragParams)
    camera: CameraParams = field(default_factory=CameraParams)
    bounds: RandomizationBounds = field(default_factory=RandomizationBounds)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    guidance: GuidanceParams = field(default_factory=GuidanceParams)
    shaping: ShapingParams = field(default_factory=ShapingParams)
    obs_norm: ObsNormParams = field(default_factory=ObsNormParams)
    init: InitRandomization = field(default_factory=InitRandomization)
    controller: ControllerParams = field(default_factory=ControllerParams)
    physics_hz: float = 250.0
    control_hz: float = 25.0
    substeps: int = 10
    episode_time_limit: float = 15.0   # s
    n_waypoints_per_segment: int = 4
    seed: int = 0
    depth_enabled: bool = True
    auto_reset: bool = False
    bar_thickness: float = 0.1         # m, physical gate bars

    def validate(self):
        for section in (self.drone, self.drag, self.camera, self.bounds, self.rewards,
                        self.guidance, self.shaping, self.obs_norm, self.controller):
            section.validate()
        if abs(self.physics_hz - self.control_hz * self.substeps) > 1e-9:
            raise ConfigError("physics_hz = control_hz * substeps")
        if not self.episode_time_limit > 0:
            raise ConfigError("episode_time_limit > 0")
        if self.n_waypoints_per_segment < 3:
            raise ConfigError("n_waypoints_per_segment >= 3")
        return self


_SECTION_TYPES = {
    "drone": DroneParams,
    "drag": DragParams,
    "camera": CameraParams,
    "bounds": RandomizationBounds,
    "rewards": RewardWeights,
    "guidance": GuidanceParams,
    "shaping": ShapingParams,
    "obs_norm": ObsNormParams,
    "init": InitRandomization,
    "controller": ControllerParams,
}


def _coerce(value, default):
    # YAML gives lists; frozen dataclasses store tuples for hashability
    if isinstance(default, tuple) and isinstance(value, (list, tuple)):
        return tuple(_coerce(v, default[0] if default else v) for v in value)
    return value


def _build_section(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section '{path}' must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"unknown key '{path}.{key}'")
        default = getattr(cls(), key)
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build_section(type(default), value, f"{path}.{key}")
        else:
            kwargs[key] = _coerce(value, default)
    return cls(**kwargs)


def config_from_dict(data: dict) -> EnvConfig:
    """Build and validate an EnvConfig from a nested plain dict."""
    kwargs = {}
    for key, value in (data or {}).items():
        if key in _SECTION_TYPES:
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        elif key in {f.name for f in dataclasses.fields(EnvConfig)}:
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown key '{key}'")
    cfg = EnvConfig(**kwargs)
    if SEED_ENV_VAR in os.environ:
        cfg = dataclasses.replace(cfg, seed=int(os.environ[SEED_ENV_VAR]))
    return cfg.validate()


def config_to_dict(cfg: EnvConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> EnvConfig:
    """Load a YAML config file; unspecified keys keep their defaults."""
    with open(path, "r") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


def save_config(cfg: EnvConfig, path):
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def difficulty_preset(level: int) -> RandomizationBounds:
    """Randomization bounds for difficulty levels 1..4.

    Level 2 doubles obstacle counts, level 3 adds 60 orbiting obstacles on
    waypoints 0 and 1, and level 4 widens the relative-pose bounds.
    """
    if level not in (1, 2, 3, 4):
        raise ConfigError(f"difficulty level must be 1..4, got {level}")
    base = RandomizationBounds()
    if level == 1:
        return base
    if level == 2:
        return dataclasses.replace(base, n_wall=24, n_tree=8)
    if level == 3:
        return dataclasses.replace(base, n_wall=24, n_tree=8, n_orbit=60,
                                   orbit_params=OrbitParams(waypoints=(0, 1)))
    return dataclasses.replace(
        base, n_wall=24, n_tree=8, n_orbit=60,
        orbit_params=OrbitParams(waypoints=(0, 1)),
        rel_pose_lo=(-1.0, -0.4, 6.0, 0.0, 0.0),
        rel_pose_hi=(1.0, 0.4, 18.0, 3.14, 0.3),
    )
