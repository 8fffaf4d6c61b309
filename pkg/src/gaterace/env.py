"""The episodic environment: domain randomization on reset, 10-substep
transitions with per-substep collision checking, crossing/timeout termination,
and batch stepping of independent instances."""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import EnvConfig
from .controller import (
    ControlCommand,
    MotorCommand,
    RateControllerState,
    hover_motor_command,
    mix,
    mixer_matrix,
    motor_steady_state,
    pid_step,
    rates_curve,
)
from .dynamics import (
    RigidBodyState,
    RotorState,
    actuator_wrench,
    drag_wrench,
    oriented_collision_box,
    rigid_body_step,
    rotor_step,
)
from .geom import (
    OrientedBox,
    boxes_overlap,
    point_to_box_distance,
    point_to_cylinder_distance,
    point_to_sphere_distance,
    quat_from_axis_angle,
    quat_mul,
    matrix_to_quat,
    segment_to_box_distance,
)
from .reward import RewardBreakdown, shaping_terms, total_reward
from .sensors import ObservationBundle, build_state_obs, build_waypoint_obs, camera_pose, pixel_rays, render_depth
from .track import (
    Crossing,
    ObstacleSet,
    TrackSpec,
    gate_bars,
    generate_track,
    make_rng,
    place_orbit_obstacles,
    place_tree_obstacles,
    place_wall_obstacles,
    waypoint_crossing,
)


class Cause(enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    COLLISION = "collision"
    OUT_OF_BOUNDS = "out_of_bounds"
    WRONG_SIDE = "wrong_side"
    TIMEOUT = "timeout"


@dataclass
class EpisodeTask:
    """Pass waypoints [first_target .. final_scored] in order; the remaining
    waypoint exists only to pad the observation."""
    first_target: int
    final_scored: int

    @classmethod
    def for_track(cls, n_waypoints: int):
        return cls(first_target=1, final_scored=n_waypoints - 2)


@dataclass
class StepResult:
    obs: ObservationBundle
    reward: RewardBreakdown
    terminated: bool
    cause: Cause
    info: dict


def check_collision(box, scene, centers=None, radii=None):
    """Index of the first overlapping primitive, or None.

    centers/radii are optional precomputed bounding spheres for broad-phase.
    """
    box_r = float(np.linalg.norm(box.half_extents))
    if centers is not None and len(scene):
        d = np.linalg.norm(centers - box.center, axis=1)
        candidates = np.nonzero(d <= radii + box_r)[0]
    else:
        candidates = range(len(scene))
    for i in candidates:
        obs = scene[i]
        if obs.kind == "cuboid":
            hit = boxes_overlap(box, obs.as_box())
        elif obs.kind == "sphere":
            hit = point_to_box_distance(obs.position, box) <= obs.dims[0]
        else:
            axis = obs.rotation()[:, 2]
            a = obs.position - 0.5 * obs.dims[1] * axis
            b = obs.position + 0.5 * obs.dims[1] * axis
            hit = segment_to_box_distance(a, b, box) <= obs.dims[0]
        if hit:
            return int(i)
    return None


def min_obstacle_distance(p, scene) -> float:
    """Closest surface distance from a point to the scene (inf when empty)."""
    best = math.inf
    for obs in scene:
        if obs.kind == "cuboid":
            d = point_to_box_distance(p, obs.as_box())
        elif obs.kind == "sphere":
            d = point_to_sphere_distance(p, obs.position, obs.dims[0])
        else:
            d = point_to_cylinder_distance(p, obs.position, obs.rotation(),
                                           obs.dims[0], obs.dims[1])
        best = min(best, d)
    return best


def box_inside_bounds(box, lo, hi) -> bool:
    ext = box.world_extent()
    return bool(np.all(box.center - ext >= lo) and np.all(box.center + ext <= hi))


class DroneRacingEnv:
    """Single env instance. All randomness comes from a per-env substream keyed
    by (seed, env_index, rollout_index), so batches are order-independent."""

    def __init__(self, config: EnvConfig, env_index: int = 0):
        config.validate()
        self.config = config
        self.env_index = env_index
        self.base_seed = config.seed
        self.rollout_index = 0
        self.dt = 1.0 / config.physics_hz
        self.mixer = mixer_matrix(config.drone)
        u_h = hover_motor_command(config.drone)
        self.hover_speed = float(motor_steady_state(MotorCommand(np.full(4, u_h)), config.drone)[0])
        self._rays = pixel_rays(config.camera) if config.depth_enabled else None
        self.depth_time = 0.0  # cumulative seconds spent rendering, for benchmarks
        self.terminated = True
        self.cause = Cause.RUNNING
        self.track: TrackSpec | None = None
        self.obstacles = ObstacleSet([])
        self.scene = []          # obstacles + gate bars
        self._scene_centers = np.zeros((0, 3))
        self._scene_radii = np.zeros(0)

    # -- seeding ------------------------------------------------------------

    def seed(self, seed: int):
        """Reseed the env substream; behavior becomes a pure function of
        (seed, config, action sequence)."""
        self.base_seed = int(seed)
        self.rollout_index = 0

    # -- reset --------------------------------------------------------------

    def _build_scene(self, rng):
        b = self.config.bounds
        p0 = self.track.waypoints[0]
        back = p0.position - self.config.init.spawn_zone_length * p0.rotation()[:, 0]
        spawn_capsule = (p0.position, back, self.config.init.spawn_zone_radius)
        common = dict(margin=b.clearance_margin, keep_out=[spawn_capsule])
        obstacles = []
        obstacles += place_wall_obstacles(self.track, b.n_wall, b.wall_size_lo,
                                          b.wall_size_hi, rng, jitter=b.wall_jitter, **common)
        obstacles += place_tree_obstacles(self.track, b.n_tree, b.tree_params, rng,
                                          jitter=b.wall_jitter, **common)
        obstacles += place_orbit_obstacles(self.track, b.n_orbit, b.orbit_params, rng, **common)
        self.obstacles = ObstacleSet(obstacles)

    def _refresh_collision_cache(self):
        bars = []
        for wp in self.track.waypoints:
            bars += gate_bars(wp, self.config.bar_thickness)
        self.scene = list(self.obstacles) + bars
        if self.scene:
            self._scene_centers = np.array([o.position for o in self.scene])
            self._scene_radii = np.array([o.bounding_radius() for o in self.scene])
        else:
            self._scene_centers = np.zeros((0, 3))
            self._scene_radii = np.zeros(0)

    def _sample_initial_state(self, rng, eval_mode: bool):
        cfg = self.config.init
        mult = cfg.eval_multiplier if eval_mode else 1.0
        wp0, wp1 = self.track.waypoints[0], self.track.waypoints[1]
        R0 = wp0.rotation()
        lo, hi = np.asarray(self.config.bounds.env_bounds[0]), np.asarray(self.config.bounds.env_bounds[1])
        for _ in range(200):
            backoff = rng.uniform(*cfg.spawn_back_range)
            ang = rng.uniform(0.0, 2.0 * math.pi)
            rad = cfg.spawn_lateral_radius * math.sqrt(rng.uniform(0.0, 1.0))
            pos = (wp0.position - backoff * R0[:, 0]
                   + rad * (math.cos(ang) * R0[:, 1] + math.sin(ang) * R0[:, 2]))
            if rng.random() < 0.5:
                q = wp0.quaternion.copy()
            else:
                axis = wp1.position - wp0.position
                axis = axis / np.linalg.norm(axis)
                R_align = _rotation_with_x(axis)
                spin = rng.uniform(-1.0, 1.0) * cfg.attitude_angle_range * mult
                q = quat_mul(quat_from_axis_angle(axis, spin), matrix_to_quat(R_align))
            speed = rng.uniform(cfg.speed_range[0], cfg.speed_range[1] * mult)
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            v = speed * direction
            omega = rng.uniform(-1.0, 1.0, size=3) * cfg.body_rate_range * mult
            state = RigidBodyState(pos, q, v, omega)
            box = oriented_collision_box(state, self.config.drone)
            if not box_inside_bounds(box, lo, hi):
                continue
            if check_collision(box, self.scene, self._scene_centers, self._scene_radii) is None:
                action = rng.uniform(-1.0, 1.0, size=4) * min(cfg.action_range * mult, 1.0)
                return state, ControlCommand(action)
        raise RuntimeError("could not find a collision-free initial state")

    def reset(self, fresh_track: bool = True, track_override=None, eval_mode: bool = False):
        """Randomize track, obstacles, camera mount and initial state; returns
        the first observation."""
        self.rollout_index += 1
        rng = make_rng(self.base_seed, self.env_index, self.rollout_index)
        if track_override is not None:
            trk, obstacles = track_override
            self.track = trk
            self.obstacles = obstacles if isinstance(obstacles, ObstacleSet) else ObstacleSet(list(obstacles))
            self._refresh_collision_cache()
        elif fresh_track or self.track is None:
            meta = {"seed": [self.base_seed, self.env_index, self.rollout_index]}
            self.track = generate_track(self.config.bounds,
                                        self.config.n_waypoints_per_segment, rng, metadata=meta)
            self._build_scene(rng)
            self._refresh_collision_cache()
        self.task = EpisodeTask.for_track(len(self.track))

        cam = self.config.camera
        self.cam_mount = np.asarray(cam.mount_position) + np.array(
            [0.0, rng.uniform(-cam.yz_jitter, cam.yz_jitter), rng.uniform(-cam.yz_jitter, cam.yz_jitter)])
        self.cam_tilt = cam.tilt_angle + rng.uniform(-cam.tilt_jitter, cam.tilt_jitter)

        self.state, self.prev_action = self._sample_initial_state(rng, eval_mode)
        self.p_w0 = self.state.p_w.copy()
        self.rotors = RotorState(np.full(4, self.hover_speed), np.full(4, self.hover_speed))
        self.ctrl = RateControllerState(self.config.controller,
                                        last_meas=self.state.omega_b.copy())
        self.target_index = self.task.first_target
        self.prev_dist = float(np.linalg.norm(
            self.state.p_w - self.track.waypoints[self.target_index].position))
        self.elapsed = 0.0
        self.terminated = False
        self.cause = Cause.RUNNING
        return self._observe()

    # -- stepping -----------------------------------------------------------

    def _observe(self) -> ObservationBundle:
        cam = self.config.camera
        pose = camera_pose(self.state, cam, mount=self.cam_mount, tilt=self.cam_tilt)
        depth = None
        if self.config.depth_enabled:
            t0 = time.perf_counter()
            depth = render_depth(pose, cam, self.scene,
                                 env_bounds=self.config.bounds.env_bounds, rays=self._rays)
            self.depth_time += time.perf_counter() - t0
        state_obs = build_state_obs(self.state, self.p_w0, self.config.obs_norm)
        wp_next = self.track.waypoints[self.target_index]
        wp_after = self.track.waypoints[min(self.target_index + 1, len(self.track) - 1)]
        wp_obs = build_waypoint_obs(self.state, wp_next, wp_after, self.config.obs_norm.l_max)
        return ObservationBundle(depth, state_obs, wp_obs, self.prev_action.a.copy())

    def step(self, action) -> StepResult:
        """Advance one control period (`substeps` physics steps, zero-order hold)."""
        if self.terminated:
            raise RuntimeError("step() called on a terminated env; call reset() first")
        cmd = action if isinstance(action, ControlCommand) else ControlCommand(np.asarray(action, dtype=float))
        cfg = self.config
        lo = np.asarray(cfg.bounds.env_bounds[0])
        hi = np.asarray(cfg.bounds.env_bounds[1])
        omega_des = rates_curve(cmd.rates, cfg.controller)
        target_wp = self.track.waypoints[self.target_index]
        p_start = self.state.p_w.copy()
        cause = Cause.RUNNING
        motor_mean_acc = 0.0

        R = self.state.rotation()
        half = np.asarray(cfg.drone.collision_half_extents, dtype=float)
        for _ in range(cfg.substeps):
            demand, self.ctrl = pid_step(self.ctrl, omega_des, self.state.omega_b, self.dt)
            motors = mix(demand, cmd.throttle, self.mixer, cfg.controller.mixer_idle)
            motor_mean_acc += float(np.mean(motors.u))
            self.rotors.targets = motor_steady_state(motors, cfg.drone)
            self.rotors, accel = rotor_step(self.rotors, cfg.drone.rotor_constant, self.dt)
            v_b = R.T @ self.state.v_w
            wrench = actuator_wrench(self.rotors, accel, cfg.drone) + \
                drag_wrench(v_b, self.state.omega_b, cfg.drag)
            self.state = rigid_body_step(self.state, wrench, cfg.drone, self.dt, R=R)
            R = self.state.rotation()
            box = OrientedBox(self.state.p_w, R, half)
            hit = check_collision(box, self.scene, self._scene_centers, self._scene_radii)
            if hit is not None:
                cause = Cause.COLLISION
                break
            if not box_inside_bounds(box, lo, hi):
                cause = Cause.OUT_OF_BOUNDS
                break

        self.elapsed += cfg.substeps * self.dt
        passed = False
        if cause is Cause.RUNNING:
            crossing = waypoint_crossing(p_start, self.state.p_w, target_wp)
            if crossing is Crossing.PASSED:
                passed = True
                if self.target_index >= self.task.final_scored:
                    cause = Cause.SUCCESS
                else:
                    self.target_index += 1
            elif crossing is Crossing.WRONG_SIDE_HIT:
                cause = Cause.WRONG_SIDE
        timed_out = False
        if cause is Cause.RUNNING and self.elapsed >= cfg.episode_time_limit - 1e-9:
            cause = Cause.TIMEOUT
            timed_out = True

        v_b = R.T @ self.state.v_w
        dist_cur = float(np.linalg.norm(self.state.p_w - target_wp.position))
        pose = camera_pose(self.state, cfg.camera, mount=self.cam_mount, tilt=self.cam_tilt)
        dense = shaping_terms(R, self.state.p_w, v_b, self.state.omega_b,
                              cmd.a, self.prev_action.a, pose.optical_axis,
                              target_wp, self.prev_dist, dist_cur,
                              cfg.guidance, cfg.shaping)
        collided = cause in (Cause.COLLISION, Cause.OUT_OF_BOUNDS, Cause.WRONG_SIDE)
        breakdown = total_reward(collided, passed, timed_out,
                                 dense["prog"], dense["prec"], dense["cmd"],
                                 dense["guid"], dense["vel"], cfg.rewards)

        self.prev_dist = float(np.linalg.norm(
            self.state.p_w - self.track.waypoints[self.target_index].position))
        self.prev_action = cmd.copy()
        self.terminated = cause is not Cause.RUNNING
        self.cause = cause

        info = {
            "speed": float(np.linalg.norm(self.state.v_w)),
            "angular_speed": float(np.linalg.norm(self.state.omega_b)),
            "target_index": self.target_index,
            "min_obstacle_distance": min_obstacle_distance(self.state.p_w, self.scene),
            "motor_mean": motor_mean_acc / cfg.substeps,
            "elapsed": self.elapsed,
        }
        return StepResult(self._observe(), breakdown, self.terminated, cause, info)


def _rotation_with_x(x_axis):
    """Orthonormal basis whose first column is x_axis, z as vertical as possible."""
    x = np.asarray(x_axis, dtype=float)
    x = x / np.linalg.norm(x)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(x @ up)) > 0.999:
        up = np.array([1.0, 0.0, 0.0])
    y = np.cross(up, x)
    y /= np.linalg.norm(y)
    return np.column_stack([x, y, np.cross(x, y)])


class BatchEnv:
    """N independent env instances stepped together.

    Results are identical to stepping each env alone in any order; worker
    threads only exploit that independence.
    """

    def __init__(self, config: EnvConfig, n_envs: int, workers: int = 1):
        self.envs = [DroneRacingEnv(config, env_index=i) for i in range(n_envs)]
        self.config = config
        self.workers = workers
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def __len__(self):
        return len(self.envs)

    def reset(self, **kwargs):
        if self._pool is not None:
            return list(self._pool.map(lambda e: e.reset(**kwargs), self.envs))
        return [env.reset(**kwargs) for env in self.envs]

    def seed(self, seeds):
        for env, s in zip(self.envs, seeds):
            env.seed(s)

    def step(self, actions):
        if len(actions) != len(self.envs):
            raise ValueError(f"expected {len(self.envs)} actions, got {len(actions)}")

        def one(pair):
            env, action = pair
            if env.terminated and self.config.auto_reset:
                env.reset()
            return env.step(action)

        pairs = list(zip(self.envs, actions))
        if self._pool is not None:
            return list(self._pool.map(one, pairs))
        return [one(p) for p in pairs]

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
