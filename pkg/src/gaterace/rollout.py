"""Scripted policies, episode runners, trajectory logs, evaluation metrics and
a throughput benchmark."""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import EnvConfig
from .controller import ControlCommand, hover_throttle
from .env import BatchEnv, Cause, DroneRacingEnv
from .track import make_rng

LOG_FORMAT = "gaterace-trajectories"
LOG_VERSION = 1


@dataclass
class TrajectoryLog:
    track_ref: dict
    episode: int
    steps: list = field(default_factory=list)  # one dict per control step
    cause: str = Cause.RUNNING.value

    def duration(self):
        return self.steps[-1]["t"] if self.steps else 0.0


class RandomPolicy:
    """Uniform commands; used by the throughput benchmark."""

    privileged = False

    def __init__(self, seed=0):
        self.rng = make_rng(seed)

    def __call__(self, obs):
        return ControlCommand(self.rng.uniform(-1.0, 1.0, size=4))


class HoverPolicy:
    """Holds the computed hover throttle with zero rate commands."""

    privileged = False

    def __init__(self, config: EnvConfig):
        self.throttle = hover_throttle(config.drone)

    def __call__(self, obs):
        return ControlCommand(np.array([0.0, 0.0, 0.0, self.throttle]))


class ScriptedGuidancePolicy:
    """Geometric line-of-sight chaser with privileged state access.

    Velocity error toward a point just past the target waypoint is turned into
    a desired tilt, tracked by proportional rate commands; yaw steers the body
    x-axis at the target and throttle runs a climb-rate loop. Exists to
    exercise the full env loop, not to match any learned behavior.
    """

    privileged = True

    def __init__(self, config: EnvConfig, cruise_speed=3.0, k_v=2.2, k_att=3.0,
                 k_yaw=1.5, k_thr=0.06, max_tilt=0.5, aim_ahead=1.0, funnel=1.8):
        self.cfg = config
        self.hover = hover_throttle(config.drone)
        self.max_rate = np.asarray(config.controller.max_rate)
        self.cruise_speed = cruise_speed
        self.k_v = k_v
        self.k_att = k_att
        self.k_yaw = k_yaw
        self.k_thr = k_thr
        self.max_tilt = max_tilt
        self.aim_ahead = aim_ahead
        self.funnel = funnel

    def _aim_point(self, p, wp):
        """Carrot on the waypoint axis: funnel onto the approach axis and fly
        through. After a lateral miss, first push straight outward (killing
        momentum toward the frame), then loop behind the plane outside the
        rectangle to re-approach."""
        R_wp = wp.rotation()
        local = R_wp.T @ (p - wp.position)
        ny = 2.0 * abs(local[1]) / wp.width
        nz = 2.0 * abs(local[2]) / wp.height
        # beyond the plane with this waypoint still targeted means it was
        # missed (a pass would have advanced the target)
        if local[0] > 0.2:
            lat = local[1:]
            n = float(np.linalg.norm(lat))
            d = lat / n if n > 0 else np.array([1.0, 0.0])
            if max(ny, nz) < 1.5:
                aim_local = np.concatenate(([local[0] + 0.5], (n + 2.5) * d))
            else:
                aim_local = np.concatenate(([-3.0], lat))
            return wp.position + R_wp @ aim_local
        ahead = float(np.clip(local[0] + self.funnel, -4.0, self.aim_ahead))
        return wp.position + ahead * R_wp[:, 0]

    def __call__(self, env: DroneRacingEnv) -> ControlCommand:
        state = env.state
        wp = env.track.waypoints[env.target_index]
        R = state.rotation()
        aim = self._aim_point(state.p_w, wp)
        to_aim = aim - state.p_w
        dist = float(np.linalg.norm(to_aim))
        # brake when the extrapolated plane crossing would fall near the frame
        R_wp = wp.rotation()
        lp = R_wp.T @ (state.p_w - wp.position)
        lv = R_wp.T @ state.v_w
        speed = self.cruise_speed
        if lp[0] < 0.0 and lv[0] > 0.5:
            t_go = -lp[0] / lv[0]
            if t_go < 1.5:
                pred = lp[1:] + lv[1:] * t_go
                pred_norm = max(abs(pred[0]) / (0.5 * wp.width),
                                abs(pred[1]) / (0.5 * wp.height))
                if pred_norm > 0.8:
                    speed = 2.5
        v_des = speed * to_aim / max(dist, 1e-9)
        a_des = self.k_v * (v_des - state.v_w)  # m/s^2, world frame

        yaw = math.atan2(R[1, 0], R[0, 0])
        c, s = math.cos(yaw), math.sin(yaw)
        a_fwd = c * a_des[0] + s * a_des[1]
        a_lat = -s * a_des[0] + c * a_des[1]

        # tilt that would produce the demanded horizontal acceleration
        pitch_des = float(np.clip(math.atan2(a_fwd, 9.81), -self.max_tilt, self.max_tilt))
        roll_des = float(np.clip(math.atan2(-a_lat, 9.81), -self.max_tilt, self.max_tilt))
        pitch = math.asin(float(np.clip(-R[2, 0], -1.0, 1.0)))  # positive nose-down
        roll = math.atan2(R[2, 1], R[2, 2])

        to_wp_b = R.T @ (wp.position - state.p_w)
        bearing = math.atan2(to_wp_b[1], to_wp_b[0])

        roll_rate = self.k_att * (roll_des - roll)
        pitch_rate = self.k_att * (pitch_des - pitch)
        yaw_rate = self.k_yaw * bearing
        throttle = self.hover + self.k_thr * a_des[2]

        cmd = np.array([
            roll_rate / self.max_rate[0],
            pitch_rate / self.max_rate[1],
            yaw_rate / self.max_rate[2],
            throttle,
        ])
        return ControlCommand(cmd)


POLICIES = {
    "scripted": ScriptedGuidancePolicy,
    "hover": HoverPolicy,
    "random": lambda cfg: RandomPolicy(seed=cfg.seed),
}


def run_episode(env: DroneRacingEnv, policy, track_ref, episode: int,
                eval_mode=False, track_override=None) -> TrajectoryLog:
    obs = env.reset(track_override=track_override, eval_mode=eval_mode)
    log = TrajectoryLog(track_ref=track_ref, episode=episode)
    max_steps = int(env.config.episode_time_limit * env.config.control_hz) + 2
    clamped = 0
    for _ in range(max_steps):
        raw = policy(env) if getattr(policy, "privileged", False) else policy(obs)
        if not isinstance(raw, ControlCommand):
            arr = np.asarray(raw, dtype=float)
            if np.any(np.abs(arr) > 1.0):
                clamped += 1
            raw = ControlCommand(arr)
        res = env.step(raw)
        obs = res.obs
        rec = {
            "t": res.info["elapsed"],
            "p": [float(x) for x in env.state.p_w],
            "q": [float(x) for x in env.state.q_wb],
            "v": [float(x) for x in env.state.v_w],
            "omega": [float(x) for x in env.state.omega_b],
            "action": [float(x) for x in raw.a],
            "target_index": res.info["target_index"],
            "speed": res.info["speed"],
            "angular_speed": res.info["angular_speed"],
            "motor_mean": res.info["motor_mean"],
            "min_obstacle_distance": (None if math.isinf(res.info["min_obstacle_distance"])
                                      else res.info["min_obstacle_distance"]),
        }
        rec.update(res.reward.as_dict())
        log.steps.append(rec)
        if res.terminated:
            log.cause = res.cause.value
            break
    log.track_ref = dict(track_ref, clamped_actions=clamped)
    return log


def run_episodes(config: EnvConfig, tracks, policy, episodes_per_track: int,
                 base_seed: int = 0, eval_mode: bool = False):
    """Roll out `episodes_per_track` randomized episodes on each given track.

    `tracks` yields (TrackSpec, ObstacleSet) pairs; deterministic for a fixed
    base_seed.
    """
    logs = []
    for t_idx, (spec, obstacles) in enumerate(tracks):
        env = DroneRacingEnv(config, env_index=t_idx)
        env.seed(base_seed)
        ref = {"track": t_idx, "metadata": spec.metadata}
        for ep in range(episodes_per_track):
            logs.append(run_episode(env, policy, ref, ep, eval_mode=eval_mode,
                                    track_override=(spec, obstacles)))
    return logs


# ---------------------------------------------------------------------------
# metrics

@dataclass
class Metrics:
    episodes: int
    success_rate: float
    causes: dict
    safety_margin: dict
    motor_mean: dict
    motor_max: dict
    speed_mean: dict
    speed_max: dict
    angular_speed_mean: dict
    angular_speed_max: dict

    def as_dict(self):
        return dataclasses.asdict(self)


_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


def _distribution(values):
    # sorted so aggregates are invariant to episode order
    vals = np.sort(np.asarray([v for v in values if v is not None], dtype=float))
    if len(vals) == 0:
        return {"n": 0}
    out = {"n": int(len(vals)), "mean": float(vals.mean()),
           "min": float(vals.min()), "max": float(vals.max())}
    for q in _QUANTILES:
        out[f"q{int(q * 100):02d}"] = float(np.quantile(vals, q))
    return out


def compute_metrics(logs) -> Metrics:
    """Aggregate per-episode statistics across a set of trajectory logs."""
    if not logs:
        raise ValueError("compute_metrics needs at least one episode")
    causes = {}
    margins, m_mean, m_max, s_mean, s_max, w_mean, w_max = [], [], [], [], [], [], []
    for log in logs:
        causes[log.cause] = causes.get(log.cause, 0) + 1
        dists = [s["min_obstacle_distance"] for s in log.steps
                 if s["min_obstacle_distance"] is not None]
        margins.append(min(dists) if dists else None)
        motor = [s["motor_mean"] for s in log.steps]
        speed = [s["speed"] for s in log.steps]
        omega = [s["angular_speed"] for s in log.steps]
        if motor:
            m_mean.append(float(np.mean(motor)))
            m_max.append(float(np.max(motor)))
            s_mean.append(float(np.mean(speed)))
            s_max.append(float(np.max(speed)))
            w_mean.append(float(np.mean(omega)))
            w_max.append(float(np.max(omega)))
    return Metrics(
        episodes=len(logs),
        success_rate=causes.get(Cause.SUCCESS.value, 0) / len(logs),
        causes=causes,
        safety_margin=_distribution(margins),
        motor_mean=_distribution(m_mean),
        motor_max=_distribution(m_max),
        speed_mean=_distribution(s_mean),
        speed_max=_distribution(s_max),
        angular_speed_mean=_distribution(w_mean),
        angular_speed_max=_distribution(w_max),
    )


# ---------------------------------------------------------------------------
# log files (newline-delimited JSON)

def write_logs(path, logs):
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": LOG_FORMAT, "version": LOG_VERSION,
                             "episodes": len(logs)}) + "\n")
        for log in logs:
            fh.write(json.dumps({"type": "episode", "track_ref": log.track_ref,
                                 "episode": log.episode, "cause": log.cause}) + "\n")
            for step in log.steps:
                fh.write(json.dumps({"type": "step", **step}) + "\n")


def read_logs(path):
    logs = []
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != LOG_FORMAT:
            raise ValueError(f"{path}: not a {LOG_FORMAT} file")
        for line in fh:
            rec = json.loads(line)
            if rec["type"] == "episode":
                logs.append(TrajectoryLog(track_ref=rec["track_ref"],
                                          episode=rec["episode"], cause=rec["cause"]))
            else:
                rec.pop("type")
                logs[-1].steps.append(rec)
    return logs


# ---------------------------------------------------------------------------
# throughput

def benchmark_throughput(config: EnvConfig, n_envs: int, duration: float = 2.0,
                         depth_enabled: bool = False, workers: int = 1,
                         depth_size=(27, 48)) -> dict:
    """Env steps per wall-clock second under a random-action policy."""
    cam = dataclasses.replace(config.camera, height=depth_size[0], width=depth_size[1])
    cfg = dataclasses.replace(config, auto_reset=True, depth_enabled=depth_enabled, camera=cam)
    batch = BatchEnv(cfg, n_envs, workers=workers)
    policy = RandomPolicy(seed=cfg.seed)
    batch.reset()
    steps = 0
    t0 = time.perf_counter()
    while time.perf_counter() - t0 < duration:
        actions = [policy(None) for _ in range(n_envs)]
        batch.step(actions)
        steps += n_envs
    elapsed = time.perf_counter() - t0
    depth_time = sum(env.depth_time for env in batch.envs)
    batch.close()
    return {
        "n_envs": n_envs,
        "workers": workers,
        "depth_enabled": depth_enabled,
        "depth_resolution": list(depth_size) if depth_enabled else None,
        "elapsed_s": elapsed,
        "env_steps": steps,
        "steps_per_s": steps / elapsed,
        "substeps_per_s": steps * cfg.substeps / elapsed,
        "depth_share": depth_time / elapsed if elapsed > 0 else 0.0,
    }
