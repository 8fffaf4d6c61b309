"""Command-line front end: track generation and inspection, rollouts, metrics,
depth rendering and throughput benchmarks.

Runtime failures exit with code 1; click reports usage errors with code 2.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import rollout as ro
from .config import ConfigError, EnvConfig, difficulty_preset, load_config, save_config
from .geom import euler_zyx_to_matrix
from .sensors import CameraPose, render_depth
from .track import (
    ObstacleSet,
    TrackGenerationError,
    gate_bars,
    generate_track,
    load_track,
    make_rng,
    place_orbit_obstacles,
    place_tree_obstacles,
    place_wall_obstacles,
    save_track,
)


def _load_config(path) -> EnvConfig:
    return load_config(path) if path else EnvConfig().validate()


def _fail(msg):
    click.echo(f"error: {msg}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Obstacle-aware drone racing simulator."""


config_opt = click.option("--config", type=click.Path(exists=True, dir_okay=False),
                          default=None, help="YAML config file (defaults otherwise).")
seed_opt = click.option("--seed", type=int, default=0, show_default=True)


def _build_level_track(cfg: EnvConfig, level: int, n_waypoints: int, seed, index=0):
    bounds = difficulty_preset(level)
    rng = make_rng(seed, index)
    track = generate_track(bounds, n_waypoints, rng,
                           metadata={"level": level, "seed": int(seed), "index": index})
    p0 = track.waypoints[0]
    back = p0.position - cfg.init.spawn_zone_length * p0.rotation()[:, 0]
    keep = [(p0.position, back, cfg.init.spawn_zone_radius)]
    common = dict(margin=bounds.clearance_margin, keep_out=keep)
    obstacles = []
    obstacles += place_wall_obstacles(track, bounds.n_wall, bounds.wall_size_lo,
                                      bounds.wall_size_hi, rng, jitter=bounds.wall_jitter, **common)
    obstacles += place_tree_obstacles(track, bounds.n_tree, bounds.tree_params, rng,
                                      jitter=bounds.wall_jitter, **common)
    obstacles += place_orbit_obstacles(track, bounds.n_orbit, bounds.orbit_params, rng, **common)
    return track, ObstacleSet(obstacles)


@main.command("generate-track")
@click.option("--level", type=click.IntRange(1, 4), default=1, show_default=True)
@click.option("--n-waypoints", type=int, default=4, show_default=True)
@config_opt
@seed_opt
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--figures", type=click.Path(file_okay=False), default=None,
              help="Also render a layout figure into this directory.")
def cli_generate_track(level, n_waypoints, config, seed, out, figures):
    """Generate a random track with managed obstacles and write a track file."""
    cfg = _load_config(config)
    try:
        track, obstacles = _build_level_track(cfg, level, n_waypoints, seed)
    except TrackGenerationError as err:
        _fail(str(err))
    save_track(out, track, obstacles)
    click.echo(f"wrote {out}: {len(track.waypoints)} waypoints, "
               f"{obstacles.group_count()} obstacles {obstacles.group_kinds()} "
               f"({len(obstacles)} primitives)")
    if figures:
        from .viz import plot_track_layout
        Path(figures).mkdir(parents=True, exist_ok=True)
        fig_path = Path(figures) / (Path(out).stem + "_layout.png")
        plot_track_layout(track, obstacles, fig_path)
        click.echo(f"figure: {fig_path}")


@main.command("inspect-track")
@click.option("--track", "track_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--figures", type=click.Path(file_okay=False), default=None)
def cli_inspect_track(track_path, figures):
    """Print a summary of a track file."""
    try:
        track, obstacles = load_track(track_path)
    except (ValueError, json.JSONDecodeError) as err:
        _fail(str(err))
    centers = track.centers()
    gaps = np.linalg.norm(np.diff(centers, axis=0), axis=1)
    kinds = {}
    for o in obstacles:
        kinds[o.kind] = kinds.get(o.kind, 0) + 1
    bars = sum(1 for wp in track.waypoints if wp.bars)
    click.echo(f"{track_path}: {len(track.waypoints)} waypoints ({bars} with bars), "
               f"{obstacles.group_count()} obstacles {obstacles.group_kinds()}, "
               f"{len(obstacles)} primitives {kinds}")
    click.echo(f"segment lengths [m]: {np.array2string(gaps, precision=2)}")
    click.echo(f"sizes [m]: " + ", ".join(f"{wp.width:.2f}x{wp.height:.2f}"
                                          for wp in track.waypoints))
    click.echo(f"metadata: {track.metadata}")
    if figures:
        from .viz import plot_track_layout
        Path(figures).mkdir(parents=True, exist_ok=True)
        fig_path = Path(figures) / (Path(track_path).stem + "_layout.png")
        plot_track_layout(track, obstacles, fig_path)
        click.echo(f"figure: {fig_path}")


def episode_rows(logs):
    rows = []
    for log in logs:
        dists = [s["min_obstacle_distance"] for s in log.steps
                 if s["min_obstacle_distance"] is not None]
        rows.append({
            "track": log.track_ref.get("track", ""),
            "episode": log.episode,
            "cause": log.cause,
            "steps": len(log.steps),
            "duration_s": round(log.duration(), 4),
            "safety_margin_m": round(min(dists), 4) if dists else "",
            "motor_mean": round(float(np.mean([s["motor_mean"] for s in log.steps])), 4),
            "speed_mean": round(float(np.mean([s["speed"] for s in log.steps])), 4),
            "speed_max": round(float(np.max([s["speed"] for s in log.steps])), 4),
        })
    return rows


def _write_episode_csv(path, logs):
    rows = episode_rows(logs)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _report_metrics(metrics):
    click.echo(f"episodes: {metrics.episodes}  success rate: {metrics.success_rate:.3f}")
    click.echo(f"causes: {metrics.causes}")
    sm = metrics.safety_margin
    if sm.get("n"):
        click.echo(f"safety margin [m]: median {sm['q50']:.2f} "
                   f"(q10 {sm['q10']:.2f}, q90 {sm['q90']:.2f})")
    click.echo(f"mean speed [m/s]: {metrics.speed_mean.get('mean', float('nan')):.2f}")


@main.command("rollout")
@click.option("--track", "track_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Track file; otherwise random tracks from --level.")
@click.option("--level", type=click.IntRange(1, 4), default=None)
@click.option("--tracks", "n_tracks", type=int, default=10, show_default=True,
              help="Random tracks to generate when using --level.")
@click.option("--episodes", type=int, default=10, show_default=True,
              help="Episodes per track.")
@click.option("--policy", "policy_name", type=click.Choice(sorted(ro.POLICIES)),
              default="scripted", show_default=True)
@config_opt
@seed_opt
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Trajectory log file (.jsonl).")
@click.option("--metrics-out", type=click.Path(dir_okay=False), default=None)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Per-episode summary table.")
@click.option("--figures", type=click.Path(file_okay=False), default=None)
@click.option("--eval", "eval_mode", is_flag=True,
              help="Widen initial-state randomization ranges.")
@click.option("--no-depth", is_flag=True, help="Skip depth rendering (faster).")
def cli_rollout(track_path, level, n_tracks, episodes, policy_name, config, seed,
                out, metrics_out, csv_path, figures, eval_mode, no_depth):
    """Run episodes and report success rate, speeds and safety margins."""
    if track_path is None and level is None:
        raise click.UsageError("either --track or --level is required")
    cfg = _load_config(config)
    if no_depth:
        cfg = dataclasses.replace(cfg, depth_enabled=False)
    if track_path:
        tracks = [load_track(track_path)]
    else:
        try:
            tracks = [_build_level_track(cfg, level, cfg.n_waypoints_per_segment, seed, i)
                      for i in range(n_tracks)]
        except TrackGenerationError as err:
            _fail(str(err))
    policy = ro.POLICIES[policy_name](cfg)
    logs = ro.run_episodes(cfg, tracks, policy, episodes, base_seed=seed,
                           eval_mode=eval_mode)
    if not logs:
        click.echo("no episodes requested; nothing to report")
        return
    if out:
        ro.write_logs(out, logs)
        click.echo(f"logs: {out}")
    metrics = ro.compute_metrics(logs)
    _report_metrics(metrics)
    if metrics_out:
        with open(metrics_out, "w") as fh:
            json.dump(metrics.as_dict(), fh, indent=1)
        click.echo(f"metrics: {metrics_out}")
    if csv_path:
        _write_episode_csv(csv_path, logs)
        click.echo(f"episode table: {csv_path}")
    if figures:
        from .viz import plot_metrics, plot_trajectories
        Path(figures).mkdir(parents=True, exist_ok=True)
        plot_metrics({"run": metrics}, Path(figures) / "metrics.png")
        spec, obstacles = tracks[0]
        first = [log for log in logs if log.track_ref.get("track") == 0]
        plot_trajectories(first, spec, obstacles, Path(figures) / "trajectories_track0.png")
        click.echo(f"figures: {figures}")


@main.command("metrics")
@click.option("--logs", "logs_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None)
@click.option("--figures", type=click.Path(file_okay=False), default=None)
def cli_metrics(logs_path, out, csv_path, figures):
    """Recompute metrics from a trajectory log file."""
    logs = ro.read_logs(logs_path)
    if not logs:
        _fail(f"{logs_path} holds no episodes")
    metrics = ro.compute_metrics(logs)
    _report_metrics(metrics)
    if out:
        with open(out, "w") as fh:
            json.dump(metrics.as_dict(), fh, indent=1)
        click.echo(f"metrics: {out}")
    if csv_path:
        _write_episode_csv(csv_path, logs)
        click.echo(f"episode table: {csv_path}")
    if figures:
        from .viz import plot_metrics
        Path(figures).mkdir(parents=True, exist_ok=True)
        plot_metrics({"run": metrics}, Path(figures) / "metrics.png")
        click.echo(f"figures: {figures}")


def _parse_pose(pose: str):
    parts = [float(v) for v in pose.split(",")]
    if len(parts) not in (3, 4, 5, 6):
        raise ValueError
    pos = np.array(parts[:3])
    yaw, pitch, roll = (list(parts[3:]) + [0.0, 0.0, 0.0])[:3]
    return pos, euler_zyx_to_matrix(roll, pitch, yaw)


@main.command("render-depth")
@click.option("--track", "track_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Track file; empty scene when omitted.")
@click.option("--pose", required=True,
              help="Camera pose 'x,y,z[,yaw[,pitch[,roll]]]' (m, rad).")
@config_opt
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output portable graymap (.pgm).")
@click.option("--png", type=click.Path(dir_okay=False), default=None,
              help="Optional rendered PNG figure.")
def cli_render_depth(track_path, pose, config, out, png):
    """Render one normalized depth frame from an arbitrary pose."""
    cfg = _load_config(config)
    try:
        pos, R = _parse_pose(pose)
    except ValueError:
        raise click.UsageError(f"malformed pose '{pose}'")
    scene = []
    if track_path:
        track, obstacles = load_track(track_path)
        scene = list(obstacles)
        for wp in track.waypoints:
            scene += gate_bars(wp, cfg.bar_thickness)
    img = render_depth(CameraPose(pos, R), cfg.camera, scene,
                       env_bounds=cfg.bounds.env_bounds)
    img.to_pgm(out)
    click.echo(f"wrote {out} ({cfg.camera.height}x{cfg.camera.width}, "
               f"center={img.values[cfg.camera.height // 2, cfg.camera.width // 2]:.4f})")
    if png:
        from .viz import plot_depth
        plot_depth(img.values, png)
        click.echo(f"figure: {png}")


@main.command("benchmark")
@click.option("--n-envs", default="1,64", show_default=True,
              help="Comma-separated batch sizes.")
@click.option("--duration", type=float, default=2.0, show_default=True)
@click.option("--depth/--no-depth", default=False, show_default=True)
@click.option("--depth-size", default="27x48", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@config_opt
@seed_opt
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def cli_benchmark(n_envs, duration, depth, depth_size, workers, config, seed, out):
    """Measure env steps per second under a random-action policy."""
    cfg = dataclasses.replace(_load_config(config), seed=seed)
    try:
        sizes = [int(v) for v in n_envs.split(",")]
        h, w = (int(v) for v in depth_size.split("x"))
    except ValueError:
        raise click.UsageError("bad --n-envs or --depth-size")
    reports = []
    for n in sizes:
        rep = ro.benchmark_throughput(cfg, n, duration=duration, depth_enabled=depth,
                                      workers=workers, depth_size=(h, w))
        reports.append(rep)
        click.echo(f"n_envs={n:4d} workers={workers} depth={depth}: "
                   f"{rep['steps_per_s']:.0f} steps/s, "
                   f"{rep['substeps_per_s']:.0f} substeps/s, "
                   f"depth share {rep['depth_share'] * 100:.1f}%")
    if out:
        with open(out, "w") as fh:
            json.dump(reports, fh, indent=1)
        click.echo(f"report: {out}")


@main.command("preset")
@click.option("--level", type=click.IntRange(1, 4), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write a full config with these bounds.")
def cli_preset(level, out):
    """Show the randomization bounds for a difficulty level."""
    bounds = difficulty_preset(level)
    cfg = dataclasses.replace(EnvConfig(), bounds=bounds)
    click.echo(f"level {level}: n_wall={bounds.n_wall} n_tree={bounds.n_tree} "
               f"n_orbit={bounds.n_orbit}")
    click.echo(f"rel_pose_lo={bounds.rel_pose_lo}")
    click.echo(f"rel_pose_hi={bounds.rel_pose_hi}")
    if out:
        save_config(cfg, out)
        click.echo(f"config: {out}")


def run():
    try:
        main(standalone_mode=True)
    except (ConfigError, TrackGenerationError, OSError) as err:
        _fail(str(err))


if __name__ == "__main__":
    run()
