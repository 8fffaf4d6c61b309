"""Report figures rendered to files alongside the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CAUSE_COLORS = {
    "success": "tab:green",
    "collision": "tab:red",
    "out_of_bounds": "tab:orange",
    "wrong_side": "tab:purple",
    "timeout": "tab:gray",
    "running": "tab:blue",
}


def _obstacle_patches(ax, obstacles, axes=(0, 1)):
    i, j = axes
    for obs in obstacles:
        c = obs.position
        if obs.kind == "sphere":
            ax.add_patch(plt.Circle((c[i], c[j]), obs.dims[0], color="0.4", alpha=0.6))
        elif obs.kind == "cylinder":
            ax.add_patch(plt.Circle((c[i], c[j]), obs.dims[0], color="0.3", alpha=0.6))
        else:
            r = obs.bounding_radius()
            ax.add_patch(plt.Circle((c[i], c[j]), r, color="0.5", alpha=0.4))


def _waypoint_segments(ax, track, axes=(0, 1)):
    i, j = axes
    centers = track.centers()
    ax.plot(centers[:, i], centers[:, j], "--", color="tab:blue", lw=0.8)
    for k, wp in enumerate(track.waypoints):
        corners = wp.corners()
        loop = np.vstack([corners, corners[:1]])
        ax.plot(loop[:, i], loop[:, j], color="tab:blue", lw=1.5)
        ax.annotate(str(k), (wp.position[i], wp.position[j]), fontsize=8)


def plot_track_layout(track, obstacles, path):
    """Top-down and side projection of waypoints and obstacle footprints."""
    fig, axs = plt.subplots(1, 2, figsize=(11, 5))
    for ax, axes, label in ((axs[0], (0, 1), "xy"), (axs[1], (0, 2), "xz")):
        _obstacle_patches(ax, obstacles, axes)
        _waypoint_segments(ax, track, axes)
        ax.set_aspect("equal")
        ax.set_xlabel(f"{label[0]} [m]")
        ax.set_ylabel(f"{label[1]} [m]")
    fig.suptitle(f"{len(track.waypoints)} waypoints, {len(list(obstacles))} obstacles")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_trajectories(logs, track, obstacles, path):
    """Top-down trajectories colored by termination cause."""
    fig, ax = plt.subplots(figsize=(8, 7))
    _obstacle_patches(ax, obstacles)
    _waypoint_segments(ax, track)
    seen = set()
    for log in logs:
        if not log.steps:
            continue
        pts = np.array([s["p"] for s in log.steps])
        color = CAUSE_COLORS.get(log.cause, "k")
        label = log.cause if log.cause not in seen else None
        seen.add(log.cause)
        ax.plot(pts[:, 0], pts[:, 1], color=color, lw=0.7, alpha=0.7, label=label)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _quantile_box(ax, x, dist, color):
    if dist.get("n", 0) == 0:
        return
    ax.plot([x, x], [dist["min"], dist["max"]], color=color, lw=0.8)
    ax.add_patch(plt.Rectangle((x - 0.18, dist["q25"]), 0.36, dist["q75"] - dist["q25"],
                               facecolor=color, alpha=0.45, edgecolor=color))
    ax.plot([x - 0.18, x + 0.18], [dist["q50"], dist["q50"]], color="k", lw=1.2)


def plot_metrics(named_metrics, path):
    """Quantile boxes per metric for one or more labelled metric sets
    (e.g. difficulty levels)."""
    fields = ["safety_margin", "motor_mean", "motor_max", "speed_mean",
              "speed_max", "angular_speed_mean", "angular_speed_max"]
    fig, axs = plt.subplots(2, 4, figsize=(14, 7))
    axs = axs.ravel()
    labels = list(named_metrics.keys())
    ax = axs[0]
    ax.bar(range(len(labels)), [named_metrics[k].success_rate for k in labels],
           color="tab:green")
    ax.set_xticks(range(len(labels)), labels)
    ax.set_ylim(0, 1)
    ax.set_title("success rate")
    for f_idx, name in enumerate(fields):
        ax = axs[f_idx + 1]
        for x, key in enumerate(labels):
            _quantile_box(ax, x, getattr(named_metrics[key], name), "tab:blue")
        ax.set_xticks(range(len(labels)), labels)
        ax.set_title(name.replace("_", " "))
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_depth(depth_values, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(depth_values, cmap="gray", vmin=0.0, vmax=1.0)
    fig.colorbar(im, ax=ax, label="normalized depth")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
