"""Render run figures to files alongside the delimited output.

All plots read straight from a persisted trajectory, so a saved CSV is
enough to regenerate every figure.  The Agg backend is forced: runs are
headless and figures only ever go to disk.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import Trajectory

__all__ = ["render_run_figures", "render_collect_figures"]


def _new_axes(n_rows: int, title: str):
    fig, axes = plt.subplots(n_rows, 1, sharex=True, figsize=(8, 2.2 * n_rows))
    if n_rows == 1:
        axes = [axes]
    fig.suptitle(title)
    return fig, axes


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _plot_pose(traj: Trajectory, path: Path) -> Path:
    t = traj.column("t")
    fig, axes = _new_axes(3, "Pose error")
    for ax, name, unit in zip(axes, ("x", "y", "psi"), ("m", "m", "rad")):
        ax.plot(t, traj.column(name), lw=1.0)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_ylabel(f"{name} [{unit}]")
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("t [s]")
    return _save(fig, path)


def _plot_velocity(traj: Trajectory, path: Path) -> Path:
    t = traj.column("t")
    fig, axes = _new_axes(3, "Body velocity")
    for ax, name, unit in zip(axes, ("u", "v", "r"), ("m/s", "m/s", "rad/s")):
        ax.plot(t, traj.column(name), lw=1.0)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_ylabel(f"{name} [{unit}]")
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("t [s]")
    return _save(fig, path)


def _plot_control(traj: Trajectory, path: Path) -> Path:
    t = traj.column("t")
    fig, axes = _new_axes(3, "Applied force and moment")
    labels = ("surge force [N]", "sway force [N]", "yaw moment [N m]")
    for ax, name, label in zip(axes, ("tau1", "tau2", "tau3"), labels):
        ax.plot(t, traj.column(name), lw=1.0)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("t [s]")
    return _save(fig, path)


def _plot_plan(traj: Trajectory, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 6))
    x, y = traj.column("x"), traj.column("y")
    ax.plot(x, y, lw=1.0)
    ax.plot(x[0], y[0], "go", label="start")
    ax.plot(0.0, 0.0, "r*", ms=12, label="station")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("Plan view")
    ax.axis("equal")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)


def _plot_params(traj: Trajectory, path: Path, theta_true=None) -> Path:
    t = traj.column("t")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    names = ("ca1", "ca2", "xu", "yv", "nr", "xuu", "yvv", "nrr")
    for i, name in enumerate(names):
        line, = ax.plot(t, traj.column(f"theta_hat_{i + 1}"), lw=1.0, label=name)
        if theta_true is not None:
            ax.axhline(theta_true[i], color=line.get_color(), lw=0.6, ls="--")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("parameter estimate")
    ax.set_title("Identified hydrodynamic parameters")
    ax.grid(True, alpha=0.3)
    ax.legend(ncol=4, fontsize=8)
    return _save(fig, path)


def _plot_learning(traj: Trajectory, path: Path) -> Path:
    t = traj.column("t")
    fig, axes = _new_axes(4, "Learning diagnostics")
    axes[0].plot(t, traj.column("delta"), lw=0.8, label="on-policy")
    axes[0].plot(t, traj.column("delta_k_max"), lw=0.8, label="extrapolated max")
    axes[0].set_ylabel("Bellman residual")
    axes[0].legend(fontsize=8)
    axes[1].semilogy(t, np.maximum(traj.column("lambda_min"), 1e-16), lw=0.8)
    axes[1].set_ylabel("excitation monitor")
    axes[2].plot(t, traj.column("gamma_norm"), lw=0.8)
    axes[2].set_ylabel("gain norm")
    axes[3].plot(t, traj.column("wc_wa_dist"), lw=0.8, label="critic-actor gap")
    axes[3].plot(t, traj.column("wc_dist_oracle"), lw=0.8, label="critic vs oracle")
    axes[3].set_ylabel("weight distance")
    axes[3].legend(fontsize=8)
    for ax in axes:
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("t [s]")
    return _save(fig, path)


def render_run_figures(traj: Trajectory, out_dir, theta_true=None) -> list:
    """Write the station-keeping figure set; returns the created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [
        _plot_pose(traj, out / "pose.png"),
        _plot_velocity(traj, out / "velocity.png"),
        _plot_control(traj, out / "control.png"),
        _plot_plan(traj, out / "plan.png"),
        _plot_params(traj, out / "params.png", theta_true),
        _plot_learning(traj, out / "learning.png"),
    ]


def render_collect_figures(traj: Trajectory, out_dir) -> list:
    """Write the excitation-run figure set; returns the created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [
        _plot_pose(traj, out / "collect_pose.png"),
        _plot_velocity(traj, out / "collect_velocity.png"),
        _plot_plan(traj, out / "collect_plan.png"),
    ]
