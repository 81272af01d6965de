"""Figure rendering for the CLI report paths. File output only (Agg)."""
from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .estimate import ConsistencyReport, EstimateResult, ScalingStudyResult
from .paths import EventSpec, StepTrajectory

__all__ = [
    "save_trajectory_figure",
    "save_estimate_figure",
    "save_scaling_figure",
    "save_consistency_figure",
]


def _finish(fig, out_path: str) -> str:
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return str(out_path)


def save_trajectory_figure(out_path: str, trajs: Sequence[StepTrajectory], scaled: bool = False) -> str:
    """Coordinate traces of a handful of trajectories, step-drawn."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6), sharex=True, sharey=True)
    for traj in trajs:
        if scaled:
            view = traj.scaled()
            t = np.concatenate(([0.0], view.times, [1.0]))
            vals = np.vstack((view.values, view.values[-1]))
        else:
            t = np.concatenate(([0.0], traj.times, [traj.horizon]))
            vals = np.vstack((traj.states, traj.states[-1]))
        for i, ax in enumerate(axes):
            ax.step(t, vals[:, i], where="post", lw=0.8, alpha=0.7)
    unit = "scaled time" if scaled else "time"
    for i, ax in enumerate(axes):
        ax.set_xlabel(unit)
        ax.set_title(f"component {i + 1}")
    axes[0].set_ylabel("scaled value" if scaled else "lattice coordinate")
    return _finish(fig, out_path)


def save_estimate_figure(
    out_path: str,
    sample_trajs: Sequence[StepTrajectory],
    event: EventSpec,
    result: EstimateResult,
) -> str:
    """Scaled sample paths against the target with its tolerance band."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6), sharex=True, sharey=True)
    tgt = event.target
    for i, ax in enumerate(axes):
        f = tgt.f1 if i == 0 else tgt.f2
        lo = f - event.epsilon
        if event.kind == "tube":
            hi = f + event.epsilon
        else:
            hi = np.full_like(f, event.bound_m)
        ax.fill_between(tgt.t, lo, hi, color="tab:blue", alpha=0.15, label=f"{event.kind} band")
        ax.plot(tgt.t, f, color="tab:blue", lw=2.0, label="target")
        for traj in sample_trajs:
            view = traj.scaled()
            t = np.concatenate(([0.0], view.times, [1.0]))
            vals = np.concatenate((view.values[:, i], [view.values[-1, i]]))
            ax.step(t, vals, where="post", lw=0.6, alpha=0.6, color="tab:gray")
        ax.set_xlabel("scaled time")
        ax.set_title(f"component {i + 1}")
    axes[0].set_ylabel("scaled value")
    axes[0].legend(loc="upper left", fontsize=8)
    sub = f"p = {result.p_hat:.3e} (n = {result.n_replicas}, hits = {result.n_hits}, {result.method})"
    fig.suptitle(f"T = {result.horizon:g}: {sub}", fontsize=10)
    return _finish(fig, out_path)


def save_scaling_figure(out_path: str, study: ScalingStudyResult) -> str:
    """Decay of the event probability against squared horizon, with fits."""
    rows = [r for r in study.rows if not r.zero_hits]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    if rows:
        x = np.array([r.horizon**2 for r in rows])
        y = np.array([-r.log_p_hat for r in rows])
        ax1.plot(x, y, "o", color="tab:blue", label="estimates")
        grid = np.linspace(0.0, x.max() * 1.05, 50)
        if math.isfinite(study.fitted_slope):
            ax1.plot(
                grid,
                study.fitted_slope * grid + study.fitted_intercept,
                "-",
                color="tab:orange",
                label=f"fit: slope {study.fitted_slope:.3f}",
            )
            ax1.plot(
                grid,
                study.fitted_slope_zero_intercept * grid,
                "--",
                color="tab:green",
                label=f"through origin: {study.fitted_slope_zero_intercept:.3f}",
            )
        ax1.plot(
            grid,
            study.target_rate * grid,
            ":",
            color="tab:red",
            label=f"rate functional {study.target_rate:.3f}",
        )
        ax1.legend(fontsize=8)
        ax2.plot(
            [r.horizon for r in rows],
            [r.normalized for r in rows],
            "o-",
            color="tab:blue",
        )
    ax1.set_xlabel("T squared")
    ax1.set_ylabel("-log p")
    ax2.axhline(study.target_rate, color="tab:red", ls=":")
    ax2.set_xlabel("T")
    ax2.set_ylabel("-log p / T squared")
    ax2.set_title(f"{study.event_kind} event", fontsize=10)
    return _finish(fig, out_path)


def save_consistency_figure(out_path: str, report: ConsistencyReport) -> str:
    """The two estimates of the bounded event with 2-sigma bars."""
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    labels = ["direct", "reweighted\nreference"]
    vals = [report.direct.p_hat, report.weighted.p_hat]
    errs = [2.0 * report.direct.std_error, 2.0 * report.weighted.std_error]
    ax.errorbar([0, 1], vals, yerr=errs, fmt="o", capsize=6, color="tab:blue")
    ax.set_xticks([0, 1], labels)
    ax.set_xlim(-0.5, 1.5)
    ax.set_ylabel("event probability")
    ax.set_title(f"T = {report.horizon:g}, n = {report.n_replicas}, z = {report.z_score:.2f}")
    return _finish(fig, out_path)
