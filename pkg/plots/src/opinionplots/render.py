"""Figure rendering, byte-stable given fixed toolchain versions.

Uses the Agg backend with pinned size, dpi and fonts, and strips the
writer metadata that would otherwise embed timestamps or tool versions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .jobs import EmptySelectionError, PlotJob, load_summary, load_trajectories

matplotlib.rcParams.update({
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "svg.hashsalt": "opinionplots",
})

_SCRUB_METADATA = {
    ".png": {"Software": None},
    ".svg": {"Date": None},
}


@dataclass(frozen=True)
class RenderResult:
    """Where the figure went plus the distance-extremum bookkeeping."""

    output: str
    marked_extremum: Optional[float] = None
    csv_argmax: Optional[float] = None


def _save(fig, job: PlotJob) -> None:
    job.output.parent.mkdir(parents=True, exist_ok=True)
    suffix = job.output.suffix.lower()
    metadata = _SCRUB_METADATA.get(suffix, {})
    fig.savefig(job.output, metadata=metadata)
    plt.close(fig)


def _selected_issues(job: PlotJob, available) -> list:
    issues = sorted(set(available.tolist()))
    if job.issues:
        issues = [i for i in issues if i in set(job.issues)]
    if not issues:
        raise EmptySelectionError("no issues left after selection")
    return issues


def _render_trajectories(job: PlotJob) -> RenderResult:
    data = load_trajectories(job.inputs)
    states = data["kind"] == "x"
    issues = _selected_issues(job, data["issue"][states])
    agents = sorted(set(data["agent"].tolist()))
    if job.agents:
        agents = [a for a in agents if a in set(job.agents)]
    if not agents:
        raise EmptySelectionError("no agents left after selection")

    fig, axes = plt.subplots(len(issues), 1, figsize=(6.4, 2.4 * len(issues)),
                             sharex=True, squeeze=False)
    for ax, issue in zip(axes[:, 0], issues):
        for agent in agents:
            mask = states & (data["issue"] == issue) & (data["agent"] == agent)
            order = np.argsort(data["t_global"][mask], kind="stable")
            ax.plot(data["t_global"][mask][order], data["value"][mask][order],
                    linewidth=0.9,
                    label=f"agent {agent}" if len(agents) <= 8 else None)
        for offset in list(data["offsets"].values())[1:]:
            ax.axvline(offset, color="0.8", linewidth=0.6, zorder=0)
        ax.set_ylabel(f"issue {issue}")
        if len(agents) <= 8:
            ax.legend(loc="best", fontsize=7)
    axes[-1, 0].set_xlabel("t")
    fig.suptitle("opinion trajectories")
    _save(fig, job)
    return RenderResult(output=str(job.output))


def _render_distance(job: PlotJob) -> RenderResult:
    data = load_trajectories(job.inputs)
    states = data["kind"] == "x"
    agents = sorted(set(data["agent"].tolist()))
    if job.agents:
        agents = [a for a in agents if a in set(job.agents)]
    if len(agents) < 2:
        raise EmptySelectionError("distance figures need two agents")
    a, b = agents[:2]
    issues = _selected_issues(job, data["issue"][states])

    fig, axes = plt.subplots(len(issues), 1, figsize=(6.4, 2.4 * len(issues)),
                             sharex=True, squeeze=False)
    csv_argmax = None
    for ax, issue in zip(axes[:, 0], issues):
        series = {}
        for agent in (a, b):
            mask = states & (data["issue"] == issue) & (data["agent"] == agent)
            order = np.argsort(data["t_global"][mask], kind="stable")
            series[agent] = (data["t_global"][mask][order], data["value"][mask][order])
        t = series[a][0]
        gap = np.abs(series[a][1] - series[b][1])
        ax.plot(t, gap, linewidth=1.0, color="C0")
        peak_t = float(t[np.argmax(gap)])
        if csv_argmax is None:
            csv_argmax = peak_t
        if job.extremum_mark is not None:
            k = int(np.argmin(np.abs(t - job.extremum_mark)))
            ax.axvline(job.extremum_mark, color="C3", linewidth=0.8, linestyle="--")
            ax.plot([job.extremum_mark], [gap[k]], "o", color="C3", markersize=4)
        ax.set_ylabel(f"|x{a} - x{b}|, issue {issue}")
    axes[-1, 0].set_xlabel("t")
    fig.suptitle(f"opinion distance between agents {a} and {b}")
    _save(fig, job)
    return RenderResult(output=str(job.output), marked_extremum=job.extremum_mark,
                        csv_argmax=csv_argmax)


def _render_scenario_panel(job: PlotJob) -> RenderResult:
    data = load_summary(job.inputs[0])
    groups = sorted(set(data["group"].tolist()))
    if job.groups:
        groups = [g for g in groups if g in set(job.groups)]
    if not groups:
        raise EmptySelectionError("no groups left after selection")
    issues = _selected_issues(job, data["issue"])
    stages = sorted(set(data["stage"].tolist()))

    fig, axes = plt.subplots(len(issues), 1, figsize=(6.4, 2.4 * len(issues)),
                             sharex=True, squeeze=False)
    for ax, issue in zip(axes[:, 0], issues):
        for gi, group in enumerate(groups):
            means, spreads = [], []
            for stage in stages:
                mask = ((data["group"] == group) & (data["issue"] == issue)
                        & (data["stage"] == stage))
                if not mask.any():
                    raise EmptySelectionError(
                        f"summary has no rows for group '{group}', issue {issue}, "
                        f"stage {stage}")
                means.append(float(data["mean"][mask].mean()))
                spreads.append(float(data["spread"][mask].mean()))
            means = np.array(means)
            half = 0.5 * np.array(spreads)
            color = f"C{gi % 10}"
            ax.plot(stages, means, marker="o", markersize=3, linewidth=1.0,
                    color=color, label=group)
            ax.fill_between(stages, means - half, means + half, alpha=0.15,
                            color=color, linewidth=0)
        ax.set_ylabel(f"issue {issue}")
        ax.legend(loc="best", fontsize=7)
    axes[-1, 0].set_xlabel("stage")
    fig.suptitle("group means with min-max band per stage")
    _save(fig, job)
    return RenderResult(output=str(job.output))


def render(job: PlotJob) -> RenderResult:
    """Draw the requested figure; pure function of the CSVs and job fields."""
    if job.kind == "trajectories":
        return _render_trajectories(job)
    if job.kind == "distance":
        return _render_distance(job)
    return _render_scenario_panel(job)
