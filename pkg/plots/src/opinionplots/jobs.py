"""Plot-job description and CSV ingestion.

Trajectory files are long-format tables with the header
``stage,t,agent,issue,kind,value`` (kind is x for states, u for controls);
summaries have ``seed,stage,group,issue,mean,spread``.  Multi-stage inputs
are concatenated on a global time axis by offsetting each stage with the
cumulative end time of the stages before it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

TRAJECTORY_COLUMNS = ["stage", "t", "agent", "issue", "kind", "value"]
SUMMARY_COLUMNS = ["seed", "stage", "group", "issue", "mean", "spread"]

KINDS = ("trajectories", "distance", "scenario-panel")


class MissingColumnsError(ValueError):
    """The CSV header lacks required columns."""


class EmptySelectionError(ValueError):
    """No rows survive the agent/issue/group selection."""


@dataclass
class PlotJob:
    """What to draw: inputs, figure kind, selections and the output path."""

    inputs: List[Path]
    kind: str
    output: Path
    issues: Optional[Sequence[int]] = None
    agents: Optional[Sequence[int]] = None
    groups: Optional[Sequence[str]] = None
    extremum_mark: Optional[float] = None

    def __post_init__(self):
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got '{self.kind}'")
        if not self.inputs:
            raise ValueError("need at least one input CSV")


def _read_table(path: Path, required: List[str]) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumnsError(
                f"{path}: missing column(s) {', '.join(missing)} "
                f"(header: {', '.join(header) or 'empty'})"
            )
        rows = list(reader)
    if not rows:
        raise EmptySelectionError(f"{path}: no data rows")
    return {c: [row[c] for row in rows] for c in required}


def load_trajectories(paths: Sequence[Path]) -> dict:
    """Stack one or more trajectory CSVs onto a single global time axis.

    Returns arrays ``t`` (global time), ``stage``, ``agent``, ``issue``,
    ``kind`` and ``value``, plus the per-stage offsets used.
    """
    frames = []
    for path in paths:
        cols = _read_table(Path(path), TRAJECTORY_COLUMNS)
        frames.append({
            "stage": np.array(cols["stage"], dtype=int),
            "t": np.array(cols["t"], dtype=float),
            "agent": np.array(cols["agent"], dtype=int),
            "issue": np.array(cols["issue"], dtype=int),
            "kind": np.array(cols["kind"]),
            "value": np.array(cols["value"], dtype=float),
        })
    stage = np.concatenate([f["stage"] for f in frames])
    t = np.concatenate([f["t"] for f in frames])
    agent = np.concatenate([f["agent"] for f in frames])
    issue = np.concatenate([f["issue"] for f in frames])
    kind = np.concatenate([f["kind"] for f in frames])
    value = np.concatenate([f["value"] for f in frames])

    offsets = {}
    running = 0.0
    for s in sorted(set(stage.tolist())):
        offsets[s] = running
        running += float(t[stage == s].max())
    t_global = t + np.array([offsets[s] for s in stage])
    return {"stage": stage, "t": t, "t_global": t_global, "agent": agent,
            "issue": issue, "kind": kind, "value": value, "offsets": offsets}


def load_summary(path: Path) -> dict:
    cols = _read_table(Path(path), SUMMARY_COLUMNS)
    return {
        "seed": np.array(cols["seed"], dtype=int),
        "stage": np.array(cols["stage"], dtype=int),
        "group": np.array(cols["group"]),
        "issue": np.array(cols["issue"], dtype=int),
        "mean": np.array(cols["mean"], dtype=float),
        "spread": np.array(cols["spread"], dtype=float),
    }
