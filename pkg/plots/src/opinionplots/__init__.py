"""Deterministic figure rendering for opinion-game CSV exports.

Consumes the solver's ``trajectory.csv`` / ``summary.csv`` files only; no
model math is recomputed here.
"""

__version__ = "0.1.0"

from .jobs import PlotJob, load_summary, load_trajectories
from .render import RenderResult, render

__all__ = ["PlotJob", "RenderResult", "load_summary", "load_trajectories",
           "render", "__version__"]
