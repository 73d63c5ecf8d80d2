"""Figure rendering for experiment CSVs produced by the perfpred CLI."""

from .main import PlotError, load_series, main, render

__all__ = ["PlotError", "load_series", "main", "render"]
