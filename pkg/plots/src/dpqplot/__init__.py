"""Figure emission for dpq benchmark result CSVs."""

from .figures import FigureSpec, load_results, plot_error, plot_time

__all__ = ["FigureSpec", "load_results", "plot_error", "plot_time"]
