"""Figure rendering for hybrid-measurement protocol datasets."""

from .render import DatasetError, FigureSpec, build_figure, render, zero_centered_limits

__version__ = "0.1.0"

__all__ = ["DatasetError", "FigureSpec", "build_figure", "render",
           "zero_centered_limits", "__version__"]
