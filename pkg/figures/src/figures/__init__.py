"""Figure rendering for comic-lab artifacts.

Consumes only the documented CSV/JSON schemas (curve CSVs, estimate CSVs,
run records); never imports the simulation package.
"""

from .curves import CurvePlotSpec, SchemaError, load_curve_csv, plot_fitness_curves
from .boxes import box_stats, plot_estimate_boxes

__all__ = [
    "CurvePlotSpec",
    "SchemaError",
    "box_stats",
    "load_curve_csv",
    "plot_estimate_boxes",
    "plot_fitness_curves",
]
