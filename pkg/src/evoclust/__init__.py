"""GSEMO for k-tMM, k-center, discrete k-median, k-means and fair k-median clustering."""

from .geometry import Dataset, DistanceTable, InputError, build_table, check_metric, distance, load_instance
from .objectives import ObjectiveVector, evaluate
from .gsemo import RunConfig, RunResult, run

__all__ = [
    "Dataset", "DistanceTable", "InputError", "ObjectiveVector", "RunConfig", "RunResult",
    "build_table", "check_metric", "distance", "evaluate", "load_instance", "run",
]
__version__ = "0.1.0"
