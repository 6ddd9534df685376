"""Multi-source network-log anomaly detection.

Fits an ensemble of unsupervised outlier detectors (isolation forest, HBOS,
CBLOF) on historical windows, scores the current window, combines verdicts by
democratic voting within and across sources, renders PCA heatmaps, and raises
alerts when the current window's gauge passes the 75th percentile of history.
"""

__version__ = "0.1.0"

from .datamodel import DataSourceKind, RecordBatch, SensorRecord, WindowSplit

__all__ = ["DataSourceKind", "RecordBatch", "SensorRecord", "WindowSplit", "__version__"]
