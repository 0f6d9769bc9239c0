"""
Append-only CSV files of training and evaluation metrics
"""

import csv
import logging
import math
import os


METRIC_COLUMNS = (
    "env_step", "update", "episode_return", "success_rate", "mvmae/loss",
    "mvmae/masked_view_mse", "wm/kl", "wm/recon", "actor/loss",
    "actor/bc_nll", "critic/loss", "fps",
)
METRICS_FILENAME = "metrics.csv"
EVAL_FILENAME = "eval.csv"


class MetricsWriter():
    """
    Append rows of metric values to a CSV file

    The header is written when the file is new. Values of missing columns
    stay empty, keys outside the columns are ignored.
    """

    logger = logging.getLogger(__name__).getChild("MetricsWriter")

    def __init__(self, path, columns=METRIC_COLUMNS):
        self.path = path
        self.columns = tuple(columns)

    def write(self, row):
        new = not os.path.isfile(self.path) or \
            os.path.getsize(self.path) == 0
        with open(self.path, "a", newline="", encoding="utf8") as f:
            writer = csv.DictWriter(f, fieldnames=self.columns,
                                    extrasaction="ignore")
            if new:
                writer.writeheader()
            writer.writerow({key: _format(row.get(key))
                             for key in self.columns})


def _format(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return "{:.6g}".format(value)
    return str(value)


class MetricsAccumulator():
    """Average metric values between two log rows"""

    def __init__(self):
        self.sums = {}
        self.counts = {}

    def add(self, metrics):
        for key, value in metrics.items():
            if value is None or math.isnan(value):
                continue
            self.sums[key] = self.sums.get(key, 0.0) + value
            self.counts[key] = self.counts.get(key, 0) + 1

    def means(self):
        return {key: self.sums[key] / self.counts[key] for key in self.sums}

    def reset(self):
        self.sums = {}
        self.counts = {}


def read_metrics(path):
    """
    Read a metrics CSV into columns

    Empty cells become NaN.

    Returns
    -------
    dict
        Column name to list of float

    Raises
    ------
    ValueError
        If the file has no data row
    """
    with open(path, "r", newline="", encoding="utf8") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError("No metrics in {}".format(path))
    columns = {}
    for row in rows:
        for key, value in row.items():
            columns.setdefault(key, []).append(
                float(value) if value not in ("", None) else math.nan)
    return columns
