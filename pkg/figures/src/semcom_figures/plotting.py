"""CSV ingestion and curve rendering.

The input schema is fixed; any drift (different header, missing column,
malformed row) is an error, never a warning, so silent misreads cannot make
it into a figure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

EXPECTED_HEADER = "seed,interval,user,reward_kind,blocked,acc,mse,reward,sum_rate,rows_used"
NUMERIC_COLUMNS = ("acc", "mse", "reward", "sum_rate", "rows_used")


class FigureError(ValueError):
    """Raised for schema drift or malformed metric rows."""


@dataclass(frozen=True)
class SeriesInput:
    """One curve: a CSV path plus its legend label."""

    path: str
    label: str


@dataclass(frozen=True)
class PlotSpec:
    """What to render: inputs, metric column, smoothing window, output path."""

    inputs: tuple[SeriesInput, ...]
    metric: str
    out_path: str
    window: int = 20

    def validate(self) -> None:
        if not self.inputs:
            raise FigureError("at least one input CSV is required")
        if self.metric not in NUMERIC_COLUMNS:
            raise FigureError(
                f"metric must be one of {NUMERIC_COLUMNS}, got {self.metric!r}"
            )
        if self.window < 1:
            raise FigureError(f"window must be >= 1, got {self.window}")


def read_metrics(path: str) -> dict[str, np.ndarray]:
    """Load one metrics CSV into column arrays, validating the schema."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureError(f"{path}: empty file") from None
        if ",".join(header) != EXPECTED_HEADER:
            raise FigureError(
                f"{path}: header mismatch: expected {EXPECTED_HEADER!r}, "
                f"got {','.join(header)!r}"
            )
        columns: dict[str, list] = {name: [] for name in header}
        for row_number, row in enumerate(reader, start=2):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != len(header):
                raise FigureError(f"{path}: row {row_number}: wrong field count")
            for name, value in zip(header, row):
                if name in ("seed", "interval", "user", "blocked", "rows_used"):
                    try:
                        columns[name].append(int(value))
                    except ValueError as exc:
                        raise FigureError(f"{path}: row {row_number}: {exc}") from None
                elif name in ("acc", "mse", "reward", "sum_rate"):
                    try:
                        columns[name].append(float(value))
                    except ValueError as exc:
                        raise FigureError(f"{path}: row {row_number}: {exc}") from None
                else:
                    columns[name].append(value)
    if not columns["interval"]:
        raise FigureError(f"{path}: no data rows")
    return {
        name: (np.array(values) if name != "reward_kind" else np.array(values, object))
        for name, values in columns.items()
    }


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the first entries average what exists so far."""
    if window == 1:
        return values.astype(float)
    out = np.empty(len(values))
    csum = np.cumsum(np.insert(values.astype(float), 0, 0.0))
    for i in range(len(values)):
        start = max(0, i - window + 1)
        out[i] = (csum[i + 1] - csum[start]) / (i + 1 - start)
    return out


def compute_series(
    path: str, metric: str, window: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-interval mean of a metric (over seeds and users), then smoothed."""
    data = read_metrics(path)
    if metric not in data:
        raise FigureError(f"{path}: metric {metric!r} not in the CSV header")
    intervals = np.unique(data["interval"])
    means = np.array(
        [data[metric][data["interval"] == t].mean() for t in intervals], dtype=float
    )
    return intervals, moving_average(means, window)


def render_metrics(spec: PlotSpec) -> str:
    """Render every input as one line; returns the output path."""
    spec.validate()
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for item in spec.inputs:
        intervals, series = compute_series(item.path, spec.metric, spec.window)
        ax.plot(intervals, series, label=item.label, linewidth=1.4)
    ax.set_xlabel("time interval")
    ax.set_ylabel(spec.metric)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=120)
    plt.close(fig)
    return spec.out_path
