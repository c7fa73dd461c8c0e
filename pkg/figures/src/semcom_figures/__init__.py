"""Plotting companion for the simulator's metrics CSV files.

Consumes only the documented CSV interface (header
``seed,interval,user,reward_kind,blocked,acc,mse,reward,sum_rate,rows_used``)
and renders per-interval curves: one line per input file, averaged over
seeds and users, smoothed with a trailing moving average.
"""

from semcom_figures.plotting import (
    EXPECTED_HEADER,
    FigureError,
    PlotSpec,
    SeriesInput,
    compute_series,
    read_metrics,
    render_metrics,
)

__version__ = "0.1.0"
