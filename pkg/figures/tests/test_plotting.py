import numpy as np
import pytest

from semcom_figures.plotting import (
    EXPECTED_HEADER,
    FigureError,
    PlotSpec,
    SeriesInput,
    compute_series,
    moving_average,
    read_metrics,
    render_metrics,
)


def write_csv(path, rows):
    lines = [EXPECTED_HEADER]
    for r in rows:
        lines.append(",".join(str(x) for x in r))
    path.write_text("\n".join(lines) + "\n")


def constant_rows(value, n_intervals=30, seeds=(0,)):
    rows = []
    for seed in seeds:
        for t in range(n_intervals):
            rows.append([seed, t, 0, "ACC", 0, value, 0.01, 1.0, 2.0, 4])
    return rows


def test_read_metrics_roundtrip(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(path, constant_rows(0.5))
    data = read_metrics(str(path))
    assert np.all(data["acc"] == 0.5)
    assert data["interval"].size == 30


def test_header_drift_is_an_error(tmp_path):
    path = tmp_path / "drift.csv"
    path.write_text("seed,interval,user,acc\n0,0,0,0.5\n")
    with pytest.raises(FigureError):
        read_metrics(str(path))


def test_malformed_row_names_its_number(tmp_path):
    path = tmp_path / "bad.csv"
    rows = constant_rows(0.5, n_intervals=3)
    path.write_text(
        EXPECTED_HEADER
        + "\n"
        + "\n".join(",".join(str(x) for x in r) for r in rows[:2])
        + "\n0,2,0,ACC,0,not_a_number,0.01,1.0,2.0,4\n"
    )
    with pytest.raises(FigureError) as err:
        read_metrics(str(path))
    assert "row 4" in str(err.value)


def test_truncation_marker_rows_are_skipped(tmp_path):
    path = tmp_path / "trunc.csv"
    body = EXPECTED_HEADER + "\n0,0,0,ACC,0,0.5,0.01,1.0,2.0,4\n# truncated: boom\n"
    path.write_text(body)
    data = read_metrics(str(path))
    assert data["interval"].size == 1


def test_constant_metric_gives_flat_line(tmp_path):
    path = tmp_path / "flat.csv"
    write_csv(path, constant_rows(0.5))
    _, series = compute_series(str(path), "acc", window=20)
    assert np.allclose(series, 0.5)


def test_window_one_is_raw_means(tmp_path):
    path = tmp_path / "raw.csv"
    rows = []
    for t in range(5):
        rows.append([0, t, 0, "ACC", 0, float(t), 0.01, 1.0, 2.0, 4])
    write_csv(path, rows)
    intervals, series = compute_series(str(path), "acc", window=1)
    assert np.array_equal(intervals, np.arange(5))
    assert np.array_equal(series, np.arange(5.0))


def test_two_seeds_average_to_half(tmp_path):
    path = tmp_path / "two.csv"
    rows = []
    for t in range(10):
        rows.append([0, t, 0, "ACC", 0, 0.0, 0.01, 1.0, 2.0, 4])
        rows.append([1, t, 0, "ACC", 0, 1.0, 0.01, 1.0, 2.0, 4])
    write_csv(path, rows)
    _, series = compute_series(str(path), "acc", window=1)
    assert np.allclose(series, 0.5)


def test_moving_average_is_trailing():
    values = np.array([0.0, 1.0, 2.0, 3.0])
    out = moving_average(values, 2)
    assert np.allclose(out, [0.0, 0.5, 1.5, 2.5])


def test_missing_metric_is_an_error(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(path, constant_rows(0.5))
    with pytest.raises(FigureError):
        compute_series(str(path), "latency", window=1)


def test_render_writes_image_deterministically(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(path, constant_rows(0.5))
    spec = PlotSpec(
        inputs=(SeriesInput(str(path), "run-a"),),
        metric="acc",
        out_path=str(tmp_path / "fig.png"),
        window=5,
    )
    out = render_metrics(spec)
    first = open(out, "rb").read()
    assert first[:8] == b"\x89PNG\r\n\x1a\n"
    render_metrics(spec)
    assert open(out, "rb").read() == first


def test_spec_validation():
    with pytest.raises(FigureError):
        PlotSpec(inputs=(), metric="acc", out_path="x.png").validate()
    with pytest.raises(FigureError):
        PlotSpec(
            inputs=(SeriesInput("a.csv", "a"),), metric="acc", out_path="x.png", window=0
        ).validate()
    with pytest.raises(FigureError):
        PlotSpec(
            inputs=(SeriesInput("a.csv", "a"),), metric="nope", out_path="x.png"
        ).validate()


def test_input_csv_never_mutated(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(path, constant_rows(0.25))
    before = path.read_bytes()
    render_metrics(
        PlotSpec(
            inputs=(SeriesInput(str(path), "a"),),
            metric="mse",
            out_path=str(tmp_path / "fig.png"),
        )
    )
    assert path.read_bytes() == before
