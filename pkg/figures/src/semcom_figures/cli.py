"""Command line: ``semcom-figures plot --csv file.csv:label --metric acc --out fig.png``."""

from __future__ import annotations

import argparse
import sys

from semcom_figures.plotting import FigureError, PlotSpec, SeriesInput, render_metrics


def _parse_csv_arg(text: str) -> SeriesInput:
    if ":" in text:
        path, label = text.rsplit(":", 1)
    else:
        path, label = text, text
    if not path:
        raise FigureError(f"empty CSV path in {text!r}")
    return SeriesInput(path=path, label=label or path)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semcom-figures")
    sub = parser.add_subparsers(dest="command", required=True)
    plot = sub.add_parser("plot", help="render metric curves from metrics CSV files")
    plot.add_argument(
        "--csv",
        action="append",
        required=True,
        metavar="PATH[:LABEL]",
        help="input CSV with optional legend label; repeatable",
    )
    plot.add_argument("--metric", required=True, help="metric column to plot")
    plot.add_argument("--out", required=True, help="output image path")
    plot.add_argument("--window", type=int, default=20, help="moving-average window")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = PlotSpec(
            inputs=tuple(_parse_csv_arg(item) for item in args.csv),
            metric=args.metric,
            out_path=args.out,
            window=args.window,
        )
        path = render_metrics(spec)
    except (FigureError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"figure written to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
