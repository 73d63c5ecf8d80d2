"""Render metric figures from experiment CSVs.

Consumes only the public CSV contract of the perfpred command line, with no
shared code: per-run trajectory files (run_id, seed, t, samples, gamma,
sps_sq, risk, train_acc, test_acc, status) and cross-seed aggregate files
(t, samples, then <metric>_mean / _ci95_low / _ci95_high per metric).
Aggregate series draw a shaded 95% confidence band; trajectory series draw
a bare line.

Spec file (JSON):

    {
      "series": [
        {"path": "out/agg/greedy-b1-eps0.csv", "label": "eps = 0"},
        {"path": "out/agg/greedy-b1-eps2.csv", "label": "eps = 2"}
      ],
      "x": "samples",
      "metric": "sps_sq",
      "log_y": true,
      "out": "figure.png",
      "title": "optional",
      "xlabel": "optional override",
      "ylabel": "optional override"
    }

or equivalent flags: repeated --csv/--label pairs plus --x, --metric,
--log-y, and --out.  All inputs are parsed before any drawing happens, so a
bad CSV never leaves a partial image behind, and rendering embeds no
timestamps: the same inputs yield byte-identical PNGs.

Exit codes: 0 on success, 1 on CSV/schema problems, 2 on spec or usage
problems.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

X_KEYS = ("t", "samples")
METRICS = ("sps_sq", "risk", "train_acc", "test_acc")

X_LABELS = {"t": "iteration", "samples": "samples accessed"}
Y_LABELS = {
    "sps_sq": "squared gradient norm at deployment",
    "risk": "risk on deployed distribution",
    "train_acc": "train accuracy",
    "test_acc": "test accuracy",
}


class PlotError(ValueError):
    """Any spec or input problem that should abort before drawing."""


@dataclass(frozen=True)
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    lo: np.ndarray | None      # confidence band, aggregate inputs only
    hi: np.ndarray | None


def _read_columns(path) -> dict:
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise PlotError(f"{path}: {exc.strerror or exc}") from None
    if not rows:
        raise PlotError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise PlotError(f"{path}: no data rows")
    width = len(header)
    for i, row in enumerate(body, start=2):
        if len(row) != width:
            raise PlotError(f"{path}: row {i} has {len(row)} fields, header has {width}")
    return {name: [row[j] for row in body] for j, name in enumerate(header)}


def _float_column(path, cols, name) -> np.ndarray:
    if name not in cols:
        raise PlotError(f"{path}: missing column '{name}'")
    try:
        return np.array([float(v) for v in cols[name]])
    except ValueError as exc:
        raise PlotError(f"{path}: column '{name}': {exc}") from None


def load_series(path, label: str, x_key: str, metric: str) -> Series:
    """One plottable series from either CSV flavor.

    A file carrying ``<metric>_mean`` is treated as an aggregate and gets a
    band from the ci95 columns; a file carrying the bare metric is a
    trajectory and gets none.  Anything else is a schema mismatch, reported
    by the first missing column.
    """
    cols = _read_columns(path)
    x = _float_column(path, cols, x_key)
    if f"{metric}_mean" in cols:
        return Series(
            label=label,
            x=x,
            y=_float_column(path, cols, f"{metric}_mean"),
            lo=_float_column(path, cols, f"{metric}_ci95_low"),
            hi=_float_column(path, cols, f"{metric}_ci95_high"),
        )
    if metric in cols:
        return Series(label=label, x=x, y=_float_column(path, cols, metric),
                      lo=None, hi=None)
    raise PlotError(f"{path}: missing column '{metric}' (or '{metric}_mean')")


def _spec_error(msg: str) -> PlotError:
    return PlotError(f"spec: {msg}")


def _validate_spec(spec: dict) -> dict:
    known = {"series", "x", "metric", "log_y", "out", "title", "xlabel", "ylabel"}
    for key in spec:
        if key not in known:
            raise _spec_error(f"unknown key '{key}'")
    series = spec.get("series")
    if not isinstance(series, list) or not series:
        raise _spec_error("'series' must be a non-empty list")
    for i, entry in enumerate(series):
        if not isinstance(entry, dict) or "path" not in entry or "label" not in entry:
            raise _spec_error(f"series[{i}] needs 'path' and 'label'")
    x_key = spec.get("x", "t")
    if x_key not in X_KEYS:
        raise _spec_error(f"'x' must be one of {list(X_KEYS)}, got {x_key!r}")
    metric = spec.get("metric")
    if metric not in METRICS:
        raise _spec_error(f"'metric' must be one of {list(METRICS)}, got {metric!r}")
    if not spec.get("out"):
        raise _spec_error("'out' (output image path) is required")
    return {
        "series": series,
        "x": x_key,
        "metric": metric,
        "log_y": bool(spec.get("log_y", False)),
        "out": spec["out"],
        "title": spec.get("title", ""),
        "xlabel": spec.get("xlabel", X_LABELS[x_key]),
        "ylabel": spec.get("ylabel", Y_LABELS[metric]),
    }


def render(spec: dict) -> str:
    """Load every series, then draw once; returns the output path."""
    spec = _validate_spec(spec)
    loaded = [
        load_series(entry["path"], entry["label"], spec["x"], spec["metric"])
        for entry in spec["series"]
    ]

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        for s in loaded:
            (line,) = ax.plot(s.x, s.y, label=s.label, linewidth=1.6)
            if s.lo is not None:
                ax.fill_between(s.x, s.lo, s.hi, color=line.get_color(),
                                alpha=0.2, linewidth=0)
        if spec["log_y"]:
            ax.set_yscale("log")
        ax.set_xlabel(spec["xlabel"])
        ax.set_ylabel(spec["ylabel"])
        if spec["title"]:
            ax.set_title(spec["title"])
        ax.legend(frameon=False)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(spec["out"], dpi=150)
    finally:
        plt.close(fig)
    return spec["out"]


def _spec_from_args(args) -> dict:
    if args.spec is not None:
        if args.csv:
            raise _spec_error("--spec and --csv are mutually exclusive")
        try:
            with open(args.spec) as fh:
                spec = json.load(fh)
        except OSError as exc:
            raise _spec_error(f"{args.spec}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise _spec_error(f"{args.spec}: invalid JSON ({exc})") from None
        if not isinstance(spec, dict):
            raise _spec_error(f"{args.spec}: top level must be an object")
        return spec
    if not args.csv:
        raise _spec_error("provide --spec PATH or at least one --csv PATH")
    labels = args.label or []
    if len(labels) != len(args.csv):
        raise _spec_error(
            f"{len(args.csv)} --csv but {len(labels)} --label; counts must match"
        )
    return {
        "series": [{"path": p, "label": l} for p, l in zip(args.csv, labels)],
        "x": args.x,
        "metric": args.metric,
        "log_y": args.log_y,
        "out": args.out,
        "title": args.title,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render metric figures from experiment CSVs."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plot", help="render one figure from a spec or flags")
    p.add_argument("--spec", default=None, help="JSON plot spec path")
    p.add_argument("--csv", action="append", default=[],
                   help="input CSV (repeatable; pairs with --label)")
    p.add_argument("--label", action="append", default=[],
                   help="legend label for the matching --csv")
    p.add_argument("--x", default="t", choices=X_KEYS)
    p.add_argument("--metric", default="sps_sq", choices=METRICS)
    p.add_argument("--log-y", action="store_true", dest="log_y")
    p.add_argument("--out", default=None, help="output PNG path")
    p.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
        out = render(spec)
    except PlotError as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return 2 if str(exc).startswith("spec") else 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
