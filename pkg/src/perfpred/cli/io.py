"""Trajectory, aggregate, report, and manifest serialization.

All CSVs use comma separators, a single header row, LF line endings, and 17
significant digits for floats (lossless float64 round-trip).  Nothing here
embeds timestamps or environment details, so rewriting the same results
yields byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from ..datasets import fmt_float
from ..optim import Trajectory

TRAJECTORY_COLUMNS = (
    "run_id", "seed", "t", "samples", "gamma",
    "sps_sq", "risk", "train_acc", "test_acc", "status",
)

METRICS = ("sps_sq", "risk", "train_acc", "test_acc")

AGGREGATE_COLUMNS = ("t", "samples") + tuple(
    f"{m}_{part}" for m in METRICS for part in ("mean", "ci95_low", "ci95_high")
)

# Two-sided 95% normal quantile.
_Z95 = 1.959963984540054


def write_trajectory_csv(path, run_id: str, traj: Trajectory) -> None:
    """Serialize a run; every row carries the run's final status."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for p in traj.points:
            w.writerow([
                run_id,
                traj.config.seed,
                p.t,
                p.samples_accessed,
                fmt_float(p.gamma),
                fmt_float(p.sps_sq),
                fmt_float(p.risk),
                fmt_float(p.train_acc),
                fmt_float(p.test_acc),
                traj.status,
            ])


def read_trajectory_csv(path) -> dict:
    """Columns of a trajectory CSV; header must match exactly."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRAJECTORY_COLUMNS:
            raise ValueError(
                f"{path}: bad trajectory header {header!r}, "
                f"expected {list(TRAJECTORY_COLUMNS)}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    cols: dict[str, object] = {}
    data = list(zip(*rows))
    for name, values in zip(TRAJECTORY_COLUMNS, data):
        if name in ("run_id", "status"):
            cols[name] = list(values)
        elif name in ("seed", "t", "samples"):
            cols[name] = np.array([int(v) for v in values])
        else:
            cols[name] = np.array([float(v) for v in values])
    return cols


@dataclass(frozen=True)
class AggregatePoint:
    """Cross-seed summary at one capture point.

    ``metrics`` maps metric name -> (mean, ci95_low, ci95_high) with the
    normal-approximation interval mean +- 1.96 * sd / sqrt(n).
    """

    t: int
    samples: int
    metrics: dict

    def __post_init__(self):
        for name, (mean, lo, hi) in self.metrics.items():
            if not lo <= mean <= hi:
                raise ValueError(
                    f"metric {name}: interval [{lo}, {hi}] does not contain {mean}"
                )


def aggregate_trajectories(runs: list[dict]) -> list[AggregatePoint]:
    """Combine per-run trajectory columns captured on a common grid."""
    if not runs:
        raise ValueError("nothing to aggregate")
    t = runs[0]["t"]
    samples = runs[0]["samples"]
    for r in runs[1:]:
        if not (np.array_equal(r["t"], t) and np.array_equal(r["samples"], samples)):
            raise ValueError("runs disagree on the capture grid; cannot aggregate")
    n = len(runs)
    points = []
    stacked = {m: np.vstack([r[m] for r in runs]) for m in METRICS}
    for j in range(len(t)):
        metrics = {}
        for m in METRICS:
            col = stacked[m][:, j]
            mean = float(col.mean())
            if n > 1:
                half = _Z95 * float(col.std(ddof=1)) / math.sqrt(n)
            else:
                half = 0.0
            metrics[m] = (mean, mean - half, mean + half)
        points.append(AggregatePoint(int(t[j]), int(samples[j]), metrics))
    return points


def write_aggregate_csv(path, points: list[AggregatePoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for p in points:
            row = [p.t, p.samples]
            for m in METRICS:
                row.extend(fmt_float(v) for v in p.metrics[m])
            w.writerow(row)


def write_report_csv(path, columns: tuple, rows: list[tuple]) -> None:
    """Generic check-report writer using the shared CSV conventions."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([
                fmt_float(v) if isinstance(v, float) else v for v in row
            ])


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
