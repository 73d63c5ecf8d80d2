"""Sample containers, synthetic data generation, and CSV ingestion.

Two label encodings are used: ``"pm1"`` ({-1, +1}, consumed by the sigmoid
loss over a linear score) and ``"01"`` ({0, 1}, consumed by the cross-entropy
MLP).  ``relabel`` converts between them losslessly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .numkit import RngStream

ENCODINGS = {
    "pm1": (-1, 1),
    "01": (0, 1),
}

# 17 significant digits round-trip any float64 exactly.
FLOAT_FMT = "%.17g"


def fmt_float(x: float) -> str:
    return FLOAT_FMT % x


@dataclass(frozen=True)
class Sample:
    """One observation: a feature vector and an integer label."""

    x: np.ndarray
    y: int


class BaseDataset:
    """Immutable in-memory sample set.

    Holds an (m, d) float64 feature matrix and an (m,) integer label vector
    whose values must belong to the declared encoding.  Indexing yields
    :class:`Sample` objects; the arrays are exposed read-only as ``X``/``y``
    for vectorized work.
    """

    __slots__ = ("X", "y", "encoding")

    def __init__(self, X, y, encoding: str = "pm1"):
        if encoding not in ENCODINGS:
            raise ValueError(f"unknown label encoding {encoding!r}")
        X = np.array(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite entries")
        y = np.array(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError(
                f"labels must have shape ({X.shape[0]},), got {y.shape}"
            )
        allowed = ENCODINGS[encoding]
        if not np.all(np.isin(y, allowed)):
            raise ValueError(f"labels outside encoding {encoding!r}: {allowed}")
        X.setflags(write=False)
        y.setflags(write=False)
        self.X = X
        self.y = y
        self.encoding = encoding

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.X[i], int(self.y[i]))

    def __iter__(self):
        for i in range(self.m):
            yield self[i]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BaseDataset)
            and self.encoding == other.encoding
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    def __repr__(self) -> str:
        return f"BaseDataset(m={self.m}, d={self.d}, encoding={self.encoding!r})"


def relabel(data: BaseDataset, encoding: str) -> BaseDataset:
    """Convert labels between the "pm1" and "01" encodings."""
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown label encoding {encoding!r}")
    if encoding == data.encoding:
        return data
    if data.encoding == "pm1":  # -1 -> 0, +1 -> 1
        y = (data.y + 1) // 2
    else:  # 0 -> -1, 1 -> +1
        y = 2 * data.y - 1
    return BaseDataset(data.X, y, encoding)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for the synthetic linear-teacher task.

    Features are uniform on [-1, 1]^d, the teacher vector is standard normal,
    labels are the sign of the teacher score, and exactly
    ``floor(flip_frac * m)`` distinct training labels are flipped.  The test
    set is an independent draw with no label flipping.
    """

    m: int
    d: int
    m_test: int = 200
    flip_frac: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.m_test < 0 or self.d < 1:
            raise ValueError("m >= 1, m_test >= 0 and d >= 1 required")
        if not 0.0 <= self.flip_frac < 1.0:
            raise ValueError("flip_frac must lie in [0, 1)")


def _sign_labels(X: np.ndarray, teacher: np.ndarray) -> np.ndarray:
    # Score-zero ties break toward +1, matching the linear decision rule.
    return np.where(X @ teacher >= 0.0, 1, -1).astype(np.int64)


def gen_synthetic(spec: SyntheticSpec):
    """Generate (train, test, teacher) for a :class:`SyntheticSpec`.

    The teacher vector, train features, flip subset, and test features come
    from four forked substreams of ``spec.seed``, so e.g. changing ``m_test``
    never perturbs the training data.
    """
    root = RngStream(spec.seed)
    teacher = root.fork(0).normal(spec.d)

    X_train = root.fork(1).uniform(-1.0, 1.0, (spec.m, spec.d))
    y_train = _sign_labels(X_train, teacher)
    n_flip = math.floor(spec.flip_frac * spec.m)
    if n_flip > 0:
        flip_idx = root.fork(2).permutation(spec.m)[:n_flip]
        y_train = y_train.copy()
        y_train[flip_idx] = -y_train[flip_idx]

    train = BaseDataset(X_train, y_train, "pm1")

    test = None
    if spec.m_test > 0:
        X_test = root.fork(3).uniform(-1.0, 1.0, (spec.m_test, spec.d))
        test = BaseDataset(X_test, _sign_labels(X_test, teacher), "pm1")
    return train, test, teacher


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a dataset CSV.

    ``feature_count`` feature columns plus one label column; ``label_column``
    is the index of the label within each row (so it must not fall inside the
    feature range unless it equals ``feature_count``, the common
    label-last layout).  ``label_map`` maps the raw label text to an encoded
    integer label; the encoding is inferred from its values.
    """

    feature_count: int
    label_column: int
    label_map: dict = field(default_factory=lambda: {"0": 0, "1": 1})

    def __post_init__(self):
        if self.feature_count < 1:
            raise ValueError("feature_count must be >= 1")
        if not 0 <= self.label_column <= self.feature_count:
            raise ValueError(
                "label_column must lie in [0, feature_count] "
                f"(row has feature_count + 1 fields), got {self.label_column}"
            )
        if not self.label_map:
            raise ValueError("label_map must not be empty")
        values = set(self.label_map.values())
        for enc, allowed in ENCODINGS.items():
            if values <= set(allowed):
                return
        raise ValueError(f"label_map values {values} match no known encoding")

    @property
    def encoding(self) -> str:
        values = set(self.label_map.values())
        for enc, allowed in ENCODINGS.items():
            if values <= set(allowed):
                return enc
        raise AssertionError("unreachable: validated in __post_init__")


def load_csv(path, schema: CsvSchema, skip_header: bool = False) -> BaseDataset:
    """Load a dataset CSV under ``schema``.

    Every row must have exactly ``feature_count + 1`` fields.  Malformed
    rows, unparsable feature fields, and labels missing from the schema's
    ``label_map`` all raise ValueError naming the 1-based row.
    """
    features: list[list[float]] = []
    labels: list[int] = []
    expected = schema.feature_count + 1
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row_no, row in enumerate(reader, start=1):
            if row_no == 1 and skip_header:
                continue
            if not row:
                continue
            if len(row) != expected:
                raise ValueError(
                    f"{path}: row {row_no} has {len(row)} fields, expected {expected}"
                )
            raw_label = row[schema.label_column].strip()
            if raw_label not in schema.label_map:
                raise ValueError(
                    f"{path}: row {row_no} has unknown label {raw_label!r}"
                )
            feats = row[: schema.label_column] + row[schema.label_column + 1 :]
            try:
                features.append([float(v) for v in feats])
            except ValueError as exc:
                raise ValueError(f"{path}: row {row_no}: {exc}") from None
            labels.append(schema.label_map[raw_label])
    if not features:
        raise ValueError(f"{path}: no data rows")
    return BaseDataset(np.asarray(features), np.asarray(labels), schema.encoding)


def save_csv(data: BaseDataset, path, schema: CsvSchema) -> None:
    """Write ``data`` so that ``load_csv(path, schema)`` reproduces it bit-exactly.

    Floats are printed with 17 significant digits; labels are written through
    the inverse of ``schema.label_map``.
    """
    if schema.feature_count != data.d:
        raise ValueError(
            f"schema expects {schema.feature_count} features, dataset has {data.d}"
        )
    inverse = {v: k for k, v in schema.label_map.items()}
    missing = set(np.unique(data.y)) - set(inverse)
    if missing:
        raise ValueError(f"labels {sorted(missing)} absent from label_map")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i in range(data.m):
            fields = [fmt_float(v) for v in data.X[i]]
            fields.insert(schema.label_column, inverse[int(data.y[i])])
            writer.writerow(fields)


def split(data: BaseDataset, train_frac: float, seed: int):
    """Shuffle-split into (train, test) by a seeded permutation.

    ``floor(train_frac * m)`` samples go to the train side.  Degenerate
    splits (either side empty) are rejected.
    """
    n_train = math.floor(train_frac * data.m)
    if n_train < 1 or n_train >= data.m:
        raise ValueError(
            f"degenerate split: train_frac={train_frac} on m={data.m} "
            f"gives train size {n_train}"
        )
    perm = RngStream(seed).permutation(data.m)
    tr, te = perm[:n_train], perm[n_train:]
    return (
        BaseDataset(data.X[tr], data.y[tr], data.encoding),
        BaseDataset(data.X[te], data.y[te], data.encoding),
    )


def fit_minmax(data: BaseDataset):
    """Per-column (low, high) ranges for min-max normalization."""
    return data.X.min(axis=0), data.X.max(axis=0)


def apply_minmax(data: BaseDataset, low: np.ndarray, high: np.ndarray) -> BaseDataset:
    """Rescale features to [0, 1] by the given ranges (constant columns -> 0)."""
    span = high - low
    safe = np.where(span > 0, span, 1.0)
    Xn = (data.X - low) / safe
    Xn[:, span <= 0] = 0.0
    return BaseDataset(Xn, data.y, data.encoding)
