"""Loaders for the UCI-style evaluation datasets and a generic schema-driven CSV.

All formats are comma separated, one record per line, no header, ``?`` marks a
missing value.  Numeric features come back with tight axis bounds taken from
the observed values (see :func:`feature_bounds`).
"""

from __future__ import annotations

import csv
import enum
import json
import math
from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import CATEGORICAL, NUMERIC, FeatureSpec, LabeledDataset, SchemaError

MISSING = "?"


class DataFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class DatasetFormat(str, enum.Enum):
    HEPATITIS = "hepatitis"
    IRIS = "iris"
    TICTACTOE = "tictactoe"
    GENERIC = "generic"

    @classmethod
    def parse(cls, value: "DatasetFormat | str") -> "DatasetFormat":
        if isinstance(value, cls):
            return value
        aliases = {"generic_csv": "generic", "tic-tac-toe": "tictactoe"}
        try:
            return cls(aliases.get(value, value))
        except ValueError:
            raise DataFormatError(f"unknown dataset format {value!r}") from None


# column layout of the UCI hepatitis file (class first)
HEPATITIS_COLUMNS = [
    ("Class", None), ("Age", NUMERIC), ("Sex", ("male", "female")), ("Steroid", ("no", "yes")),
    ("Antivirals", ("no", "yes")), ("Fatigue", ("no", "yes")), ("Malaise", ("no", "yes")),
    ("Anorexia", ("no", "yes")), ("Liver Big", ("no", "yes")), ("Liver Firm", ("no", "yes")),
    ("Spleen Palpable", ("no", "yes")), ("Spiders", ("no", "yes")), ("Ascites", ("no", "yes")),
    ("Varices", ("no", "yes")), ("Bilirubin", NUMERIC), ("Alk Phosphate", NUMERIC),
    ("SGOT", NUMERIC), ("Albumin", NUMERIC), ("Protime", NUMERIC), ("Histology", ("no", "yes")),
]
HEPATITIS_DEFAULT = ("Bilirubin", "Alk Phosphate", "SGOT", "Albumin", "Protime")
HEPATITIS_CLASSES = ("Die", "Live")

IRIS_FEATURES = ("sepal length", "sepal width", "petal length", "petal width")
IRIS_CLASSES = ("Iris-setosa", "Iris-versicolor", "Iris-virginica")

TICTACTOE_SQUARES = (
    "top-left", "top-middle", "top-right", "middle-left", "middle-middle",
    "middle-right", "bottom-left", "bottom-middle", "bottom-right",
)
TICTACTOE_CLASSES = ("positive", "negative")


def _records(path: Path):
    """Yield (line number, stripped fields) for non-blank lines."""
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            fields = [f.strip() for f in row]
            if not fields or all(f == "" for f in fields):
                continue
            yield lineno, fields


def _number(text: str, lineno: int) -> Optional[float]:
    if text == MISSING:
        return None
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"not a number: {text!r}", lineno) from None
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite value: {text!r}", lineno)
    return value


def _category(text: str, categories: Sequence[str], lineno: int, name: str) -> Optional[int]:
    if text == MISSING:
        return None
    try:
        return list(categories).index(text)
    except ValueError:
        raise DataFormatError(f"feature {name!r}: unknown category {text!r}", lineno) from None


def _class_index(text: str, classes: Sequence[str], lineno: int) -> int:
    try:
        return list(classes).index(text)
    except ValueError:
        raise DataFormatError(f"unknown class label {text!r}", lineno) from None


def _finish(names, kinds, classes, rows, labels, options) -> LabeledDataset:
    """Attach axis bounds to numeric features and build the dataset."""
    L = options.get("num_linguistic", 3)
    values = np.array([[np.nan if v is None else v for v in r] for r in rows], dtype=float)
    values = values.reshape(len(rows), len(names))
    features = []
    for j, (name, kind) in enumerate(zip(names, kinds)):
        if kind == NUMERIC:
            lo, hi = _bounds_of(values[:, j], options.get("margin", 0.0), name)
            nl = L[name] if isinstance(L, dict) else L
            features.append(FeatureSpec(name, NUMERIC, lo, hi, num_linguistic=int(nl)))
        else:
            features.append(FeatureSpec(name, CATEGORICAL, categories=tuple(kind)))
    return LabeledDataset(tuple(features), tuple(classes), values, np.array(labels, dtype=np.int64))


def load_hepatitis(path, options) -> LabeledDataset:
    wanted = tuple(options.get("features", HEPATITIS_DEFAULT))
    by_name = {name: i for i, (name, _) in enumerate(HEPATITIS_COLUMNS)}
    for name in wanted:
        if name not in by_name or name == "Class":
            raise DataFormatError(f"unknown hepatitis feature {name!r}")
    cols = [by_name[n] for n in wanted]
    kinds = [HEPATITIS_COLUMNS[c][1] for c in cols]
    rows, labels = [], []
    for lineno, f in _records(path):
        if len(f) != len(HEPATITIS_COLUMNS):
            raise DataFormatError(f"expected {len(HEPATITIS_COLUMNS)} fields, got {len(f)}", lineno)
        if f[0] not in ("1", "2"):
            raise DataFormatError(f"unknown class label {f[0]!r}", lineno)
        labels.append(int(f[0]) - 1)  # 1 = Die, 2 = Live
        row = []
        for c, kind in zip(cols, kinds):
            if kind == NUMERIC:
                row.append(_number(f[c], lineno))
            else:
                code = _number(f[c], lineno)
                if code is not None and code not in (1.0, 2.0):
                    raise DataFormatError(f"{HEPATITIS_COLUMNS[c][0]}: bad code {f[c]!r}", lineno)
                row.append(None if code is None else int(code) - 1)
        rows.append(row)
    return _finish(list(wanted), kinds, HEPATITIS_CLASSES, rows, labels, options)


def load_iris(path, options) -> LabeledDataset:
    rows, labels = [], []
    for lineno, f in _records(path):
        if len(f) != 5:
            raise DataFormatError(f"expected 5 fields, got {len(f)}", lineno)
        rows.append([_number(v, lineno) for v in f[:4]])
        labels.append(_class_index(f[4], IRIS_CLASSES, lineno))
    return _finish(list(IRIS_FEATURES), [NUMERIC] * 4, IRIS_CLASSES, rows, labels, options)


def load_tictactoe(path, options) -> LabeledDataset:
    squares = ("x", "o", "b")
    rows, labels = [], []
    for lineno, f in _records(path):
        if len(f) != 10:
            raise DataFormatError(f"expected 10 fields, got {len(f)}", lineno)
        rows.append([_category(v, squares, lineno, n) for v, n in zip(f[:9], TICTACTOE_SQUARES)])
        labels.append(_class_index(f[9], TICTACTOE_CLASSES, lineno))
    return _finish(list(TICTACTOE_SQUARES), [squares] * 9, TICTACTOE_CLASSES, rows, labels, options)


def schema_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".schema.json")


def load_generic(path, options) -> LabeledDataset:
    """CSV described by a JSON sidecar.

    Sidecar keys: ``features`` (list of ``{name, kind, categories?}`` in file
    order, class column excluded), ``class_column`` (0-based index in the
    record), optional ``classes`` (label order; default first appearance) and
    optional ``header`` (skip the first line).
    """
    schema_file = Path(options.get("schema") or schema_path_for(path))
    try:
        schema = json.loads(schema_file.read_text())
        specs = schema["features"]
        class_col = int(schema["class_column"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataFormatError(f"bad schema sidecar {schema_file}: {exc}") from None
    names = [s["name"] for s in specs]
    kinds = [NUMERIC if s.get("kind", NUMERIC) == NUMERIC else tuple(s["categories"])
             for s in specs]
    classes = list(schema.get("classes") or [])
    fixed_classes = bool(classes)
    width = len(specs) + 1
    rows, labels = [], []
    for lineno, f in _records(path):
        if schema.get("header") and lineno == 1:
            continue
        if len(f) != width:
            raise DataFormatError(f"expected {width} fields, got {len(f)}", lineno)
        label = f[class_col]
        rest = f[:class_col] + f[class_col + 1:]
        if label not in classes:
            if fixed_classes:
                raise DataFormatError(f"unknown class label {label!r}", lineno)
            classes.append(label)
        labels.append(classes.index(label))
        rows.append([_number(v, lineno) if k == NUMERIC else _category(v, k, lineno, n)
                     for v, k, n in zip(rest, kinds, names)])
    return _finish(names, kinds, classes, rows, labels, options)


_LOADERS = {
    DatasetFormat.HEPATITIS: load_hepatitis,
    DatasetFormat.IRIS: load_iris,
    DatasetFormat.TICTACTOE: load_tictactoe,
    DatasetFormat.GENERIC: load_generic,
}


def load_dataset(fmt: DatasetFormat | str, path, options: Optional[dict] = None) -> LabeledDataset:
    """Parse a dataset file.

    Options: ``num_linguistic`` (int, or dict by feature name; default 3),
    ``margin`` for the axis bounds (default 0), ``features`` (hepatitis column
    subset) and ``schema`` (sidecar path for generic CSV).
    """
    fmt = DatasetFormat.parse(fmt)
    options = dict(options or {})
    ds = _LOADERS[fmt](Path(path), options)
    if len(ds) == 0:
        raise DataFormatError(f"{path}: no records")
    return ds


# --------------------------------------------------------------------------
# transforms


def _bounds_of(col: np.ndarray, margin: float, name: str) -> tuple[float, float]:
    seen = col[~np.isnan(col)]
    if len(seen) == 0:
        raise SchemaError(f"feature {name!r} has no observed values")
    lo, hi = float(seen.min()), float(seen.max())
    if lo == hi:
        pad = max(1.0, abs(lo)) * max(margin, 0.05)
        return lo - pad, hi + pad
    span = hi - lo
    return lo - margin * span, hi + margin * span


def feature_bounds(data: LabeledDataset, margin: float = 0.0) -> dict[str, tuple[float, float]]:
    """Axis range per numeric feature: observed extrema padded by ``margin`` * range."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    return {
        f.name: _bounds_of(data.values[:, j], margin, f.name)
        for j, f in enumerate(data.features) if f.is_numeric
    }


def with_bounds(data: LabeledDataset, bounds: dict[str, tuple[float, float]]) -> LabeledDataset:
    features = [replace(f, lower=bounds[f.name][0], upper=bounds[f.name][1])
                if f.is_numeric and f.name in bounds else f
                for f in data.features]
    return data.with_features(features)


def impute_policy(data: LabeledDataset, policy: str = "keep_missing") -> LabeledDataset:
    if policy == "keep_missing":
        return data
    if policy != "mean_impute":
        raise ValueError(f"unknown imputation policy {policy!r}")
    values = data.values.copy()
    for j, f in enumerate(data.features):
        col = values[:, j]
        miss = np.isnan(col)
        if not miss.any() or miss.all():
            continue
        if f.is_numeric:
            col[miss] = col[~miss].mean()
        else:
            counts = Counter(int(v) for v in col[~miss])
            # most common, lowest index on ties
            col[miss] = min(counts, key=lambda k: (-counts[k], k))
    return LabeledDataset(data.features, data.classes, values, data.labels)


def split_sources(data: LabeledDataset, P: int, seed: int) -> list[LabeledDataset]:
    """Shuffle, then deal each class's rows round-robin over P shares.

    One dealing counter runs across all classes, so both share sizes and
    per-class counts differ by at most one.
    """
    if P < 1:
        raise ValueError("P must be >= 1")
    if P > len(data):
        raise ValueError(f"cannot split {len(data)} rows into {P} sources")
    order = np.random.default_rng(seed).permutation(len(data))
    shares = [[] for _ in range(P)]
    k = 0
    for c in range(len(data.classes)):
        for i in order[data.labels[order] == c]:
            shares[k % P].append(int(i))
            k += 1
    return [data.subset(np.array(s, dtype=np.int64)) for s in shares]
