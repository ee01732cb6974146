"""CSV ingestion, quantile binarization, splits, class weights.

Binarization produces "up" bins only (value > threshold); negated literals
already provide the corresponding down bins.  Categorical and few-unique
numeric columns are one-hot encoded; binary 0/1 columns pass through.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .bitvec import BitMatrix, BitVector


class DataError(ValueError):
    pass


@dataclass
class RawTable:
    frame: pd.DataFrame          # features only, no missing values
    labels: np.ndarray           # 0/1 per row
    label_column: str
    positive_label: str
    dropped_rows: int


@dataclass
class ColumnDescriptor:
    name: str                    # binarized feature name
    source: str                  # source column
    kind: str                    # "threshold" | "onehot" | "binary"
    threshold: Optional[float] = None
    category: Optional[str] = None

    def to_json(self) -> dict:
        out = {"name": self.name, "source": self.source, "kind": self.kind}
        if self.threshold is not None:
            out["threshold"] = self.threshold
        if self.category is not None:
            out["category"] = self.category
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ColumnDescriptor":
        return cls(obj["name"], obj["source"], obj["kind"],
                   obj.get("threshold"), obj.get("category"))


@dataclass
class BinarizedMatrix:
    bits: BitMatrix
    descriptors: list[ColumnDescriptor]
    warnings: list[str] = field(default_factory=list)

    @property
    def feature_names(self) -> list[str]:
        return [d.name for d in self.descriptors]


def load_csv(path: str, label_column: str, positive_label: Optional[str] = None,
             missing_values: tuple = ("", "NA", "NaN", "nan", "?")) -> RawTable:
    """Read a CSV, drop rows with any missing value, map the label to 0/1."""
    try:
        frame = pd.read_csv(path, na_values=list(missing_values),
                            keep_default_na=True, skipinitialspace=True)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if label_column not in frame.columns:
        raise DataError(f"label column {label_column!r} not in {path}")
    before = len(frame)
    frame = frame.dropna(axis=0, how="any").reset_index(drop=True)
    dropped = before - len(frame)
    raw_labels = frame[label_column].astype(str).str.strip()
    distinct = sorted(raw_labels.unique())
    if len(distinct) != 2:
        raise DataError(
            f"label column must be binary, found {len(distinct)} values: {distinct[:5]}")
    if positive_label is None:
        # default to the minority class, ties broken lexicographically
        counts = raw_labels.value_counts()
        positive_label = sorted(distinct, key=lambda v: (counts[v], v))[0]
    if positive_label not in distinct:
        raise DataError(
            f"positive label {positive_label!r} not among label values {distinct}")
    labels = (raw_labels == positive_label).to_numpy().astype(np.int8)
    features = frame.drop(columns=[label_column])
    return RawTable(features, labels, label_column, positive_label, dropped)


def _is_binary_numeric(series: pd.Series) -> bool:
    if not pd.api.types.is_numeric_dtype(series):
        return False
    vals = set(series.unique().tolist())
    return vals <= {0, 1}


def binarize(raw: RawTable, num_bins: int = 10) -> BinarizedMatrix:
    """One-hot / quantile-threshold binarization of a raw table."""
    if num_bins < 2:
        raise DataError("num_bins must be at least 2")
    frame = raw.frame
    columns: list[np.ndarray] = []
    descriptors: list[ColumnDescriptor] = []
    warnings: list[str] = []
    for name in frame.columns:
        series = frame[name]
        uniques = series.unique()
        if len(uniques) < 2:
            warnings.append(f"column {name!r} is constant; no features emitted")
            continue
        if _is_binary_numeric(series):
            columns.append(series.to_numpy().astype(bool))
            descriptors.append(ColumnDescriptor(name, name, "binary"))
            continue
        numeric = pd.api.types.is_numeric_dtype(series)
        if numeric and len(uniques) > num_bins:
            values = series.to_numpy(dtype=float)
            levels = [(i + 1) / (num_bins + 1) for i in range(num_bins)]
            thresholds = sorted(set(float(np.quantile(values, q)) for q in levels))
            for t in thresholds:
                columns.append(values > t)
                descriptors.append(ColumnDescriptor(
                    f"{name} > {t:.4f}", name, "threshold", threshold=t))
        else:
            for cat in sorted(map(str, uniques)):
                columns.append(series.astype(str).to_numpy() == cat)
                descriptors.append(ColumnDescriptor(
                    f"{name} = {cat}", name, "onehot", category=cat))
    bits = BitMatrix.from_bools(np.column_stack(columns)) if columns else \
        BitMatrix([], len(frame))
    return BinarizedMatrix(bits, descriptors, warnings)


@dataclass
class ClassWeights:
    w_p: float
    w_n: float


def class_weights(y: BitVector) -> ClassWeights:
    """Balanced weights: w_P = n / (2 n_P), w_N = n / (2 n_N)."""
    n_p = y.popcount()
    n_n = y.n - n_p
    if n_p == 0 or n_n == 0:
        raise DataError("both classes must be present to compute class weights")
    n = y.n
    return ClassWeights(n / (2 * n_p), n / (2 * n_n))


def stratified_split(y: BitVector, test_fraction: float,
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic stratified (train, test) index split."""
    if not 0 < test_fraction < 1:
        raise DataError("test_fraction must be in (0, 1)")
    labels = y.to_bools()
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for cls in (False, True):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise DataError("each class needs at least 2 samples to split")
        rng.shuffle(idx)
        n_test = int(round(idx.size * test_fraction))
        n_test = min(max(n_test, 1), idx.size - 1)
        test_parts.append(idx[:n_test])
        train_parts.append(idx[n_test:])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts))
    return train, test


def stratified_subsample(y: BitVector, max_rows: int, seed: int) -> np.ndarray:
    """Indices of a stratified subsample of at most ``max_rows`` rows."""
    if y.n <= max_rows:
        return np.arange(y.n)
    labels = y.to_bools()
    rng = np.random.default_rng(seed)
    parts = []
    for cls in (False, True):
        idx = np.flatnonzero(labels == cls)
        take = max(1, int(round(max_rows * idx.size / y.n)))
        rng.shuffle(idx)
        parts.append(idx[:take])
    return np.sort(np.concatenate(parts))


XBF_MAGIC = b"XBF1"


def save_xbf(matrix: BinarizedMatrix, path: str):
    """Write the packed matrix (row-major 64-bit words) plus a JSON sidecar."""
    bools = matrix.bits.to_bools()
    n_rows, n_cols = bools.shape
    words_per_row = (n_cols + 63) // 64
    padded = np.zeros((n_rows, words_per_row * 64), dtype=bool)
    padded[:, :n_cols] = bools
    packed = np.packbits(padded, axis=1, bitorder="little")
    words = packed.view(np.uint64)
    if words.dtype.byteorder == ">":
        words = words.byteswap()
    with open(path, "wb") as fh:
        fh.write(XBF_MAGIC)
        fh.write(struct.pack("<QQ", n_rows, n_cols))
        fh.write(words.astype("<u8").tobytes())
    sidecar = {"schema": 1, "rows": n_rows, "cols": n_cols,
               "descriptors": [d.to_json() for d in matrix.descriptors],
               "warnings": matrix.warnings}
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_xbf(path: str) -> BinarizedMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != XBF_MAGIC:
            raise DataError(f"{path} is not a binarized matrix file")
        n_rows, n_cols = struct.unpack("<QQ", fh.read(16))
        words_per_row = (n_cols + 63) // 64
        raw = np.frombuffer(fh.read(), dtype="<u8")
    raw = raw.reshape(n_rows, words_per_row).astype(np.uint64)
    bytes_ = raw.view(np.uint8).reshape(n_rows, words_per_row * 8)
    bools = np.unpackbits(bytes_, axis=1, bitorder="little")[:, :n_cols].astype(bool)
    with open(path + ".json") as fh:
        sidecar = json.load(fh)
    descriptors = [ColumnDescriptor.from_json(d) for d in sidecar["descriptors"]]
    return BinarizedMatrix(BitMatrix.from_bools(bools), descriptors,
                           sidecar.get("warnings", []))
