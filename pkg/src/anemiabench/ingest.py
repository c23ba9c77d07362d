"""Load, validate, impute, derive, encode, and split categorical survey data.

All transformations are pure: a loaded ``Dataset`` is immutable, and every
operation is deterministic given its inputs (and a seed where one applies).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InvalidMeasurementError,
    MissingAnthropometryError,
    SchemaViolationError,
    StratificationError,
    UnimputableColumnError,
)
from .schema import AnemiaThresholds, DatasetSchema, FeatureSpec


def label_from_hemoglobin(hb: float, thresholds: AnemiaThresholds | None = None) -> int:
    """Binary anemia status from a hemoglobin measurement (g/dL).

    Any severity counts as anemic: returns 1 iff ``hb`` is below the
    no-anemia boundary (>= 11.0 g/dL is not anemic).
    """
    if thresholds is None:
        thresholds = AnemiaThresholds()
    if not math.isfinite(hb) or hb <= 0:
        raise InvalidMeasurementError(f"hemoglobin must be positive and finite, got {hb}")
    return int(hb < thresholds.no_anemia_min)


def derive_nutrition_status(z_scores) -> str:
    """Composite nutrition status from anthropometric z-scores.

    A child is ``"nourished"`` when every z-score lies in the closed band
    [-2, +2], ``"malnourished"`` otherwise. Boundary values count as
    nourished.
    """
    scores = list(z_scores)
    if not scores:
        raise MissingAnthropometryError("no z-scores supplied")
    for z in scores:
        if not math.isfinite(z):
            raise MissingAnthropometryError(f"non-finite z-score {z}")
    return "nourished" if all(-2.0 <= z <= 2.0 for z in scores) else "malnourished"


def _lower_median(values: list[float]) -> float:
    """Median that resolves even-sized sets to the lower-middle element.

    Survey counts are integers; picking an existing element avoids
    fabricating half-unit values.
    """
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def _canon_numeric(value: float) -> str:
    """Canonical string for a numeric cell: drop a trailing .0."""
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def impute_column(column: list[str | None], spec: FeatureSpec) -> list[str]:
    """Complete a column: apply the cap, then fill missing cells.

    Numeric-coded columns with ``impute="median"`` are capped first (the
    cap applies to observed values too), then missing cells take the
    median of the capped observed values. ``impute="mode"`` fills with the
    most frequent observed level; ties resolve to the level declared first
    in the spec. Idempotent and deterministic.
    """
    observed = [v for v in column if v is not None]
    if not observed:
        raise UnimputableColumnError(f"{spec.name}: all values missing")

    if spec.impute == "median":
        try:
            numeric = [float(v) for v in observed]
        except ValueError as exc:
            raise SchemaViolationError(
                f"{spec.name}: median imputation requires numeric cells ({exc})",
                feature=spec.name,
            ) from exc
        if spec.cap is not None:
            numeric = [min(v, spec.cap) for v in numeric]
        fill = _canon_numeric(_lower_median(numeric))
        capped = iter(numeric)
        return [fill if v is None else _canon_numeric(next(capped)) for v in column]

    if spec.impute == "mode":
        counts = {level: 0 for level in spec.levels}
        for v in observed:
            if v in counts:
                counts[v] += 1
        fill = max(spec.levels, key=lambda lvl: counts[lvl])
        return [fill if v is None else v for v in column]

    if any(v is None for v in column):
        raise SchemaViolationError(
            f"{spec.name}: missing values present but impute mode is 'none'",
            feature=spec.name,
        )
    return list(column)


@dataclass(frozen=True)
class Dataset:
    """Immutable categorical feature table with binary labels.

    ``codes`` holds one int16 array per feature: the index of each cell's
    level in its spec's ordered level list. Labels are 1 for anemic,
    0 for not anemic.
    """

    schema: DatasetSchema
    codes: dict[str, np.ndarray]
    labels: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        if n == 0:
            raise SchemaViolationError("dataset has no rows")
        for spec in self.schema.features:
            col = self.codes[spec.name]
            if len(col) != n:
                raise SchemaViolationError(f"{spec.name}: column length mismatch")
            col.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def level_of(self, feature: str, row: int) -> str:
        spec = self.schema.feature(feature)
        return spec.levels[self.codes[feature][row]]

    def column_levels(self, feature: str) -> list[str]:
        spec = self.schema.feature(feature)
        return [spec.levels[c] for c in self.codes[feature]]

    def subset_rows(self, indices: np.ndarray) -> "Dataset":
        return Dataset(
            schema=self.schema,
            codes={name: col[indices].copy() for name, col in self.codes.items()},
            labels=self.labels[indices].copy(),
        )

    def subset_features(self, names: list[str]) -> "Dataset":
        sub = self.schema.subset(names)
        return Dataset(
            schema=sub,
            codes={f.name: self.codes[f.name].copy() for f in sub.features},
            labels=self.labels.copy(),
        )


def dataset_from_levels(
    schema: DatasetSchema, columns: dict[str, list[str]], labels
) -> Dataset:
    """Build a Dataset from level strings, validating every cell."""
    labels = np.asarray(labels, dtype=np.int8)
    codes = {}
    for spec in schema.features:
        index = {level: i for i, level in enumerate(spec.levels)}
        raw = columns[spec.name]
        col = np.empty(len(raw), dtype=np.int16)
        for row, value in enumerate(raw):
            try:
                col[row] = index[value]
            except KeyError:
                raise SchemaViolationError(
                    f"row {row}: {value!r} is not a level of feature "
                    f"{spec.name!r}",
                    row=row,
                    feature=spec.name,
                ) from None
        codes[spec.name] = col
    return Dataset(schema=schema, codes=codes, labels=labels)


def load_dataset(csv_path: str | Path, schema: DatasetSchema) -> tuple[Dataset, int]:
    """Read a UTF-8 CSV with a header row into a validated Dataset.

    Cells matching the schema's missing tokens are imputed per feature
    spec. Rows with a missing label are dropped (listwise). Returns the
    dataset and the number of rows read before dropping.
    """
    missing = set(schema.missing_tokens)
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaViolationError(f"{csv_path}: empty file")
        header = set(reader.fieldnames)
        needed = set(schema.feature_names) | {schema.label_name}
        absent = sorted(needed - header)
        if absent:
            raise SchemaViolationError(f"{csv_path}: missing columns {absent}")
        records = list(reader)

    n_loaded = len(records)
    kept_rows = []
    labels = []
    for rec in records:
        raw_label = rec[schema.label_name].strip()
        if raw_label in missing:
            continue
        try:
            value = int(raw_label)
        except ValueError:
            raise SchemaViolationError(
                f"label {raw_label!r} is not 0/1", feature=schema.label_name
            ) from None
        if value not in (0, 1):
            raise SchemaViolationError(
                f"label {raw_label!r} is not 0/1", feature=schema.label_name
            )
        labels.append(value)
        kept_rows.append(rec)

    if not kept_rows:
        raise SchemaViolationError(f"{csv_path}: no rows with labels")

    columns = {}
    for spec in schema.features:
        raw = [
            None if rec[spec.name].strip() in missing else rec[spec.name].strip()
            for rec in kept_rows
        ]
        if spec.impute != "none":
            raw = impute_column(raw, spec)
        columns[spec.name] = raw

    ds = dataset_from_levels(schema, columns, labels)
    return ds, n_loaded


@dataclass(frozen=True)
class EncodedColumn:
    """Provenance of one encoded column: feature, kind, and level/rank map."""

    feature: str
    kind: str          # "ordinal", "binary", "one_hot"
    level: str | None  # indicator level for binary / one_hot columns
    levels: tuple[str, ...]
    header: str

    @property
    def n_levels(self) -> int:
        return len(self.levels) if self.kind == "ordinal" else 2


@dataclass(frozen=True)
class EncodedMatrix:
    """Numeric design matrix plus column provenance for round-tripping."""

    values: np.ndarray
    column_map: tuple[EncodedColumn, ...]

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def columns_for(self, feature: str) -> list[int]:
        return [i for i, c in enumerate(self.column_map) if c.feature == feature]

    def feature_names(self) -> list[str]:
        seen = []
        for col in self.column_map:
            if col.feature not in seen:
                seen.append(col.feature)
        return seen

    def subset_features(self, names: list[str]) -> "EncodedMatrix":
        keep = set(names)
        idx = [i for i, c in enumerate(self.column_map) if c.feature in keep]
        return EncodedMatrix(
            values=self.values[:, idx].copy(),
            column_map=tuple(self.column_map[i] for i in idx),
        )


def encode(ds: Dataset) -> EncodedMatrix:
    """Encode a Dataset into a numeric matrix.

    Ordinal features become their zero-based rank in level order; binary
    features an indicator with the reference level at 0; one-hot features
    one indicator per non-reference level (the reference column is
    dropped, keeping downstream design matrices full-rank).
    """
    blocks = []
    column_map: list[EncodedColumn] = []
    for spec in ds.schema.features:
        codes = ds.codes[spec.name].astype(np.float64)
        if spec.kind == "ordinal":
            blocks.append(codes[:, None])
            column_map.append(
                EncodedColumn(spec.name, "ordinal", None, spec.levels, spec.name)
            )
        elif spec.kind == "binary":
            other = next(l for l in spec.levels if l != spec.reference_level)
            ref_idx = spec.level_index(spec.reference_level)
            blocks.append((codes != ref_idx).astype(np.float64)[:, None])
            column_map.append(
                EncodedColumn(spec.name, "binary", other, spec.levels, spec.name)
            )
        else:
            for level in spec.levels:
                if level == spec.reference_level:
                    continue
                idx = spec.level_index(level)
                blocks.append((codes == idx).astype(np.float64)[:, None])
                column_map.append(
                    EncodedColumn(
                        spec.name, "one_hot", level, spec.levels,
                        f"{spec.name}={level}",
                    )
                )
    return EncodedMatrix(
        values=np.ascontiguousarray(np.hstack(blocks)),
        column_map=tuple(column_map),
    )


def decode_row(matrix: EncodedMatrix, schema: DatasetSchema, row: int) -> dict[str, str]:
    """Recover the original category labels of one encoded row."""
    out = {}
    values = matrix.values[row]
    by_feature: dict[str, list[tuple[int, EncodedColumn]]] = {}
    for i, col in enumerate(matrix.column_map):
        by_feature.setdefault(col.feature, []).append((i, col))
    for name, cols in by_feature.items():
        spec = schema.feature(name)
        kind = cols[0][1].kind
        if kind == "ordinal":
            rank = int(round(values[cols[0][0]]))
            out[name] = spec.levels[rank]
        elif kind == "binary":
            i, col = cols[0]
            out[name] = col.level if values[i] == 1.0 else spec.reference_level
        else:
            hot = [col.level for i, col in cols if values[i] == 1.0]
            if len(hot) > 1:
                raise SchemaViolationError(
                    f"row {row}: multiple indicators set for {name}", row=row,
                    feature=name,
                )
            out[name] = hot[0] if hot else spec.reference_level
    return out


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint train/test row indices produced by a stratified split."""

    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int

    def __post_init__(self):
        self.train_indices.setflags(write=False)
        self.test_indices.setflags(write=False)


def _largest_remainder(counts: np.ndarray, frac: float, total_target: int) -> np.ndarray:
    """Integer per-class allocations summing to ``total_target``.

    Start from floors of ``counts * frac`` and hand out the remaining
    units by descending fractional remainder (ties to the lower class
    index), so each class ends within one sample of its exact share.
    """
    exact = counts * frac
    alloc = np.floor(exact).astype(int)
    remainder = exact - alloc
    short = total_target - int(alloc.sum())
    order = np.lexsort((np.arange(len(counts)), -remainder))
    for i in range(short):
        alloc[order[i % len(counts)]] += 1
    return alloc


def stratified_split(ds: Dataset, test_frac: float, seed: int) -> SplitPlan:
    """Seeded stratified train/test split.

    Each class contributes round(class_count * test_frac) rows to the
    test set, corrected by largest remainder so the total equals
    round(n * test_frac).
    """
    if not 0 < test_frac < 1:
        raise StratificationError(f"test fraction must be in (0,1), got {test_frac}")
    labels = ds.labels
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise StratificationError("both classes must be present")
    if counts.min() < 2:
        raise StratificationError(
            f"class {classes[counts.argmin()]} has fewer than 2 members"
        )
    n = len(labels)
    total_target = int(math.floor(n * test_frac + 0.5))
    alloc = _largest_remainder(counts.astype(float), test_frac, total_target)

    rng = np.random.default_rng(seed)
    test_parts = []
    train_parts = []
    for cls, take in zip(classes, alloc):
        members = np.flatnonzero(labels == cls)
        shuffled = members[rng.permutation(len(members))]
        test_parts.append(shuffled[:take])
        train_parts.append(shuffled[take:])
    test_idx = np.sort(np.concatenate(test_parts))
    train_idx = np.sort(np.concatenate(train_parts))
    return SplitPlan(train_indices=train_idx, test_indices=test_idx, seed=seed)
