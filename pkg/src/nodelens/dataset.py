"""CSV ingestion, variable typing and [0,1] normalization.

The pipeline is: load_csv -> infer_specs -> (optional fork/toggle edits)
-> normalize. The resulting Dataset is immutable; re-thresholding returns
a new instance sharing the underlying arrays.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NodelensError

MISSING_TOKENS = {"", "na", "nan", "null"}
MISSING_CATEGORY = "⟨missing⟩"  # rendered as ⟨missing⟩

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY_FORK = "binaryFork"


class MalformedCsv(NodelensError):
    pass


class DuplicateColumn(MalformedCsv):
    pass


class EmptyTable(NodelensError):
    pass


class AllMissing(NodelensError):
    pass


class NotCategorical(NodelensError):
    pass


class NoTarget(NodelensError):
    pass


class NoEnabledInputs(NodelensError):
    pass


class InvalidLogScale(NodelensError):
    pass


class UnknownVariable(NodelensError):
    pass


@dataclass(frozen=True)
class RawTable:
    """Header plus row-major grid of optional text cells."""

    column_names: list[str]
    cells: list[list[str | None]]

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    def column(self, name: str) -> list[str | None]:
        try:
            idx = self.column_names.index(name)
        except ValueError:
            raise UnknownVariable(name) from None
        return [row[idx] for row in self.cells]


@dataclass
class VariableSpec:
    name: str
    kind: str  # numeric | categorical | binaryFork
    enabled: bool = True
    is_target: bool = False
    log_scale: bool = False
    scale_min: float = 0.0
    scale_max: float = 1.0
    categories: list[str] = field(default_factory=list)
    source_variable: str | None = None
    degenerate: bool = False

    def copy(self) -> "VariableSpec":
        return replace(self, categories=list(self.categories))


@dataclass(frozen=True)
class Dataset:
    """Normalized table: every cell and the target live in [0,1]."""

    specs: list[VariableSpec]           # enabled input specs, column order
    rows: np.ndarray                    # (N, D) float64 in [0,1]
    target: np.ndarray                  # (N,) float64 in [0,1]
    target_spec: VariableSpec
    threshold: float

    @property
    def n_items(self) -> int:
        return self.rows.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.rows.shape[1]

    @property
    def high_mask(self) -> np.ndarray:
        return self.target >= self.threshold

    def input_names(self) -> list[str]:
        return [s.name for s in self.specs]

    def with_threshold(self, tau: float) -> "Dataset":
        """Pure re-thresholding; arrays are shared, nothing is mutated."""
        if not (0.0 < tau < 1.0):
            raise ValueError(f"threshold must lie in (0,1), got {tau}")
        return Dataset(self.specs, self.rows, self.target, self.target_spec, tau)

    def to_json_obj(self) -> dict:
        return {
            "specs": [spec_to_json(s) for s in self.specs + [self.target_spec]],
            "rows": self.rows.tolist(),
            "target": self.target.tolist(),
            "threshold": self.threshold,
        }


def spec_to_json(s: VariableSpec) -> dict:
    return {
        "name": s.name,
        "kind": s.kind,
        "enabled": s.enabled,
        "isTarget": s.is_target,
        "logScale": s.log_scale,
        "scaleMin": s.scale_min,
        "scaleMax": s.scale_max,
        "categories": list(s.categories),
        "sourceVariable": s.source_variable,
        "degenerate": s.degenerate,
    }


def _clean_cell(cell: str) -> str | None:
    cell = cell.strip()
    if cell.lower() in MISSING_TOKENS:
        return None
    return cell


def load_csv(data: bytes | str) -> RawTable:
    """Parse comma-separated UTF-8 text with a mandatory header row.

    Empty cells and the sentinels NA/NaN/null (case-insensitive) become
    missing values. Raises MalformedCsv for ragged rows or broken quoting,
    DuplicateColumn for repeated header names, EmptyTable when no data rows
    remain.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8-sig")  # tolerate a BOM
        except UnicodeDecodeError as exc:
            raise MalformedCsv(f"not valid UTF-8: {exc}") from exc
    else:
        text = data

    try:
        reader = csv.reader(io.StringIO(text))
        records = [row for row in reader if row]
    except csv.Error as exc:
        raise MalformedCsv(str(exc)) from exc

    if not records:
        raise EmptyTable("no header row")
    header = [name.strip() for name in records[0]]
    if len(set(header)) != len(header):
        seen: set[str] = set()
        dups = set()
        for name in header:
            if name in seen:
                dups.add(name)
            seen.add(name)
        raise DuplicateColumn(f"duplicate column name(s): {sorted(dups)}")

    width = len(header)
    cells: list[list[str | None]] = []
    for i, row in enumerate(records[1:], start=1):
        if len(row) != width:
            raise MalformedCsv(
                f"row {i} has {len(row)} cells, expected {width}"
            )
        cells.append([_clean_cell(c) for c in row])
    if not cells:
        raise EmptyTable("no data rows")
    return RawTable(header, cells)


def _parse_number(cell: str) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        return None
    # inf/nan tokens parse as float but are useless for scaling
    return value if math.isfinite(value) else None


def infer_kind(column: list[str | None]) -> str:
    """numeric iff every non-missing cell parses as a finite real."""
    non_missing = [c for c in column if c is not None]
    if not non_missing:
        raise AllMissing("column has no usable values")
    if all(_parse_number(c) is not None for c in non_missing):
        return NUMERIC
    return CATEGORICAL


def detect_log_scale(values: list[float] | np.ndarray) -> bool:
    """Default heuristic for a log-scaled axis: strictly positive values
    with a heavy right tail (mean > 3*median, or max > 100*Q75). Only a
    suggestion; the caller may override."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0 or np.any(arr <= 0):
        return False
    mean = float(arr.mean())
    median = float(np.median(arr))
    q75 = float(np.quantile(arr, 0.75))
    return mean > 3.0 * median or float(arr.max()) > 100.0 * q75


def _categories_of(column: list[str | None]) -> list[str]:
    cats = sorted({c for c in column if c is not None})
    if any(c is None for c in column):
        cats.append(MISSING_CATEGORY)
        cats.sort()
    return cats


def infer_specs(table: RawTable) -> list[VariableSpec]:
    """Build a default VariableSpec for every column of the table."""
    specs = []
    for name in table.column_names:
        column = table.column(name)
        kind = infer_kind(column)
        if kind == NUMERIC:
            values = [_parse_number(c) for c in column if c is not None]
            spec = VariableSpec(
                name=name,
                kind=NUMERIC,
                log_scale=detect_log_scale(values),
                scale_min=min(values),
                scale_max=max(values),
            )
        else:
            spec = VariableSpec(name=name, kind=CATEGORICAL,
                                categories=_categories_of(column))
        specs.append(spec)
    return specs


def fork_categorical(spec: VariableSpec, table: RawTable) -> list[VariableSpec]:
    """Split a categorical variable into one 0/1 variable per category.

    Children are named "<name>=<category>". The original spec is disabled
    in place. A single-category column yields one constant child, flagged
    degenerate.
    """
    if spec.kind != CATEGORICAL:
        raise NotCategorical(f"{spec.name} is {spec.kind}")
    children = []
    for cat in spec.categories:
        children.append(VariableSpec(
            name=f"{spec.name}={cat}",
            kind=BINARY_FORK,
            scale_min=0.0,
            scale_max=1.0,
            categories=[cat],
            source_variable=spec.name,
            degenerate=len(spec.categories) == 1,
        ))
    spec.enabled = False
    return children


def _numeric_column(column: list[str | None], spec: VariableSpec) -> np.ndarray:
    values = np.zeros(len(column))
    observed = [(_parse_number(c), i) for i, c in enumerate(column) if c is not None]
    if not observed:
        return values
    raw = np.array([v for v, _ in observed])
    if spec.log_scale and np.any(raw <= 0):
        raise InvalidLogScale(f"{spec.name}: log scale requires positive values")
    lo, hi = float(raw.min()), float(raw.max())
    spec.scale_min, spec.scale_max = lo, hi
    if lo == hi:
        spec.degenerate = True
        return values
    t = np.log if spec.log_scale else (lambda x: x)
    scaled = (t(raw) - t(lo)) / (t(hi) - t(lo))
    for (_, i), v in zip(observed, scaled):
        values[i] = v
    return values


def _categorical_column(column: list[str | None], spec: VariableSpec) -> np.ndarray:
    cats = spec.categories or _categories_of(column)
    spec.categories = cats
    if len(cats) == 1:
        spec.degenerate = True
        return np.zeros(len(column))
    code = {c: i / (len(cats) - 1) for i, c in enumerate(cats)}
    missing_code = code.get(MISSING_CATEGORY, 0.0)
    return np.array([code[c] if c is not None else missing_code for c in column])


def _fork_column(column: list[str | None], spec: VariableSpec) -> np.ndarray:
    cat = spec.categories[0]
    if cat == MISSING_CATEGORY:
        return np.array([1.0 if c is None else 0.0 for c in column])
    return np.array([1.0 if c == cat else 0.0 for c in column])


def normalize(table: RawTable, specs: list[VariableSpec],
              threshold: float = 0.5) -> Dataset:
    """Scale every enabled variable to [0,1] and assemble the Dataset.

    Numeric columns map x -> (t(x)-t(min))/(t(max)-t(min)) with t=log for
    log-scaled variables; missing numerics become 0 (the scaled minimum);
    constant columns map to 0 and are flagged degenerate. Un-forked
    categoricals get equally spaced codes i/(C-1) in sorted category order.
    """
    targets = [s for s in specs if s.is_target and s.enabled]
    if len(targets) != 1:
        raise NoTarget(f"need exactly one enabled target, found {len(targets)}")
    target_spec = targets[0]
    input_specs = [s for s in specs if s.enabled and not s.is_target]
    if not input_specs:
        raise NoEnabledInputs("no enabled input variables")

    def build(spec: VariableSpec) -> np.ndarray:
        if spec.kind == BINARY_FORK:
            source = spec.source_variable or spec.name
            return _fork_column(table.column(source), spec)
        column = table.column(spec.name)
        if spec.kind == NUMERIC:
            return _numeric_column(column, spec)
        return _categorical_column(column, spec)

    rows = np.column_stack([build(s) for s in input_specs])
    target = build(target_spec)
    if target_spec.degenerate:
        # a constant target sits at the middle of its (empty) range, so the
        # default threshold marks every row as high rather than none
        target = np.full_like(target, 0.5)
    return Dataset(input_specs, rows, target, target_spec, threshold)


def default_threshold(target: np.ndarray) -> float:
    """Midpoint of the scaled range. The target is normalized to [0,1],
    so the default is simply 0.5."""
    return 0.5


def bin_index(values: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width binning over [0,1]. A value on a bin's upper edge goes
    to the higher bin; 1.0 goes to the last bin."""
    idx = np.floor(np.asarray(values, dtype=float) * bins).astype(int)
    return np.clip(idx, 0, bins - 1)


def variable_histogram(values: np.ndarray, bins: int) -> np.ndarray:
    """Plain counts per bin; counts sum to len(values)."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    idx = bin_index(values, bins)
    return np.bincount(idx, minlength=bins)[:bins]


def denormalize(spec: VariableSpec, value: float) -> float:
    """Inverse of the numeric scaling, used for axis labels."""
    if spec.kind == NUMERIC:
        lo, hi = spec.scale_min, spec.scale_max
        if lo == hi:
            return lo
        if spec.log_scale:
            return math.exp(math.log(lo) + value * (math.log(hi) - math.log(lo)))
        return lo + value * (hi - lo)
    return value
