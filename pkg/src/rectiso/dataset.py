"""Regression samples with mixed covariate kinds, CSV I/O and lag embedding."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyDatasetError, ParseError, SchemaError, ValidationError


class DimKind(enum.Enum):
    DISCRETE = "d"
    CONTINUOUS = "c"
    TREND = "t"

    @classmethod
    def parse(cls, value) -> "DimKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        raise SchemaError(f"unknown covariate kind {value!r}; expected one of d, c, t")


def parse_kinds(spec) -> tuple[DimKind, ...]:
    """Accept ``"d,c,t"``, ``"dct"`` or a sequence of kinds."""
    if isinstance(spec, str):
        parts = [p for p in spec.replace(",", " ").split()]
        if len(parts) == 1 and len(parts[0]) > 1:
            parts = list(parts[0])
        spec = parts
    return tuple(DimKind.parse(k) for k in spec)


def trend_values(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=float) / n


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` responses with an ``n x d`` covariate matrix.

    Arrays are copied and frozen on construction; instances are safe to share
    between workers.
    """

    responses: np.ndarray
    covariates: np.ndarray
    kinds: tuple[DimKind, ...]
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.array(self.responses, dtype=float).reshape(-1)
        x = np.array(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        kinds = tuple(DimKind.parse(k) for k in self.kinds)
        if y.size == 0:
            raise EmptyDatasetError("dataset has no observations")
        if x.ndim != 2 or x.shape[0] != y.size:
            raise ValidationError(
                f"covariates must be an n x d matrix with n={y.size}, got shape {x.shape}"
            )
        if x.shape[1] < 1:
            raise ValidationError("dataset needs at least one covariate")
        if len(kinds) != x.shape[1]:
            raise ValidationError(f"{len(kinds)} kinds given for {x.shape[1]} covariates")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValidationError("responses and covariates must be finite")
        if sum(k is DimKind.TREND for k in kinds) > 1:
            raise ValidationError("at most one trend dimension is allowed")
        n = y.size
        for j, kind in enumerate(kinds):
            col = x[:, j]
            if kind is DimKind.DISCRETE:
                if np.any(col < 0) or np.any(col != np.round(col)):
                    raise ValidationError(
                        f"discrete covariate {j} must hold nonnegative integers"
                    )
            elif kind is DimKind.TREND:
                expected = trend_values(n)
                if not np.allclose(col, expected, rtol=0.0, atol=1e-9):
                    raise ValidationError(f"trend covariate {j} must equal t/n for t=1..n")
                x[:, j] = expected
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise ValidationError("one name per covariate is required")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.responses.size

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    @property
    def d_discrete(self) -> int:
        return sum(k is DimKind.DISCRETE for k in self.kinds)

    @property
    def d_continuous(self) -> int:
        """Number of continuous plus trend dimensions."""
        return self.d - self.d_discrete

    def with_responses(self, responses) -> "Dataset":
        return Dataset(responses, self.covariates, self.kinds, self.names)

    def subset(self, index) -> "Dataset":
        """Rows selected by ``index``; a trend column is rebuilt for the new n."""
        index = np.asarray(index)
        x = self.covariates[index].copy()
        for j, kind in enumerate(self.kinds):
            if kind is DimKind.TREND:
                x[:, j] = trend_values(x.shape[0])
        return Dataset(self.responses[index], x, self.kinds, self.names)


def load_csv(
    path,
    response: str,
    kinds,
    covariates: Sequence[str] | None = None,
) -> Dataset:
    """Read a dataset from a UTF-8 CSV file with one header row.

    ``covariates`` defaults to every non-response column in header order and
    ``kinds`` must match it one-to-one.
    """
    kinds = parse_kinds(kinds)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        rows = list(reader)
    if response not in header:
        raise SchemaError(f"{path}: response column {response!r} not found in {header}")
    if covariates is None:
        covariates = [h for h in header if h != response]
    missing = [c for c in covariates if c not in header]
    if missing:
        raise SchemaError(f"{path}: covariate columns {missing} not found in {header}")
    if not covariates:
        raise SchemaError(f"{path}: no covariate columns")
    if len(kinds) != len(covariates):
        raise SchemaError(
            f"{len(kinds)} kinds declared for {len(covariates)} covariate columns {list(covariates)}"
        )
    cols = [header.index(response)] + [header.index(c) for c in covariates]
    values = np.empty((len(rows), len(cols)))
    for i, row in enumerate(rows, start=1):
        if not row or all(not cell.strip() for cell in row):
            raise ParseError(f"{path}: row {i} is empty", row=i)
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}", row=i)
        for j, c in enumerate(cols):
            cell = row[c].strip()
            try:
                values[i - 1, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: row {i}, column {header[c]!r}: cannot parse {cell!r} as a number",
                    row=i,
                ) from None
    if values.shape[0] == 0:
        raise EmptyDatasetError(f"{path}: no data rows")
    return Dataset(values[:, 0], values[:, 1:], kinds, tuple(covariates))


def format_float(value: float) -> str:
    """Shortest repr that round-trips exactly; integers print without a dot."""
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def write_csv(data: Dataset, path, response_name: str = "y") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([response_name, *data.names])
        for yi, xi in zip(data.responses, data.covariates):
            w.writerow([format_float(yi), *(format_float(v) for v in xi)])


def read_series(path, column: str) -> np.ndarray:
    """Read one numeric column of a CSV file as a series."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise SchemaError(f"{path}: series column {column!r} not found")
        out = []
        for i, row in enumerate(reader, start=1):
            try:
                out.append(float(row[column]))
            except (TypeError, ValueError):
                raise ParseError(
                    f"{path}: row {i}: cannot parse {row[column]!r} as a number", row=i
                ) from None
    return np.asarray(out, dtype=float)


def _is_count_series(series: np.ndarray) -> bool:
    return bool(np.all(series >= 0) and np.all(series == np.round(series)))


def lag_embed(series, lags: int = 1, with_trend: bool = False, lag_kind=None) -> Dataset:
    """Turn a series into a regression sample of lagged values.

    Covariate ``j`` (1-based) holds ``Y[t-j]``; the response is ``Y[t]``. With
    ``with_trend`` an extra trend column ``t/n`` is appended, ``n`` being the
    number of effective rows. Lag columns are discrete for count series unless
    ``lag_kind`` says otherwise.
    """
    series = np.asarray(series, dtype=float).reshape(-1)
    if lags < 1:
        raise ValidationError("lags must be at least 1")
    if series.size <= lags:
        raise EmptyDatasetError(
            f"series of length {series.size} leaves no observations after {lags} lag(s)"
        )
    n = series.size - lags
    if lag_kind is None:
        lag_kind = DimKind.DISCRETE if _is_count_series(series) else DimKind.CONTINUOUS
    lag_kind = DimKind.parse(lag_kind)
    cols = [series[lags - j : lags - j + n] for j in range(1, lags + 1)]
    names = [f"lag{j}" for j in range(1, lags + 1)]
    kinds = [lag_kind] * lags
    if with_trend:
        cols.append(trend_values(n))
        names.append("trend")
        kinds.append(DimKind.TREND)
    return Dataset(series[lags:], np.column_stack(cols), tuple(kinds), tuple(names))


__all__ = [
    "DimKind",
    "Dataset",
    "parse_kinds",
    "trend_values",
    "load_csv",
    "write_csv",
    "read_series",
    "lag_embed",
    "format_float",
]
