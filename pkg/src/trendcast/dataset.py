"""Weekly search-index panels: parsing, validation, normalization and fold plans."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

PREDICTOR = "predictor"
TARGET = "target"
_ROLES = (PREDICTOR, TARGET)
WEEK = timedelta(days=7)


class DatasetError(ValueError):
    """Raised when a panel or its metadata violates a structural invariant."""


def format_value(v: float) -> str:
    """Canonical numeric formatting: integral values without a decimal point,
    everything else as the shortest round-trip repr."""
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


@dataclass(frozen=True)
class Dataset:
    """Aligned weekly panel of named series, shape ``[T x M]``."""

    start_week: date
    names: tuple[str, ...]
    values: np.ndarray
    roles: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DatasetError("values must be a 2-D [T x M] matrix")
        names = tuple(self.names)
        roles = tuple(self.roles) if self.roles else (PREDICTOR,) * len(names)
        if values.shape[1] != len(names):
            raise DatasetError(
                f"{values.shape[1]} value columns but {len(names)} names"
            )
        if len(roles) != len(names):
            raise DatasetError("roles must have one entry per series")
        for n in names:
            if not isinstance(n, str) or not n.strip():
                raise DatasetError("series names must be nonempty strings")
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DatasetError(f"duplicate column names: {', '.join(dupes)}")
        bad = [r for r in roles if r not in _ROLES]
        if bad:
            raise DatasetError(f"unknown role {bad[0]!r}")
        if not np.all(np.isfinite(values)):
            raise DatasetError("non-finite values in panel")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "roles", roles)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]

    @property
    def predictors(self) -> list[str]:
        return [n for n, r in zip(self.names, self.roles) if r == PREDICTOR]

    @property
    def targets(self) -> list[str]:
        return [n for n, r in zip(self.names, self.roles) if r == TARGET]

    @property
    def weeks(self) -> list[date]:
        return [self.start_week + i * WEEK for i in range(self.T)]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DatasetError(f"unknown series {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def columns(self, names: Sequence[str]) -> np.ndarray:
        return self.values[:, [self.index(n) for n in names]]

    def with_targets(self, targets: Iterable[str]) -> "Dataset":
        """Return a copy where exactly the given series are tagged as targets."""
        targets = list(targets)
        for t in targets:
            self.index(t)
        roles = tuple(TARGET if n in targets else PREDICTOR for n in self.names)
        return replace(self, roles=roles)

    def with_values(self, values: np.ndarray) -> "Dataset":
        return replace(self, values=values)

    def with_series(self, name: str, series: np.ndarray, role: str = TARGET) -> "Dataset":
        series = np.asarray(series, dtype=float).reshape(-1, 1)
        if series.shape[0] != self.T:
            raise DatasetError("appended series length differs from panel length")
        return Dataset(
            self.start_week,
            self.names + (name,),
            np.hstack([self.values, series]),
            self.roles + (role,),
        )

    def require_modelable(self):
        if not self.predictors:
            raise DatasetError("dataset has no predictor series")
        if not self.targets:
            raise DatasetError("dataset has no target series")

    # serialization -----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", *self.names])
        for wk, row in zip(self.weeks, self.values):
            w.writerow([wk.isoformat(), *(format_value(v) for v in row)])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "start_week": self.start_week.isoformat(),
            "names": list(self.names),
            "roles": list(self.roles),
            "values": [[float(v) for v in row] for row in self.values],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        try:
            doc = json.loads(text)
            start = date.fromisoformat(doc["start_week"])
            names = doc["names"]
            roles = doc.get("roles") or [PREDICTOR] * len(names)
            values = np.array(doc["values"], dtype=float).reshape(-1, len(names))
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"malformed dataset JSON: {exc}") from None
        return cls(start, tuple(names), values, tuple(roles))


def parse_trends_csv(text: str) -> Dataset:
    """Parse a ``date,<name>,...`` weekly CSV into a :class:`Dataset`.

    Rows must be consecutive weeks in ascending order. All series are tagged as
    predictors; re-tag targets with :meth:`Dataset.with_targets`.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetError("malformed CSV: empty input")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise DatasetError("malformed CSV: header must be 'date,<name>,...'")
    names = header[1:]
    if any(not n for n in names):
        raise DatasetError("malformed CSV: empty column name")
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise DatasetError(f"duplicate column names: {', '.join(dupes)}")
    if len(rows) < 2:
        raise DatasetError("malformed CSV: no data rows")

    weeks: list[date] = []
    values = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != len(header):
            raise DatasetError(
                f"malformed CSV: line {lineno} has {len(row)} fields, expected {len(header)}"
            )
        try:
            wk = date.fromisoformat(row[0].strip())
        except ValueError:
            raise DatasetError(f"malformed CSV: bad date {row[0]!r} on line {lineno}") from None
        if weeks:
            step = wk - weeks[-1]
            if step <= timedelta(0):
                raise DatasetError(f"non-monotone dates at line {lineno}")
            if step != WEEK:
                raise DatasetError(
                    f"gap in weekly sampling between {weeks[-1]} and {wk} (line {lineno})"
                )
        weeks.append(wk)
        for j, cell in enumerate(row[1:]):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DatasetError(
                    f"non-numeric cell {cell!r} in column {names[j]!r} on line {lineno}"
                ) from None
    if not np.all(np.isfinite(values)):
        raise DatasetError("non-finite values in panel")
    return Dataset(weeks[0], tuple(names), values)


# normalization ---------------------------------------------------------


@dataclass(frozen=True)
class NormParams:
    """Per-series z-score parameters (population standard deviation)."""

    mean: Mapping[str, float] = field(default_factory=dict)
    sd: Mapping[str, float] = field(default_factory=dict)

    def for_name(self, name: str) -> tuple[float, float]:
        try:
            return self.mean[name], self.sd[name]
        except KeyError:
            raise DatasetError(f"no normalization parameters for {name!r}") from None

    def to_dict(self) -> dict:
        return {n: {"mean": self.mean[n], "sd": self.sd[n]} for n in self.mean}

    @classmethod
    def from_dict(cls, d: Mapping) -> "NormParams":
        return cls({n: float(v["mean"]) for n, v in d.items()},
                   {n: float(v["sd"]) for n, v in d.items()})


def zscore_fit(dataset: Dataset, fit_indices, names: Sequence[str] | None = None) -> NormParams:
    """Means and population SDs over ``fit_indices`` only."""
    idx = np.asarray(fit_indices, dtype=int)
    if idx.size == 0:
        raise DatasetError("zscore_fit needs at least one row")
    names = list(dataset.names if names is None else names)
    block = dataset.columns(names)[idx]
    mu = block.mean(axis=0)
    sd = block.std(axis=0)
    # relative threshold: population SD of an exactly constant column can be ~1e-15
    scale = np.maximum(np.abs(mu), 1.0)
    flat = [n for n, s, c in zip(names, sd, scale) if not s > 1e-12 * c]
    if flat:
        raise DatasetError(f"zero variance over fit rows: {', '.join(flat)}")
    return NormParams(dict(zip(names, mu.tolist())), dict(zip(names, sd.tolist())))


def zscore_apply(dataset: Dataset, params: NormParams) -> Dataset:
    """Standardize every series of ``dataset``; all names must be covered."""
    mu = np.array([params.for_name(n)[0] for n in dataset.names])
    sd = np.array([params.for_name(n)[1] for n in dataset.names])
    return dataset.with_values((dataset.values - mu) / sd)


def zscore_invert(series, params: NormParams, name: str) -> np.ndarray:
    mu, sd = params.for_name(name)
    return np.asarray(series, dtype=float) * sd + mu


# fold plans ------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    """Contiguous blocked folds over the usable target indices ``[L, T)``."""

    k: int
    lag_depth: int
    assignments: np.ndarray  # fold label per usable index, aligned with ``indices``

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.lag_depth, self.lag_depth + self.assignments.size)

    def test_rows(self, fold: int) -> np.ndarray:
        return self.indices[self.assignments == fold]

    def train_rows(self, fold: int) -> np.ndarray:
        return self.indices[self.assignments != fold]

    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()


def block_labels(n: int, k: int) -> np.ndarray:
    """Labels 0..k-1 for ``n`` ordered items in contiguous blocks; first blocks
    take the remainder so sizes differ by at most one."""
    base, extra = divmod(n, k)
    sizes = [base + (1 if f < extra else 0) for f in range(k)]
    return np.repeat(np.arange(k), sizes)


def make_fold_plan(T: int, L: int, k: int) -> FoldPlan:
    if k < 2:
        raise DatasetError("need at least 2 folds")
    if L < 0:
        raise DatasetError("lag depth must be non-negative")
    usable = T - L
    if usable < k:
        raise DatasetError(
            f"too few usable samples: {usable} rows after {L} lags for {k} folds"
        )
    return FoldPlan(k, L, block_labels(usable, k))
