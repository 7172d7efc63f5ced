"""Longitudinal survival data: subjects, CSV ingestion, and train/test splits."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

_TRUE = {"1", "true", "t", "yes"}
_FALSE = {"0", "false", "f", "no"}


class DataError(ValueError):
    """Raised for malformed or inconsistent survival data."""

    def __init__(self, message: str, subject_id=None, line: int | None = None, column: str | None = None):
        where = []
        if subject_id is not None:
            where.append(f"id={subject_id}")
        if line is not None:
            where.append(f"line {line}")
        full = f"{message} ({', '.join(where)})" if where else message
        super().__init__(full)
        self.subject_id = subject_id
        self.line = line
        self.column = column


def _frozen(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float, ndmin=ndim)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Subject:
    """One individual: outcome plus longitudinal and fixed covariates.

    ``obs_values`` has shape ``(p, n_obs)``; column ``l`` holds the ``p``
    covariate values measured at ``obs_times[l]``.
    """

    id: str
    event_time: float
    event: bool
    obs_times: np.ndarray
    obs_values: np.ndarray
    fixed: np.ndarray = field(default_factory=lambda: _frozen([], 1))

    def __post_init__(self):
        times = _frozen(self.obs_times, 1)
        values = np.array(self.obs_values, dtype=float)
        if values.ndim == 1:
            # p = 0 with a bare observation count, or a single covariate
            values = values.reshape(0, len(times)) if values.size == 0 else values[None, :]
        values.setflags(write=False)
        object.__setattr__(self, "obs_times", times)
        object.__setattr__(self, "obs_values", values)
        object.__setattr__(self, "fixed", _frozen(self.fixed, 1))
        object.__setattr__(self, "event_time", float(self.event_time))
        object.__setattr__(self, "event", bool(self.event))
        object.__setattr__(self, "id", str(self.id))
        self._validate()

    def _validate(self):
        t = self.obs_times
        if len(t) == 0:
            raise DataError("subject has no observations", self.id)
        if t[0] != 0.0:
            raise DataError("first observation time must be 0", self.id)
        if np.any(np.diff(t) <= 0):
            raise DataError("observation times must be strictly increasing", self.id)
        if t[-1] > self.event_time:
            raise DataError("s_i exceeds event time", self.id)
        if self.obs_values.shape[1] != len(t):
            raise DataError("one column of covariate values required per observation time", self.id)
        if not (np.all(np.isfinite(self.obs_values)) and np.all(np.isfinite(self.fixed))):
            raise DataError("covariate values must be finite", self.id)
        if not np.isfinite(self.event_time) or self.event_time < 0:
            raise DataError("event time must be finite and non-negative", self.id)

    @property
    def final_obs_time(self) -> float:
        """Last covariate measurement time ``s_i``."""
        return float(self.obs_times[-1])

    @property
    def n_obs(self) -> int:
        return len(self.obs_times)

    @property
    def p(self) -> int:
        return self.obs_values.shape[0]

    @property
    def q(self) -> int:
        return len(self.fixed)

    def truncated(self, t: float) -> "Subject":
        """Copy of the subject keeping only observations made at or before ``t``."""
        keep = self.obs_times <= t
        if keep.all():
            return self
        return Subject(self.id, self.event_time, self.event, self.obs_times[keep],
                       self.obs_values[:, keep], self.fixed)

    def __eq__(self, other):
        if not isinstance(other, Subject):
            return NotImplemented
        return (self.id == other.id and self.event_time == other.event_time
                and self.event == other.event
                and np.array_equal(self.obs_times, other.obs_times)
                and np.array_equal(self.obs_values, other.obs_values)
                and np.array_equal(self.fixed, other.fixed))

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    subjects: tuple[Subject, ...]
    long_names: tuple[str, ...] = ()
    fixed_names: tuple[str, ...] = ()
    time_unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "long_names", tuple(self.long_names))
        object.__setattr__(self, "fixed_names", tuple(self.fixed_names))
        p, q = len(self.long_names), len(self.fixed_names)
        ids = set()
        for s in self.subjects:
            if s.p != p or s.q != q:
                raise DataError(f"expected p={p}, q={q}; got p={s.p}, q={s.q}", s.id)
            if s.id in ids:
                raise DataError("duplicate subject id", s.id)
            ids.add(s.id)

    def __len__(self):
        return len(self.subjects)

    def __iter__(self):
        return iter(self.subjects)

    @property
    def p(self) -> int:
        return len(self.long_names)

    @property
    def q(self) -> int:
        return len(self.fixed_names)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    @property
    def event_times(self) -> np.ndarray:
        return np.array([s.event_time for s in self.subjects])

    @property
    def events(self) -> np.ndarray:
        return np.array([s.event for s in self.subjects], dtype=bool)

    @property
    def n_events(self) -> int:
        return int(self.events.sum())

    def subset(self, ids: Sequence[str]) -> "Dataset":
        """Sub-dataset with the given ids, kept in the order of ``self``."""
        wanted = set(ids)
        missing = wanted.difference(self.ids)
        if missing:
            raise DataError(f"unknown subject ids: {sorted(missing)[:5]}")
        return Dataset([s for s in self.subjects if s.id in wanted],
                       self.long_names, self.fixed_names, self.time_unit)

    def subject(self, subject_id: str) -> Subject:
        for s in self.subjects:
            if s.id == subject_id:
                return s
        raise KeyError(subject_id)

    def require_events(self):
        if self.n_events == 0:
            raise DataError("dataset has no observed events")

    def digest(self) -> str:
        """SHA-256 over a canonical text rendering of every field."""
        h = hashlib.sha256()
        h.update(repr((self.long_names, self.fixed_names, self.time_unit)).encode())
        for s in self.subjects:
            h.update(repr((s.id, s.event_time, s.event)).encode())
            h.update(s.obs_times.tobytes())
            h.update(np.ascontiguousarray(s.obs_values).tobytes())
            h.update(s.fixed.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class CsvSchema:
    """Column-name mapping for the long (one row per observation) CSV format."""

    id: str = "id"
    time: str = "time"
    event_time: str = "event_time"
    event: str = "event"
    longitudinal: tuple[str, ...] = ()
    fixed: tuple[str, ...] = ()
    rebase: bool = False

    def __post_init__(self):
        object.__setattr__(self, "longitudinal", tuple(self.longitudinal))
        object.__setattr__(self, "fixed", tuple(self.fixed))

    @property
    def columns(self) -> list[str]:
        return [self.id, self.time, self.event_time, self.event, *self.longitudinal, *self.fixed]


def _parse_float(cell: str, column: str, sid, line: int) -> float:
    if cell is None:
        raise DataError(f"missing value in column {column!r}", sid, line, column)
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {cell!r} in column {column!r}", sid, line, column) from None
    if not np.isfinite(value):
        raise DataError(f"non-finite value {cell!r} in column {column!r}", sid, line, column)
    return value


def _parse_event(cell: str, column: str, sid, line: int) -> bool:
    if cell is None:
        raise DataError(f"missing value in column {column!r}", sid, line, column)
    key = cell.strip().lower()
    if key in _TRUE:
        return True
    if key in _FALSE:
        return False
    raise DataError(f"event indicator {cell!r} in column {column!r} not in {{0,1,true,false}}", sid, line, column)


def load_long_csv(path, schema: CsvSchema, time_unit: str = "") -> Dataset:
    """Read a long-format CSV into a :class:`Dataset`.

    Rows are grouped by id (subjects ordered by first appearance) and sorted
    by observation time. Event time, event indicator and fixed covariates must
    be constant within an id.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in schema.columns:
            if col not in header:
                raise DataError(f"column {col!r} not found in {path.name}", column=col)
        rows: dict[str, list] = {}
        for line, row in enumerate(reader, start=2):
            sid = row[schema.id].strip()
            t = _parse_float(row[schema.time], schema.time, sid, line)
            T = _parse_float(row[schema.event_time], schema.event_time, sid, line)
            ev = _parse_event(row[schema.event], schema.event, sid, line)
            z = [_parse_float(row[c], c, sid, line) for c in schema.longitudinal]
            f = tuple(_parse_float(row[c], c, sid, line) for c in schema.fixed)
            rows.setdefault(sid, []).append((t, T, ev, z, f, line))

    subjects = []
    for sid, recs in rows.items():
        recs.sort(key=lambda r: r[0])
        first = recs[0]
        for prev, rec in zip(recs, recs[1:]):
            if rec[0] == prev[0]:
                raise DataError(f"duplicate observation time {rec[0]}", sid, rec[5])
        for rec in recs[1:]:
            if rec[1] != first[1]:
                raise DataError("event time not constant within id", sid, rec[5])
            if rec[2] != first[2]:
                raise DataError("event indicator not constant within id", sid, rec[5])
            if rec[4] != first[4]:
                col = next(c for c, a, b in zip(schema.fixed, rec[4], first[4]) if a != b)
                raise DataError(f"fixed covariate {col!r} not constant within id", sid, rec[5], col)
        times = np.array([r[0] for r in recs])
        if schema.rebase:
            times = times - times[0]
        elif times[0] != 0.0:
            raise DataError("earliest observation time must be 0 (set rebase to shift)", sid, first[5])
        if times[-1] > first[1]:
            last = max(recs, key=lambda r: r[0])
            raise DataError("s_i exceeds event time", sid, last[5])
        values = np.array([r[3] for r in recs], dtype=float).T.reshape(len(schema.longitudinal), len(recs))
        subjects.append(Subject(sid, first[1], first[2], times, values, first[4]))
    return Dataset(subjects, schema.longitudinal, schema.fixed, time_unit)


def write_long_csv(dataset: Dataset, path, schema: CsvSchema | None = None) -> None:
    """Write ``dataset`` in the long CSV format read by :func:`load_long_csv`."""
    if schema is None:
        schema = CsvSchema(longitudinal=dataset.long_names, fixed=dataset.fixed_names)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(schema.columns)
        for s in dataset:
            for l, t in enumerate(s.obs_times):
                w.writerow([s.id, repr(float(t)), repr(s.event_time), int(s.event),
                            *(repr(float(v)) for v in s.obs_values[:, l]),
                            *(repr(float(v)) for v in s.fixed)])


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    fraction: float = 0.5
    n_splits: int = 20

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise ValueError("split fraction must lie in (0, 1)")
        if self.n_splits < 1:
            raise ValueError("n_splits must be positive")


def split(dataset: Dataset, spec: SplitSpec, k: int) -> tuple[Dataset, Dataset]:
    """Deterministic, unstratified random partition number ``k`` of ``dataset``."""
    if not 0 <= k < spec.n_splits:
        raise ValueError(f"split index {k} outside [0, {spec.n_splits})")
    n = len(dataset)
    n_train = int(round(spec.fraction * n))
    if n_train == 0 or n_train == n:
        raise DataError(f"split of {n} subjects at fraction {spec.fraction} leaves an empty half")
    rng = np.random.default_rng([spec.seed, k])
    in_train = np.zeros(n, dtype=bool)
    in_train[rng.permutation(n)[:n_train]] = True
    subs = dataset.subjects
    train = Dataset([s for s, m in zip(subs, in_train) if m], dataset.long_names, dataset.fixed_names, dataset.time_unit)
    test = Dataset([s for s, m in zip(subs, in_train) if not m], dataset.long_names, dataset.fixed_names, dataset.time_unit)
    return train, test
