"""Censoring-aware prediction error and the fixed-base / fixed-window protocols."""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from joblib import Parallel, delayed

from .data import DataError, Dataset, SplitSpec, Subject, split
from .kernels import KernelModel, S0Policy
from .landmark import fit_landmark, last_observed, predict_lm_conditional
from .prediction import RkPredictor
from .rk import FitConfig, fit_rk

log = logging.getLogger(__name__)

# predict(subject, base_time, u, lower) -> survival probability to u given
# covariate history up to base_time and survival up to lower
Predictor = Callable[[Subject, float, float, float], float]


class Loss(str, enum.Enum):
    SQUARED = "squared"
    ABSOLUTE = "absolute"

    def __call__(self, x: float) -> float:
        return x * x if self is Loss.SQUARED else abs(x)


class Protocol(str, enum.Enum):
    FIXED_BASE = "fixed_base"
    FIXED_WINDOW = "fixed_window"


class EmptyRiskSet(DataError):
    pass


def prediction_error(predict: Predictor, test: Dataset, t: float, u: float,
                     loss: Loss = Loss.SQUARED) -> float:
    """Censoring-aware prediction error at prediction time ``u`` from base time ``t``.

    Subjects censored in ``[t, u)`` contribute both possible outcomes, weighted
    by the model's survival probability to ``u`` given survival to their
    censoring time.
    """
    loss = Loss(loss)
    if u < t:
        raise ValueError(f"prediction time {u} precedes base time {t}")
    terms = []
    for s in test:
        if s.event_time < t:
            continue
        pi_t = predict(s, t, u, t)
        if s.event_time >= u:
            terms.append(loss(1.0 - pi_t))
        elif s.event:
            terms.append(loss(0.0 - pi_t))
        else:
            pi_c = predict(s, t, u, s.event_time)
            terms.append(pi_c * loss(1.0 - pi_t) + (1.0 - pi_c) * loss(0.0 - pi_t))
    if not terms:
        raise EmptyRiskSet(f"no test subjects at risk at t={t}")
    return math.fsum(terms) / len(terms)


def n_at_risk(test: Dataset, t: float) -> int:
    return int(np.sum(test.event_times >= t))


# contenders: picklable model recipes evaluated by the protocols

@dataclass(frozen=True)
class RkContender:
    model: KernelModel
    s0: S0Policy = S0Policy.CONSTANT
    cfg: FitConfig = field(default_factory=FitConfig)
    horizon: str = "observed"
    per_base_time = False

    @property
    def name(self) -> str:
        return f"RK-{KernelModel(self.model).value}"

    def fit(self, train: Dataset, base_time: float | None = None) -> Predictor:
        predictor = RkPredictor(fit_rk(train, self.model, self.s0, self.cfg), self.horizon)
        return predictor.survival


@dataclass(frozen=True)
class LandmarkContender:
    cfg: FitConfig = field(default_factory=FitConfig)
    name: str = "landmark"
    per_base_time = True

    def fit(self, train: Dataset, base_time: float) -> Predictor:
        model = fit_landmark(train, base_time, self.cfg)

        def predict(subject: Subject, t: float, u: float, lower: float) -> float:
            z = last_observed(subject, t)
            return predict_lm_conditional(model, (z, subject.fixed), u, lower)

        return predict


@dataclass(frozen=True)
class ProtocolBlock:
    """One evaluation curve: a fixed base time with varying ``u``, or a fixed window with varying ``t``."""

    protocol: Protocol
    anchor: float
    grid: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if not self.grid:
            raise ValueError("protocol grid must be non-empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("protocol grid must be strictly increasing")
        if self.protocol is Protocol.FIXED_BASE and min(self.grid) < self.anchor:
            raise ValueError("prediction times must not precede the base time")
        if self.protocol is Protocol.FIXED_WINDOW and not self.anchor > 0:
            raise ValueError("prediction window must be positive")

    def pairs(self) -> list[tuple[float, float]]:
        if self.protocol is Protocol.FIXED_BASE:
            return [(self.anchor, u) for u in self.grid]
        return [(t, round(t + self.anchor, 12)) for t in self.grid]


@dataclass
class PeCurve:
    protocol: Protocol
    anchor: float
    model: str
    grid: np.ndarray
    values: np.ndarray  # mean over contributing splits, NaN where none
    per_split: np.ndarray  # (n_splits, G), NaN marks a gap
    n_at_risk: np.ndarray  # (n_splits, G)
    split_counts: np.ndarray
    failures: list[str] = field(default_factory=list)


def _evaluate_split(contenders, data: Dataset, spec: SplitSpec, k: int, blocks, loss: Loss):
    train, test = split(data, spec, k)
    fits: dict = {}
    failures: list[str] = []

    def predictor_for(c, t):
        key = (c.name, t if c.per_base_time else None)
        if key not in fits:
            try:
                fits[key] = c.fit(train, t)
            except (DataError, FloatingPointError) as exc:
                failures.append(f"split {k}, {c.name}, t={t}: {exc}")
                fits[key] = None
        return fits[key]

    out = []
    for block in blocks:
        pairs = block.pairs()
        per_model = {}
        counts = np.array([n_at_risk(test, t) for t, _ in pairs], dtype=float)
        for c in contenders:
            values = np.full(len(pairs), np.nan)
            for g, (t, u) in enumerate(pairs):
                if counts[g] == 0:
                    continue
                predict = predictor_for(c, t)
                if predict is None:
                    continue
                values[g] = prediction_error(predict, test, t, u, loss)
            per_model[c.name] = values
        out.append((per_model, counts))
    return out, failures


def run_protocols(contenders: Sequence, data: Dataset, spec: SplitSpec, blocks: Sequence[ProtocolBlock],
                  loss: Loss = Loss.SQUARED, jobs: int = 1) -> list[dict[str, PeCurve]]:
    """Evaluate every block over all splits.

    Models that do not depend on the base time are fitted once per split and
    shared by all blocks; landmark-type models are refitted per base time.
    Returns one ``{model name: PeCurve}`` mapping per block.
    """
    loss = Loss(loss)
    blocks = list(blocks)
    if jobs == 1:
        results = [_evaluate_split(contenders, data, spec, k, blocks, loss) for k in range(spec.n_splits)]
    else:
        results = Parallel(n_jobs=jobs)(
            delayed(_evaluate_split)(contenders, data, spec, k, blocks, loss) for k in range(spec.n_splits))
    failures = [f for _, fs in results for f in fs]
    for f in failures:
        log.warning("excluded: %s", f)
    curves = []
    for b, block in enumerate(blocks):
        per_block = {}
        counts = np.array([res[b][1] for res, _ in results])
        for c in contenders:
            raw = np.array([res[b][0][c.name] for res, _ in results])
            n_ok = np.isfinite(raw).sum(axis=0)
            with np.errstate(invalid="ignore"):
                mean = np.where(n_ok > 0, np.nansum(raw, axis=0) / np.maximum(n_ok, 1), np.nan)
            per_block[c.name] = PeCurve(block.protocol, block.anchor, c.name, np.array(block.grid), mean, raw,
                                        counts, n_ok, [f for f in failures if f", {c.name}," in f])
        curves.append(per_block)
    return curves


def fixed_base_protocol(contenders, data: Dataset, spec: SplitSpec, t: float, u_grid,
                        loss: Loss = Loss.SQUARED, jobs: int = 1) -> dict[str, PeCurve]:
    return run_protocols(contenders, data, spec, [ProtocolBlock(Protocol.FIXED_BASE, t, tuple(u_grid))],
                         loss, jobs)[0]


def fixed_window_protocol(contenders, data: Dataset, spec: SplitSpec, w: float, t_grid,
                          loss: Loss = Loss.SQUARED, jobs: int = 1) -> dict[str, PeCurve]:
    return run_protocols(contenders, data, spec, [ProtocolBlock(Protocol.FIXED_WINDOW, w, tuple(t_grid))],
                         loss, jobs)[0]


def make_grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    """Inclusive arithmetic grid, rounded to suppress floating-point drift."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(max(n, 0)))


def _fmt(x: float) -> str:
    return "" if not np.isfinite(x) else repr(float(x))


CURVE_COLUMNS = ["protocol", "anchor", "grid_point", "model", "mean_pe", "split_count", "n_at_risk"]


def write_curves_csv(curves: Sequence[PeCurve], path, stamp: dict | None = None) -> None:
    """Mean curves, one row per (block, model, grid point); ``stamp`` adds constant columns."""
    stamp = stamp or {}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS + list(stamp))
        for c in curves:
            with np.errstate(invalid="ignore"):
                mean_n = c.n_at_risk.mean(axis=0)
            for g, x in enumerate(c.grid):
                w.writerow([c.protocol.value, repr(float(c.anchor)), repr(float(x)), c.model, _fmt(c.values[g]),
                            int(c.split_counts[g]), _fmt(mean_n[g]), *stamp.values()])


def write_per_split_csv(curves: Sequence[PeCurve], path, stamp: dict | None = None) -> None:
    stamp = stamp or {}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["protocol", "anchor", "grid_point", "model", "split", "pe", "n_at_risk", *stamp])
        for c in curves:
            for k in range(c.per_split.shape[0]):
                for g, x in enumerate(c.grid):
                    w.writerow([c.protocol.value, repr(float(c.anchor)), repr(float(x)), c.model, k,
                                _fmt(c.per_split[k, g]), int(c.n_at_risk[k, g]), *stamp.values()])
