"""Dynamic survival predictions from a fitted retarded-kernel model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Subject
from .kernels import exponent_matrix
from .rk import FittedRkModel
from .trajectory import SegmentTable

HORIZONS = ("observed", "final")


@dataclass(frozen=True)
class PredictionQuery:
    """Survival to ``prediction_time`` given history up to ``base_time``.

    ``lower_time`` is the time up to which survival is known; it defaults to
    ``base_time`` and is set to the censoring time for the conditional term
    of the prediction error.
    """

    subject: Subject
    base_time: float
    prediction_time: float
    lower_time: float | None = None

    def __post_init__(self):
        if self.lower_time is None:
            object.__setattr__(self, "lower_time", self.base_time)
        if not 0 <= self.lower_time <= self.prediction_time:
            raise ValueError(f"need 0 <= lower_time ({self.lower_time}) <= prediction_time ({self.prediction_time})")
        if self.base_time > self.prediction_time or self.base_time < 0:
            raise ValueError(f"need 0 <= base_time ({self.base_time}) <= prediction_time ({self.prediction_time})")


class RkPredictor:
    """Cached evaluator of the RK survival predictor for one fitted model.

    ``horizon`` selects the final observation time that enters the kernel for
    the subject being predicted: ``"observed"`` uses the last observation at
    or before the base time (the history is truncated there), ``"final"``
    uses the subject's full-record ``s_i`` while still integrating only up
    to that last observation.
    """

    def __init__(self, fitted: FittedRkModel, horizon: str = "observed"):
        if horizon not in HORIZONS:
            raise ValueError(f"horizon must be one of {HORIZONS}")
        self.fitted = fitted
        self.horizon = horizon
        obj = fitted.objective
        self.event_times = obj.event_times
        self.event_counts = obj.event_counts
        self.log_denoms = obj.log_denominators(fitted.params)
        self._cache: dict = {}

    def increments(self, subject: Subject, base_time: float) -> np.ndarray:
        """Hazard mass ``d_k exp(E_i(t_k)) / D(t_k)`` at each training event time."""
        key = (id(subject), float(base_time))
        hit = self._cache.get(key)
        if hit is not None:
            return hit[1]
        last = float(subject.obs_times[subject.obs_times <= base_time].max())
        if self.horizon == "observed":
            table = SegmentTable.from_subjects([subject.truncated(base_time)])
        else:
            table = SegmentTable.from_subjects([subject], obs_limits=[last])
        fixed = subject.fixed.reshape(1, -1)
        E = exponent_matrix(self.fitted.model, self.fitted.s0, self.fitted.params, table, fixed, self.event_times)[:, 0]
        if not np.all(np.isfinite(E)):
            raise FloatingPointError(f"non-finite exponent for subject {subject.id}")
        inc = self.event_counts * np.exp(E - self.log_denoms)
        self._cache[key] = (subject, inc)
        return inc

    def survival(self, subject: Subject, base_time: float, u: float, lower: float | None = None) -> float:
        lower = base_time if lower is None else lower
        if u <= lower:
            # zero-length window: no hazard mass, even with a training event exactly at u
            return 1.0
        inc = self.increments(subject, base_time)
        sel = (self.event_times >= lower) & (self.event_times <= u)
        return float(np.exp(-inc[sel].sum()))

    def __call__(self, query: PredictionQuery) -> float:
        return self.survival(query.subject, query.base_time, query.prediction_time, query.lower_time)


def predict_rk(fitted: FittedRkModel, query: PredictionQuery, horizon: str = "observed") -> float:
    """Probability of surviving to ``query.prediction_time``.

    Training events in the closed interval ``[lower_time, prediction_time]``
    contribute their Breslow mass scaled by the subject's relative hazard.
    """
    cache = fitted.__dict__.setdefault("_predictors", {})
    if horizon not in cache:
        cache[horizon] = RkPredictor(fitted, horizon)
    return cache[horizon](query)
