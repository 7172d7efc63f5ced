"""Landmarking: a standard Cox model refitted on the risk set at a landmark time."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DataError, Dataset, Subject
from .optimize import minimize
from .rk import BaseHazard, FitConfig


def last_observed(subject: Subject, upsilon: float) -> np.ndarray:
    """Covariate values at the latest observation time not after ``upsilon``."""
    idx = int(np.searchsorted(subject.obs_times, upsilon, side="right")) - 1
    return subject.obs_values[:, max(idx, 0)].copy()


def cox_neg_log_pl(beta: np.ndarray, X: np.ndarray, T: np.ndarray, events: np.ndarray) -> float:
    """Standard Cox negative log partial likelihood with Breslow ties."""
    eta = X @ beta if X.shape[1] else np.zeros(len(T))
    order = np.argsort(-T, kind="stable")
    T_desc = T[order]
    # cumulative log-sum-exp over subjects sorted by decreasing time = log risk-set sums
    cum = np.logaddexp.accumulate(eta[order])
    ev_times = T[events]
    # last position in the descending order with T >= t
    pos = np.searchsorted(-T_desc, -ev_times, side="right") - 1
    return float(cum[pos].sum() - eta[events].sum())


def cox_breslow(beta: np.ndarray, X: np.ndarray, T: np.ndarray, events: np.ndarray) -> BaseHazard:
    eta = X @ beta if X.shape[1] else np.zeros(len(T))
    times, counts = np.unique(T[events], return_counts=True)
    order = np.argsort(-T, kind="stable")
    cum = np.logaddexp.accumulate(eta[order])
    pos = np.searchsorted(-T[order], -times, side="right") - 1
    return BaseHazard(times, counts * np.exp(-cum[pos]))


@dataclass(frozen=True, eq=False)
class LandmarkModel:
    landmark_time: float
    alpha: np.ndarray
    gamma: np.ndarray
    base_hazard: BaseHazard
    risk_set_ids: tuple[str, ...]
    objective_value: float = float("nan")
    converged: bool = True
    fit_meta: dict = field(default_factory=dict)

    def linear_predictor(self, z, zeta) -> float:
        return float(np.dot(self.alpha, z) + np.dot(self.gamma, zeta))

    def to_dict(self, dataset_digest: str | None = None) -> dict:
        return {
            "kind": "landmark",
            "landmark_time": self.landmark_time,
            "alpha": self.alpha.tolist(),
            "gamma": self.gamma.tolist(),
            "base_hazard": self.base_hazard.to_dict(),
            "risk_set_ids": list(self.risk_set_ids),
            "objective_value": self.objective_value,
            "converged": self.converged,
            "dataset_digest": dataset_digest,
            "fit_meta": self.fit_meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LandmarkModel":
        return cls(doc["landmark_time"], np.asarray(doc["alpha"], dtype=float), np.asarray(doc["gamma"], dtype=float),
                   BaseHazard.from_dict(doc["base_hazard"]), tuple(doc["risk_set_ids"]),
                   doc["objective_value"], doc["converged"], doc.get("fit_meta", {}))


def risk_set(data: Dataset, upsilon: float) -> list[Subject]:
    return [s for s in data if s.event_time > upsilon]


def fit_landmark(data: Dataset, upsilon: float, cfg: FitConfig | None = None) -> LandmarkModel:
    """Cox fit on subjects still at risk after ``upsilon`` using last-observed covariates."""
    cfg = cfg or FitConfig()
    at_risk = risk_set(data, upsilon)
    if not at_risk:
        raise DataError(f"empty risk set at landmark time {upsilon}")
    T = np.array([s.event_time for s in at_risk])
    events = np.array([s.event for s in at_risk], dtype=bool)
    if not events.any():
        raise DataError(f"no events after landmark time {upsilon}")
    p, q = data.p, data.q
    X = np.array([np.concatenate([last_observed(s, upsilon), s.fixed]) for s in at_risk]).reshape(len(at_risk), p + q)
    if p + q:
        res = minimize(lambda b: cox_neg_log_pl(b, X, T, events), np.zeros(p + q), cfg.optimizer)
        beta, value, converged = res.x, res.fun, res.converged
        meta = {"n_evals": res.n_evals, "n_sweeps": res.n_sweeps}
    else:
        beta = np.zeros(0)
        value, converged, meta = cox_neg_log_pl(beta, X, T, events), True, {}
    return LandmarkModel(float(upsilon), beta[:p].copy(), beta[p:].copy(), cox_breslow(beta, X, T, events),
                         tuple(s.id for s in at_risk), value, converged, meta)


def _split_covariates(model: LandmarkModel, covariates):
    z, zeta = (np.asarray(c, dtype=float).ravel() for c in covariates)
    if len(z) != len(model.alpha) or len(zeta) != len(model.gamma):
        raise ValueError(f"expected {len(model.alpha)} longitudinal and {len(model.gamma)} fixed covariates, "
                         f"got {len(z)} and {len(zeta)}")
    return z, zeta


def _survival(eta: float, cum: float) -> float:
    if cum == 0.0:
        return 1.0
    # combine in log space so a huge relative hazard gives 0 instead of inf * 0
    with np.errstate(over="ignore"):
        return float(np.exp(-np.exp(eta + np.log(cum))))


def predict_lm(model: LandmarkModel, covariates, u: float) -> float:
    """Survival from the landmark time to ``u`` for covariates ``(z, zeta)``."""
    if u < model.landmark_time:
        raise ValueError(f"prediction time {u} precedes landmark time {model.landmark_time}")
    z, zeta = _split_covariates(model, covariates)
    cum = model.base_hazard.cumulative(model.landmark_time, u)
    return _survival(model.linear_predictor(z, zeta), cum)


def predict_lm_conditional(model: LandmarkModel, covariates, u: float, t_censor: float) -> float:
    """Survival to ``u`` given survival to ``t_censor`` (jumps in ``(t_censor, u]``)."""
    if not model.landmark_time <= t_censor <= u:
        raise ValueError(f"need landmark time <= t_censor ({t_censor}) <= u ({u})")
    z, zeta = _split_covariates(model, covariates)
    cum = model.base_hazard.cumulative(t_censor, u)
    return _survival(model.linear_predictor(z, zeta), cum)
