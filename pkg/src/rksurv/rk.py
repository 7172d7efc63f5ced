"""Maximum-likelihood fitting of retarded-kernel hazard models."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .data import DataError, Dataset
from .kernels import KernelModel, KernelParams, PairExponents, S0Policy, exponent_matrix
from .optimize import OptimizerConfig, minimize
from .trajectory import SegmentTable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    """Start points and optimiser settings for model fits.

    ``tau_starts`` are absolute timescales; when ``None`` the starts are
    ``0.1 * Tbar`` and ``Tbar`` with ``Tbar`` the mean observed time.
    """

    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    tau_starts: tuple[float, ...] | None = None
    a_start: float = 0.0
    gamma_start: float = 0.0


@dataclass(frozen=True, eq=False)
class BaseHazard:
    """Point masses of the nonparametric base hazard at distinct event times."""

    jump_times: np.ndarray
    jumps: np.ndarray

    def cumulative(self, lower: float, upper: float, closed_lower: bool = False) -> float:
        """Sum of jumps in ``(lower, upper]`` (or ``[lower, upper]``)."""
        t = self.jump_times
        sel = (t >= lower if closed_lower else t > lower) & (t <= upper)
        return float(self.jumps[sel].sum())

    def to_dict(self) -> dict:
        return {"jump_times": self.jump_times.tolist(), "jumps": self.jumps.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BaseHazard":
        return cls(np.asarray(d["jump_times"], dtype=float), np.asarray(d["jumps"], dtype=float))


class RkObjective:
    """Negative log partial likelihood over ``(a, tau, gamma)`` for one dataset.

    Segment tables, distinct event times and risk-set masks are built once
    so repeated evaluations inside the optimiser only redo the kernel algebra.
    """

    def __init__(self, data: Dataset, model: KernelModel, s0: S0Policy = S0Policy.CONSTANT):
        data.require_events()
        self.data = data
        self.model = KernelModel(model)
        self.s0 = S0Policy(s0)
        self.table = SegmentTable.from_subjects(data.subjects)
        self.fixed = np.array([s.fixed for s in data.subjects]).reshape(len(data), data.q)
        T = data.event_times
        events = data.events
        self.event_times, self.event_counts = np.unique(T[events], return_counts=True)
        self.at_risk = T[None, :] >= self.event_times[:, None]
        self.event_rows = np.searchsorted(self.event_times, T[events])
        self.event_cols = np.flatnonzero(events)
        # risk-set pairs in row-major order, so each event time is a contiguous run
        pair_k, pair_n = np.nonzero(self.at_risk)
        self.run_starts = np.searchsorted(pair_k, np.arange(len(self.event_times)))
        self.pair_k = pair_k
        self.event_pairs = np.searchsorted(pair_k * len(data) + pair_n,
                                           self.event_rows * len(data) + self.event_cols)
        self.pairs = PairExponents(self.model, self.s0, self.table, self.fixed, self.event_times, pair_k, pair_n)

    def exponents(self, params: KernelParams) -> np.ndarray:
        """Full ``(K, N)`` exponent matrix, including subjects outside the risk set."""
        E = exponent_matrix(self.model, self.s0, params, self.table, self.fixed, self.event_times)
        if not np.all(np.isfinite(E)):
            bad = np.argwhere(~np.isfinite(E))[0]
            raise FloatingPointError(f"non-finite exponent for subject {self.data.subjects[bad[1]].id}")
        return E

    def pair_exponents(self, params: KernelParams) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):  # reported below with the subject id
            E = self.pairs(params)
        if not np.all(np.isfinite(E)):
            bad = self.pairs.pair_n[np.flatnonzero(~np.isfinite(E))[0]]
            raise FloatingPointError(f"non-finite exponent for subject {self.data.subjects[bad].id}")
        return E

    def _run_logsumexp(self, E: np.ndarray) -> np.ndarray:
        top = np.maximum.reduceat(E, self.run_starts)
        return top + np.log(np.add.reduceat(np.exp(E - top[self.pair_k]), self.run_starts))

    def log_denominators(self, params: KernelParams) -> np.ndarray:
        """``log sum_{j at risk} exp(E_j(t_k))`` at each distinct event time."""
        return self._run_logsumexp(self.pair_exponents(params))

    def __call__(self, params: KernelParams) -> float:
        E = self.pair_exponents(params)
        lse = self._run_logsumexp(E)
        return float(self.event_counts @ lse - E[self.event_pairs].sum())

    def from_vector(self, x) -> float:
        return self(KernelParams.from_vector(x, self.data.p, self.data.q))


def neg_log_pl(params: KernelParams, model: KernelModel, s0: S0Policy, data: Dataset) -> float:
    """Negative log partial likelihood of the retarded-kernel model (Breslow ties)."""
    return RkObjective(data, model, s0)(params)


@dataclass(frozen=True, eq=False)
class FittedRkModel:
    model: KernelModel
    s0: S0Policy
    params: KernelParams
    train: Dataset
    objective_value: float
    converged: bool
    fit_meta: dict = field(default_factory=dict)

    @cached_property
    def objective(self) -> RkObjective:
        return RkObjective(self.train, self.model, self.s0)

    @cached_property
    def base_hazard(self) -> BaseHazard:
        return breslow_jumps(self)

    def to_dict(self, dataset_digest: str | None = None) -> dict:
        return {
            "kind": "rk",
            "model": self.model.value,
            "s0": self.s0.value,
            "params": self.params.to_dict(),
            "long_names": list(self.train.long_names),
            "fixed_names": list(self.train.fixed_names),
            "objective_value": self.objective_value,
            "converged": self.converged,
            "train_ids": self.train.ids,
            "dataset_digest": dataset_digest,
            "fit_meta": self.fit_meta,
        }

    @classmethod
    def from_dict(cls, doc: dict, dataset: Dataset) -> "FittedRkModel":
        train = dataset.subset(doc["train_ids"])
        return cls(KernelModel(doc["model"]), S0Policy(doc["s0"]), KernelParams.from_dict(doc["params"]),
                   train, doc["objective_value"], doc["converged"], doc.get("fit_meta", {}))


def breslow_jumps(fitted: FittedRkModel) -> BaseHazard:
    """Base-hazard masses ``d_k / sum_{T_j >= t_k} exp(E_j(t_k))`` at distinct event times."""
    obj = fitted.objective
    lse = obj.log_denominators(fitted.params)
    return BaseHazard(obj.event_times.copy(), obj.event_counts * np.exp(-lse))


def _start_points(data: Dataset, cfg: FitConfig) -> list[np.ndarray]:
    p, q = data.p, data.q
    taus = cfg.tau_starts
    if taus is None:
        tbar = float(data.event_times.mean())
        taus = (0.1 * tbar, tbar) if tbar > 0 else (1.0,)
    if p == 0:
        taus = taus[:1]
    starts = []
    for tau in taus:
        starts.append(np.concatenate([np.full(p, cfg.a_start), np.full(p, np.log(tau)), np.full(q, cfg.gamma_start)]))
    return starts


def fit_rk(data: Dataset, model: KernelModel, s0: S0Policy = S0Policy.CONSTANT,
           cfg: FitConfig | None = None) -> FittedRkModel:
    """Minimise the negative log partial likelihood from each start; keep the best run."""
    cfg = cfg or FitConfig()
    model, s0 = KernelModel(model), S0Policy(s0)
    if data.p == 0 and data.q == 0:
        raise DataError("fit_rk needs at least one longitudinal or fixed covariate")
    obj = RkObjective(data, model, s0)
    runs = []
    best = None
    for x0 in _start_points(data, cfg):
        res = minimize(obj.from_vector, x0, cfg.optimizer)
        runs.append({"start": x0.tolist(), "x": res.x.tolist(), "objective": res.fun,
                     "converged": res.converged, "n_evals": res.n_evals, "n_sweeps": res.n_sweeps})
        log.debug("start %s -> %.10g (converged=%s, %d evals)", x0, res.fun, res.converged, res.n_evals)
        if best is None or res.fun < best.fun:
            best = res
    converged = any(r["converged"] for r in runs)
    if not converged:
        log.warning("no start converged for model %s; returning best point", model.value)
    params = KernelParams.from_vector(best.x, data.p, data.q)
    meta = {"runs": runs, "n_evals": sum(r["n_evals"] for r in runs)}
    if not converged:
        meta["warning"] = "optimiser budget exhausted on every start"
    fitted = FittedRkModel(model, s0, params, data, best.fun, converged, meta)
    fitted.__dict__["objective"] = obj
    return fitted
