"""Retarded association kernels (models A and B) and hazard exponents.

Both kernels are written so that every exponential has a non-positive
argument. With ``m = min(s, t)``:

* model A: ``beta = (a/tau) exp((t' - m)/tau) / (1 - exp(-m/tau))``
* model B: ``beta = (a/tau) exp(-(t - t')/tau) + (a/m) (1 - exp(-(t - m)/tau) + exp(-t/tau))``

In the general family ``beta = A(t,s) exp(-(t-t')/tau)/tau + B(t,s)``,
model A has ``B = 0`` and model B has ``A = a``. Both integrate to ``a``
over ``[0, m]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .trajectory import SegmentTable, StepTrajectory

TAU_FLOOR = 1e-12


class KernelModel(str, enum.Enum):
    A = "A"
    B = "B"


class S0Policy(str, enum.Enum):
    """Association used for subjects observed only at baseline (``s = 0``)."""

    CONSTANT = "constant"
    DECAY = "decay"


@dataclass(frozen=True, eq=False)
class KernelParams:
    a: np.ndarray
    tau: np.ndarray
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if a.shape != tau.shape:
            raise ValueError("a and tau must have the same length")
        if np.any(tau <= 0):
            raise ValueError("impact timescales must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "gamma", gamma)

    @property
    def p(self) -> int:
        return len(self.a)

    @property
    def q(self) -> int:
        return len(self.gamma)

    def to_vector(self) -> np.ndarray:
        """Unconstrained optimiser coordinates ``(a, log tau, gamma)``."""
        return np.concatenate([self.a, np.log(self.tau), self.gamma])

    @classmethod
    def from_vector(cls, x, p: int, q: int) -> "KernelParams":
        x = np.asarray(x, dtype=float)
        if len(x) != 2 * p + q:
            raise ValueError(f"expected {2 * p + q} coordinates, got {len(x)}")
        # the kernels are flat in tau below TAU_FLOOR, so clamping there leaves the objective unchanged
        log_tau = np.clip(x[p:2 * p], np.log(TAU_FLOOR), 690.0)
        return cls(x[:p], np.exp(log_tau), x[2 * p:])

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "tau": self.tau.tolist(), "gamma": self.gamma.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelParams":
        return cls(d["a"], d["tau"], d.get("gamma", []))


def _check_positive(tau: float, s: float):
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")


def kernel_value(model: KernelModel, a: float, tau: float, t: float, t_prime: float, s: float) -> float:
    """Kernel weight of the covariate value at ``t_prime`` on the hazard at ``t``."""
    model = KernelModel(model)
    _check_positive(tau, s)
    if t_prime > t:
        return 0.0
    m = min(s, t)
    if t_prime < 0 or t_prime > m:
        raise ValueError(f"t_prime={t_prime} outside [0, min(s, t)] = [0, {m}]")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    tau = max(tau, TAU_FLOOR)
    if model is KernelModel.A:
        return a / tau * np.exp((t_prime - m) / tau) / -np.expm1(-m / tau)
    return a / tau * np.exp(-(t - t_prime) / tau) + a / m * (1.0 - np.exp(-(t - m) / tau) + np.exp(-t / tau))


def segment_integral(model: KernelModel, a: float, tau: float, t: float, s: float,
                     seg: tuple[float, float, float]) -> float:
    """Exact integral of ``kernel * value`` over one constant segment."""
    model = KernelModel(model)
    _check_positive(tau, s)
    start, end, value = seg
    m = min(s, t)
    if not 0 <= start < end <= m:
        raise ValueError(f"segment ({start}, {end}) outside [0, {m}]")
    tau = max(tau, TAU_FLOOR)
    if model is KernelModel.A:
        return a * value * (np.exp((end - m) / tau) - np.exp((start - m) / tau)) / -np.expm1(-m / tau)
    decaying = np.exp(-(t - end) / tau) - np.exp(-(t - start) / tau)
    flat = (1.0 - np.exp(-(t - m) / tau) + np.exp(-t / tau)) * (end - start) / m
    return a * value * (decaying + flat)


def s0_association(s0: S0Policy, a, tau, t):
    """Association ``beta(t)`` applied to baseline values when ``s = 0``."""
    if S0Policy(s0) is S0Policy.CONSTANT:
        return a * np.ones_like(np.asarray(t, dtype=float))
    return a * np.exp(-np.asarray(t, dtype=float) / np.maximum(tau, TAU_FLOOR))


def exponent(model: KernelModel, s0: S0Policy, params: KernelParams, trajs: Sequence[StepTrajectory],
             fixed, t: float, s: float, obs_limit: float) -> float:
    """Log relative hazard at time ``t`` for one subject.

    The longitudinal part integrates the kernel against the step trajectories
    over ``[0, min(obs_limit, t)]``. Reference implementation; the fitting
    code uses :func:`exponent_matrix`.
    """
    if not 0 <= obs_limit <= s:
        raise ValueError(f"obs_limit={obs_limit} outside [0, s={s}]")
    total = float(np.dot(params.gamma, np.asarray(fixed, dtype=float))) if params.q else 0.0
    if s == 0:
        for mu, traj in enumerate(trajs):
            total += float(s0_association(s0, params.a[mu], params.tau[mu], t)) * traj.value_at(0.0)
        return total
    limit = min(obs_limit, t)
    for mu, traj in enumerate(trajs):
        for seg in traj.segments_up_to(limit):
            total += segment_integral(model, params.a[mu], params.tau[mu], t, s, seg)
    return total


def unit_integrals(model: KernelModel, tau: float, table: SegmentTable, times: np.ndarray) -> np.ndarray:
    """Kernel integrals with ``a = 1`` over every padded segment, shape ``(K, N, L)``."""
    tau = max(float(tau), TAU_FLOOR)
    t = np.asarray(times, dtype=float)[:, None, None]
    m = np.minimum(table.s[None, :, None], t)
    lim = np.minimum(table.obs_limit[None, :, None], t)
    st = np.minimum(table.starts[None], lim)
    en = np.minimum(table.ends[None], lim)
    positive = m > 0
    safe_m = np.where(positive, m, t)
    # entries with m = 0 are discarded below; silence their 0/0
    with np.errstate(divide="ignore", invalid="ignore"):
        if KernelModel(model) is KernelModel.A:
            out = (np.exp((en - safe_m) / tau) - np.exp((st - safe_m) / tau)) / -np.expm1(-safe_m / tau)
        else:
            decaying = np.exp(-(t - en) / tau) - np.exp(-(t - st) / tau)
            flat = (1.0 - np.exp(-(t - safe_m) / tau) + np.exp(-t / tau)) * (en - st) / safe_m
            out = decaying + flat
    return np.where(positive, out, 0.0)


def exponent_matrix(model: KernelModel, s0: S0Policy, params: KernelParams, table: SegmentTable,
                    fixed: np.ndarray, times) -> np.ndarray:
    """Exponents ``E_j(t_k)`` for every time ``t_k`` and subject ``j``, shape ``(K, N)``.

    ``fixed`` is the ``(N, q)`` matrix of fixed covariates.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    n = len(table)
    out = np.zeros((len(times), n))
    if params.q:
        out += (np.asarray(fixed, dtype=float) @ params.gamma)[None, :]
    if params.p == 0:
        return out
    s_zero = table.s == 0
    for mu in range(params.p):
        a, tau = params.a[mu], params.tau[mu]
        if a == 0.0:
            continue
        unit = unit_integrals(model, tau, table, times)
        longitudinal = a * np.einsum("knl,nl->kn", unit, table.values[mu])
        if s_zero.any():
            beta0 = s0_association(s0, a, tau, times)[:, None]
            longitudinal[:, s_zero] = beta0 * table.baseline[mu, s_zero][None, :]
        out += longitudinal
    return out


class PairExponents:
    """Exponents ``E_n(t_k)`` on a fixed list of ``(k, n)`` pairs.

    Clipped segment geometry does not depend on the parameters, so it is
    computed once and each evaluation reduces to a few exponentials and a
    ``bincount``. Used inside the likelihood, where only risk-set pairs
    matter.
    """

    def __init__(self, model: KernelModel, s0: S0Policy, table: SegmentTable, fixed: np.ndarray,
                 times: np.ndarray, pair_k: np.ndarray, pair_n: np.ndarray):
        self.model = KernelModel(model)
        self.s0 = S0Policy(s0)
        pair_k = np.asarray(pair_k, dtype=int)
        pair_n = np.asarray(pair_n, dtype=int)
        self.n_pairs = len(pair_k)
        self.pair_n = pair_n
        self.fixed = np.asarray(fixed, dtype=float)[pair_n]
        t = np.asarray(times, dtype=float)[pair_k]
        m = np.minimum(table.s[pair_n], t)
        lim = np.minimum(table.obs_limit[pair_n], t)
        st = np.minimum(table.starts[pair_n], lim[:, None])
        en = np.minimum(table.ends[pair_n], lim[:, None])
        live = en > st
        rows, cols = np.nonzero(live)
        self.entry_pair = rows
        self.entry_values = table.values[:, pair_n][:, rows, cols]  # (p, n_entries)
        self.s_zero = m == 0
        self.t = t
        self.m = np.where(self.s_zero, 1.0, m)
        self.positive = np.flatnonzero(~self.s_zero)
        if self.model is KernelModel.A:
            self.lo = st[rows, cols] - m[rows]
            self.hi = en[rows, cols] - m[rows]
        else:
            self.lo = t[rows] - st[rows, cols]
            self.hi = t[rows] - en[rows, cols]
            widths = np.where(live, en - st, 0.0)
            self.weighted_width = np.einsum("pnl,nl->pn", table.values[:, pair_n], widths)
        self.baseline = table.baseline[:, pair_n[self.s_zero]]

    def __call__(self, params: KernelParams) -> np.ndarray:
        out = self.fixed @ params.gamma if params.q else np.zeros(self.n_pairs)
        for mu in range(params.p):
            a = params.a[mu]
            if a == 0.0:
                continue
            tau = max(float(params.tau[mu]), TAU_FLOOR)
            if self.model is KernelModel.A:
                unit = np.exp(self.hi / tau) - np.exp(self.lo / tau)
                per = np.bincount(self.entry_pair, unit * self.entry_values[mu], self.n_pairs)
                per /= -np.expm1(-self.m / tau)
            else:
                unit = np.exp(-self.hi / tau) - np.exp(-self.lo / tau)
                per = np.bincount(self.entry_pair, unit * self.entry_values[mu], self.n_pairs)
                t, m, k = self.t[self.positive], self.m[self.positive], self.positive
                per[k] += (1.0 - np.exp(-(t - m) / tau) + np.exp(-t / tau)) * self.weighted_width[mu, k] / m
            if self.s_zero.any():
                per[self.s_zero] = s0_association(self.s0, 1.0, tau, self.t[self.s_zero]) * self.baseline[mu]
            out = out + a * per
        return out
