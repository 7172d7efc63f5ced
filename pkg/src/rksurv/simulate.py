"""Synthetic datasets for tests and experiment scripts."""

from __future__ import annotations

import numpy as np

from .data import Dataset, Subject


def cox_fixed(n: int, gamma: float = 0.5, censor_rate: float = 0.35, base_rate: float = 1.0,
              seed: int = 0) -> Dataset:
    """Standard Cox data with one N(0,1) fixed covariate and exponential censoring.

    With the defaults roughly 30% of subjects are censored.
    """
    rng = np.random.default_rng(seed)
    zeta = rng.normal(size=n)
    t_event = rng.exponential(1.0 / (base_rate * np.exp(gamma * zeta)))
    t_cens = rng.exponential(1.0 / censor_rate, size=n)
    T = np.minimum(t_event, t_cens)
    events = t_event <= t_cens
    subjects = [Subject(str(i), T[i], events[i], [0.0], np.zeros((0, 1)), [zeta[i]]) for i in range(n)]
    return Dataset(subjects, (), ("zeta",), "years")


def constant_trajectories(n: int, p: int = 1, q: int = 0, seed: int = 0, visit_gap: float = 0.5,
                          coef: float = 0.4) -> Dataset:
    """Covariates that never change, observed on a regular visit schedule."""
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(n):
        z = rng.normal(size=p)
        zeta = rng.normal(size=q)
        T = float(rng.exponential(2.0 / np.exp(coef * z.sum())))
        event = bool(rng.random() < 0.7)
        times = np.arange(0.0, T, visit_gap)
        times = times[:max(1, int(rng.integers(1, len(times) + 1)))]
        subjects.append(Subject(str(i), T, event, times, np.repeat(z[:, None], len(times), axis=1), zeta))
    return Dataset(subjects, tuple(f"z{m}" for m in range(p)), tuple(f"f{v}" for v in range(q)), "years")


def random_walk(n: int, p: int = 1, q: int = 1, seed: int = 0, visit_gap: float = 0.5,
                coef: float = 0.5, censor_mean: float = 8.0) -> Dataset:
    """Noisy drifting covariates; event hazard tracks the latest level of the first covariate."""
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(n):
        zeta = rng.normal(size=q)
        level = rng.normal(size=p)
        drift = rng.normal(scale=0.3, size=p)
        censor = rng.exponential(censor_mean)
        t, T = 0.0, None
        times, values = [], []
        while T is None and t <= censor:
            times.append(t)
            values.append(level + 0.1 * rng.normal(size=p))
            log_rate = np.log(0.3) + coef * level[0] + (0.3 * zeta.sum() if q else 0.0)
            wait = rng.exponential(np.exp(-min(log_rate, 50.0)))
            if wait < visit_gap:
                T = t + wait
            else:
                t += visit_gap
                level = level + drift * visit_gap
        event = T is not None and T <= censor
        T = censor if T is None else min(T, censor)
        keep = np.asarray(times) <= T
        obs_t = np.asarray(times)[keep]
        obs_v = np.asarray(values)[keep].T.reshape(p, len(obs_t))
        subjects.append(Subject(str(i), T, event, obs_t, obs_v, zeta))
    return Dataset(subjects, tuple(f"z{m}" for m in range(p)), tuple(f"f{v}" for v in range(q)), "years")
