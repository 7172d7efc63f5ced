"""Nearest-neighbour step interpolation of covariate observations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class StepTrajectory:
    """Piecewise-constant trajectory switching value half way between observations.

    Segment ``l`` covers ``[change_points[l-1], change_points[l])`` with an
    implicit left edge at 0 and an open right end. Values at a change point
    belong to the later observation.
    """

    change_points: np.ndarray
    segment_values: np.ndarray
    domain_end: float

    @classmethod
    def from_observations(cls, times: Sequence[float], values: Sequence[float]) -> "StepTrajectory":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or len(times) == 0:
            raise ValueError("at least one observation is required")
        if len(values) != len(times):
            raise ValueError("times and values must have the same length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("observation times must be strictly increasing")
        mids = 0.5 * (times[:-1] + times[1:])
        return cls(mids, values.copy(), float(times[-1]))

    def value_at(self, t: float) -> float:
        return float(self.segment_values[np.searchsorted(self.change_points, t, side="right")])

    def segments_up_to(self, limit: float) -> list[tuple[float, float, float]]:
        """Contiguous ``(start, end, value)`` cover of ``[0, limit]``."""
        if limit <= 0:
            return []
        inner = self.change_points[self.change_points < limit]
        edges = np.concatenate(([0.0], inner, [limit]))
        return [(float(a), float(b), float(v))
                for a, b, v in zip(edges[:-1], edges[1:], self.segment_values) if b > a]


def segments_up_to(traj: StepTrajectory, limit: float) -> list[tuple[float, float, float]]:
    return traj.segments_up_to(limit)


@dataclass(frozen=True, eq=False)
class SegmentTable:
    """Padded segment arrays for a group of subjects, for vectorised integrals.

    ``starts``/``ends`` have shape ``(N, L)`` and ``values`` shape ``(p, N, L)``;
    padding segments have zero width. Segments cover ``[0, obs_limit[j]]``,
    while ``s[j]`` is the final observation time that enters the kernel.
    """

    starts: np.ndarray
    ends: np.ndarray
    values: np.ndarray
    s: np.ndarray
    obs_limit: np.ndarray
    baseline: np.ndarray  # (p, N) values at time 0, used by the s = 0 fallback

    @classmethod
    def from_subjects(cls, subjects, obs_limits=None) -> "SegmentTable":
        subjects = list(subjects)
        n = len(subjects)
        p = subjects[0].p if n else 0
        s = np.array([sub.final_obs_time for sub in subjects])
        lim = s.copy() if obs_limits is None else np.asarray(obs_limits, dtype=float)
        if np.any(lim > s) or np.any(lim < 0):
            raise ValueError("observation limits must lie in [0, s_i]")
        width = max((sub.n_obs for sub in subjects), default=1)
        starts = np.zeros((n, width))
        ends = np.zeros((n, width))
        values = np.zeros((p, n, width))
        baseline = np.zeros((p, n))
        for j, sub in enumerate(subjects):
            t = sub.obs_times
            edges = np.concatenate(([0.0], 0.5 * (t[:-1] + t[1:]), [np.inf]))
            edges = np.minimum(edges, lim[j])
            k = len(t)
            starts[j, :k] = edges[:-1]
            ends[j, :k] = edges[1:]
            starts[j, k:] = ends[j, k:] = lim[j]
            values[:, j, :k] = sub.obs_values
            baseline[:, j] = sub.obs_values[:, 0]
        return cls(starts, ends, values, s, lim, baseline)

    def __len__(self):
        return len(self.s)
