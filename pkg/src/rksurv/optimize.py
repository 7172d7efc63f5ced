"""Derivative-free minimisation: Powell's direction-set method with Brent line searches."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_GOLD = 1.618033988749895
_CGOLD = 0.3819660112501051
_TINY = 1e-20
_GLIMIT = 100.0


class NonFiniteObjective(FloatingPointError):
    def __init__(self, x, value):
        super().__init__(f"objective returned {value} at x={np.array2string(np.asarray(x), precision=6)}")
        self.x = np.asarray(x)
        self.value = value


@dataclass(frozen=True)
class OptimizerConfig:
    x_tol: float = 1e-8
    f_tol: float = 1e-9
    max_iters: int | None = None  # sweeps; defaults to 200 * d
    max_line_evals: int = 200
    line_tol: float = 1e-6  # fractional precision of each Brent line search

    def __post_init__(self):
        if not (self.x_tol > 0 and self.f_tol > 0 and self.line_tol > 0 and self.max_line_evals > 0):
            raise ValueError("optimizer tolerances and budgets must be positive")
        if self.max_iters is not None and self.max_iters <= 0:
            raise ValueError("max_iters must be positive")


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    converged: bool
    n_evals: int
    n_sweeps: int
    history: list[float] = field(default_factory=list)


class _Counted:
    def __init__(self, fn: Callable[[np.ndarray], float]):
        self.fn = fn
        self.n = 0

    def __call__(self, x) -> float:
        self.n += 1
        value = float(self.fn(x))
        if not math.isfinite(value):
            raise NonFiniteObjective(x, value)
        return value


def bracket(f: Callable[[float], float], a: float = 0.0, b: float = 1.0, fa: float | None = None,
            max_evals: int = 100):
    """Expand ``(a, b)`` downhill until ``f(b) < f(a)`` and ``f(b) < f(c)``.

    Returns ``(a, b, c, fa, fb, fc)``; may return an unbracketed triple if the
    evaluation budget runs out.
    """
    fa = f(a) if fa is None else fa
    fb = f(b)
    evals = 1
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa
    c = b + _GOLD * (b - a)
    fc = f(c)
    evals += 1
    while fb > fc and evals < max_evals:
        r = (b - a) * (fb - fc)
        q = (b - c) * (fb - fa)
        denom = 2.0 * math.copysign(max(abs(q - r), _TINY), q - r)
        u = b - ((b - c) * q - (b - a) * r) / denom
        ulim = b + _GLIMIT * (c - b)
        if (b - u) * (u - c) > 0.0:
            fu = f(u)
            evals += 1
            if fu < fc:
                return b, u, c, fb, fu, fc
            if fu > fb:
                return a, b, u, fa, fb, fu
            u = c + _GOLD * (c - b)
            fu = f(u)
            evals += 1
        elif (c - u) * (u - ulim) > 0.0:
            fu = f(u)
            evals += 1
            if fu < fc:
                b, c, u = c, u, u + _GOLD * (u - c)
                fb, fc, fu = fc, fu, f(u)
                evals += 1
        elif (u - ulim) * (ulim - c) >= 0.0:
            u = ulim
            fu = f(u)
            evals += 1
        else:
            u = c + _GOLD * (c - b)
            fu = f(u)
            evals += 1
        a, b, c = b, c, u
        fa, fb, fc = fb, fc, fu
    return a, b, c, fa, fb, fc


def brent(f: Callable[[float], float], a: float, b: float, c: float, fb: float,
          tol: float = 1e-8, max_evals: int = 200) -> tuple[float, float]:
    """Brent's parabolic/golden-section minimiser on the bracket ``a, b, c``."""
    lo, hi = min(a, c), max(a, c)
    x = w = v = b
    fx = fw = fv = fb
    d = e = 0.0
    for _ in range(max_evals):
        xm = 0.5 * (lo + hi)
        tol1 = tol * abs(x) + 1e-12
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (hi - lo):
            break
        parabolic = False
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev, e = e, d
            if abs(p) < abs(0.5 * q * e_prev) and q * (lo - x) < p < q * (hi - x):
                d = p / q
                u = x + d
                if u - lo < tol2 or hi - u < tol2:
                    d = math.copysign(tol1, xm - x)
                parabolic = True
        if not parabolic:
            e = (lo - x) if x >= xm else (hi - x)
            d = _CGOLD * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = f(u)
        if fu <= fx:
            if u >= x:
                lo = x
            else:
                hi = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                lo = u
            else:
                hi = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


def line_minimize(f, x: np.ndarray, direction: np.ndarray, fx: float, cfg: OptimizerConfig):
    """Minimise ``f`` along ``x + alpha * direction``; returns ``(x_new, f_new, step)``."""
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        return x, fx, np.zeros_like(x)
    unit = direction / norm

    def along(alpha: float) -> float:
        return f(x + alpha * unit)

    step0 = max(norm, 1e-3)
    a, b, c, fa, fb, fc = bracket(along, 0.0, step0, fa=fx, max_evals=cfg.max_line_evals // 2)
    if not (fb <= fa and fb <= fc):
        best = min((fa, a), (fb, b), (fc, c))
        alpha, f_new = best[1], best[0]
    else:
        alpha, f_new = brent(along, a, b, c, fb, tol=cfg.line_tol, max_evals=cfg.max_line_evals)
    if not f_new < fx:
        return x, fx, np.zeros_like(x)
    step = alpha * unit
    return x + step, f_new, step


def minimize(objective: Callable[[np.ndarray], float], x0, cfg: OptimizerConfig | None = None) -> OptimizeResult:
    """Powell's conjugate-direction method.

    Each sweep line-minimises along every direction in turn, then along the
    net displacement of the sweep, which replaces the oldest direction. The
    direction set is reset to the coordinate axes after every ``d + 1``
    sweeps, so the conjugate set built over ``d`` sweeps is used once before
    being discarded.
    Converges when a sweep lowers ``f`` by a fractional amount below
    ``f_tol`` or moves ``x`` by less than ``x_tol``.
    """
    cfg = cfg or OptimizerConfig()
    x = np.array(x0, dtype=float).ravel()
    d = len(x)
    if d < 1:
        raise ValueError("need at least one parameter")
    f = _Counted(objective)
    fx = f(x)
    max_sweeps = cfg.max_iters or 200 * d
    directions = np.eye(d)
    history = [fx]
    converged = False
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        x_start, f_start = x.copy(), fx
        for i in range(d):
            x, fx, _ = line_minimize(f, x, directions[i], fx, cfg)
        net = x - x_start
        if np.linalg.norm(net) > 0:
            x, fx, _ = line_minimize(f, x, net, fx, cfg)
            directions = np.vstack([directions[1:], net / np.linalg.norm(net)])
        history.append(fx)
        moved = float(np.max(np.abs(x - x_start)))
        if (2.0 * (f_start - fx) <= cfg.f_tol * (abs(f_start) + abs(fx)) + 1e-20
                or moved <= cfg.x_tol * (1.0 + float(np.max(np.abs(x))))):
            converged = True
            break
        if sweeps % (d + 1) == 0:
            directions = np.eye(d)
    return OptimizeResult(x, fx, converged, f.n, sweeps, history)
