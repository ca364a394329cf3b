"""Derivative-free Nelder-Mead maximizer.

Infeasible points score ``-inf`` and are pushed to the back of the simplex,
so constraints only need a predicate. After the simplex collapses it is
rebuilt around the best vertex and the search resumed; a restart that fails
to improve ends the run. This guards against the false convergence plain
Nelder-Mead shows on elongated likelihood ridges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = ["SimplexResult", "simplex_maximize"]


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    n_iter: int
    n_eval: int


def _initial_simplex(x0: np.ndarray, step) -> np.ndarray:
    n = x0.size
    pts = np.tile(x0, (n + 1, 1))
    if step is None:
        step = np.where(x0 != 0, 0.05 * np.abs(x0), 0.00025)
    step = np.broadcast_to(np.asarray(step, dtype=float), (n,))
    for i in range(n):
        pts[i + 1, i] += step[i]
    return pts


def simplex_maximize(
    objective: Callable[[np.ndarray], float],
    start: Sequence[float],
    feasible: Callable[[np.ndarray], bool] | None = None,
    *,
    step=None,
    xtol: float = 1e-8,
    ftol: float = 1e-8,
    max_iter: int = 10_000,
    max_restarts: int = 3,
) -> SimplexResult:
    """Maximize ``objective`` from ``start`` with a Nelder-Mead simplex.

    Args:
        objective: Maps a parameter vector to a real value. Non-finite or
            NaN values are treated as ``-inf``.
        start: Starting vector; the objective must be finite there.
        feasible: Optional predicate; points where it is false score ``-inf``
            without calling ``objective``.
        step: Initial simplex edge per coordinate (scalar or vector).
        xtol: Relative tolerance on the simplex diameter.
        ftol: Relative tolerance on the spread of objective values.
        max_iter: Iteration budget shared across restarts.
        max_restarts: Number of rebuilds around the best vertex.

    Returns:
        SimplexResult with ``converged=False`` if the budget ran out.
    """
    x0 = np.atleast_1d(np.asarray(start, dtype=float)).copy()
    n_eval = 0

    def f(x: np.ndarray) -> float:
        nonlocal n_eval
        if feasible is not None and not feasible(x):
            return -math.inf
        n_eval += 1
        try:
            v = float(objective(x))
        except (ValueError, ZeroDivisionError, OverflowError, FloatingPointError):
            return -math.inf
        return v if math.isfinite(v) else -math.inf

    f0 = f(x0)
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")

    n = x0.size
    n_iter = 0
    best_x, best_f = x0, f0
    converged = False
    for restart in range(max_restarts + 1):
        pts = _initial_simplex(best_x, step)
        vals = np.array([best_f] + [f(p) for p in pts[1:]])
        converged = False
        while n_iter < max_iter:
            order = np.argsort(-vals, kind="stable")
            pts, vals = pts[order], vals[order]
            # all finite once the simplex has settled; spread test is on finite values only
            spread_f = abs(vals[0] - vals[-1]) if math.isfinite(vals[-1]) else math.inf
            diam = np.max(np.abs(pts[1:] - pts[0]))
            if spread_f <= ftol * (1.0 + abs(vals[0])) and diam <= xtol * (1.0 + np.max(np.abs(pts[0]))):
                converged = True
                break
            n_iter += 1
            centroid = pts[:-1].mean(axis=0)
            worst = pts[-1]
            xr = centroid + (centroid - worst)
            fr = f(xr)
            if fr > vals[0]:
                xe = centroid + 2.0 * (centroid - worst)
                fe = f(xe)
                if fe > fr:
                    pts[-1], vals[-1] = xe, fe
                else:
                    pts[-1], vals[-1] = xr, fr
                continue
            if fr > vals[-2]:
                pts[-1], vals[-1] = xr, fr
                continue
            if fr > vals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = f(xc)
                if fc >= fr:
                    pts[-1], vals[-1] = xc, fc
                    continue
            else:
                xc = centroid + 0.5 * (worst - centroid)
                fc = f(xc)
                if fc > vals[-1]:
                    pts[-1], vals[-1] = xc, fc
                    continue
            # shrink toward the best vertex
            for i in range(1, n + 1):
                pts[i] = pts[0] + 0.5 * (pts[i] - pts[0])
                vals[i] = f(pts[i])
        i_best = int(np.argmax(vals))
        improved = vals[i_best] > best_f + ftol * (1.0 + abs(best_f))
        if vals[i_best] >= best_f:
            best_x, best_f = pts[i_best].copy(), float(vals[i_best])
        if not converged or (restart > 0 and not improved):
            break
    return SimplexResult(x=best_x, fun=best_f, converged=converged, n_iter=n_iter, n_eval=n_eval)
