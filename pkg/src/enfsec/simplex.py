"""Nelder-Mead downhill simplex."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool
    trace: list = field(default_factory=list)
    spread: float = np.inf


def _rel_size(simplex, scale):
    return float(np.max(np.abs(simplex[1:] - simplex[0]) / scale))


def nelder_mead(
    func,
    x0,
    init_scale: float = 0.1,
    max_iter: int = 500,
    ftol: float = 1e-10,
    xtol: float = np.inf,
    alpha: float = 1.0,
    gamma: float = 2.0,
    rho: float = 0.5,
    sigma: float = 0.5,
) -> SimplexResult:
    """Minimize ``func`` from ``x0``.

    The initial simplex perturbs each coordinate of ``x0`` by ``init_scale``
    (relative).  The search has converged once the spread of vertex values is
    below ``ftol`` and either the best value is itself below ``ftol`` or the
    simplex has shrunk to ``xtol`` relative to the magnitudes of ``x0``; it gives up after
    ``max_iter`` iterations.  ``trace`` holds the best value
    after every iteration and is non-increasing; ``spread`` is the final
    difference between the worst and best vertex values.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    scale = np.where(x0 != 0, np.abs(x0), 1.0)
    simplex = np.empty((n + 1, n))
    simplex[0] = x0
    for i in range(n):
        v = x0.copy()
        v[i] = v[i] * (1.0 + init_scale) if v[i] != 0 else init_scale
        simplex[i + 1] = v
    fvals = np.array([func(v) for v in simplex])
    nfev = n + 1
    trace = []
    converged = False
    nit = 0

    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        flat = fvals[-1] - fvals[0] < ftol
        if flat and (fvals[0] < ftol or _rel_size(simplex, scale) <= xtol):
            converged = True
            break
        if nit >= max_iter:
            break
        nit += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = func(xr)
        nfev += 1
        if fvals[0] <= fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = func(xe)
            nfev += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + rho * (xr - centroid)
            else:
                xc = centroid + rho * (worst - centroid)
            fc = func(xc)
            nfev += 1
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                best = simplex[0]
                simplex[1:] = best + sigma * (simplex[1:] - best)
                fvals[1:] = [func(v) for v in simplex[1:]]
                nfev += n
        trace.append(float(fvals.min()))

    order = np.argsort(fvals, kind="stable")
    simplex, fvals = simplex[order], fvals[order]
    spread = float(fvals[-1] - fvals[0])
    return SimplexResult(simplex[0].copy(), float(fvals[0]), nit, nfev, converged, trace, spread)
