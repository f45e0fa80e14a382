"""Data-based ENF fitting: filtering, the five-term loss, simplex search, interpolation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import OMEGA_0, DisturbanceScenario, EffectiveParams, Trajectory, _deviation, phase_constants
from .errors import (
    EmptyTrajectory,
    NoFeasibleStart,
    NoFittedNeighbor,
    NonPositiveParameter,
    WindowMismatch,
    ZeroDeviation,
)
from .simplex import nelder_mead

INFEASIBLE_LOSS = 1e6


@dataclass(frozen=True)
class LossWeights:
    """Weights of the trajectory, RoCoF, nadir-time, nadir and steady-state terms.

    ``t1`` (end of the fit window) and ``t_inf`` (steady-state probe) default
    to the last observed sample.
    """

    k1: float = 1.0
    k2: float = 10.0
    k3: float = 1e-6
    k4: float = 100.0
    k5: float = 10.0
    t_rocof_offset: float = 0.1
    t1: float | None = None
    t_inf: float | None = None

    def __post_init__(self):
        ks = (self.k1, self.k2, self.k3, self.k4, self.k5)
        if min(ks) < 0 or max(ks) <= 0:
            raise ValueError("weights must be >= 0 with at least one > 0")
        if not 0 < self.t_rocof_offset <= 0.2:
            raise ValueError("t_rocof_offset must lie in (0, 0.2] s")

    def windows(self, observed: Trajectory, scn: DisturbanceScenario) -> tuple[float, float, float]:
        t_last = float(observed.t[-1])
        t1 = t_last if self.t1 is None else self.t1
        t_inf = t_last if self.t_inf is None else self.t_inf
        t_roc = scn.t_f + self.t_rocof_offset
        if not (observed.t[0] <= scn.t_f < t1 <= t_inf <= t_last):
            raise WindowMismatch(
                f"observed [{observed.t[0]}, {t_last}] does not cover t_f={scn.t_f}, t1={t1}, t_inf={t_inf}"
            )
        return t1, t_inf, t_roc

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict | None) -> "LossWeights":
        return cls(**(d or {}))


@dataclass
class FitResult:
    params: EffectiveParams
    loss: float
    iterations: int
    error_percent: float
    converged: bool
    loss_trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "loss": self.loss,
            "iterations": self.iterations,
            "error_percent": self.error_percent,
            "converged": self.converged,
            "loss_trace": list(self.loss_trace),
        }


def filter_trajectory(traj: Trajectory, window: float) -> Trajectory:
    """Centered moving average over ``window`` seconds; truncated at the ends."""
    if len(traj) == 0:
        raise EmptyTrajectory("cannot filter an empty trajectory")
    if len(traj) == 1:
        return traj.with_omega(traj.omega.copy())
    spacing = traj.spacing
    if window < spacing * (1 - 1e-9):
        raise ValueError("window must be at least the sample spacing")
    half = int(round(window / spacing)) // 2
    if half == 0:
        return traj.with_omega(traj.omega.copy())
    n = len(traj)
    csum = np.concatenate(([0.0], np.cumsum(traj.omega)))
    idx = np.arange(n)
    lo = np.clip(idx - half, 0, n)
    hi = np.clip(idx + half + 1, 0, n)
    return traj.with_omega((csum[hi] - csum[lo]) / (hi - lo))


def sampled_minimum(t, w) -> tuple[float, float]:
    """Sampled argmin and minimum, with the argmin refined by a parabola through its neighbours.

    The refinement keeps the argmin continuous in the curve shape instead of
    jumping one sample at a time; the minimum value stays the sampled one.
    """
    i = int(np.argmin(w))
    if 0 < i < len(w) - 1:
        y0, y1, y2 = w[i - 1], w[i], w[i + 1]
        den = y0 - 2.0 * y1 + y2
        if den > 0:
            h = 0.5 * (y0 - y2) / den
            step = (t[i + 1] - t[i - 1]) / 2.0
            return float(t[i] + h * step), float(y1)
    return float(t[i]), float(w[i])


class _LossData:
    """Observed-side quantities of the loss, computed once per fit."""

    def __init__(self, observed: Trajectory, scn: DisturbanceScenario, w: LossWeights):
        self.w = w
        self.scn = scn
        self.t1, self.t_inf, self.t_roc = w.windows(observed, scn)
        t, omega = observed.t, observed.omega
        keep = t >= scn.t_f
        self.t = t[keep]
        self.obs = omega[keep]
        self.fit_mask = self.t <= self.t1
        tw, ow = self.t[self.fit_mask], self.obs[self.fit_mask]
        self.obs_tmin, self.obs_min = sampled_minimum(tw, ow)
        self.obs_roc = float(np.interp(self.t_roc, t, omega))
        self.obs_inf = float(np.interp(self.t_inf, t, omega))
        self.probe = np.array([self.t_roc, self.t_inf])

    def __call__(self, p: EffectiveParams) -> float:
        cc = phase_constants(p, self.scn)
        x, _ = _deviation(p, self.scn, self.t[self.fit_mask], cc)
        enf = OMEGA_0 + x
        tw = self.t[self.fit_mask]
        err2 = (enf - self.obs[self.fit_mask]) ** 2
        term1 = np.trapezoid(err2, tw) / (self.t1 - self.scn.t_f)
        xp, _ = _deviation(p, self.scn, self.probe, cc)
        term2 = (OMEGA_0 + xp[0] - self.obs_roc) ** 2
        t_min, w_min = sampled_minimum(tw, enf)
        term3 = (t_min - self.obs_tmin) ** 2
        term4 = (w_min - self.obs_min) ** 2
        term5 = (OMEGA_0 + xp[1] - self.obs_inf) ** 2
        w = self.w
        return float(w.k1 * term1 + w.k2 * term2 + w.k3 * term3 + w.k4 * term4 + w.k5 * term5)


def loss(candidate: EffectiveParams, observed: Trajectory, scn: DisturbanceScenario, w: LossWeights) -> float:
    """Weighted sum of trajectory, RoCoF-probe, nadir-time, nadir and steady-state errors."""
    return _LossData(observed, scn, w)(candidate)


def _feasible(x) -> EffectiveParams | None:
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        return None
    try:
        p = EffectiveParams.from_array(x)
    except NonPositiveParameter:
        return None
    return p if p.underdamped else None


def fit_node(
    observed: Trajectory,
    scn: DisturbanceScenario,
    x0: EffectiveParams,
    w: LossWeights | None = None,
    max_iter: int = 500,
    ftol: float = 1e-10,
    xtol: float = 1e-4,
) -> FitResult:
    """Fit (H, D, K, tau) to an observed trajectory with Nelder-Mead.

    Infeasible vertices (non-positive or not underdamped) score
    ``INFEASIBLE_LOSS``.  After convergence the simplex is rebuilt around the
    best point and the search restarted while that lowers the loss by at
    least ``ftol``; ``max_iter`` bounds the iterations of all restarts
    together.  ``converged`` reports whether the loss spread over the
    simplex fell below ``ftol``.  The simplex size test only decides when to
    stop refining: on a valley that is flat in one parameter the spread is
    tiny long before the simplex shrinks.
    """
    w = w or LossWeights()
    if not x0.underdamped:
        raise NoFeasibleStart(f"initial parameters {x0} are not underdamped")
    data = _LossData(observed, scn, w)
    # tolerances act on the loss divided by the nadir depth in pu
    scale = max(abs(data.obs_min - OMEGA_0), 1e-6)

    def objective(x):
        p = _feasible(x)
        return INFEASIBLE_LOSS if p is None else data(p) / scale

    best = None
    converged = False
    used = 0
    trace = []
    x = x0.as_array()
    while used < max_iter:
        res = nelder_mead(objective, x, init_scale=0.1, max_iter=max_iter - used, ftol=ftol, xtol=xtol)
        used += res.nit
        if best is not None and res.fun >= best.fun:
            break
        # a restart that gains less than ftol only drifts along a flat valley
        gained = best is None or best.fun - res.fun >= ftol
        trace += [v * scale for v in res.trace]
        best, x = res, res.x
        converged = converged or res.converged or res.spread < ftol
        if not res.converged or res.fun < ftol or not gained:
            break
    if best is None:
        best = res
    params = EffectiveParams.from_array(best.x)
    return FitResult(
        params=params,
        loss=best.fun * scale,
        iterations=used,
        error_percent=fit_error_percent(params, observed, scn, data.t1),
        converged=converged,
        loss_trace=trace,
    )


def fit_error_percent(
    fitted: EffectiveParams, observed: Trajectory, scn: DisturbanceScenario, t1: float | None = None
) -> float:
    """RMS misfit over [t_f, t1] as a percentage of the observed nadir depth."""
    t1 = float(observed.t[-1]) if t1 is None else t1
    depth = abs(float(observed.omega.min()) - OMEGA_0)
    if depth == 0.0:
        raise ZeroDeviation("observed trajectory never leaves the nominal frequency")
    mask = (observed.t >= scn.t_f) & (observed.t <= t1)
    x, _ = _deviation(fitted, scn, observed.t[mask])
    rms = float(np.sqrt(np.mean((OMEGA_0 + x - observed.omega[mask]) ** 2)))
    return 100.0 * rms / depth


def idw_average(values, distances):
    """Inverse-distance weighted mean of the rows of ``values``.

    Identical rows come back unchanged.
    """
    values = np.asarray(values, dtype=float)
    inv = 1.0 / np.asarray(distances, dtype=float)
    rows = values.reshape(len(inv), -1)
    if np.all(rows == rows[0]):
        return rows[0].copy()
    mean = (inv[:, None] * rows).sum(axis=0) / inv.sum()
    # rounding must not carry the mean outside the neighbours' range
    return np.clip(mean, rows.min(axis=0), rows.max(axis=0))


def interpolate_params(target: str, topo, fitted: dict) -> EffectiveParams:
    """Parameters of an unmeasured node from its fitted neighbours, weighted by 1/line length."""
    nbrs = [(n, l) for n, l in topo.neighbors(target) if n in fitted]
    if not nbrs:
        raise NoFittedNeighbor(f"node {target!r} has no fitted neighbour")
    vals = np.array([fitted[n].as_array() for n, _ in nbrs])
    return EffectiveParams.from_array(idw_average(vals, [l for _, l in nbrs]))
