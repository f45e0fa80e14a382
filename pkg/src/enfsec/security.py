"""Frequency-security indicators, sensitivities, critical inertia and the index."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import (
    OMEGA_0,
    ClosedFormConstants,
    DisturbanceScenario,
    EffectiveParams,
    _deviation,
    _free_response,
    _step_response,
    phase_constants,
)
from .errors import BracketError, InvalidScenario, KeyMismatch, MonotonicityError

ROCOF_SPACING = 0.1
DEFAULT_R_TH = 0.0167
DEFAULT_OMEGA_TH = 0.99
H_BRACKET = (0.1, 50.0)


@dataclass(frozen=True)
class SecurityThresholds:
    r_th: float = DEFAULT_R_TH
    omega_th: float = DEFAULT_OMEGA_TH

    def __post_init__(self):
        if not self.r_th > 0:
            raise ValueError("r_th must be > 0")
        if not self.omega_th < OMEGA_0:
            raise ValueError("omega_th must be below the nominal frequency")

    def to_dict(self):
        return {"r_th": self.r_th, "omega_th": self.omega_th}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d.get("r_th", DEFAULT_R_TH)), float(d.get("omega_th", DEFAULT_OMEGA_TH)))


@dataclass(frozen=True)
class RocofEstimates:
    r_classic: float
    r_model: float
    r_measured: float


@dataclass(frozen=True)
class SecurityIndicators:
    r_max: float
    r_max_model: float
    r_max_measured: float
    omega_nadir: float
    nadir_time: float
    omega_steady: float
    omega_zenith: float
    zenith_time: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class CriticalInertia:
    h_rocof: float
    h_dev: float
    h_cri: float
    dev_active: bool = True

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["h_rocof"]), float(d["h_dev"]), float(d["h_cri"]), bool(d.get("dev_active", True)))


@dataclass(frozen=True)
class SensitivityVector:
    s_h: float
    s_d: float
    s_k: float
    s_tau: float

    def as_array(self):
        return np.array([self.s_h, self.s_d, self.s_k, self.s_tau])


@dataclass(frozen=True)
class SecurityIndex:
    per_node: dict
    system: float
    weak_nodes: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return verdict_for(self.system)

    def to_dict(self):
        return {
            "kappa": self.system,
            "per_node": dict(self.per_node),
            "weak_nodes": list(self.weak_nodes),
            "verdict": self.verdict,
        }


KAPPA_ZERO_TOL = 1e-9


def verdict_for(kappa: float) -> str:
    if abs(kappa) <= KAPPA_ZERO_TOL:
        return "critical"
    return "safe" if kappa > 0 else "unsafe"


# -- RoCoF -------------------------------------------------------------------


def max_rocof(p: EffectiveParams, scn: DisturbanceScenario, spacing: float = ROCOF_SPACING) -> RocofEstimates:
    """Maximum RoCoF three ways.

    ``r_classic`` is ``dP/H`` (the customary closed form), ``r_model`` is the
    initial slope ``dP/(2H)`` of the model, ``r_measured`` a two-point
    difference of the closed-form trajectory over ``spacing`` seconds.
    """
    dp = scn.fault_power
    x, _ = _deviation(p, scn, np.array([scn.t_f, scn.t_f + spacing]))
    return RocofEstimates(dp / p.h_bar, dp / (2.0 * p.h_bar), float(x[1] - x[0]) / spacing)


# -- extremum times ----------------------------------------------------------


def _arctan_candidates(base: float, wd: float, s_min: float, s_max: float, strict: bool, limit: int = 64):
    """Times ``(base + k*pi)/wd`` in the window, smallest k first."""
    k = math.ceil((s_min * wd - base) / math.pi)
    out = []
    while len(out) < limit:
        s = (base + k * math.pi) / wd
        if s > s_max:
            break
        if s > s_min or (not strict and s >= s_min):
            out.append(s)
        k += 1
    return out


def _atan_ratio(num: float, den: float) -> float:
    if den == 0.0:
        return math.copysign(math.pi / 2, num) if num != 0 else 0.0
    return math.atan(num / den)


def fault_on_stationary(c: ClosedFormConstants, window: float, limit: int = 64) -> list[float]:
    """Offsets after t_f where the fault-on slope vanishes (all integers k)."""
    lam, wd, a1 = c.lambda_, c.omega_d, c.a1
    base = _atan_ratio(lam + a1 * wd, lam * a1 - wd)
    return _arctan_candidates(base, wd, 0.0, window, strict=False, limit=limit)


def _fault_on_value(c: ClosedFormConstants, s):
    y, _ = _step_response(c.lambda_, c.omega_d, c.a1, np.asarray(s, dtype=float))
    return c.k2 * y


def nadir_time_fault_on(c: ClosedFormConstants, scn: DisturbanceScenario) -> float:
    """Time of the lowest ENF on [t_f, t_c].

    Stationary points come from the arctan family; the endpoints cover the
    case where none falls in the window.  Taking the lowest of them also
    discards stationary points that are maxima.
    """
    if scn.is_temporary:
        window = scn.t_c - scn.t_f
        cands = [0.0, window] + fault_on_stationary(c, window)
    else:
        cands = [0.0] + fault_on_stationary(c, math.inf, limit=2)
    vals = _fault_on_value(c, cands)
    return scn.t_f + cands[int(np.argmin(vals))]


def _recovery_derivative(c: ClosedFormConstants, s):
    lam, wd = c.lambda_, c.omega_d
    pp = wd * c.a_sin - lam * c.a_cos
    qq = wd * c.a_cos + lam * c.a_sin
    e = np.exp(-lam * s)
    cs, sn = np.cos(wd * s), np.sin(wd * s)
    f = c.c1 + e * (pp * cs - qq * sn)
    df = e * ((-lam * pp - wd * qq) * cs + (lam * qq - wd * pp) * sn)
    return f, df


def _recovery_value(c: ClosedFormConstants, s):
    s = np.asarray(s, dtype=float)
    e = np.exp(-c.lambda_ * s)
    return c.c1 * s + c.c2 + e * (c.a_cos * np.cos(c.omega_d * s) + c.a_sin * np.sin(c.omega_d * s))


def taylor_seed(c: ClosedFormConstants) -> float | None:
    """Quadratic (second-order Taylor) estimate of the first recovery extremum offset."""
    lam, wd = c.lambda_, c.omega_d
    pp = wd * c.a_sin - lam * c.a_cos
    qq = wd * c.a_cos + lam * c.a_sin
    r = math.hypot(pp, qq)
    if r == 0.0:
        return None
    alpha = math.atan2(qq, pp)
    gamma = -c.c1 / r
    ca, sa = math.cos(alpha), math.sin(alpha)
    e0 = ca - gamma
    e1 = lam * ca + wd * sa
    e2 = 0.5 * ((lam * lam - wd * wd) * ca - 2.0 * lam * wd * sa)
    if abs(e2) < 1e-12 * max(abs(e1), 1.0):
        return e0 / e1 if e1 != 0.0 else None
    disc = e1 * e1 - 4.0 * e2 * e0
    if disc < 0.0:
        return None
    return (e1 - math.sqrt(disc)) / (2.0 * e2)


def _newton(c: ClosedFormConstants, s: float, window: float, iters: int = 10) -> float:
    for _ in range(iters):
        f, df = _recovery_derivative(c, s)
        if df == 0.0:
            break
        step = f / df
        s -= step
        if not -window <= s <= 2.0 * window:
            return math.nan
        if abs(step) < 1e-15:
            break
    return float(s)


def recovery_stationary(c: ClosedFormConstants, window: float) -> list[float]:
    """Offsets after t_c in [0, window] where the recovery slope vanishes.

    The Taylor seed refined by Newton on the exact slope gives the first
    root; a bracketed scan of the exact slope picks up any others.
    """
    roots = []
    seed = taylor_seed(c)
    if seed is not None and math.isfinite(seed):
        s = _newton(c, seed, window)
        if 0.0 <= s <= window and abs(_recovery_derivative(c, s)[0]) <= 1e-9:
            roots.append(s)
    n = max(64, int(math.ceil(window * c.omega_d / (math.pi / 8))))
    grid = np.linspace(0.0, window, n + 1)
    f, _ = _recovery_derivative(c, grid)
    for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]:
        r = brentq(lambda s: _recovery_derivative(c, s)[0], grid[i], grid[i + 1], xtol=1e-14)
        if all(abs(r - q) > 1e-9 for q in roots):
            roots.append(r)
    return sorted(roots)


def nadir_time_recovery(c: ClosedFormConstants, scn: DisturbanceScenario) -> float:
    window = scn.t_r - scn.t_c
    cands = [0.0, window] + recovery_stationary(c, window)
    vals = _recovery_value(c, cands)
    return scn.t_c + cands[int(np.argmin(vals))]


def post_fault_stationary(c: ClosedFormConstants) -> list[float]:
    """Offsets after t_r of the first two extrema (k* and k*+1)."""
    lam, wd = c.lambda_, c.omega_d
    num = wd * c.dx_r
    den = lam * c.dx_r + (wd * wd + lam * lam) * c.x_r
    if num == 0.0 and den == 0.0:
        return []
    base = _atan_ratio(num, den)
    return _arctan_candidates(base, wd, 0.0, math.inf, strict=True, limit=2)


def nadir_time_post_fault(c: ClosedFormConstants, scn: DisturbanceScenario) -> float:
    cands = [0.0] + post_fault_stationary(c)
    vals, _ = _free_response(c.lambda_, c.omega_d, c.x_r, c.dx_r, np.asarray(cands))
    return scn.t_r + cands[int(np.argmin(vals))]


def _extremum_candidates(p, scn, cc):
    """(time, deviation) pairs covering every branch extremum and endpoint."""
    times = [scn.t_f]
    if scn.is_temporary:
        times += [scn.t_f + s for s in fault_on_stationary(cc, scn.t_c - scn.t_f)] + [scn.t_c]
        times += [scn.t_c + s for s in recovery_stationary(cc, scn.t_r - scn.t_c)] + [scn.t_r]
        times += [scn.t_r + s for s in post_fault_stationary(cc)]
    else:
        times += [scn.t_f + s for s in fault_on_stationary(cc, math.inf, limit=2)]
    t = np.array(times)
    x, _ = _deviation(p, scn, t, cc)
    return t, x


def nadir_deviation(p: EffectiveParams, scn: DisturbanceScenario, cc=None) -> tuple[float, float]:
    """Lowest deviation and its time: the smallest of the per-phase minima and zero."""
    cc = cc or phase_constants(p, scn)
    if scn.is_temporary:
        times = [
            nadir_time_fault_on(cc, scn),
            nadir_time_recovery(cc, scn),
            nadir_time_post_fault(cc, scn),
        ]
    else:
        times = [nadir_time_fault_on(cc, scn)]
    x, _ = _deviation(p, scn, np.array(times), cc)
    best = int(np.argmin(x))
    if x[best] >= 0.0:
        return 0.0, scn.t_f
    return float(x[best]), float(times[best])


def frequency_nadir(p: EffectiveParams, scn: DisturbanceScenario, cc=None) -> tuple[float, float]:
    x, t = nadir_deviation(p, scn, cc)
    return OMEGA_0 + x, t


def security_indicators(p: EffectiveParams, scn: DisturbanceScenario) -> SecurityIndicators:
    cc = phase_constants(p, scn)
    roc = max_rocof(p, scn)
    x_nadir, t_nadir = nadir_deviation(p, scn, cc)
    t, x = _extremum_candidates(p, scn, cc)
    top = int(np.argmax(x))
    x_top, t_top = (float(x[top]), float(t[top])) if x[top] > 0 else (0.0, scn.t_f)
    steady = OMEGA_0 if scn.is_temporary else OMEGA_0 + cc.k2
    return SecurityIndicators(
        r_max=roc.r_classic,
        r_max_model=roc.r_model,
        r_max_measured=roc.r_measured,
        omega_nadir=OMEGA_0 + x_nadir,
        nadir_time=t_nadir,
        omega_steady=steady,
        omega_zenith=OMEGA_0 + x_top,
        zenith_time=t_top,
    )


# -- sensitivities -----------------------------------------------------------


def sensitivity_rocof(p: EffectiveParams, scn: DisturbanceScenario) -> SensitivityVector:
    """Unit-less RoCoF sensitivities of ``R = dP/H``.

    ``dR/dH * H/R = -dP/(H R) = -1``; R does not depend on D, K or tau.
    """
    return SensitivityVector(-1.0, 0.0, 0.0, 0.0)


def sensitivity_nadir(p: EffectiveParams, scn: DisturbanceScenario, rel_step: float = 1e-4) -> SensitivityVector:
    """Unit-less nadir sensitivities ``d(nadir)/dx * x / nadir`` by central differences."""
    if not 1e-6 <= rel_step <= 1e-2:
        raise ValueError("rel_step must lie in [1e-6, 1e-2]")
    x0 = p.as_array()
    nadir = OMEGA_0 + nadir_deviation(p, scn)[0]
    out = []
    for i in range(4):
        h = rel_step * x0[i]
        up, dn = x0.copy(), x0.copy()
        up[i] += h
        dn[i] -= h
        f_up = nadir_deviation(EffectiveParams.from_array(up), scn)[0]
        f_dn = nadir_deviation(EffectiveParams.from_array(dn), scn)[0]
        out.append((f_up - f_dn) / (2.0 * h) * x0[i] / nadir)
    return SensitivityVector(*out)


# -- critical inertia --------------------------------------------------------


def underdamped_h_range(p: EffectiveParams) -> tuple[float, float]:
    """Open interval of inertia values keeping (D, K, tau) underdamped."""
    d, k, tau = p.d_bar, p.k_bar, p.tau_bar
    mid = 2.0 * k + d
    half = 2.0 * math.sqrt(k * (k + d))
    return tau * (mid - half) / 2.0, tau * (mid + half) / 2.0


def _h_bracket(p: EffectiveParams, bracket):
    lo_u, hi_u = underdamped_h_range(p)
    lo = max(bracket[0], lo_u * (1.0 + 1e-9) + 1e-12)
    hi = min(bracket[1], hi_u * (1.0 - 1e-9))
    if not lo < hi:
        raise BracketError(f"no underdamped inertia values inside {bracket} for {p}")
    return lo, hi


def critical_inertia(
    p: EffectiveParams,
    scn: DisturbanceScenario,
    th: SecurityThresholds,
    rocof: str = "classic",
    bracket: tuple[float, float] = H_BRACKET,
    h_tol: float = 1e-4,
    scan_points: int = 24,
) -> CriticalInertia:
    """Critical nodal inertia from the RoCoF and nadir constraints.

    ``rocof="classic"`` uses ``|dP|/R_th``; ``rocof="model"`` uses the
    model-consistent ``|dP|/(2 R_th)``.  The nadir constraint is inverted by
    bisection on ``H -> nadir(H) - omega_th`` after checking monotonicity on a
    coarse scan; the bracket is clipped to the underdamped inertia range.
    """
    if not scn.is_temporary:
        raise InvalidScenario("critical inertia is defined for temporary disturbances only")
    dp = abs(scn.fault_power)
    if rocof == "classic":
        h_rocof = dp / th.r_th
    elif rocof == "model":
        h_rocof = dp / (2.0 * th.r_th)
    else:
        raise ValueError(f"unknown rocof variant {rocof!r}")

    lo, hi = _h_bracket(p, bracket)

    def margin(h):
        return OMEGA_0 + nadir_deviation(p.with_inertia(h), scn)[0] - th.omega_th

    hs = np.geomspace(lo, hi, scan_points)
    ms = np.array([margin(h) for h in hs])
    ok = ms >= 0.0
    if ok[0]:
        j = 0
    elif ok.any():
        j = int(np.argmax(ok))
    else:
        raise BracketError(f"nadir still below omega_th={th.omega_th} at H={hi:.4g} s")
    # the root is unique when the margin crosses zero once and rises from there on;
    # wiggles where the margin stays negative do not move it
    start = max(j - 1, 0)
    drops = np.diff(ms[start:])
    if not ok[j:].all() or (j > 0 and np.any(drops < -1e-12)):
        i = start + int(np.argmin(drops))
        raise MonotonicityError(
            f"nadir decreases with inertia between H={hs[i]:.4g} and H={hs[i + 1]:.4g} s; "
            "the nadir constraint cannot be inverted"
        )
    if j == 0:
        return CriticalInertia(h_rocof, lo, max(h_rocof, lo), dev_active=False)

    a, b = hs[j - 1], hs[j]
    m_b = ms[j]
    for _ in range(200):
        if b - a <= h_tol and abs(m_b) <= 1e-7:
            break
        if b - a < 1e-13:
            break
        mid = 0.5 * (a + b)
        m_mid = margin(mid)
        if m_mid >= 0.0:
            b, m_b = mid, m_mid
        else:
            a = mid
    return CriticalInertia(h_rocof, b, max(h_rocof, b))


# -- index -------------------------------------------------------------------


def security_index(h_actual: dict, h_cri: dict) -> SecurityIndex:
    if set(h_actual) != set(h_cri):
        raise KeyMismatch("inertia maps must cover the same nodes")
    if not h_actual:
        raise KeyMismatch("no nodes given")
    per_node = {}
    for node, h in h_actual.items():
        hc = h_cri[node]
        if not hc > 0:
            raise ValueError(f"critical inertia of {node!r} must be > 0")
        per_node[node] = (h - hc) / hc * 100.0
    system = min(per_node.values())
    weak = sorted((n for n, k in per_node.items() if k < -KAPPA_ZERO_TOL), key=lambda n: per_node[n])
    return SecurityIndex(per_node, system, weak)
