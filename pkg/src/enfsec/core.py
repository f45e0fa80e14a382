"""Effective nodal frequency (ENF) model: parameter types and closed-form trajectories.

All frequencies are per-unit with nominal frequency ``OMEGA_0 = 1.0``.
Internally the solutions work with the deviation ``x = omega - OMEGA_0``.

The model is the two-state system::

    2 H x' = dP(t) - D x - g
    tau g' = K x - g

whose transfer function ``(tau s + 1) / (2 tau H s^2 + (tau D + 2H) s + D + K)``
has poles ``-lam +/- j omega_d`` in the underdamped regime.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InvalidScenario, NonPositiveParameter, NotUnderdamped

OMEGA_0 = 1.0

PERMANENT = "permanent"
TEMPORARY = "temporary"


@dataclass(frozen=True)
class EffectiveParams:
    """Constant effective parameters of one node."""

    h_bar: float
    d_bar: float
    k_bar: float
    tau_bar: float

    def __post_init__(self):
        for name in ("h_bar", "d_bar", "k_bar", "tau_bar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise NonPositiveParameter(f"{name} must be finite and > 0, got {value!r}")

    @property
    def discriminant(self) -> float:
        h, d, k, tau = self.h_bar, self.d_bar, self.k_bar, self.tau_bar
        return 8.0 * tau * h * (d + k) - (tau * d + 2.0 * h) ** 2

    @property
    def underdamped(self) -> bool:
        return self.discriminant > 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.h_bar, self.d_bar, self.k_bar, self.tau_bar], dtype=float)

    @classmethod
    def from_array(cls, x) -> "EffectiveParams":
        h, d, k, tau = (float(v) for v in x)
        return cls(h, d, k, tau)

    def with_inertia(self, h_bar: float) -> "EffectiveParams":
        return replace(self, h_bar=float(h_bar))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EffectiveParams":
        return cls(
            float(data["h_bar"]), float(data["d_bar"]), float(data["k_bar"]), float(data["tau_bar"])
        )


@dataclass(frozen=True)
class DisturbanceScenario:
    """A permanent power step or a four-phase temporary (fault) disturbance.

    Use :meth:`permanent` / :meth:`temporary` rather than the raw constructor.
    ``ramp_amplitude`` is the amplitude of the recovery ramp; it defaults to
    ``p_gfl0``.
    """

    kind: str
    dp: float = 0.0
    t_f: float = 0.0
    t_c: float = 0.0
    r_p: float = 1.0
    p_gfl0: float = 0.0
    p_load0: float = 0.0
    u_f: float = 0.0
    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    ramp_amplitude: float | None = None

    def __post_init__(self):
        if self.kind not in (PERMANENT, TEMPORARY):
            raise InvalidScenario(f"unknown disturbance kind {self.kind!r}")
        if self.t_f < 0:
            raise InvalidScenario("t_f must be >= 0")
        if self.kind == PERMANENT:
            return
        if not self.t_f < self.t_c:
            raise InvalidScenario(f"need t_f < t_c, got t_f={self.t_f}, t_c={self.t_c}")
        if not self.r_p > 0:
            raise InvalidScenario("r_p must be > 0")
        if not 0.0 <= self.u_f < 1.0:
            raise InvalidScenario("u_f must lie in [0, 1)")
        if min(self.a, self.b, self.c) < 0 or abs(self.a + self.b + self.c - 1.0) > 1e-9:
            raise InvalidScenario("load fractions a, b, c must be >= 0 and sum to 1")

    @classmethod
    def permanent(cls, dp: float, t_f: float = 0.0) -> "DisturbanceScenario":
        return cls(kind=PERMANENT, dp=float(dp), t_f=float(t_f))

    @classmethod
    def temporary(
        cls,
        t_f: float,
        t_c: float,
        r_p: float,
        p_gfl0: float,
        p_load0: float,
        u_f: float,
        a: float = 1.0,
        b: float = 0.0,
        c: float = 0.0,
        ramp_amplitude: float | None = None,
    ) -> "DisturbanceScenario":
        return cls(
            kind=TEMPORARY,
            t_f=float(t_f),
            t_c=float(t_c),
            r_p=float(r_p),
            p_gfl0=float(p_gfl0),
            p_load0=float(p_load0),
            u_f=float(u_f),
            a=float(a),
            b=float(b),
            c=float(c),
            ramp_amplitude=None if ramp_amplitude is None else float(ramp_amplitude),
        )

    @property
    def is_temporary(self) -> bool:
        return self.kind == TEMPORARY

    @property
    def t_r(self) -> float:
        if not self.is_temporary:
            return math.inf
        return self.t_c + 1.0 / self.r_p

    @property
    def fault_power(self) -> float:
        """Power imbalance while the fault is on (or the permanent step)."""
        if not self.is_temporary:
            return self.dp
        u = self.u_f
        load_drop = (1.0 - self.a * u * u - self.b * u - self.c) * self.p_load0
        return -self.p_gfl0 + load_drop

    @property
    def ramp_amp(self) -> float:
        return self.p_gfl0 if self.ramp_amplitude is None else self.ramp_amplitude

    def breakpoints(self) -> tuple[float, ...]:
        if self.is_temporary:
            return (self.t_f, self.t_c, self.t_r)
        return (self.t_f,)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.kind == PERMANENT:
            return {"kind": PERMANENT, "dp": self.dp, "t_f": self.t_f}
        d.pop("dp")
        if d["ramp_amplitude"] is None:
            d.pop("ramp_amplitude")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "DisturbanceScenario":
        kind = data.get("kind", TEMPORARY)
        if kind == PERMANENT:
            return cls.permanent(data["dp"], data.get("t_f", 0.0))
        keys = ("t_f", "t_c", "r_p", "p_gfl0", "p_load0", "u_f", "a", "b", "c", "ramp_amplitude")
        return cls.temporary(**{k: data[k] for k in keys if k in data})


def disturbance_power(scn: DisturbanceScenario, t):
    """Power imbalance at time ``t``; phase boundaries belong to the left phase."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    if not scn.is_temporary:
        out[t > scn.t_f] = scn.dp
        return out[()] if out.ndim == 0 else out
    on = (t > scn.t_f) & (t <= scn.t_c)
    rec = (t > scn.t_c) & (t <= scn.t_r)
    out[on] = scn.fault_power
    out[rec] = (scn.r_p * (t[rec] - scn.t_c) - 1.0) * scn.ramp_amp
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class ClosedFormConstants:
    """Constants of the piecewise closed-form solution.

    ``x_c``/``dx_c`` are the deviation and its right-hand slope at fault
    clearing, ``x_r``/``dx_r`` the deviation and slope at ramp completion.
    """

    lambda_: float
    omega_d: float
    a1: float
    k2: float
    c1: float = 0.0
    c2: float = 0.0
    a_cos: float = 0.0
    a_sin: float = 0.0
    x_c: float = 0.0
    dx_c: float = 0.0
    x_r: float = 0.0
    dx_r: float = 0.0
    # left-hand slope at t_c, kept for the derivative jump
    dx_c_left: float = field(default=0.0, repr=False)


def _modal(p: EffectiveParams) -> tuple[float, float, float]:
    disc = p.discriminant
    if disc <= 0.0:
        raise NotUnderdamped(f"parameters {p} are not underdamped (discriminant {disc:.6g})")
    h, d, k, tau = p.h_bar, p.d_bar, p.k_bar, p.tau_bar
    root = math.sqrt(disc)
    lam = (tau * d + 2.0 * h) / (4.0 * tau * h)
    wd = root / (4.0 * tau * h)
    # x'(0+) = dP/(2H) for a step from rest fixes the sine weight
    a1 = (2.0 * tau * k + tau * d - 2.0 * h) / root
    return lam, wd, a1


def _step_response(lam, wd, a1, s):
    """Unit-gain step shape ``1 - e^{-lam s}(cos - a1 sin)`` and its slope."""
    e = np.exp(-lam * s)
    cs, sn = np.cos(wd * s), np.sin(wd * s)
    y = 1.0 - e * (cs - a1 * sn)
    dy = e * ((lam + a1 * wd) * cs + (wd - lam * a1) * sn)
    return y, dy


def _free_response(lam, wd, x0, dx0, s):
    """Homogeneous response from deviation ``x0`` and slope ``dx0``."""
    e = np.exp(-lam * s)
    cs, sn = np.cos(wd * s), np.sin(wd * s)
    y = e * (x0 * cs + (dx0 + lam * x0) / wd * sn)
    dy = e * (dx0 * cs - (lam * dx0 + (wd * wd + lam * lam) * x0) / wd * sn)
    return y, dy


def phase_constants(p: EffectiveParams, scn: DisturbanceScenario) -> ClosedFormConstants:
    lam, wd, a1 = _modal(p)
    dk = p.d_bar + p.k_bar
    k2 = scn.fault_power / dk
    if not scn.is_temporary:
        return ClosedFormConstants(lam, wd, a1, k2)

    h, k, tau = p.h_bar, p.k_bar, p.tau_bar
    y, dy = _step_response(lam, wd, a1, scn.t_c - scn.t_f)
    x_c = k2 * float(y)
    dx_c_left = k2 * float(dy)
    amp = scn.ramp_amp
    # load snaps back at t_c, so the slope jumps by the change in imbalance
    dx_c = dx_c_left + (-amp - scn.fault_power) / (2.0 * h)

    c1 = scn.r_p * amp / dk
    c2 = amp * (scn.r_p * tau * k - dk - 2.0 * scn.r_p * h) / dk**2
    a_cos = x_c - c2
    a_sin = (dx_c - c1 + lam * a_cos) / wd

    s_r = 1.0 / scn.r_p
    e = math.exp(-lam * s_r)
    cs, sn = math.cos(wd * s_r), math.sin(wd * s_r)
    x_r = c1 * s_r + c2 + e * (a_cos * cs + a_sin * sn)
    dx_r = c1 + e * ((wd * a_sin - lam * a_cos) * cs - (wd * a_cos + lam * a_sin) * sn)
    return ClosedFormConstants(
        lam, wd, a1, k2, c1, c2, a_cos, a_sin, x_c, dx_c, x_r, dx_r, dx_c_left
    )


def _deviation(p, scn, t, cc=None):
    """Deviation and slope of the ENF at ``t`` (array), left-branch convention."""
    if cc is None:
        cc = phase_constants(p, scn)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.zeros_like(t)
    dx = np.zeros_like(t)
    lam, wd = cc.lambda_, cc.omega_d

    t_c = scn.t_c if scn.is_temporary else math.inf
    on = (t > scn.t_f) & (t <= t_c)
    if on.any():
        y, dy = _step_response(lam, wd, cc.a1, t[on] - scn.t_f)
        x[on], dx[on] = cc.k2 * y, cc.k2 * dy
    if not scn.is_temporary:
        return x, dx

    rec = (t > scn.t_c) & (t <= scn.t_r)
    if rec.any():
        s = t[rec] - scn.t_c
        e = np.exp(-lam * s)
        cs, sn = np.cos(wd * s), np.sin(wd * s)
        x[rec] = cc.c1 * s + cc.c2 + e * (cc.a_cos * cs + cc.a_sin * sn)
        dx[rec] = cc.c1 + e * (
            (wd * cc.a_sin - lam * cc.a_cos) * cs - (wd * cc.a_cos + lam * cc.a_sin) * sn
        )
    post = t > scn.t_r
    if post.any():
        x[post], dx[post] = _free_response(lam, wd, cc.x_r, cc.dx_r, t[post] - scn.t_r)
    return x, dx


def _shape_like(t, arr):
    return float(arr[0]) if np.ndim(t) == 0 else arr


def eval_permanent(p: EffectiveParams, dp: float, t, t_f: float = 0.0):
    """ENF after a permanent step ``dp`` applied at ``t_f``."""
    scn = DisturbanceScenario.permanent(dp, t_f)
    x, _ = _deviation(p, scn, t)
    return _shape_like(t, OMEGA_0 + x)


def eval_temporary(p: EffectiveParams, scn: DisturbanceScenario, t, cc=None):
    if not scn.is_temporary:
        raise InvalidScenario("eval_temporary needs a temporary scenario")
    x, _ = _deviation(p, scn, t, cc)
    return _shape_like(t, OMEGA_0 + x)


def eval_frequency(p: EffectiveParams, scn: DisturbanceScenario, t, cc=None):
    """ENF for either disturbance class."""
    x, _ = _deviation(p, scn, t, cc)
    return _shape_like(t, OMEGA_0 + x)


def eval_derivative(p: EffectiveParams, scn: DisturbanceScenario, t, cc=None):
    """d(omega)/dt of the active branch; left limits at phase boundaries."""
    _, dx = _deviation(p, scn, t, cc)
    return _shape_like(t, dx)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    omega: np.ndarray
    node_id: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        w = np.asarray(self.omega, dtype=float)
        if t.shape != w.shape or t.ndim != 1:
            raise ValueError("t and omega must be 1-D arrays of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("time stamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "omega", w)

    def __len__(self):
        return self.t.size

    @property
    def spacing(self) -> float:
        return float(np.median(np.diff(self.t))) if self.t.size > 1 else 0.0

    def with_omega(self, omega) -> "Trajectory":
        return Trajectory(self.t, np.asarray(omega, dtype=float), self.node_id, dict(self.meta))
