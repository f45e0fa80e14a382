"""Reference simulator for the time-varying nodal model.

Fixed-step RK4 on the two-state nodal model with instantaneous parameters
``H(t) = H_bar + h(t)`` etc.  With zero modulation this reproduces the
closed-form ENF of :mod:`enfsec.core`; with modulation and measurement noise it
stands in for PMU recordings.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import OMEGA_0, DisturbanceScenario, EffectiveParams, Trajectory
from .errors import NonPositiveParameter, Unstable

PARAM_NAMES = ("h", "d", "k", "tau")
UNSTABLE_DEVIATION = 0.5

_OK, _NONPOSITIVE, _UNSTABLE = 0, 1, 2


@dataclass(frozen=True)
class SineTerm:
    amplitude: float
    frequency: float  # Hz
    phase: float = 0.0  # rad


@dataclass(frozen=True)
class ParameterModulation:
    """Sinusoidal (plus optional white-noise) residuals of each parameter.

    ``terms`` maps ``"h" | "d" | "k" | "tau"`` to a tuple of :class:`SineTerm`.
    ``noise_sigma`` maps the same keys to a per-step Gaussian sigma; the noise
    is held constant over each integration step and drawn from ``seed``.
    """

    terms: dict = field(default_factory=dict)
    noise_sigma: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for key in (*self.terms, *self.noise_sigma):
            if key not in PARAM_NAMES:
                raise ValueError(f"unknown modulated parameter {key!r}")

    @classmethod
    def none(cls) -> "ParameterModulation":
        return cls()

    @property
    def is_zero(self) -> bool:
        no_terms = all(t.amplitude == 0 for ts in self.terms.values() for t in ts)
        return no_terms and not any(self.noise_sigma.values())

    def to_dict(self) -> dict:
        return {
            "terms": {
                k: [[t.amplitude, t.frequency, t.phase] for t in ts] for k, ts in self.terms.items()
            },
            "noise_sigma": dict(self.noise_sigma),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict | None) -> "ParameterModulation":
        if not data:
            return cls()
        terms = {
            k: tuple(SineTerm(*map(float, row)) for row in rows)
            for k, rows in data.get("terms", {}).items()
        }
        sig = {k: float(v) for k, v in data.get("noise_sigma", {}).items()}
        return cls(terms, sig, int(data.get("seed", 0)))

    def _arrays(self):
        n = max([len(ts) for ts in self.terms.values()] + [1])
        amps = np.zeros((4, n))
        freqs = np.zeros((4, n))
        phases = np.zeros((4, n))
        for i, name in enumerate(PARAM_NAMES):
            for j, term in enumerate(self.terms.get(name, ())):
                amps[i, j], freqs[i, j], phases[i, j] = term.amplitude, term.frequency, term.phase
        return amps, freqs, phases

    def evaluate(self, base: EffectiveParams, t) -> np.ndarray:
        """Deterministic part of the four parameters at times ``t``, shape (4, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        amps, freqs, phases = self._arrays()
        out = np.repeat(base.as_array()[:, None], t.size, axis=1)
        for j in range(amps.shape[1]):
            out += amps[:, j, None] * np.sin(
                2.0 * np.pi * freqs[:, j, None] * t[None, :] + phases[:, j, None]
            )
        return out


def default_modulation(base: EffectiveParams, seed: int = 0) -> ParameterModulation:
    """Inertia ripple of 5% at 0.8 Hz and 2% at 2.3 Hz; other parameters constant."""
    h = base.h_bar
    return ParameterModulation(
        terms={"h": (SineTerm(0.05 * h, 0.8), SineTerm(0.02 * h, 2.3))}, seed=seed
    )


@numba.njit(cache=True)
def _params_at(base, amps, freqs, phases, noise, step, t, out):
    for i in range(4):
        v = base[i]
        for j in range(amps.shape[1]):
            if amps[i, j] != 0.0:
                v += amps[i, j] * math.sin(2.0 * math.pi * freqs[i, j] * t + phases[i, j])
        if noise.shape[1] > 0:
            v += noise[i, step]
        out[i] = v


@numba.njit(cache=True)
def _forcing(seg, t, p_fault, t_c, r_p, ramp_amp):
    if seg == 1:
        return p_fault
    if seg == 2:
        return (r_p * (t - t_c) - 1.0) * ramp_amp
    return 0.0


@numba.njit(cache=True)
def _rhs(x, g, t, seg, step, base, amps, freqs, phases, noise, p_fault, t_c, r_p, ramp_amp, prm):
    _params_at(base, amps, freqs, phases, noise, step, t, prm)
    if prm[0] <= 0.0 or prm[1] <= 0.0 or prm[2] <= 0.0 or prm[3] <= 0.0:
        return 0.0, 0.0, False
    p = _forcing(seg, t, p_fault, t_c, r_p, ramp_amp)
    dx = (p - prm[1] * x - g) / (2.0 * prm[0])
    dg = (prm[2] * x - g) / prm[3]
    return dx, dg, True


@numba.njit(cache=True)
def _rk4_kernel(base, amps, freqs, phases, noise, bps, p_fault, t_c, r_p, ramp_amp, dt, n_steps):
    xs = np.zeros(n_steps + 1)
    gs = np.zeros(n_steps + 1)
    prm = np.zeros(4)
    x = 0.0
    g = 0.0
    cuts = np.zeros(bps.size + 2)
    for k in range(n_steps):
        t0 = k * dt
        t1 = (k + 1) * dt
        # sub-steps never straddle a change of forcing
        m = 0
        cuts[m] = t0
        m += 1
        for b in bps:
            if t0 + 1e-12 < b < t1 - 1e-12:
                cuts[m] = b
                m += 1
        cuts[m] = t1
        m += 1
        for s in range(m - 1):
            ta = cuts[s]
            tb = cuts[s + 1]
            h = tb - ta
            mid = 0.5 * (ta + tb)
            seg = 0
            for b in bps:
                if mid > b:
                    seg += 1
            k1x, k1g, ok1 = _rhs(x, g, ta, seg, k, base, amps, freqs, phases, noise,
                                 p_fault, t_c, r_p, ramp_amp, prm)
            k2x, k2g, ok2 = _rhs(x + 0.5 * h * k1x, g + 0.5 * h * k1g, ta + 0.5 * h, seg, k,
                                 base, amps, freqs, phases, noise, p_fault, t_c, r_p, ramp_amp, prm)
            k3x, k3g, ok3 = _rhs(x + 0.5 * h * k2x, g + 0.5 * h * k2g, ta + 0.5 * h, seg, k,
                                 base, amps, freqs, phases, noise, p_fault, t_c, r_p, ramp_amp, prm)
            k4x, k4g, ok4 = _rhs(x + h * k3x, g + h * k3g, tb, seg, k,
                                 base, amps, freqs, phases, noise, p_fault, t_c, r_p, ramp_amp, prm)
            if not (ok1 and ok2 and ok3 and ok4):
                return xs, gs, 1, k
            x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
        xs[k + 1] = x
        gs[k + 1] = g
        if not (abs(x) <= 0.5):
            return xs, gs, 2, k + 1
    return xs, gs, 0, n_steps


@dataclass(frozen=True)
class SimResult:
    t: np.ndarray
    omega: np.ndarray
    g: np.ndarray


def simulate_states(
    base: EffectiveParams,
    mod: ParameterModulation | None,
    scn: DisturbanceScenario,
    horizon: float,
    dt: float = 1e-3,
) -> SimResult:
    """Integrate the nodal model and return frequency and regulation power."""
    if dt > 1e-3 + 1e-15:
        raise ValueError("dt must be <= 1e-3 s")
    mod = mod or ParameterModulation()
    n_steps = int(round(horizon / dt))
    t = np.arange(n_steps + 1) * dt

    _check_positive(base, mod, t)
    amps, freqs, phases = mod._arrays()
    if any(mod.noise_sigma.values()):
        rng = np.random.default_rng(mod.seed)
        sig = np.array([mod.noise_sigma.get(name, 0.0) for name in PARAM_NAMES])
        noise = sig[:, None] * rng.standard_normal((4, n_steps))
    else:
        noise = np.zeros((4, 0))

    if scn.is_temporary:
        bps = np.array(scn.breakpoints())
        ramp_amp, r_p = scn.ramp_amp, scn.r_p
    else:
        bps = np.array([scn.t_f])
        ramp_amp, r_p = 0.0, 1.0
    xs, gs, status, k = _rk4_kernel(
        base.as_array(), amps, freqs, phases, noise, bps,
        scn.fault_power, scn.t_c, r_p, ramp_amp, dt, n_steps,
    )
    if status == _NONPOSITIVE:
        raise NonPositiveParameter(f"a modulated parameter crossed zero near t={k * dt:.4f} s")
    if status == _UNSTABLE:
        raise Unstable(f"|omega - omega_0| exceeded {UNSTABLE_DEVIATION} pu at t={k * dt:.4f} s")
    return SimResult(t, OMEGA_0 + xs, gs)


def _check_positive(base, mod, t):
    if mod.is_zero:
        return
    vals = mod.evaluate(base, t)
    bad = np.nonzero(vals.min(axis=1) <= 0.0)[0]
    if bad.size:
        raise NonPositiveParameter(
            f"modulated parameter {PARAM_NAMES[bad[0]]!r} is not strictly positive over the horizon"
        )


def simulate_node(
    base: EffectiveParams,
    mod: ParameterModulation | None,
    scn: DisturbanceScenario,
    horizon: float,
    dt: float = 1e-3,
    node_id: str = "",
) -> Trajectory:
    res = simulate_states(base, mod, scn, horizon, dt)
    return Trajectory(res.t, res.omega, node_id, {"scenario": scn.to_dict()})


def synthesize_pmu(traj: Trajectory, noise_sigma: float, seed: int) -> Trajectory:
    """Add seeded white Gaussian measurement noise to every sample."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    if noise_sigma == 0:
        return traj.with_omega(traj.omega.copy())
    rng = np.random.default_rng(seed)
    return traj.with_omega(traj.omega + rng.normal(0.0, noise_sigma, size=len(traj)))


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    params: EffectiveParams
    modulation: ParameterModulation = field(default_factory=ParameterModulation)
    measured: bool = True


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    length_km: float


class NetworkTopology:
    """Nodes with base parameters plus line lengths between them."""

    def __init__(self, nodes, edges):
        self.nodes: dict[str, NodeSpec] = {n.node_id: n for n in nodes}
        if len(self.nodes) != len(nodes):
            raise ValueError("duplicate node ids")
        self.edges: list[Edge] = list(edges)
        self._adj: dict[str, list[tuple[str, float]]] = {n: [] for n in self.nodes}
        for e in self.edges:
            if e.a not in self.nodes or e.b not in self.nodes:
                raise ValueError(f"edge {e.a}-{e.b} references an unknown node")
            if not e.length_km > 0:
                raise ValueError(f"edge {e.a}-{e.b} must have positive length")
            self._adj[e.a].append((e.b, e.length_km))
            self._adj[e.b].append((e.a, e.length_km))
        if self.nodes and not self._connected():
            raise ValueError("topology graph is not connected")

    def _connected(self) -> bool:
        start = next(iter(self.nodes))
        seen = {start}
        queue = deque([start])
        while queue:
            for nb, _ in self._adj[queue.popleft()]:
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        return len(seen) == len(self.nodes)

    @property
    def node_ids(self) -> list[str]:
        return list(self.nodes)

    @property
    def measured(self) -> list[str]:
        return [n for n, spec in self.nodes.items() if spec.measured]

    @property
    def unmeasured(self) -> list[str]:
        return [n for n, spec in self.nodes.items() if not spec.measured]

    def neighbors(self, node_id: str) -> list[tuple[str, float]]:
        return list(self._adj[node_id])

    def with_inertia(self, changes: dict) -> "NetworkTopology":
        """Copy with some nodes' base inertia replaced (modulation rescaled)."""
        nodes = []
        for spec in self.nodes.values():
            if spec.node_id in changes:
                new_h = float(changes[spec.node_id])
                ratio = new_h / spec.params.h_bar
                terms = dict(spec.modulation.terms)
                if "h" in terms:
                    terms["h"] = tuple(
                        SineTerm(t.amplitude * ratio, t.frequency, t.phase) for t in terms["h"]
                    )
                mod = ParameterModulation(terms, dict(spec.modulation.noise_sigma), spec.modulation.seed)
                spec = NodeSpec(spec.node_id, spec.params.with_inertia(new_h), mod, spec.measured)
            nodes.append(spec)
        return NetworkTopology(nodes, self.edges)

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {
                    "id": s.node_id,
                    "params": s.params.to_dict(),
                    "modulation": s.modulation.to_dict(),
                    "measured": s.measured,
                }
                for s in self.nodes.values()
            ],
            "edges": [{"from": e.a, "to": e.b, "length_km": e.length_km} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkTopology":
        nodes = [
            NodeSpec(
                str(n["id"]),
                EffectiveParams.from_dict(n["params"]),
                ParameterModulation.from_dict(n.get("modulation")),
                bool(n.get("measured", True)),
            )
            for n in data["nodes"]
        ]
        edges = [Edge(str(e["from"]), str(e["to"]), float(e["length_km"])) for e in data["edges"]]
        return cls(nodes, edges)
