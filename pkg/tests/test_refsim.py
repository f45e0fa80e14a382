import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import decay_rate, random_case
from enfsec.core import OMEGA_0, DisturbanceScenario, EffectiveParams, disturbance_power, eval_temporary
from enfsec.errors import NonPositiveParameter, Unstable
from enfsec.refsim import (
    Edge,
    NetworkTopology,
    NodeSpec,
    ParameterModulation,
    SineTerm,
    default_modulation,
    simulate_node,
    simulate_states,
    synthesize_pmu,
)


def test_zero_modulation_matches_closed_form(rng):
    for _ in range(5):
        p, scn = random_case(rng)
        traj = simulate_node(p, None, scn, horizon=scn.t_r + 10 / decay_rate(p), dt=1e-3)
        assert np.max(np.abs(traj.omega - eval_temporary(p, scn, traj.t))) <= 1e-6


def test_zero_disturbance_is_equilibrium(g4):
    res = simulate_states(g4, None, DisturbanceScenario.permanent(0.0), horizon=5.0)
    assert np.all(res.omega == OMEGA_0)
    assert np.all(res.g == 0.0)


def test_halving_dt_changes_little(g4, demo_scn):
    a = simulate_node(g4, None, demo_scn, horizon=10.0, dt=1e-3)
    b = simulate_node(g4, None, demo_scn, horizon=10.0, dt=5e-4)
    assert np.max(np.abs(a.omega - b.omega[::2])) <= 1e-8


def test_rk4_order():
    # fast dynamics keep the error well above round-off
    p = EffectiveParams(0.3, 1.0, 20.0, 0.2)
    scn = DisturbanceScenario.temporary(0.0, 0.3, 5.0, 0.3, 0.5, 0.5, 0.3, 0.3, 0.4)
    mod = ParameterModulation({"h": (SineTerm(0.05, 3.0),), "k": (SineTerm(2.0, 1.5, 0.3),)})
    ref = simulate_node(p, mod, scn, horizon=2.0, dt=2.5e-5)
    errs = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        tr = simulate_node(p, mod, scn, horizon=2.0, dt=dt)
        stride = int(round(dt / 2.5e-5))
        errs.append(np.max(np.abs(tr.omega - ref.omega[::stride])))
    slope = np.polyfit(np.log([1e-3, 5e-4, 2.5e-4]), np.log(errs), 1)[0]
    assert 3.5 <= slope <= 4.5


def test_modulated_matches_independent_integrator():
    p = EffectiveParams(3.0, 1.0, 15.0, 1.0)
    scn = DisturbanceScenario.temporary(0.2, 0.4, 2.0, 0.06, 0.1, 0.8, 0.3, 0.3, 0.4)
    mod = default_modulation(p)
    tr = simulate_states(p, mod, scn, horizon=4.0, dt=1e-4)

    def rhs(t, y):
        h, d, k, tau = mod.evaluate(p, np.array([t]))[:, 0]
        x, g = y
        return [(disturbance_power(scn, t) - d * x - g) / (2 * h), (k * x - g) / tau]

    y, t0 = np.zeros(2), 0.0
    for t1 in (*scn.breakpoints(), 4.0):
        sol = solve_ivp(rhs, (t0, t1), y, method="DOP853", rtol=1e-11, atol=1e-14, dense_output=True)
        y, t0 = sol.y[:, -1], t1
        mask = (tr.t >= sol.t[0]) & (tr.t <= t1)
        assert np.max(np.abs(sol.sol(tr.t[mask])[0] + OMEGA_0 - tr.omega[mask])) < 1e-9


def test_steady_state_after_long_horizon(rng):
    p, scn = random_case(rng)
    horizon = scn.t_r + 20 / decay_rate(p)
    res = simulate_states(p, None, scn, horizon=horizon, dt=1e-3)
    assert abs(res.omega[-1] - OMEGA_0) <= 1e-6
    assert abs(res.g[-1]) <= 1e-6


def test_dt_limit(g4, demo_scn):
    with pytest.raises(ValueError):
        simulate_node(g4, None, demo_scn, horizon=1.0, dt=2e-3)


def test_nonpositive_modulation(g4, demo_scn):
    mod = ParameterModulation({"h": (SineTerm(5.0, 1.0),)})
    with pytest.raises(NonPositiveParameter):
        simulate_node(g4, mod, demo_scn, horizon=2.0)


def test_unstable_detected():
    p = EffectiveParams(0.5, 0.1, 0.2, 1.0)
    with pytest.raises(Unstable):
        simulate_node(p, None, DisturbanceScenario.permanent(-0.5), horizon=20.0)


def test_default_modulation_terms(g4):
    mod = default_modulation(g4)
    amps = sorted(t.amplitude for t in mod.terms["h"])
    assert amps == pytest.approx([0.02 * 4.0, 0.05 * 4.0])
    assert sorted(t.frequency for t in mod.terms["h"]) == [0.8, 2.3]
    assert ParameterModulation.from_dict(mod.to_dict()) == mod


def test_pmu_noise_identity_and_determinism(g4, demo_scn):
    tr = simulate_node(g4, None, demo_scn, horizon=2.0)
    assert np.array_equal(synthesize_pmu(tr, 0.0, 1).omega, tr.omega)
    a = synthesize_pmu(tr, 1e-4, 7)
    b = synthesize_pmu(tr, 1e-4, 7)
    assert np.array_equal(a.omega, b.omega)
    assert np.array_equal(a.t, tr.t)


def test_pmu_noise_std(g4, demo_scn):
    tr = simulate_node(g4, None, demo_scn, horizon=9.999, dt=1e-3)
    assert len(tr) == 10000
    noisy = synthesize_pmu(tr, 1e-4, 3)
    assert np.std(noisy.omega - tr.omega) == pytest.approx(1e-4, rel=0.05)


def _line(n=3):
    nodes = [NodeSpec(f"N{i}", EffectiveParams(3.0 + i, 1.0, 15.0, 1.0), measured=i != 1) for i in range(n)]
    edges = [Edge(f"N{i}", f"N{i + 1}", 10.0 * (i + 1)) for i in range(n - 1)]
    return NetworkTopology(nodes, edges)


def test_topology_basics():
    topo = _line()
    assert topo.node_ids == ["N0", "N1", "N2"]
    assert topo.unmeasured == ["N1"]
    assert sorted(topo.neighbors("N1")) == [("N0", 10.0), ("N2", 20.0)]
    back = NetworkTopology.from_dict(topo.to_dict())
    assert back.to_dict() == topo.to_dict()


def test_topology_rejects_disconnected_and_bad_lengths():
    nodes = [NodeSpec(n, EffectiveParams(3.0, 1.0, 15.0, 1.0)) for n in "abc"]
    with pytest.raises(ValueError):
        NetworkTopology(nodes, [Edge("a", "b", 1.0)])
    with pytest.raises(ValueError):
        NetworkTopology(nodes, [Edge("a", "b", 1.0), Edge("b", "c", 0.0)])


def test_with_inertia_rescales_ripple():
    p = EffectiveParams(4.0, 1.0, 15.0, 1.0)
    topo = NetworkTopology([NodeSpec("a", p, default_modulation(p))], [])
    out = topo.with_inertia({"a": 2.0})
    assert out.nodes["a"].params.h_bar == 2.0
    assert sorted(t.amplitude for t in out.nodes["a"].modulation.terms["h"]) == pytest.approx([0.04, 0.1])
