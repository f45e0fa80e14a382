import numpy as np
import pytest

from enfsec.core import DisturbanceScenario, EffectiveParams

# criterion number -> (passed, detail), filled by tests/test_acceptance.py
ACCEPTANCE = {}


def random_params(rng, h=(1.0, 10.0), d=(0.5, 10.0), k=(5.0, 30.0), tau=(0.2, 2.0)):
    while True:
        p = EffectiveParams(rng.uniform(*h), rng.uniform(*d), rng.uniform(*k), rng.uniform(*tau))
        if p.underdamped:
            return p


def random_temporary(rng, t_f=(0.1, 1.0), duration=(0.02, 0.5), r_p=(0.3, 5.0), u_f=(0.0, 0.95),
                     p_gfl0=(0.05, 0.6), p_load0=(0.1, 1.0)):
    a, b, c = rng.dirichlet([1.0, 1.0, 1.0])
    tf = rng.uniform(*t_f)
    return DisturbanceScenario.temporary(
        tf, tf + rng.uniform(*duration), rng.uniform(*r_p), rng.uniform(*p_gfl0),
        rng.uniform(*p_load0), rng.uniform(*u_f), a, b, c,
    )


def random_case(rng):
    return random_params(rng), random_temporary(rng)


def fit_case(rng):
    """Moderate cases for fit-recovery studies."""
    p = random_params(rng, h=(2.0, 8.0), d=(0.5, 3.0), k=(10.0, 25.0), tau=(0.5, 1.5))
    scn = random_temporary(rng, t_f=(0.5, 0.5), duration=(0.08, 0.3), r_p=(1.0, 4.0), u_f=(0.5, 0.9),
                           p_gfl0=(0.04, 0.1), p_load0=(0.05, 0.15))
    return p, scn


def decay_rate(p):
    return (p.tau_bar * p.d_bar + 2 * p.h_bar) / (4 * p.tau_bar * p.h_bar)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def g4():
    return EffectiveParams(4.0, 6.0, 20.0, 1.0)


@pytest.fixture
def demo_scn():
    from enfsec.demo import demo_scenario

    return demo_scenario()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
