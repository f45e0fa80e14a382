"""Bundled five-node example system, its scenario grid and online case."""

from __future__ import annotations

from .assessment import CaseDescriptor, OfflineCase
from .core import DisturbanceScenario, EffectiveParams
from .refsim import Edge, NetworkTopology, NodeSpec, default_modulation
from .security import SecurityThresholds

DISTURBANCE_NODE = "N3"
# case II: two nodes lose most of their synchronous inertia
REDUCED_INERTIA = {"N3": 2.2, "N4": 2.0}

_NODES = [
    ("N1", EffectiveParams(5.0, 1.5, 18.0, 1.2), True),
    ("N2", EffectiveParams(4.2, 1.2, 16.0, 1.0), True),
    ("N3", EffectiveParams(3.6, 1.0, 20.0, 0.8), True),
    ("N4", EffectiveParams(3.8, 1.0, 15.0, 1.0), True),
    ("N5", EffectiveParams(4.0, 1.2, 17.0, 1.0), False),
]
_EDGES = [("N1", "N2", 40.0), ("N2", "N3", 30.0), ("N3", "N4", 25.0), ("N4", "N5", 20.0), ("N5", "N1", 35.0)]


def demo_thresholds() -> SecurityThresholds:
    return SecurityThresholds(r_th=0.0167, omega_th=0.997)


def demo_topology(reduced: bool = False) -> NetworkTopology:
    """Case I topology, or case II with ``REDUCED_INERTIA`` applied."""
    nodes = [
        NodeSpec(name, p, default_modulation(p, seed=i), measured)
        for i, (name, p, measured) in enumerate(_NODES)
    ]
    topo = NetworkTopology(nodes, [Edge(a, b, l) for a, b, l in _EDGES])
    return topo.with_inertia(REDUCED_INERTIA) if reduced else topo


def demo_scenario(t_c: float = 0.65, u_f: float = 0.8, r_p: float = 2.0) -> DisturbanceScenario:
    return DisturbanceScenario.temporary(
        t_f=0.5, t_c=t_c, r_p=r_p, p_gfl0=0.06, p_load0=0.1, u_f=u_f, a=0.3, b=0.3, c=0.4
    )


def demo_grid() -> list:
    """Offline scenario grid: three clearing times by two voltage dips at N3."""
    return [
        OfflineCase(demo_scenario(t_c=t_c, u_f=u_f), DISTURBANCE_NODE)
        for t_c in (0.6, 0.65, 0.7)
        for u_f in (0.75, 0.85)
    ]


def demo_online_case() -> CaseDescriptor:
    return CaseDescriptor.from_scenario(demo_scenario(t_c=0.66, u_f=0.8), DISTURBANCE_NODE)
