"""Nodal frequency security from effective nodal frequency (ENF) models.

Closed-form ENF trajectories, an RK4 reference simulator, Nelder-Mead fitting
of effective nodal parameters, security indicators with critical inertia, and
an offline-table/online assessment of the system security index.
"""

from .assessment import (
    Assessment,
    CaseDescriptor,
    FitConfig,
    OfflineCase,
    OfflineRecord,
    OfflineTable,
    assess,
    build_offline_table,
    interpolate_online,
    select_neighbors,
)
from .core import (
    OMEGA_0,
    ClosedFormConstants,
    DisturbanceScenario,
    EffectiveParams,
    Trajectory,
    disturbance_power,
    eval_derivative,
    eval_frequency,
    eval_permanent,
    eval_temporary,
    phase_constants,
)
from .errors import *  # noqa: F401,F403
from .fitting import (
    FitResult,
    LossWeights,
    filter_trajectory,
    fit_error_percent,
    fit_node,
    interpolate_params,
    loss,
)
from .refsim import (
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
from .security import (
    CriticalInertia,
    SecurityIndex,
    SecurityIndicators,
    SecurityThresholds,
    SensitivityVector,
    critical_inertia,
    frequency_nadir,
    max_rocof,
    security_index,
    security_indicators,
    sensitivity_nadir,
    sensitivity_rocof,
)

__version__ = "0.1.0"
