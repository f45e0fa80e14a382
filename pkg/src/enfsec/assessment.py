"""Offline table of nodal inertia over a scenario grid and online lookup by case distance."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import TEMPORARY, DisturbanceScenario, EffectiveParams
from .errors import (
    ConfigError,
    EmptyNeighborSet,
    EnfError,
    InvalidScenario,
    NoComparableCase,
)
from .fitting import LossWeights, filter_trajectory, fit_node, idw_average, interpolate_params
from .refsim import NetworkTopology, simulate_node, synthesize_pmu
from .security import (
    CriticalInertia,
    SecurityIndex,
    SecurityThresholds,
    critical_inertia,
    security_index,
)

TABLE_FORMAT_VERSION = 1
FEATURE_NAMES = ("fault_power", "fault_duration", "voltage_dip", "ramp_rate")
DEFAULT_NEIGHBORS = 4


@dataclass(frozen=True)
class CaseDescriptor:
    """Coordinates of a disturbance case: type, location and four size features.

    Features are ``(|dP2|, t_c - t_f, 1 - U_f, r_p)``.  ``scales`` divide the
    features before Euclidean distances are taken.
    """

    disturbance_type: str
    disturbance_node: str
    features: tuple
    scales: tuple = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        object.__setattr__(self, "scales", tuple(float(v) for v in self.scales))
        if len(self.features) != len(FEATURE_NAMES) or len(self.scales) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features and scales")
        if min(self.scales) <= 0:
            raise ValueError("normalization scales must be > 0")

    @classmethod
    def from_scenario(cls, scn: DisturbanceScenario, node: str, scales=None) -> "CaseDescriptor":
        if scn.is_temporary:
            feats = (abs(scn.fault_power), scn.t_c - scn.t_f, 1.0 - scn.u_f, scn.r_p)
        else:
            feats = (abs(scn.dp), 0.0, 0.0, 0.0)
        return cls(scn.kind, str(node), feats, scales or (1.0,) * len(FEATURE_NAMES))

    def with_scales(self, scales) -> "CaseDescriptor":
        return replace(self, scales=tuple(scales))

    def distance(self, other: "CaseDescriptor", scales=None) -> float:
        s = np.asarray(self.scales if scales is None else scales, dtype=float)
        diff = (np.asarray(self.features) - np.asarray(other.features)) / s
        return float(np.sqrt(np.sum(diff**2)))

    def comparable(self, other: "CaseDescriptor") -> bool:
        return (self.disturbance_type, self.disturbance_node) == (other.disturbance_type, other.disturbance_node)

    def to_dict(self):
        return {
            "disturbance_type": self.disturbance_type,
            "disturbance_node": self.disturbance_node,
            "features": dict(zip(FEATURE_NAMES, self.features)),
            "scales": list(self.scales),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaseDescriptor":
        feats = d["features"]
        if isinstance(feats, dict):
            feats = [feats[name] for name in FEATURE_NAMES]
        return cls(str(d["disturbance_type"]), str(d["disturbance_node"]), feats, d.get("scales", (1.0,) * 4))


@dataclass(frozen=True)
class OfflineCase:
    """A scenario placed at a disturbance node, the unit of the offline grid."""

    scenario: DisturbanceScenario
    disturbance_node: str

    def to_dict(self):
        return {"disturbance_node": self.disturbance_node, "scenario": self.scenario.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "OfflineCase":
        return cls(DisturbanceScenario.from_dict(d["scenario"]), str(d["disturbance_node"]))


@dataclass
class FitConfig:
    """How measured trajectories are produced and fitted while building a table."""

    weights: LossWeights = field(default_factory=LossWeights)
    x0: EffectiveParams = field(default_factory=lambda: EffectiveParams(4.0, 1.0, 15.0, 1.0))
    noise_sigma: float = 1e-4
    filter_window: float = 0.1
    horizon: float | None = None
    dt: float = 1e-3
    max_iter: int = 500
    ftol: float = 1e-10
    xtol: float = 1e-4
    rocof: str = "classic"
    seed: int = 0

    def horizon_for(self, topo: NetworkTopology, scn: DisturbanceScenario) -> float:
        """Explicit horizon, or t_r plus ten decay times of the slowest node (whole seconds)."""
        if self.horizon is not None:
            return float(self.horizon)
        slowest = 0.0
        for spec in topo.nodes.values():
            p = spec.params
            lam = (p.tau_bar * p.d_bar + 2 * p.h_bar) / (4 * p.tau_bar * p.h_bar)
            slowest = max(slowest, 10.0 / lam)
        end = scn.t_r if scn.is_temporary else scn.t_f
        return float(math.ceil(end + slowest))

    def to_dict(self):
        return {
            "weights": self.weights.to_dict(),
            "x0": self.x0.to_dict(),
            "noise_sigma": self.noise_sigma,
            "filter_window": self.filter_window,
            "horizon": self.horizon,
            "dt": self.dt,
            "max_iter": self.max_iter,
            "ftol": self.ftol,
            "xtol": self.xtol,
            "rocof": self.rocof,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict | None) -> "FitConfig":
        d = dict(d or {})
        kw = {}
        if "weights" in d:
            kw["weights"] = LossWeights.from_dict(d.pop("weights"))
        if "x0" in d:
            kw["x0"] = EffectiveParams.from_dict(d.pop("x0"))
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown fit config keys: {sorted(unknown)}")
        return cls(**kw, **d)


@dataclass(frozen=True)
class OfflineRecord:
    case: CaseDescriptor
    scenario: DisturbanceScenario
    params: dict
    critical: dict
    fit: dict = field(default_factory=dict)
    interpolated: tuple = ()

    @property
    def h_eff(self) -> dict:
        return {n: p.h_bar for n, p in self.params.items()}

    @property
    def h_cri(self) -> dict:
        return {n: c.h_cri for n, c in self.critical.items()}

    def to_dict(self):
        return {
            "case": self.case.to_dict(),
            "scenario": self.scenario.to_dict(),
            "params": {n: p.to_dict() for n, p in self.params.items()},
            "critical": {n: c.to_dict() for n, c in self.critical.items()},
            "fit": self.fit,
            "interpolated": list(self.interpolated),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OfflineRecord":
        return cls(
            CaseDescriptor.from_dict(d["case"]),
            DisturbanceScenario.from_dict(d["scenario"]),
            {n: EffectiveParams.from_dict(v) for n, v in d["params"].items()},
            {n: CriticalInertia.from_dict(v) for n, v in d["critical"].items()},
            d.get("fit", {}),
            tuple(d.get("interpolated", ())),
        )


def feature_scales(cases) -> tuple:
    """Per-feature standard deviation over the cases, 1 where it is degenerate."""
    feats = np.array([c.features for c in cases], dtype=float)
    std = feats.std(axis=0) if len(feats) else np.zeros(len(FEATURE_NAMES))
    return tuple(float(s) if s > 1e-12 else 1.0 for s in std)


@dataclass(frozen=True)
class OfflineTable:
    """Immutable set of records sharing one node set and one threshold regime."""

    records: tuple
    node_ids: tuple
    thresholds: SecurityThresholds
    scales: tuple
    provenance: dict = field(default_factory=dict)
    format_version: int = TABLE_FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "node_ids", tuple(self.node_ids))
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if min(self.scales) <= 0:
            raise ValueError("normalization scales must be > 0")
        nodes = set(self.node_ids)
        for r in self.records:
            if set(r.params) != nodes or set(r.critical) != nodes:
                raise ValueError("every record must cover the table's node set")

    def with_scales(self, scales) -> "OfflineTable":
        return replace(self, scales=tuple(scales))

    def to_dict(self):
        return {
            "format_version": self.format_version,
            "node_ids": list(self.node_ids),
            "thresholds": self.thresholds.to_dict(),
            "scales": dict(zip(FEATURE_NAMES, self.scales)),
            "provenance": self.provenance,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OfflineTable":
        version = int(d.get("format_version", -1))
        if version != TABLE_FORMAT_VERSION:
            raise ConfigError(f"unsupported offline table format version {version}")
        scales = d["scales"]
        if isinstance(scales, dict):
            scales = [scales[name] for name in FEATURE_NAMES]
        return cls(
            tuple(OfflineRecord.from_dict(r) for r in d["records"]),
            tuple(d["node_ids"]),
            SecurityThresholds.from_dict(d["thresholds"]),
            tuple(scales),
            d.get("provenance", {}),
            version,
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "OfflineTable":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def noise_seed(seed: int, node_index: int) -> int:
    return int(np.random.SeedSequence([seed, node_index]).generate_state(1)[0])


def _build_record(topo: NetworkTopology, case: OfflineCase, th: SecurityThresholds, cfg: FitConfig, label: str):
    scn = case.scenario
    horizon = cfg.horizon_for(topo, scn)
    params, fit = {}, {}
    for idx, node in enumerate(topo.node_ids):
        spec = topo.nodes[node]
        if not spec.measured:
            continue
        try:
            traj = simulate_node(spec.params, spec.modulation, scn, horizon, cfg.dt, node_id=node)
            traj = synthesize_pmu(traj, cfg.noise_sigma, noise_seed(cfg.seed, idx))
            if cfg.filter_window > 0:
                traj = filter_trajectory(traj, cfg.filter_window)
            res = fit_node(traj, scn, cfg.x0, cfg.weights, cfg.max_iter, cfg.ftol, cfg.xtol)
        except EnfError as exc:
            raise type(exc)(f"{label}, node {node!r}: {exc}") from exc
        params[node] = res.params
        fit[node] = {
            "error_percent": float(res.error_percent),
            "converged": bool(res.converged),
            "iterations": int(res.iterations),
            "loss": float(res.loss),
        }
    interpolated = []
    for node in topo.unmeasured:
        try:
            params[node] = interpolate_params(node, topo, {n: params[n] for n in topo.measured})
        except EnfError as exc:
            raise type(exc)(f"{label}, node {node!r}: {exc}") from exc
        interpolated.append(node)
    critical = {}
    for node in topo.node_ids:
        try:
            ci = critical_inertia(params[node], scn, th, rocof=cfg.rocof)
        except EnfError as exc:
            raise type(exc)(f"{label}, node {node!r}: {exc}") from exc
        critical[node] = CriticalInertia(float(ci.h_rocof), float(ci.h_dev), float(ci.h_cri), bool(ci.dev_active))
    ordered = {n: params[n] for n in topo.node_ids}
    return ordered, critical, fit, tuple(interpolated)


def _as_case(item, default_node) -> OfflineCase:
    if isinstance(item, OfflineCase):
        return item
    if isinstance(item, DisturbanceScenario):
        return OfflineCase(item, default_node)
    raise TypeError(f"expected OfflineCase or DisturbanceScenario, got {type(item).__name__}")


def build_offline_table(
    topo: NetworkTopology,
    scenarios,
    th: SecurityThresholds,
    fit: FitConfig | None = None,
    disturbance_node: str | None = None,
    jobs: int = 1,
    provenance: dict | None = None,
) -> OfflineTable:
    """Simulate, fit, interpolate and bound every node for every scenario.

    ``scenarios`` holds :class:`OfflineCase` items or bare scenarios, which are
    placed at ``disturbance_node`` (default: the first node).  Records come
    back in input order whatever ``jobs`` is; measurement noise is seeded per
    node so identical scenarios give identical records.
    """
    cfg = fit or FitConfig()
    scenarios = list(scenarios)
    if not scenarios:
        raise InvalidScenario("the offline table needs at least one scenario")
    default_node = disturbance_node or topo.node_ids[0]
    cases = [_as_case(s, default_node) for s in scenarios]
    for i, c in enumerate(cases):
        if c.scenario.kind != TEMPORARY:
            raise InvalidScenario(f"scenario {i}: offline tables need temporary disturbances")
        if c.disturbance_node not in topo.nodes:
            raise InvalidScenario(f"scenario {i}: unknown disturbance node {c.disturbance_node!r}")

    labels = [f"scenario {i}" for i in range(len(cases))]
    if jobs > 1 and len(cases) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_build_record, topo, c, th, cfg, lab) for c, lab in zip(cases, labels)]
            results = [f.result() for f in futures]
    else:
        results = [_build_record(topo, c, th, cfg, lab) for c, lab in zip(cases, labels)]

    descs = [CaseDescriptor.from_scenario(c.scenario, c.disturbance_node) for c in cases]
    scales = feature_scales(descs)
    records = tuple(
        OfflineRecord(d.with_scales(scales), c.scenario, params, critical, fitinfo, interp)
        for d, c, (params, critical, fitinfo, interp) in zip(descs, cases, results)
    )
    prov = {"fit_config": cfg.to_dict(), "topology": topo.to_dict()}
    prov.update(provenance or {})
    return OfflineTable(records, tuple(topo.node_ids), th, scales, prov)


@dataclass(frozen=True)
class Neighbor:
    record: OfflineRecord
    distance: float


def _record_key(r: OfflineRecord):
    return (r.case.features, tuple(r.h_eff.items()), tuple(r.h_cri.items()))


def select_neighbors(table: OfflineTable, online: CaseDescriptor, k: int = DEFAULT_NEIGHBORS) -> list:
    """The ``k`` nearest comparable records (same type and node), nearest first.

    Distances use the table's feature scales.  Records identical to one
    already chosen are skipped so duplicates never double a weight.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cands = [r for r in table.records if r.case.comparable(online)]
    if not cands:
        raise NoComparableCase(
            f"no offline case with type {online.disturbance_type!r} at node {online.disturbance_node!r}"
        )
    dists = [online.distance(r.case, table.scales) for r in cands]
    order = sorted(range(len(cands)), key=lambda i: dists[i])
    out, seen = [], set()
    for i in order:
        key = _record_key(cands[i])
        if key in seen:
            continue
        seen.add(key)
        out.append(Neighbor(cands[i], dists[i]))
        if len(out) == k:
            break
    return out


def interpolate_online(neighbors, online: CaseDescriptor | None = None) -> dict:
    """Per-node (effective, critical) inertia by inverse-distance weighting.

    A zero-distance neighbour is copied verbatim.  Duplicate records count once.
    """
    if not neighbors:
        raise EmptyNeighborSet("no neighbour records to interpolate from")
    uniq, seen = [], set()
    for nb in neighbors:
        key = _record_key(nb.record)
        if key not in seen:
            seen.add(key)
            uniq.append(nb)
    exact = [nb for nb in uniq if nb.distance == 0.0]
    if exact:
        r = exact[0].record
        return {n: (r.h_eff[n], r.h_cri[n]) for n in r.params}
    dists = [nb.distance for nb in uniq]
    out = {}
    for n in uniq[0].record.params:
        rows = [(nb.record.h_eff[n], nb.record.h_cri[n]) for nb in uniq]
        h_eff, h_cri = idw_average(rows, dists)
        out[n] = (float(h_eff), float(h_cri))
    return out


@dataclass
class Assessment:
    index: SecurityIndex
    inertia: dict
    neighbors: list
    online: CaseDescriptor

    @property
    def verdict(self) -> str:
        return self.index.verdict

    def to_dict(self):
        d = self.index.to_dict()
        d["online_case"] = self.online.to_dict()
        d["nodes"] = [
            {"node": n, "h_on": h, "h_cri": c, "kappa": self.index.per_node[n]}
            for n, (h, c) in self.inertia.items()
        ]
        d["neighbors"] = [
            {"case": nb.record.case.to_dict(), "distance": nb.distance} for nb in self.neighbors
        ]
        return d


def assess(table: OfflineTable, online: CaseDescriptor, k: int = DEFAULT_NEIGHBORS) -> Assessment:
    """Nearest offline cases, interpolated inertia, then the per-node and system index."""
    neighbors = select_neighbors(table, online, k)
    inertia = interpolate_online(neighbors, online)
    index = security_index({n: v[0] for n, v in inertia.items()}, {n: v[1] for n, v in inertia.items()})
    return Assessment(index, inertia, neighbors, online)
