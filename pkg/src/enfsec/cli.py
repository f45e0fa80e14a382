"""Command-line front end: simulate, fit, table-build, assess, demo.

Usage:
    enfsec simulate --config run.json --out results
    enfsec fit --config run.json --out results
    enfsec table-build --config run.json --out results --jobs 2
    enfsec assess --config run.json --case online.json [--build-table]
    enfsec demo --out demo_out

Exit codes: 0 success, 2 configuration, 3 simulation, 4 fit, 5 assessment.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import errors as E
from .assessment import (
    DEFAULT_NEIGHBORS,
    CaseDescriptor,
    FitConfig,
    OfflineCase,
    OfflineTable,
    assess,
    build_offline_table,
    noise_seed,
)
from .core import OMEGA_0, _deviation
from .fitting import filter_trajectory, fit_error_percent, fit_node, interpolate_params
from .io import FORMAT_VERSION, read_json, read_trajectory_csv, write_columns_csv, write_json, write_trajectory_csv
from .refsim import NetworkTopology, simulate_node, synthesize_pmu
from .security import SecurityThresholds

log = logging.getLogger("enfsec")

EXIT_OK, EXIT_CONFIG, EXIT_SIM, EXIT_FIT, EXIT_ASSESS = 0, 2, 3, 4, 5

_EXIT_FOR = [
    ((E.Unstable, E.NonPositiveParameter), EXIT_SIM),
    ((E.NoFeasibleStart, E.WindowMismatch, E.EmptyTrajectory, E.ZeroDeviation, E.NotUnderdamped, E.NoFittedNeighbor), EXIT_FIT),
    ((E.BracketError, E.MonotonicityError, E.NoComparableCase, E.EmptyNeighborSet, E.KeyMismatch), EXIT_ASSESS),
    ((E.ConfigError, E.InvalidScenario), EXIT_CONFIG),
]


class CommandFailed(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    topology: NetworkTopology
    scenarios: list
    grid: list
    thresholds: SecurityThresholds
    fit: FitConfig
    out: Path
    seed: int = 0
    neighbors: int = DEFAULT_NEIGHBORS
    table: Path | None = None
    trajectories: Path | None = None
    online_case: Path | None = None
    source: dict = field(default_factory=dict)

    @property
    def traj_dir(self) -> Path:
        return self.trajectories or self.out / "trajectories"

    @property
    def table_path(self) -> Path:
        return self.table or self.out / "offline_table.json"


def _resolve(base: Path, value):
    p = Path(value)
    return p if p.is_absolute() else base / p


def _section(base: Path, value, what: str):
    """Inline JSON value, or a path to a JSON file holding it."""
    if isinstance(value, str):
        return read_json(_resolve(base, value))
    if value is None:
        raise E.ConfigError(f"config is missing '{what}'")
    return value


def _cases(raw) -> list:
    items = raw["cases"] if isinstance(raw, dict) else raw
    return [OfflineCase.from_dict(c) for c in items]


def load_config(path, out=None, seed=None) -> RunConfig:
    path = Path(path)
    doc = read_json(path)
    base = path.parent
    try:
        topo = NetworkTopology.from_dict(_section(base, doc.get("topology"), "topology"))
        scenarios = _cases(_section(base, doc.get("scenarios"), "scenarios"))
        grid = _cases(_section(base, doc["grid"], "grid")) if "grid" in doc else scenarios
        th = SecurityThresholds.from_dict(_section(base, doc.get("thresholds", {}), "thresholds"))
        fit = FitConfig.from_dict(doc.get("fit"))
    except E.ConfigError:
        raise
    except KeyError as exc:
        raise E.ConfigError(f"{path}: missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise E.ConfigError(f"{path}: {exc}") from exc
    seed = int(doc.get("seed", 0) if seed is None else seed)
    fit = replace(fit, seed=seed)
    out_dir = Path(out) if out else _resolve(base, doc.get("out", "out"))

    def opt(key):
        return _resolve(base, doc[key]) if doc.get(key) else None

    return RunConfig(
        topo, scenarios, grid, th, fit, out_dir, seed, int(doc.get("neighbors", DEFAULT_NEIGHBORS)),
        opt("table"), opt("trajectories"), opt("online_case"), doc,
    )


def _traj_name(i: int, node: str) -> str:
    return f"s{i:02d}_{node}.csv"


def cmd_simulate(cfg: RunConfig, plots: bool = True) -> dict:
    """One PMU-style CSV per (scenario, node) plus a manifest."""
    d = cfg.traj_dir
    d.mkdir(parents=True, exist_ok=True)
    topo = cfg.topology
    files = []
    for i, case in enumerate(cfg.scenarios):
        horizon = cfg.fit.horizon_for(topo, case.scenario)
        series = {}
        for idx, node in enumerate(topo.node_ids):
            spec = topo.nodes[node]
            traj = simulate_node(spec.params, spec.modulation, case.scenario, horizon, cfg.fit.dt, node)
            traj = synthesize_pmu(traj, cfg.fit.noise_sigma, noise_seed(cfg.seed, idx))
            name = _traj_name(i, node)
            write_trajectory_csv(d / name, traj)
            files.append({"scenario": i, "node": node, "measured": spec.measured, "path": name})
            series[node] = (traj.t, traj.omega)
        if plots:
            from .plotting import plot_trajectories

            plot_trajectories(d / f"s{i:02d}_trajectories.png", series, f"scenario {i}")
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": cfg.seed,
        "noise_sigma": cfg.fit.noise_sigma,
        "dt": cfg.fit.dt,
        "scenarios": [c.to_dict() for c in cfg.scenarios],
        "files": files,
    }
    write_json(d / "manifest.json", manifest)
    log.info("wrote %d trajectories to %s", len(files), d)
    return manifest


def cmd_fit(cfg: RunConfig, plots: bool = True) -> dict:
    """Fit measured nodes, interpolate the rest, write report and overlay data."""
    d = cfg.traj_dir
    if not (d / "manifest.json").is_file():
        raise E.ConfigError(f"no trajectories found in {d} (missing manifest.json)")
    manifest = read_json(d / "manifest.json")
    if not manifest.get("files"):
        raise E.ConfigError(f"trajectory manifest in {d} lists no files")
    topo = cfg.topology
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    report = {"format_version": FORMAT_VERSION, "seed": cfg.seed, "fit_config": cfg.fit.to_dict(), "scenarios": []}
    failed = []
    for i, case_doc in enumerate(manifest["scenarios"]):
        case = OfflineCase.from_dict(case_doc)
        scn = case.scenario
        observed = {
            f["node"]: read_trajectory_csv(d / f["path"], f["node"]) for f in manifest["files"] if f["scenario"] == i
        }
        filtered = {
            n: filter_trajectory(tr, cfg.fit.filter_window) if cfg.fit.filter_window > 0 else tr
            for n, tr in observed.items()
        }
        nodes, fitted = {}, {}
        for node in topo.measured:
            if node not in filtered:
                raise E.ConfigError(f"scenario {i}: no trajectory for measured node {node!r}")
            try:
                res = fit_node(filtered[node], scn, cfg.fit.x0, cfg.fit.weights, cfg.fit.max_iter, cfg.fit.ftol, cfg.fit.xtol)
            except E.EnfError as exc:
                raise type(exc)(f"scenario {i}, node {node!r}: {exc}") from exc
            fitted[node] = res.params
            nodes[node] = {**res.to_dict(), "interpolated": False}
            if not res.converged:
                failed.append((i, node))
        for node in topo.unmeasured:
            p = interpolate_params(node, topo, fitted)
            fitted[node] = p
            entry = {"params": p.to_dict(), "interpolated": True}
            if node in filtered:
                entry["error_percent"] = fit_error_percent(p, filtered[node], scn)
            nodes[node] = entry
        for node, p in fitted.items():
            if node not in observed:
                continue
            tr = observed[node]
            x, _ = _deviation(p, scn, tr.t)
            stem = f"overlay_s{i:02d}_{node}"
            write_columns_csv(
                out / f"{stem}.csv", ["t", "omega_actual", "omega_enf"], [tr.t, tr.omega, OMEGA_0 + x],
                ["{:.6f}", "{:.9f}", "{:.9f}"],
            )
            if plots:
                from .plotting import plot_overlay

                plot_overlay(out / f"{stem}.png", tr.t, tr.omega, OMEGA_0 + x, f"{node}, scenario {i}")
        report["scenarios"].append({"case": case.to_dict(), "nodes": {n: nodes[n] for n in topo.node_ids}})
    report["not_converged"] = [{"scenario": i, "node": n} for i, n in failed]
    write_json(out / "fit_report.json", report)
    if failed:
        raise CommandFailed(EXIT_FIT, f"{len(failed)} node fit(s) did not converge: {failed}")
    return report


def cmd_table_build(cfg: RunConfig, jobs: int = 1) -> OfflineTable:
    cfg.out.mkdir(parents=True, exist_ok=True)
    table = build_offline_table(
        cfg.topology, cfg.grid, cfg.thresholds, cfg.fit, jobs=jobs, provenance={"seed": cfg.seed}
    )
    cfg.table_path.parent.mkdir(parents=True, exist_ok=True)
    table.save(cfg.table_path)
    log.info("offline table with %d records written to %s", len(table.records), cfg.table_path)
    return table


def load_online_case(path) -> CaseDescriptor:
    """Either a descriptor (type, node, features) or a scenario placed at a node."""
    doc = read_json(path)
    try:
        if "scenario" in doc:
            c = OfflineCase.from_dict(doc)
            return CaseDescriptor.from_scenario(c.scenario, c.disturbance_node)
        return CaseDescriptor.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise E.ConfigError(f"{path}: not a valid online case ({exc})") from exc


def cmd_assess(cfg: RunConfig, case_path=None, build_table: bool = False, jobs: int = 1, plots: bool = True):
    case_path = case_path or cfg.online_case
    if case_path is None:
        raise E.ConfigError("assess needs an online case file (--case or 'online_case' in the config)")
    online = load_online_case(case_path)
    if build_table:
        table = cmd_table_build(cfg, jobs)
    else:
        if not cfg.table_path.is_file():
            raise E.ConfigError(f"offline table not found: {cfg.table_path} (run table-build or pass --build-table)")
        table = OfflineTable.load(cfg.table_path)
    result = assess(table, online, cfg.neighbors)
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    doc = {"format_version": FORMAT_VERSION, "seed": cfg.seed, "thresholds": table.thresholds.to_dict()}
    doc.update(result.to_dict())
    write_json(out / "assessment.json", doc)
    nodes = list(result.inertia)
    h_on = [result.inertia[n][0] for n in nodes]
    h_cri = [result.inertia[n][1] for n in nodes]
    kappa = [result.index.per_node[n] for n in nodes]
    write_columns_csv(
        out / "kappa_bars.csv", ["node", "H_on", "h_cri", "kappa"], [nodes, h_on, h_cri, kappa],
        ["{}", "{:.6f}", "{:.6f}", "{:.4f}"],
    )
    if plots:
        from .plotting import plot_inertia_bars

        plot_inertia_bars(out / "kappa_bars.png", nodes, h_on, h_cri, kappa, f"system kappa {result.index.system:+.2f}%")
    return result


def _print_assessment(result, label=""):
    prefix = f"[{label}] " if label else ""
    print(f"{prefix}kappa: {result.index.system:+.2f}%")
    if result.index.weak_nodes:
        print(f"{prefix}weak nodes: {', '.join(result.index.weak_nodes)}")
    print(f"{prefix}verdict: {result.verdict}")


def demo_config(out: Path, reduced: bool, seed: int) -> Path:
    """Write the bundled system's config files under ``out`` and return the config path."""
    from .demo import demo_grid, demo_online_case, demo_scenario, demo_thresholds, demo_topology, DISTURBANCE_NODE

    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "topology.json", demo_topology(reduced).to_dict())
    write_json(out / "scenarios.json", [OfflineCase(demo_scenario(), DISTURBANCE_NODE).to_dict()])
    write_json(out / "grid.json", [c.to_dict() for c in demo_grid()])
    write_json(out / "online_case.json", demo_online_case().to_dict())
    cfg = {
        "topology": "topology.json",
        "scenarios": "scenarios.json",
        "grid": "grid.json",
        "thresholds": demo_thresholds().to_dict(),
        "online_case": "online_case.json",
        "seed": seed,
        "out": ".",
    }
    write_json(out / "config.json", cfg)
    return out / "config.json"


def cmd_demo(out: Path, seed: int = 0, jobs: int = 1, plots: bool = True) -> dict:
    """Case I (base inertia) and case II (two nodes reduced), end to end."""
    results = {}
    for label, reduced in (("case_I", False), ("case_II", True)):
        cfg = load_config(demo_config(out / label, reduced, seed), seed=seed)
        cmd_simulate(cfg, plots)
        cmd_fit(cfg, plots)
        results[label] = cmd_assess(cfg, build_table=True, jobs=jobs, plots=plots)
        _print_assessment(results[label], label)
    return results


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for table building")
    common.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="enfsec", description="Nodal frequency security toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate PMU-style nodal trajectories")
    sub.add_parser("fit", parents=[common], help="fit ENF parameters to simulated trajectories")
    sub.add_parser("table-build", parents=[common], help="build the offline inertia table")
    p = sub.add_parser("assess", parents=[common], help="assess an online case against the table")
    p.add_argument("--case", help="online case JSON")
    p.add_argument("--build-table", action="store_true", help="build the offline table first")
    sub.add_parser("demo", parents=[common], help="run the bundled five-node example")
    return ap


def _exit_code(exc: Exception) -> int:
    for types, code in _EXIT_FOR:
        if isinstance(exc, types):
            return code
    return EXIT_CONFIG


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    plots = not args.no_plots
    try:
        if args.command == "demo":
            cmd_demo(Path(args.out or "demo_out"), args.seed or 0, args.jobs, plots)
            return EXIT_OK
        if not args.config:
            raise E.ConfigError(f"'{args.command}' needs --config")
        cfg = load_config(args.config, args.out, args.seed)
        if args.command == "simulate":
            cmd_simulate(cfg, plots)
        elif args.command == "fit":
            cmd_fit(cfg, plots)
        elif args.command == "table-build":
            cmd_table_build(cfg, args.jobs)
        elif args.command == "assess":
            _print_assessment(cmd_assess(cfg, args.case, args.build_table, args.jobs, plots))
    except CommandFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except E.EnfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
