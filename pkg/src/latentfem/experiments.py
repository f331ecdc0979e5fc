"""Experiment cases: solidification front, melting volume and single-track laser scan.

:func:`build_case` turns an :class:`~latentfem.config.ExperimentConfig` into a
ready-to-run problem; :func:`run` executes it and writes the output files.
"""

from dataclasses import dataclass, field, replace
import json
import logging
from pathlib import Path
import time

import numpy as np

from . import postproc
from .config import snapshot_times
from .laser import LaserBeam, volumetric_source
from .latent_heat import ApparentCapacity, HeatIntegration, NoLatentHeat
from .material import steel_316l, water
from .mesh import build_layered_hex_mesh, build_line_mesh
from .solver import HeatProblem, SolverConfig, TimeController, VolumetricSource, advance, initial_state
from .stefan import StefanProblem, temperature_at

logger = logging.getLogger(__name__)


@dataclass
class Case:
    """Everything needed to run and evaluate one configured experiment."""

    config: object
    problem: HeatProblem
    solver: SolverConfig
    dt0: float
    t_end: float
    adaptive: bool
    dt_min: float = None
    double_after: int = 4
    beam: LaserBeam = None
    stefan: StefanProblem = None
    mesh_label: str = ""
    extras: dict = field(default_factory=dict)


def make_scheme(cfg, T_m, interval):
    kind = cfg["scheme.type"]
    if kind == "none":
        return NoLatentHeat()
    if kind == "ac":
        d = cfg.get("scheme.d")
        if d is not None:
            return ApparentCapacity.isothermal(T_m, d, cfg["scheme.bump"])
        return ApparentCapacity(interval[0], interval[1], cfg["scheme.bump"])
    eps = cfg["scheme.eps_tol"] if cfg["scheme.criterion"] == "tolerance" else None
    return HeatIntegration(cfg["scheme.mode"], cfg["scheme.criterion"], eps)


def _material_overrides(cfg, base):
    changes = {}
    for key in ("T_m", "H_m", "C_s", "C_m", "k_s", "k_m", "C_p"):
        v = cfg.values.get(f"material.{key}")
        if v is not None:
            changes[key] = v
    T_s, T_l = cfg.values.get("material.T_s"), cfg.values.get("material.T_l")
    if T_s is not None or T_l is not None:
        changes["T_s"] = T_s if T_s is not None else base.T_s
        changes["T_l"] = T_l if T_l is not None else base.T_l
    return replace(base, **changes) if changes else base


def solver_config(cfg):
    s = cfg.section("solver")
    return SolverConfig(**s)


def _water_case(cfg):
    interval = (cfg["material.interval_T_s"], cfg["material.interval_T_l"])
    material = _material_overrides(cfg, water(*interval))
    scheme = make_scheme(cfg, material.T_m, interval)
    if isinstance(scheme, HeatIntegration) and scheme.mode == "mushy":
        material = material.with_interval(*interval)
    mesh = build_line_mesh(cfg["mesh.length"], cfg["mesh.n_elements"])
    return material, scheme, mesh


def build_case(cfg):
    """Problem, solver settings and time window for a resolved configuration."""
    common = dict(
        solver=solver_config(cfg),
        dt0=cfg["time.dt0"],
        t_end=cfg["time.t_end"],
        adaptive=cfg["time.adaptive"],
        dt_min=cfg.values.get("time.dt_min"),
        double_after=cfg["time.double_after"],
    )
    if cfg.case == "front_1d":
        material, scheme, mesh = _water_case(cfg)
        T_wall, T_0 = cfg["case.T_wall"], cfg["case.T_0"]
        problem = HeatProblem(mesh, material, scheme, T_0, {"left": T_wall})
        stefan = StefanProblem(
            T_wall=T_wall, T_0=T_0, T_m=material.T_m, C_s=float(material.C_s), C_l=float(material.C_m),
            k_s=float(material.k_s), k_l=float(material.k_m), H_m=material.H_m,
        )
        return Case(cfg, problem, stefan=stefan, mesh_label=str(cfg["mesh.n_elements"]), **common)
    if cfg.case == "meltvol_1d":
        material, scheme, mesh = _water_case(cfg)
        amp, length = cfg["case.source_amplitude"], cfg["mesh.length"]
        src = VolumetricSource(lambda p, t: amp * (1.0 - p[..., 0] / length))
        problem = HeatProblem(mesh, material, scheme, cfg["case.T_0"], {}, sources=(src,))
        return Case(cfg, problem, mesh_label=str(cfg["mesh.n_elements"]), **common)
    # single track
    L = cfg["mesh.layer_thickness"]
    n = cfg["mesh.elements_per_layer"]
    mesh = build_layered_hex_mesh(
        (cfg["mesh.extent_x"], cfg["mesh.extent_y"], cfg["mesh.extent_z"]), L, L / n, cfg["mesh.substrate_z_factor"]
    )
    material = _material_overrides(cfg, steel_316l())
    scheme = make_scheme(cfg, material.T_m, None)
    beam = LaserBeam(
        power=cfg["laser.power"],
        radius=cfg["laser.radius"],
        speed=cfg["laser.speed"],
        reflectivity=cfg["laser.reflectivity"],
        extinction=cfg["laser.extinction"],
        layer_thickness=L,
        start=(cfg["laser.start_x"], 0.0),
        variant=cfg["laser.variant"],
    )
    src = VolumetricSource(lambda p, t: volumetric_source(p, t, beam), mesh.element_sets["powder"])
    r_c = np.zeros(mesh.n_elements)
    r_c[mesh.element_sets["substrate"]] = 1.0
    T_0 = cfg["case.T_0"]
    problem = HeatProblem(mesh, material, scheme, T_0, {"x1": T_0}, sources=(src,), initial_consolidated=r_c)
    label = "x".join(str(len(a) - 1) for a in mesh.axes)
    return Case(cfg, problem, beam=beam, mesh_label=label, **common)


class SteadyStateMonitor:
    """Tracks melt-pool metrics and flags a steady pool.

    The pool counts as steady once the mean length over the trailing
    ``window`` differs by at most ``rtol`` from the mean over the window
    before it (and ``min_time`` has passed). Comparing means rather than
    single values keeps the test insensitive to the one-element jitter of the
    pool tail. ``stop`` makes the observer end the march at that point.
    """

    def __init__(self, mesh, T_m, window, rtol, min_time=0.0, stop=True):
        self.mesh, self.T_m = mesh, T_m
        self.window, self.rtol, self.min_time, self.stop = window, rtol, min_time, stop
        self.history = []
        self.steady_time = None
        self.metrics = None

    def __call__(self, state, record):
        m = postproc.melt_pool_metrics(state.T, self.mesh, self.T_m)
        self.history.append((state.time, m))
        self.metrics = m
        if self.steady_time is None and self._steady(state.time, m):
            self.steady_time = state.time
            return self.stop
        return False

    def _steady(self, t, m):
        if m.empty or t < self.min_time or t - self.history[0][0] < 2.0 * self.window:
            return False
        recent = [h.length for (s, h) in self.history if s > t - self.window]
        before = [h.length for (s, h) in self.history if t - 2.0 * self.window < s <= t - self.window]
        if not before:
            return False
        a, b = np.mean(recent), np.mean(before)
        return abs(a - b) <= self.rtol * a


class SnapshotRecorder:
    """Keeps copies of the temperature field at the first accepted step at or after each requested time."""

    def __init__(self, times):
        self.pending = sorted(times)
        self.snapshots = {}

    def __call__(self, state, record):
        while self.pending and state.time >= self.pending[0] * (1.0 - 1e-12):
            self.snapshots[self.pending.pop(0)] = (state.time, state.T.copy())
        return False


def _chain(*observers):
    def observe(state, record):
        stop = False
        for obs in observers:
            if obs is not None:
                stop = bool(obs(state, record)) or stop
        return stop

    return observe


def simulate_case(case):
    """Run a built case; returns the SimulationResult with case metrics in ``metadata``."""
    cfg = case.config
    problem = case.problem
    state = initial_state(problem, case.dt0)
    E0 = postproc.energy_content(problem, state, case.solver) if cfg.case == "meltvol_1d" else None
    controller = TimeController(case.dt0, adaptive=case.adaptive, dt_min=case.dt_min, double_after=case.double_after)
    snaps = SnapshotRecorder(snapshot_times(cfg))
    monitor = None
    if cfg.case == "single_track":
        monitor = SteadyStateMonitor(
            problem.mesh, problem.material.T_m, cfg["steady.window"], cfg["steady.rtol"], cfg["steady.min_time"]
        )
    start = time.perf_counter()
    result = advance(problem, state, controller, case.solver, case.t_end, observer=_chain(snaps, monitor))
    runtime = time.perf_counter() - start
    result.snapshots = snaps.snapshots
    meta = result.metadata
    meta.update(case=cfg.case, mesh=case.mesh_label, runtime_s=runtime)
    metrics = {}
    T = result.state.T
    if cfg.case == "front_1d" and result.status != "failed":
        x = problem.mesh.nodes[:, 0]
        ref = temperature_at(case.stefan, x, result.state.time)
        metrics["max_error_norm"] = postproc.max_error_norm(T, ref, case.stefan.T_0, case.stefan.T_wall)
        metrics["right_edge_deviation_K"] = float(abs(T[-1] - case.stefan.T_0))
        metrics["semi_infinite_valid"] = bool(metrics["right_edge_deviation_K"] <= 1e-3)
    if cfg.case == "meltvol_1d":
        E1 = postproc.energy_content(problem, result.state, case.solver)
        Q = postproc.source_energy(problem, result.records, case.solver.theta)
        metrics.update(energy_change=E1 - E0, source_energy=Q, energy_error_rel=(E1 - E0 - Q) / Q if Q else None)
        if result.state.hi is not None:
            latent = float(np.sum(result.state.hi.liquid_fraction * problem.mesh.pseudo_mass) * problem.material.H_m)
            metrics["latent_absorbed"] = latent
    if cfg.case == "single_track":
        pool = monitor.metrics or postproc.melt_pool_metrics(T, problem.mesh, problem.material.T_m)
        metrics.update({f"pool_{k}": v for k, v in pool.as_dict().items()})
        metrics["steady_state_time_s"] = monitor.steady_time
        metrics["sampled_time_s"] = result.state.time
    meta["metrics"] = metrics
    return result


def _snapshot_rows(mesh, T):
    nodes = np.zeros((mesh.n_nodes, 3))
    nodes[:, : mesh.dim] = mesh.nodes
    return nodes, T


def write_snapshot_csv(path, mesh, T):
    nodes, T = _snapshot_rows(mesh, T)
    with open(path, "w") as fh:
        fh.write("node_id,x,y,z,T\n")
        for i in range(mesh.n_nodes):
            fh.write(f"{i},{nodes[i, 0]:.10g},{nodes[i, 1]:.10g},{nodes[i, 2]:.10g},{T[i]:.10g}\n")


def write_vtk(path, mesh, T, title="temperature"):
    """Legacy ASCII structured-grid file of a tensor-product hex mesh."""
    axes, grid = postproc.structured_grid(mesh, T)
    nx, ny, nz = (len(a) for a in axes)
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    # VTK orders points with x fastest
    order = lambda a: np.transpose(a, (2, 1, 0)).ravel()
    with open(path, "w") as fh:
        fh.write(f"# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET STRUCTURED_GRID\n")
        fh.write(f"DIMENSIONS {nx} {ny} {nz}\nPOINTS {nx * ny * nz} double\n")
        for x, y, z in zip(order(X), order(Y), order(Z)):
            fh.write(f"{x:.10g} {y:.10g} {z:.10g}\n")
        fh.write(f"POINT_DATA {nx * ny * nz}\nSCALARS T double 1\nLOOKUP_TABLE default\n")
        for v in order(grid):
            fh.write(f"{v:.10g}\n")


def write_outputs(case, result, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = case.problem.mesh
    postproc.write_statistics(out / "statistics.csv", result)
    (out / "config.resolved").write_text(case.config.to_text())
    frames = dict(result.snapshots)
    frames["final"] = (result.state.time, result.state.T)
    vtk = case.config.get("output.vtk", False) and mesh.dim == 3
    for i, (label, (t, T)) in enumerate(sorted(frames.items(), key=lambda kv: kv[1][0])):
        stem = "snapshot_final" if label == "final" else f"snapshot_{i:03d}"
        write_snapshot_csv(out / f"{stem}.csv", mesh, T)
        if vtk:
            write_vtk(out / f"{stem}.vtk", mesh, T, title=f"T at t={t:.6g} s")
    meta = dict(result.metadata)
    meta.update(
        status=result.status,
        message=result.message,
        label=case.config.get("output.label", ""),
        steps=len(result.converged_records),
        failed_steps=len(result.records) - len(result.converged_records),
        average_iterations=result.average_iterations,
        total_iterations=result.total_iterations,
        final_time_s=result.state.time,
        snapshot_times_s={("final" if k == "final" else repr(k)): v[0] for k, v in frames.items()},
    )
    with open(out / "metrics.json", "w") as fh:
        json.dump(_jsonable(meta), fh, indent=2, sort_keys=True)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def default_output_dir(cfg):
    if cfg.get("output.dir"):
        return Path(cfg["output.dir"])
    stem = Path(cfg.source).stem if cfg.source and not cfg.source.startswith("<") else cfg.case
    return Path("results") / stem


def run(cfg, out_dir=None):
    """Build, simulate and write outputs; returns ``(result, output directory)``."""
    case = build_case(cfg)
    result = simulate_case(case)
    out = write_outputs(case, result, out_dir or default_output_dir(cfg))
    return result, out
