"""Post-processing: error norms, melt-pool metrics, iteration statistics and energy bookkeeping."""

from collections import OrderedDict
import csv
from dataclasses import asdict, dataclass
import io

import numpy as np

from .latent_heat import ApparentCapacity, HeatIntegration
from .material import PiecewiseLinear
from .solver import source_vector


def max_error_norm(T_fem, T_ref, T_0, T_wall):
    """``max |T_fem - T_ref| / |T_0 - T_wall|`` over all nodes."""
    T_fem = np.asarray(T_fem, dtype=float)
    T_ref = np.asarray(T_ref, dtype=float)
    if T_fem.shape != T_ref.shape:
        raise ValueError(f"shape mismatch: {T_fem.shape} vs {T_ref.shape}")
    scale = abs(float(T_0) - float(T_wall))
    if scale == 0:
        raise ValueError("T_0 and T_wall must differ")
    return float(np.max(np.abs(T_fem - T_ref)) / scale)


# ----------------------------------------------------------------------------- melt pool


@dataclass(frozen=True)
class MeltPoolMetrics:
    length: float
    width: float
    depth: float
    peak_temperature: float
    empty: bool = False

    def as_dict(self):
        return asdict(self)


def structured_grid(mesh, values):
    """Axis coordinates and ``values`` rearranged on the tensor grid of the node coordinates.

    Uses coordinates only, so the result does not depend on node numbering.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got shape {values.shape}")
    axes, index = [], []
    for d in range(mesh.dim):
        c = mesh.nodes[:, d]
        ax = np.unique(np.round(c, 12))
        axes.append(ax)
        index.append(np.clip(np.searchsorted(ax, np.round(c, 12)), 0, len(ax) - 1))
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != mesh.n_nodes:
        raise ValueError("nodes do not form a tensor-product grid")
    grid = np.full(shape, np.nan)
    grid[tuple(index)] = values
    if np.isnan(grid).any():
        raise ValueError("nodes do not form a tensor-product grid")
    return axes, grid


def _extent(axes, grid, level, axis):
    """Lowest and highest coordinate of the superlevel set along ``axis``."""
    coord = axes[axis]
    shape = [1] * grid.ndim
    shape[axis] = len(coord)
    c = np.broadcast_to(coord.reshape(shape), grid.shape)
    above = grid >= level
    lo = [c[above].min()]
    hi = [c[above].max()]
    a = np.moveaxis(grid, axis, 0)
    ca = np.moveaxis(c, axis, 0)
    v0, v1 = a[:-1], a[1:]
    c0, c1 = ca[:-1], ca[1:]
    cross = (v0 >= level) != (v1 >= level)
    if np.any(cross):
        t = (level - v0[cross]) / (v1[cross] - v0[cross])
        xc = c0[cross] + t * (c1[cross] - c0[cross])
        lo.append(xc.min())
        hi.append(xc.max())
    return min(lo), max(hi)


def melt_pool_metrics(T, mesh, T_m, half_domain=True):
    """Length (x), width (y) and depth (z) of the region with ``T >= T_m``.

    Boundaries are located by linear interpolation along grid lines. For a
    half-domain model (symmetry plane at the lower ``y`` bound) the width is
    doubled. On line meshes only the length is defined.
    """
    T = np.asarray(T, dtype=float)
    peak = float(T.max())
    if not np.any(T >= T_m):
        return MeltPoolMetrics(0.0, 0.0, 0.0, peak, empty=True)
    axes, grid = structured_grid(mesh, T)
    x0, x1 = _extent(axes, grid, T_m, 0)
    if mesh.dim == 1:
        return MeltPoolMetrics(float(x1 - x0), 0.0, 0.0, peak)
    y0, y1 = _extent(axes, grid, T_m, 1)
    z0, z1 = _extent(axes, grid, T_m, 2)
    width = (y1 - y0) * (2.0 if half_domain else 1.0)
    return MeltPoolMetrics(float(x1 - x0), float(width), float(z1 - z0), peak)


# ----------------------------------------------------------------------------- profiles


def line_profile(mesh, values, axis=0, at=None):
    """Nodal values along the grid line parallel to ``axis`` through ``at``.

    ``at`` gives the coordinates of the other axes (nearest grid line is used);
    it defaults to the lower bound of each. Returns ``(coordinates, values)``.
    """
    axes, grid = structured_grid(mesh, values)
    sel = []
    for d, ax in enumerate(axes):
        if d == axis:
            sel.append(slice(None))
        else:
            target = ax[0] if at is None else at[d]
            sel.append(int(np.argmin(np.abs(ax - target))))
    return axes[axis].copy(), grid[tuple(sel)].copy()


def reversals(values, trend=None):
    """Sizes of moves against the overall trend of a profile.

    Consecutive turning points are located (plateaus ignored); every swing
    whose direction opposes ``trend`` (+1 rising, -1 falling; default: sign of
    last minus first value) is reported by its magnitude.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return np.zeros(0)
    d = np.diff(v)
    d = d[d != 0]
    if d.size == 0:
        return np.zeros(0)
    if trend is None:
        trend = np.sign(v[-1] - v[0]) or 1.0
    # indices of turning points in the plateau-free sequence
    w = v[np.concatenate([[True], np.diff(v) != 0])]
    s = np.sign(np.diff(w))
    turns = np.concatenate([[0], np.flatnonzero(s[1:] != s[:-1]) + 1, [len(w) - 1]])
    swings = np.diff(w[turns])
    return np.abs(swings[np.sign(swings) == -np.sign(trend)])


def oscillation_count(values, threshold, trend=None):
    """Number of reversals larger than ``threshold``."""
    return int(np.sum(reversals(values, trend) > threshold))


# ----------------------------------------------------------------------------- iterations


STAT_COLUMNS = ("step", "time_s", "dt_s", "newton_iters", "scheme", "converged")


def statistics_rows(result):
    return [
        (r.step, f"{r.time:.10g}", f"{r.dt:.10g}", r.iterations, r.scheme, int(bool(r.converged)))
        for r in result.records
    ]


def write_statistics(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STAT_COLUMNS)
        w.writerows(statistics_rows(result))


def read_statistics(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["step"] = int(r["step"])
        r["time_s"] = float(r["time_s"])
        r["dt_s"] = float(r["dt_s"])
        r["newton_iters"] = int(r["newton_iters"])
        r["converged"] = bool(int(r["converged"]))
    return rows


REPORT_COLUMNS = ("scheme", "mesh", "dt_s", "runs", "steps", "avg_iters", "total_iters", "failed_steps")


def iteration_report(results):
    """Per-group Newton statistics, grouped by scheme, mesh and initial step.

    Each entry of ``results`` is either a SimulationResult (grouping keys read
    from its metadata: ``scheme``, ``mesh``, ``dt0``) or a mapping with keys
    ``scheme``, ``mesh``, ``dt_s`` and ``iterations`` (per converged step) plus
    optional ``failed_steps``. Groups appear in first-seen order; groups
    without any run are simply absent.
    """
    if not results:
        raise ValueError("iteration_report needs at least one result")
    groups = OrderedDict()
    for res in results:
        if isinstance(res, dict):
            key = (str(res["scheme"]), str(res["mesh"]), float(res["dt_s"]))
            its = np.asarray(res["iterations"], dtype=int)
            failed = int(res.get("failed_steps", 0))
        else:
            meta = res.metadata
            key = (str(meta.get("scheme")), str(meta.get("mesh", "")), float(meta.get("dt0", np.nan)))
            its = res.iterations
            failed = len(res.records) - len(res.converged_records)
        g = groups.setdefault(key, {"runs": 0, "iters": [], "failed": 0})
        g["runs"] += 1
        g["iters"].append(its)
        g["failed"] += failed
    rows = []
    for (scheme, mesh, dt), g in groups.items():
        its = np.concatenate(g["iters"]) if g["iters"] else np.zeros(0, dtype=int)
        rows.append(
            {
                "scheme": scheme,
                "mesh": mesh,
                "dt_s": dt,
                "runs": g["runs"],
                "steps": int(its.size),
                "avg_iters": float(its.mean()) if its.size else float("nan"),
                "total_iters": int(its.sum()),
                "failed_steps": g["failed"],
            }
        )
    return rows


def report_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "avg_iters": f"{r['avg_iters']:.6g}", "dt_s": f"{r['dt_s']:.10g}"})
    return buf.getvalue()


def report_table(rows):
    """Aligned plain-text rendering of :func:`iteration_report` rows."""
    cells = [list(REPORT_COLUMNS)]
    for r in rows:
        cells.append(
            [
                r["scheme"],
                r["mesh"],
                f"{r['dt_s']:g}",
                str(r["runs"]),
                str(r["steps"]),
                f"{r['avg_iters']:.2f}",
                str(r["total_iters"]),
                str(r["failed_steps"]),
            ]
        )
    widths = [max(len(row[i]) for row in cells) for i in range(len(REPORT_COLUMNS))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------- energy


def _constant(prop, name):
    if isinstance(prop, PiecewiseLinear):
        raise NotImplementedError(f"energy bookkeeping needs a constant {name}")
    return float(prop)


def _ramp_integral(T, T_s, T_l):
    """Integral of the clamped liquid-fraction ramp from far below ``T_s`` up to ``T``."""
    T = np.asarray(T, dtype=float)
    if T_l <= T_s:
        return np.maximum(T - T_s, 0.0)
    w = T_l - T_s
    inside = np.clip(T, T_s, T_l)
    return (inside - T_s) ** 2 / (2.0 * w) + np.maximum(T - T_l, 0.0)


def _bump_integral(s, bump):
    s = np.clip(s, 0.0, 1.0)
    if bump == "quartic":
        return 10.0 * s**3 - 15.0 * s**4 + 6.0 * s**5
    return s - np.sin(2.0 * np.pi * s) / (2.0 * np.pi)


def sensible_enthalpy(T, material, T_ref):
    """Volumetric sensible enthalpy of fully consolidated material relative to ``T_ref``.

    Capacity is ``C_s`` below and ``C_m`` above the phase change, blended with
    the temperature-based liquid fraction over ``[T_s, T_l]`` (a step at
    ``T_m`` for isothermal materials). Constant capacities only.
    """
    C_s = _constant(material.C_s, "C_s")
    C_m = _constant(material.C_m, "C_m")
    T_s, T_l = (material.T_s, material.T_l) if not material.isothermal else (material.T_m, material.T_m)
    G = _ramp_integral(T, T_s, T_l) - _ramp_integral(T_ref, T_s, T_l)
    return C_s * (np.asarray(T, dtype=float) - T_ref) + (C_m - C_s) * G


def latent_enthalpy(T, scheme, H_m):
    """Latent heat stored under the apparent-capacity bump at temperature ``T``."""
    s = (np.asarray(T, dtype=float) - scheme.T_s) / (scheme.T_l - scheme.T_s)
    return H_m * _bump_integral(s, scheme.bump)


def mixture_enthalpy(T, g, material, T_ref):
    """Enthalpy of a solid/liquid mixture with liquid fraction ``g`` at temperature ``T``.

    ``C_s (T_m - T_ref) + ((1 - g) C_s + g C_m) (T - T_m) + g H_m``; its
    temperature derivative is the blended capacity used with a latent-heat
    ledger, and it reduces to the single-phase enthalpies for g in {0, 1}.
    """
    C_s = _constant(material.C_s, "C_s")
    C_m = _constant(material.C_m, "C_m")
    T = np.asarray(T, dtype=float)
    g = np.asarray(g, dtype=float)
    return C_s * (material.T_m - T_ref) + ((1.0 - g) * C_s + g * C_m) * (T - material.T_m) + g * material.H_m


def energy_content(problem, state, config, T_ref=None):
    """Total enthalpy (sensible plus latent) of fully consolidated material, in J per unit cross-section or J.

    The sensible part is a state function of temperature: consistent capacity
    integrates at quadrature points, lumped capacity uses nodal pseudo-masses.
    Apparent capacity adds the integral of its bump. Heat integration adds the
    ledger ``g_j H_m m_j``; for isothermal heat integration, whose capacity is
    blended by the ledger fraction, the mixture enthalpy is used instead.
    """
    mesh = problem.mesh
    mat = problem.material
    T_ref = mat.T_m if T_ref is None else T_ref
    scheme = problem.scheme
    T = np.asarray(state.T, dtype=float)
    geo = mesh.geometry
    if isinstance(scheme, HeatIntegration) and state.hi is not None and scheme.mode == "isothermal":
        gq = state.hi.liquid_fraction[mesh.elements] @ geo.N.T
        # sum_j sum_q w_q N_j(q) h(T_j, g_q): the lumped capacity rows exactly
        h = mixture_enthalpy(T[mesh.elements][:, None, :], gq[:, :, None], mat, T_ref)
        return float(np.einsum("eq,qa,eqa->", geo.wdet, geo.N, h))
    if config.capacity_form(scheme) == "lumped":
        weights, values = mesh.pseudo_mass, T
    else:
        weights, values = geo.wdet.ravel(), (T[mesh.elements] @ geo.N.T).ravel()
    h = sensible_enthalpy(values, mat, T_ref)
    if isinstance(scheme, ApparentCapacity):
        h = h + latent_enthalpy(values, scheme, mat.H_m)
    energy = float(np.sum(weights * h))
    if isinstance(scheme, HeatIntegration) and state.hi is not None:
        energy += float(np.sum(state.hi.liquid_fraction * mat.H_m * mesh.pseudo_mass))
    return energy


def source_energy(problem, records, theta=1.0):
    """Time integral of the applied volumetric sources over the accepted steps."""
    total = 0.0
    for r in records:
        if not r.converged or not problem.sources:
            continue
        t0 = r.time - r.dt
        total += r.dt * float(np.sum(source_vector(problem, t0 + theta * r.dt)))
    return total
