"""One-step-theta finite element solver for transient heat conduction with phase change.

The discrete residual for a step from ``T_n`` to ``T`` reads::

    R(T) = M(T_th) (T - T_n) / dt + K(T_th) T_th - F(t_th) - q_p

with ``T_th = theta T + (1 - theta) T_n``. Capacity and conductivity come from
the phase-interpolated material (plus the capacity bump under AC); ``q_p`` is
the heat-integration source, which is deliberately left out of the Jacobian.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import check_node_vector, check_option, check_positive
from .latent_heat import (
    ApparentCapacity,
    HeatIntegration,
    HiNodeState,
    NoLatentHeat,
    apparent_capacity,
    hi_iteration,
    hi_modified_capacity,
    hi_totals,
)
from .material import effective_property, evaluate, liquid_fraction_T, PhaseState

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Raised when the step size controller cannot reduce the step any further."""


@dataclass
class SolverConfig:
    theta: float = 1.0
    rtol: float = 1e-6
    atol: float = 1e-10
    max_iter: int = 50
    capacity: str = "auto"
    linear_solver: str = "direct"
    linear_rtol: float = 1e-10
    # residual backtracking; heat integration always takes full steps
    line_search: bool = True
    max_backtracks: int = 8
    predictor: str = "extrapolate"

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        check_positive(self.rtol, "rtol")
        check_positive(self.atol, "atol")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        check_option(self.capacity, "capacity", {"auto", "consistent", "lumped"})
        check_option(self.linear_solver, "linear_solver", {"direct", "bicgstab"})
        check_option(self.predictor, "predictor", {"previous", "extrapolate"})

    def capacity_form(self, scheme):
        if isinstance(scheme, HeatIntegration):
            if self.capacity == "consistent":
                raise ValueError("heat integration requires the lumped capacity matrix")
            return "lumped"
        return "consistent" if self.capacity == "auto" else self.capacity

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class TimeController:
    """Halve on failure; double back (up to ``dt0``) after ``double_after`` good steps."""

    dt0: float
    adaptive: bool = False
    dt_min: Optional[float] = None
    double_after: int = 4
    dt: float = field(init=False)
    streak: int = field(init=False, default=0)

    def __post_init__(self):
        check_positive(self.dt0, "dt0")
        if not self.adaptive:
            self.dt_min = self.dt0
        elif self.dt_min is None:
            self.dt_min = self.dt0 / 2**10
        self.dt = self.dt0

    def failed(self):
        new = 0.5 * self.dt
        if new < self.dt_min * (1.0 - 1e-12):
            raise ConvergenceError(
                f"Newton failed at dt={self.dt:.6g} s and the step size floor is {self.dt_min:.6g} s"
            )
        self.dt = new
        self.streak = 0

    def succeeded(self):
        if self.dt < self.dt0:
            self.streak += 1
            if self.streak >= self.double_after:
                self.dt = min(2.0 * self.dt, self.dt0)
                self.streak = 0


@dataclass(frozen=True)
class VolumetricSource:
    """Heat source ``func(points, t) -> W/m^3`` restricted to an optional element subset."""

    func: Callable
    elements: Optional[np.ndarray] = None


@dataclass
class HeatProblem:
    mesh: object
    material: object
    scheme: object = field(default_factory=NoLatentHeat)
    initial_temperature: object = 293.0
    dirichlet: dict = field(default_factory=dict)
    sources: tuple = ()
    initial_consolidated: object = 1.0

    def __post_init__(self):
        for tag in self.dirichlet:
            self.mesh.node_set(tag)
        self.material = material_for_scheme(self.material, self.scheme)

    @property
    def fixed_nodes(self):
        if not self.dirichlet:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([self.mesh.node_set(t) for t in self.dirichlet]))

    def dirichlet_vector(self, T):
        T = np.array(T, dtype=float)
        for tag, value in self.dirichlet.items():
            T[self.mesh.node_set(tag)] = value
        return T


def material_for_scheme(material, scheme):
    """Attach the parameter-interpolation interval each scheme works with."""
    if isinstance(scheme, ApparentCapacity):
        return material.with_interval(scheme.T_s, scheme.T_l)
    if isinstance(scheme, HeatIntegration) and scheme.mode == "mushy" and material.isothermal:
        raise ValueError("mushy heat integration needs a material with T_s < T_l")
    return material


@dataclass
class TransientState:
    T: np.ndarray
    time: float
    phase: PhaseState
    hi: Optional[HiNodeState] = None
    hi_dt: Optional[float] = None
    step: int = 0
    rate: Optional[np.ndarray] = None  # dT/dt of the last accepted step


@dataclass
class StepRecord:
    step: int
    time: float
    dt: float
    iterations: int
    scheme: str
    converged: bool


@dataclass
class SimulationResult:
    records: list
    state: TransientState
    status: str = "completed"
    message: str = ""
    snapshots: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def converged_records(self):
        return [r for r in self.records if r.converged]

    @property
    def iterations(self):
        return np.array([r.iterations for r in self.converged_records], dtype=int)

    @property
    def total_iterations(self):
        return int(sum(r.iterations for r in self.records))

    @property
    def average_iterations(self):
        it = self.iterations
        return float(it.mean()) if len(it) else float("nan")

    @property
    def temperature(self):
        return self.state.T


def _scheme_name(scheme):
    return scheme.name


def hi_parameters(problem):
    """Solidus/liquidus used by HI and its modified capacity C*."""
    mat = problem.material
    scheme = problem.scheme
    if scheme.mode == "isothermal":
        T_s = T_l = mat.T_m
    else:
        T_s, T_l = mat.T_s, mat.T_l
    C_s = float(evaluate(mat.C_s, T_s)[0])
    C_l = float(evaluate(mat.C_m, T_l)[0])
    return T_s, T_l, hi_modified_capacity(C_s, C_l, mat.H_m, T_s, T_l, scheme.mode)


def _initial_liquid_fraction(problem, T):
    mat = problem.material
    if mat.isothermal or (isinstance(problem.scheme, HeatIntegration) and problem.scheme.mode == "isothermal"):
        return (T > mat.T_m).astype(float)
    return liquid_fraction_T(T, mat.T_s, mat.T_l, mat.smoothing)[0]


def initial_state(problem, dt):
    """Initial temperatures (with Dirichlet values), consolidated fractions and HI history."""
    mesh = problem.mesh
    T0 = np.broadcast_to(np.asarray(problem.initial_temperature, dtype=float), (mesh.n_nodes,))
    T0 = problem.dirichlet_vector(T0)
    nq = mesh.geometry.N.shape[0]
    rc = np.asarray(problem.initial_consolidated, dtype=float)
    if rc.ndim == 1:
        rc = np.repeat(rc[:, None], nq, axis=1)
    rc = np.broadcast_to(rc, (mesh.n_elements, nq)).copy()
    hi = None
    if isinstance(problem.scheme, HeatIntegration):
        q_tot = hi_totals(mesh.pseudo_mass, problem.material.H_m, dt)
        g0 = _initial_liquid_fraction(problem, T0)
        hi = HiNodeState(q_tot * g0, q_tot)
    return TransientState(T=T0, time=0.0, phase=PhaseState(rc), hi=hi, hi_dt=dt)


def _liquid_fraction_source(problem, state):
    """How the liquid fraction is obtained for parameter interpolation."""
    mat = problem.material
    scheme = problem.scheme
    if isinstance(scheme, HeatIntegration) and scheme.mode == "isothermal" and mat.H_m > 0:
        return "enthalpy"
    if mat.isothermal:
        return "step"
    return "temperature"


def _coefficients(problem, state, Tq, g_nodes):
    mesh = problem.mesh
    mat = problem.material
    src = _liquid_fraction_source(problem, state)
    r_c = state.phase.r_c
    if src == "temperature":
        kw = dict(g_source="temperature")
    else:
        if src == "enthalpy":
            g = g_nodes[mesh.elements] @ mesh.geometry.N.T
        else:
            g = (Tq > mat.T_m).astype(float)
        kw = dict(g_source="enthalpy", g=g)
    C, dC = effective_property(Tq, r_c, mat, "capacity", **kw)
    k, dk = effective_property(Tq, r_c, mat, "conductivity", **kw)
    if isinstance(problem.scheme, ApparentCapacity):
        s = problem.scheme
        C, dC = apparent_capacity(Tq, s.T_s, s.T_l, mat.H_m, C, dC, s.bump)
    return C, dC, k, dk


def quadrature_liquid_fraction(problem, state, T):
    """Liquid fraction at quadrature points for temperatures ``T`` (used to commit r_c)."""
    mesh = problem.mesh
    Tq = T[mesh.elements] @ mesh.geometry.N.T
    src = _liquid_fraction_source(problem, state)
    if src == "enthalpy":
        return state.hi.liquid_fraction[mesh.elements] @ mesh.geometry.N.T
    if src == "step":
        return (Tq > problem.material.T_m).astype(float)
    mat = problem.material
    return liquid_fraction_T(Tq, mat.T_s, mat.T_l, mat.smoothing)[0]


def _source_at_quadrature(problem, t):
    geo = problem.mesh.geometry
    r = np.zeros(geo.wdet.shape)
    for src in problem.sources:
        if src.elements is None:
            r += src.func(geo.points, t)
        else:
            e = src.elements
            r[e] += src.func(geo.points[e], t)
    return r


def source_vector(problem, t):
    """Consistent nodal load of all volumetric sources at time ``t``."""
    geo = problem.mesh.geometry
    r = _source_at_quadrature(problem, t)
    return problem.mesh.scatter(np.einsum("eq,qa->ea", geo.wdet * r, geo.N))


def assemble(problem, state, T_guess, dt, config, load=None):
    """Residual and consistent Jacobian of the theta-scheme step ``state.T -> T_guess``.

    ``load`` may pass a precomputed nodal source vector; otherwise the sources
    are integrated at ``t_n + theta dt``. The heat-integration source is not
    included here (it is added by the Newton loop and never linearised).
    """
    mesh = problem.mesh
    geo = mesh.geometry
    theta = config.theta
    conn = mesh.elements
    N = geo.N
    T_guess = np.asarray(T_guess, dtype=float)
    Te1 = T_guess[conn]
    Te0 = state.T[conn]
    Tth = theta * Te1 + (1.0 - theta) * Te0
    dTe = Te1 - Te0
    Tq = Tth @ N.T
    dTq = dTe @ N.T
    g_nodes = state.hi.liquid_fraction if state.hi is not None else None
    C, dC, k, dk = _coefficients(problem, state, Tq, g_nodes)

    wC = geo.wdet * C
    if config.capacity_form(problem.scheme) == "consistent":
        Re = np.einsum("eq,qa->ea", wC * dTq, N) / dt
        Je = np.einsum("eq,qab->eab", wC, _NN(N)) / dt
    else:
        lumped = wC @ N
        Re = lumped * dTe / dt
        Je = np.zeros((len(conn), N.shape[1], N.shape[1]))
        idx = np.arange(N.shape[1])
        Je[:, idx, idx] = lumped / dt
    if theta > 0:
        wdC = geo.wdet * dC
        if config.capacity_form(problem.scheme) == "consistent":
            Je += theta * np.einsum("eq,qab->eab", wdC * dTq, _NN(N)) / dt
        else:
            Je += theta * np.einsum("eq,qab->eab", wdC, _NN(N)) * dTe[:, :, None] / dt

    G = np.einsum("eqad,ea->eqd", geo.B, Tth)
    wk = geo.wdet * k
    Re += np.einsum("eqad,eqd->ea", geo.B, G * wk[:, :, None])
    if theta > 0:
        Je += theta * np.einsum("eq,eqab->eab", wk, mesh.gradient_products)
        BG = np.einsum("eqad,eqd->eqa", geo.B, G)
        Je += theta * np.einsum("eqa,eq,qb->eab", BG, geo.wdet * dk, N)

    R = mesh.scatter(Re)
    if load is None and problem.sources:
        load = source_vector(problem, state.time + theta * dt)
    if load is not None:
        R -= load
    rows, cols = mesh.sparsity
    J = sp.csr_matrix((Je.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    return R, J


_NN_CACHE = {}


def _NN(N):
    key = N.shape
    if key not in _NN_CACHE:
        _NN_CACHE[key] = np.einsum("qa,qb->qab", N, N)
    return _NN_CACHE[key]


def apply_dirichlet(jacobian, residual, nodes):
    """Eliminate prescribed rows and columns; prescribed nodes get a unit diagonal and zero residual.

    The Newton update at prescribed nodes is therefore zero, so the values
    already written into the iterate are kept. Symmetry of the remaining
    block is preserved.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size == 0:
        return jacobian, residual
    n = jacobian.shape[0]
    keep = np.ones(n)
    keep[nodes] = 0.0
    D = sp.diags(keep)
    J = (D @ jacobian @ D + sp.diags(1.0 - keep)).tocsr()
    R = residual * keep
    return J, R


def _linear_solve(J, rhs, config):
    if config.linear_solver == "direct":
        # minimum degree on A^T + A suits the nearly symmetric conduction matrix
        return spla.spsolve(J.tocsc(), rhs, permc_spec="MMD_AT_PLUS_A")
    diag = J.diagonal()
    M = sp.diags(1.0 / np.where(diag != 0, diag, 1.0))
    x, info = spla.bicgstab(J, rhs, M=M, rtol=config.linear_rtol, atol=0.0, maxiter=10 * J.shape[0])
    if info != 0:
        return spla.spsolve(J.tocsc(), rhs, permc_spec="MMD_AT_PLUS_A")
    return x


def _backtrack(residual, T, dT, r_old, config):
    """Halve the Newton step until the residual norm drops (Armijo, c = 1e-4)."""
    alpha = 1.0
    tries = int(config.max_backtracks) if config.line_search else 0
    for k in range(tries + 1):
        T_try = T + alpha * dT
        R, J = residual(T_try)
        rn = float(np.linalg.norm(R))
        if k == tries or (math.isfinite(rn) and rn <= (1.0 - 1e-4 * alpha) * r_old):
            return T_try, R, J, rn
        alpha *= 0.5


def newton_step_loop(problem, state, dt, config):
    """Solve one time step with Newton-Raphson and heat-integration corrections.

    Returns ``(T, iterations, converged)``. The heat-integration pass runs
    after every iterate; its temperature resets and accumulated source enter
    the next residual, and convergence is judged on that corrected residual.
    """
    fixed = problem.fixed_nodes
    T = state.T
    if config.predictor == "extrapolate" and state.rate is not None:
        T = T + dt * state.rate
    T = problem.dirichlet_vector(T)
    load = source_vector(problem, state.time + config.theta * dt) if problem.sources else None
    hi = state.hi
    use_hi = hi is not None and problem.material.H_m > 0
    if use_hi:
        hi.start_step()
        T_s, T_l, C_star = hi_parameters(problem)
        active = np.ones(problem.mesh.n_nodes, dtype=bool)
        active[fixed] = False
        m = problem.mesh.pseudo_mass

    def residual(T):
        R, J = assemble(problem, state, T, dt, config, load=load)
        if use_hi:
            R = R - hi.q_p
        J, R = apply_dirichlet(J, R, fixed)
        return R, J

    R, J = residual(T)
    r0 = float(np.linalg.norm(R))
    tol = max(config.rtol * r0, config.atol)
    if r0 <= config.atol:
        return T, 0, True
    for it in range(1, int(config.max_iter) + 1):
        dT = _linear_solve(J, -R, config)
        if not np.all(np.isfinite(dT)):
            return T, it, False
        if use_hi:
            T = T + dT
            upd = hi_iteration(hi, T, state.T, problem.scheme, T_s, T_l, C_star, problem.material.H_m, m, dt, active)
            T[upd.reset_nodes] = upd.reset_values
            R, J = residual(T)
            rn = float(np.linalg.norm(R))
        else:
            T, R, J, rn = _backtrack(residual, T, dT, float(np.linalg.norm(R)), config)
        if not math.isfinite(rn):
            return T, it, False
        if rn <= tol:
            return T, it, True
    return T, int(config.max_iter), False


def advance(problem, state, controller, config, t_end, observer=None):
    """March ``state`` to ``t_end`` with step halving/doubling.

    ``observer(state, record)`` is called after each accepted step; returning
    True stops the march early (status ``"stopped"``).
    """
    if not t_end > state.time:
        raise ValueError("t_end must lie after the current time")
    records = []
    name = _scheme_name(problem.scheme)
    status, message = "completed", ""
    while state.time < t_end * (1.0 - 1e-12):
        dt = min(controller.dt, t_end - state.time)
        if t_end - state.time - dt < 1e-9 * dt:
            dt = t_end - state.time
        if state.hi is not None and state.hi_dt != dt:
            state.hi.rescale(state.hi_dt, dt)
            state.hi_dt = dt
        snap = state.hi.snapshot() if state.hi is not None else None
        T_new, iters, ok = newton_step_loop(problem, state, dt, config)
        record = StepRecord(state.step + 1, state.time + dt, dt, iters, name, ok)
        records.append(record)
        if not ok:
            if snap is not None:
                state.hi.restore(snap)
            logger.info("step %d: no convergence at dt=%.4g s after %d iterations", state.step + 1, dt, iters)
            try:
                controller.failed()
            except ConvergenceError as exc:
                status, message = "failed", str(exc)
                break
            continue
        check_node_vector(T_new, problem.mesh.n_nodes)
        state.rate = (T_new - state.T) / dt
        state.T = T_new
        state.time += dt
        state.step += 1
        state.phase.commit(quadrature_liquid_fraction(problem, state, T_new))
        controller.succeeded()
        if observer is not None and observer(state, record):
            status = "stopped"
            break
    meta = {"solver": config.as_dict(), "scheme": name, "dt0": controller.dt0, "adaptive": controller.adaptive}
    return SimulationResult(records=records, state=state, status=status, message=message, metadata=meta)


def simulate(problem, dt, t_end, config=None, adaptive=False, dt_min=None, double_after=4, observer=None):
    """Convenience wrapper: build the initial state and march to ``t_end``."""
    config = config or SolverConfig()
    state = initial_state(problem, dt)
    controller = TimeController(dt, adaptive=adaptive, dt_min=dt_min, double_after=double_after)
    return advance(problem, state, controller, config, t_end, observer=observer)
