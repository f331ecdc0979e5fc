"""Latent heat treatments: apparent capacity (AC) and nodal heat integration (HI).

Sign convention for HI quantities (all in W, nodal): melting absorbs heat, so
the history ``q_hist`` and the budget ``q_tot`` are non-positive and the
history always satisfies ``0 >= q_hist >= q_tot``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_fraction, check_option, check_positive


# Normalised bump shapes on s in [0, 1]: each integrates to one and is C1.
def _quartic(s):
    return 30.0 * s**2 * (1.0 - s) ** 2, 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)


def _sine(s):
    return 2.0 * np.sin(np.pi * s) ** 2, 2.0 * np.pi * np.sin(2.0 * np.pi * s)


BUMP_SHAPES = {"quartic": _quartic, "sine": _sine}


@dataclass(frozen=True)
class NoLatentHeat:
    name = "none"


@dataclass(frozen=True)
class ApparentCapacity:
    """Latent heat folded into a capacity bump over ``[T_s, T_l]``."""

    T_s: float
    T_l: float
    bump: str = "quartic"

    def __post_init__(self):
        if not self.T_s < self.T_l:
            raise ValueError(f"apparent capacity needs T_s < T_l, got {self.T_s}, {self.T_l}")
        check_option(self.bump, "bump", BUMP_SHAPES)

    @classmethod
    def isothermal(cls, T_m, d, bump="quartic"):
        """Artificial interval ``[T_m - d, T_m + d]`` around an isothermal melting point."""
        d = check_positive(d, "d")
        return cls(T_m - d, T_m + d, bump)

    @property
    def name(self):
        return "ac"


@dataclass(frozen=True)
class HeatIntegration:
    """Nodal heat integration with original or tolerance-based node selection."""

    mode: str = "isothermal"
    criterion: str = "original"
    eps_tol: float = None

    def __post_init__(self):
        check_option(self.mode, "mode", {"isothermal", "mushy"})
        check_option(self.criterion, "criterion", {"original", "tolerance"})
        if self.criterion == "tolerance":
            if self.eps_tol is None:
                raise ValueError("tolerance criterion needs eps_tol")
            check_fraction(self.eps_tol, "eps_tol", open_interval=True)

    @property
    def name(self):
        tag = "tol" if self.criterion == "tolerance" else "orig"
        return f"hi-{'iso' if self.mode == 'isothermal' else 'mushy'}-{tag}"

    @property
    def g_source(self):
        return "enthalpy" if self.mode == "isothermal" else "temperature"


def apparent_capacity(T, T_s, T_l, H_m, base=0.0, base_deriv=0.0, bump="quartic"):
    """Capacity with the latent heat spread over ``[T_s, T_l]`` as a C1 bump.

    ``base`` is the ordinary capacity C(T) (with derivative ``base_deriv``);
    the bump integrates to exactly ``H_m`` over the interval.
    """
    if not T_s < T_l:
        raise ValueError("apparent capacity needs T_s < T_l")
    width = T_l - T_s
    s = (np.asarray(T, dtype=float) - T_s) / width
    inside = (s >= 0.0) & (s <= 1.0)
    sc = np.clip(s, 0.0, 1.0)
    phi, dphi = BUMP_SHAPES[bump](sc)
    phi = np.where(inside, phi, 0.0)
    dphi = np.where(inside, dphi, 0.0)
    return base + H_m * phi / width, base_deriv + H_m * dphi / width**2


def hi_totals(pseudo_mass, H_m, dt):
    dt = check_positive(dt, "dt")
    return -H_m * np.asarray(pseudo_mass, dtype=float) / dt


def hi_intermediate_T(q_hist, q_tot, T_s, T_l, mode="mushy"):
    """Temperature consistent with the absorbed fraction of latent heat."""
    if mode == "isothermal" or T_l <= T_s:
        return np.full(np.shape(q_hist), 0.5 * (T_s + T_l)) if np.ndim(q_hist) else 0.5 * (T_s + T_l)
    q_hist = np.asarray(q_hist, dtype=float)
    q_tot = np.asarray(q_tot, dtype=float)
    frac = np.divide(q_hist, q_tot, out=np.zeros(np.broadcast(q_hist, q_tot).shape), where=q_tot != 0)
    out = T_s + np.abs(frac) * (T_l - T_s)
    return out if out.ndim else float(out)


def hi_modified_capacity(C_s, C_l, H_m, T_s, T_l, mode):
    """Capacity used to convert a temperature excess into latent heat.

    ``C_s``/``C_l`` are the capacities at solidus and liquidus.
    """
    c_avg = 0.5 * (C_s + C_l)
    if mode == "isothermal" or H_m == np.inf:
        return c_avg
    if H_m == 0:
        return 0.0
    return 1.0 / ((T_l - T_s) / H_m + 1.0 / c_avg)


def hi_increment(T_i, T_star, C_star, m, dt):
    return -C_star * (np.asarray(T_i) - T_star) * m / dt


def hi_limit(q_hist, dq, q_tot):
    """Clip increments so that ``0 >= q_hist + dq >= q_tot`` with the bound exactly reached."""
    q_hist = np.asarray(q_hist, dtype=float)
    dq = np.asarray(dq, dtype=float)
    limited = np.clip(q_hist + dq, q_tot, 0.0) - q_hist
    # keep the sign of the request; never push the history the other way
    limited = np.where(dq > 0, np.maximum(limited, 0.0), np.where(dq < 0, np.minimum(limited, 0.0), 0.0))
    return limited if limited.ndim else float(limited)


def hi_skip_original(T_i, T_prev, T_s, T_l):
    T_i = np.asarray(T_i)
    T_prev = np.asarray(T_prev)
    return ((T_i < T_s) & (T_prev < T_s)) | ((T_i > T_l) & (T_prev > T_l))


def hi_skip_tolerance(T_i, T_star, eps_tol, H_m, C_star):
    return np.abs(np.asarray(T_i) - T_star) < eps_tol * H_m / C_star


class HiNodeState:
    """Nodal heat-integration history, budget and in-step source."""

    def __init__(self, q_hist, q_tot):
        self.q_hist = np.array(q_hist, dtype=float)
        self.q_tot = np.array(q_tot, dtype=float)
        self.q_p = np.zeros_like(self.q_hist)
        self.check()

    def check(self, atol=0.0):
        slack = atol + 1e-12 * np.abs(self.q_tot)
        if np.any(self.q_hist > slack) or np.any(self.q_hist < self.q_tot - slack):
            bad = np.flatnonzero((self.q_hist > slack) | (self.q_hist < self.q_tot - slack))
            raise RuntimeError(
                f"heat integration history out of bounds at nodes {bad[:10].tolist()}: "
                f"q_hist={self.q_hist[bad[:10]].tolist()}, q_tot={self.q_tot[bad[:10]].tolist()}"
            )

    @property
    def liquid_fraction(self):
        out = np.zeros_like(self.q_hist)
        nz = self.q_tot != 0
        out[nz] = np.clip(np.abs(self.q_hist[nz] / self.q_tot[nz]), 0.0, 1.0)
        return out

    def start_step(self):
        self.q_p[:] = 0.0

    def rescale(self, dt_old, dt_new):
        """Keep the absorbed fraction when the step size changes (budget scales with 1/dt)."""
        factor = dt_old / dt_new
        self.q_hist *= factor
        self.q_tot *= factor
        self.q_p *= factor

    def snapshot(self):
        return self.q_hist.copy(), self.q_tot.copy()

    def restore(self, snap):
        self.q_hist, self.q_tot = snap[0].copy(), snap[1].copy()
        self.q_p[:] = 0.0


class HiUpdate(NamedTuple):
    source: np.ndarray
    reset_nodes: np.ndarray
    reset_values: np.ndarray
    increments: np.ndarray


def hi_iteration(state, T, T_prev, scheme, T_s, T_l, C_star, H_m, pseudo_mass, dt, active=None):
    """One heat-integration pass after a Newton iterate.

    Updates ``state.q_hist`` and ``state.q_p`` in place and returns the
    accumulated in-step source together with the temperature resets to apply.
    ``active`` masks the nodes taking part (Dirichlet nodes are excluded).
    """
    T = np.asarray(T, dtype=float)
    iso = scheme.mode == "isothermal"
    if iso:
        T_s = T_l = 0.5 * (T_s + T_l)
    T_star = hi_intermediate_T(state.q_hist, state.q_tot, T_s, T_l, scheme.mode)
    if scheme.criterion == "original":
        skip = hi_skip_original(T, T_prev, T_s, T_l)
    else:
        skip = hi_skip_tolerance(T, T_star, scheme.eps_tol, H_m, C_star)
    if active is not None:
        skip = skip | ~active
    dq = np.where(skip, 0.0, hi_increment(T, T_star, C_star, pseudo_mass, dt))
    dq = hi_limit(state.q_hist, dq, state.q_tot)
    state.q_hist += dq
    # snap onto the bounds so that a completed phase change is exact
    state.q_hist = np.where(np.abs(state.q_hist) <= 1e-14 * np.abs(state.q_tot), 0.0, state.q_hist)
    state.q_hist = np.where(
        np.abs(state.q_hist - state.q_tot) <= 1e-14 * np.abs(state.q_tot), state.q_tot, state.q_hist
    )
    state.q_p += dq
    state.check()
    nodes = np.flatnonzero(np.abs(dq) > 0)
    values = hi_intermediate_T(state.q_hist[nodes], state.q_tot[nodes], T_s, T_l, scheme.mode)
    return HiUpdate(state.q_p.copy(), nodes, np.asarray(values, dtype=float), dq)
