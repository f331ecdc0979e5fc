"""Phase fractions for powder, melt and solid, and history-dependent parameter interpolation.

The consolidated fraction ``r_c`` records how much of the material at a point
has ever been molten. Together with the liquid fraction ``g`` it splits the
material into powder ``1 - r_c``, melt ``g`` and solid ``r_c - g``; every
material parameter is the fraction-weighted mix of its single-phase values.
"""

from dataclasses import dataclass, replace

import numpy as np

from ._validation import check_nonnegative


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear table in temperature, constant beyond its end points."""

    temperatures: tuple
    values: tuple

    def __post_init__(self):
        T = np.asarray(self.temperatures, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if T.ndim != 1 or T.shape != v.shape or len(T) < 1:
            raise ValueError("table temperatures and values must be 1-d and of equal length")
        if np.any(np.diff(T) <= 0):
            raise ValueError("table temperatures must be strictly increasing")
        object.__setattr__(self, "temperatures", tuple(T))
        object.__setattr__(self, "values", tuple(v))

    def __call__(self, T):
        T = np.asarray(T, dtype=float)
        tt = np.asarray(self.temperatures)
        vv = np.asarray(self.values)
        value = np.interp(T, tt, vv)
        if len(tt) == 1:
            return value, np.zeros_like(value)
        slopes = np.diff(vv) / np.diff(tt)
        seg = np.clip(np.searchsorted(tt, T, side="right") - 1, 0, len(slopes) - 1)
        inside = (T >= tt[0]) & (T <= tt[-1])
        return value, np.where(inside, slopes[seg], 0.0)

    @property
    def minimum(self):
        return min(self.values)


def evaluate(prop, T):
    """Value and temperature derivative of a constant or tabulated property."""
    if isinstance(prop, PiecewiseLinear):
        return prop(T)
    T = np.asarray(T, dtype=float)
    return np.full(T.shape, float(prop)), np.zeros(T.shape)


def _minimum(prop):
    return prop.minimum if isinstance(prop, PiecewiseLinear) else float(prop)


@dataclass(frozen=True)
class MaterialModel:
    """Per-phase volumetric capacities and conductivities plus phase-change data.

    ``T_s`` and ``T_l`` bound the interval used by temperature-based liquid
    fractions; for isothermal materials they may coincide with ``T_m``.
    ``smoothing`` > 0 rounds the kinks of the liquid-fraction ramp over that
    temperature width.
    """

    C_p: object
    C_s: object
    C_m: object
    k_p: object
    k_s: object
    k_m: object
    T_m: float
    H_m: float
    T_s: float = None
    T_l: float = None
    smoothing: float = 0.0

    def __post_init__(self):
        if self.T_s is None:
            object.__setattr__(self, "T_s", float(self.T_m))
        if self.T_l is None:
            object.__setattr__(self, "T_l", float(self.T_m))
        if not self.T_s <= self.T_m <= self.T_l:
            raise ValueError(f"need T_s <= T_m <= T_l, got {self.T_s}, {self.T_m}, {self.T_l}")
        check_nonnegative(self.H_m, "H_m")
        for name in ("C_p", "C_s", "C_m", "k_p", "k_s", "k_m"):
            if _minimum(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive over the simulated range")
        check_nonnegative(self.smoothing, "smoothing")

    @property
    def isothermal(self):
        return self.T_l <= self.T_s

    def with_interval(self, T_s, T_l):
        return replace(self, T_s=float(T_s), T_l=float(T_l))

    def phase_values(self, which, T):
        """Single-phase (powder, melt, solid) values and derivatives at ``T``."""
        if which == "capacity":
            props = (self.C_p, self.C_m, self.C_s)
        elif which == "conductivity":
            props = (self.k_p, self.k_m, self.k_s)
        else:
            raise ValueError(f"which must be 'capacity' or 'conductivity', got {which!r}")
        return [evaluate(p, T) for p in props]


@dataclass(frozen=True)
class PhaseFractions:
    powder: object
    melt: object
    solid: object


class PhaseState:
    """Consolidated fraction at quadrature points with a converged and a working buffer."""

    def __init__(self, r_c):
        r_c = np.array(r_c, dtype=float)
        if np.any((r_c < 0) | (r_c > 1)):
            raise ValueError("consolidated fraction must lie in [0, 1]")
        self.r_c = r_c
        self.working = r_c.copy()

    def commit(self, g):
        """Accept a converged step: r_c <- max(r_c, g)."""
        self.working = update_consolidated(self.r_c, g)
        if np.any(self.working < self.r_c):
            raise RuntimeError("consolidated fraction decreased")
        self.r_c = self.working.copy()

    def copy(self):
        new = PhaseState(self.r_c)
        new.working = self.working.copy()
        return new


def _smooth_clamp(u, w):
    """C1 ramp: 0 for u <= -w/2, u in between, 1 for u >= 1 + w/2; quadratic blends at the kinks."""
    g = np.clip(u, 0.0, 1.0)
    dg = ((u > 0.0) & (u < 1.0)).astype(float)
    if w <= 0:
        return g, dg
    g = np.where(u <= -w / 2, 0.0, np.where(u >= 1 + w / 2, 1.0, u))
    dg = ((u > -w / 2) & (u < 1 + w / 2)).astype(float)
    lo = np.abs(u) < w / 2
    g = np.where(lo, (u + w / 2) ** 2 / (2 * w), g)
    dg = np.where(lo, (u + w / 2) / w, dg)
    hi = np.abs(u - 1.0) < w / 2
    g = np.where(hi, 1.0 - (1 + w / 2 - u) ** 2 / (2 * w), g)
    dg = np.where(hi, (1 + w / 2 - u) / w, dg)
    return g, dg


def liquid_fraction_T(T, T_s, T_l, smoothing=0.0):
    """Temperature-based liquid fraction: clamped linear ramp from solidus to liquidus.

    Returns the fraction and its temperature derivative. At the kinks the
    derivative is taken from inside the interval.
    """
    if not T_s < T_l:
        raise ValueError(
            f"temperature-based liquid fraction needs T_s < T_l (got {T_s}, {T_l}); "
            "use liquid_fraction_H for isothermal phase change"
        )
    width = T_l - T_s
    T = np.asarray(T, dtype=float)
    u = (T - T_s) / width
    if smoothing > 0:
        g, dg = _smooth_clamp(u, smoothing / width)
        return g, dg / width
    g = np.clip(u, 0.0, 1.0)
    dg = np.where((T >= T_s) & (T <= T_l), 1.0 / width, 0.0)
    return g, dg


def liquid_fraction_H(q_hist, q_tot):
    """Enthalpy-based liquid fraction |q_hist / q_tot| from the absorbed latent heat history."""
    q_hist = np.asarray(q_hist, dtype=float)
    q_tot = np.asarray(q_tot, dtype=float)
    if np.any(q_tot == 0):
        raise ValueError("q_tot must be non-zero; without latent heat use the temperature-based fraction")
    return np.clip(np.abs(q_hist / q_tot), 0.0, 1.0)


def update_consolidated(r_c_prev, g):
    return np.maximum(r_c_prev, g)


def phase_fractions(r_c, g):
    r_c = np.asarray(r_c, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(g > r_c + 1e-12):
        raise ValueError("liquid fraction exceeds consolidated fraction; update r_c first")
    g = np.minimum(g, r_c)
    return PhaseFractions(powder=1.0 - r_c, melt=g, solid=r_c - g)


def interpolate(fractions, f_p, f_m, f_s):
    return fractions.powder * f_p + fractions.melt * f_m + fractions.solid * f_s


def effective_property(T, r_c_prev, model, which, g_source="temperature", g=None):
    """Phase-interpolated capacity or conductivity and its temperature derivative.

    Parameters
    ----------
    T : array_like
        Temperatures at the evaluation points.
    r_c_prev : array_like
        Converged consolidated fraction at the same points.
    model : MaterialModel
    which : {"capacity", "conductivity"}
    g_source : {"temperature", "enthalpy"}
        For ``"enthalpy"`` the liquid fraction ``g`` must be supplied; it is
        frozen within a Newton iteration, so it contributes no derivative.

    Returns
    -------
    value, derivative : ndarray
    """
    T = np.asarray(T, dtype=float)
    (fp, dfp), (fm, dfm), (fs, dfs) = model.phase_values(which, T)
    if g_source == "temperature":
        g, dg = liquid_fraction_T(T, model.T_s, model.T_l, model.smoothing)
    elif g_source == "enthalpy":
        if g is None:
            raise ValueError("enthalpy-based interpolation needs the nodal liquid fraction")
        g = np.broadcast_to(np.asarray(g, dtype=float), T.shape)
        dg = np.zeros(T.shape)
    else:
        raise ValueError(f"g_source must be 'temperature' or 'enthalpy', got {g_source!r}")
    r_c_prev = np.broadcast_to(np.asarray(r_c_prev, dtype=float), T.shape)
    r_c = update_consolidated(r_c_prev, g)
    dr_c = np.where(g > r_c_prev, dg, 0.0)
    fr = phase_fractions(r_c, g)
    value = interpolate(fr, fp, fm, fs)
    deriv = (
        fr.powder * dfp
        + fr.melt * dfm
        + fr.solid * dfs
        + dr_c * (fs - fp)
        + dg * (fm - fs)
    )
    return value, deriv


def water(T_s=None, T_l=None):
    """Ice/water properties; no powder phase, so powder values mirror the solid."""
    return MaterialModel(
        C_p=1.762e6,
        C_s=1.762e6,
        C_m=4.226e6,
        k_p=2.22,
        k_s=2.22,
        k_m=0.556,
        T_m=273.0,
        H_m=338e6,
        T_s=T_s,
        T_l=T_l,
    )


def steel_316l(T_s=None, T_l=None):
    """316L stainless steel powder, solid and melt properties for the single-track scan."""
    return MaterialModel(
        C_p=2.98e6,
        C_s=4.25e6,
        C_m=5.95e6,
        k_p=PiecewiseLinear((200.0, 1600.0), (0.2, 0.3)),
        k_s=20.0,
        k_m=20.0,
        T_m=1700.0,
        H_m=2.18e9,
        T_s=T_s,
        T_l=T_l,
    )
