"""Neumann similarity solution of two-phase solidification in a semi-infinite slab.

A liquid initially at ``T_0 > T_m`` is cooled by a wall held at ``T_wall < T_m``
from ``t = 0``. The front sits at ``x_f(t) = 2 lam sqrt(alpha_s t)`` with ``lam``
the root of the heat balance at the interface::

    k_s (T_m - T_wall) exp(-lam^2) / (erf(lam) sqrt(pi alpha_s))
      - k_l (T_0 - T_m) exp(-lam^2 nu^2) / (erfc(lam nu) sqrt(pi alpha_l))
      = H_m lam sqrt(alpha_s),          nu = sqrt(alpha_s / alpha_l).
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf, erfc

from ._validation import check_positive


@dataclass(frozen=True)
class StefanProblem:
    T_wall: float
    T_0: float
    T_m: float
    C_s: float
    C_l: float
    k_s: float
    k_l: float
    H_m: float

    def __post_init__(self):
        if not self.T_wall < self.T_m <= self.T_0:
            raise ValueError(
                f"solidification needs T_wall < T_m <= T_0, got {self.T_wall}, {self.T_m}, {self.T_0}"
            )
        for name in ("C_s", "C_l", "k_s", "k_l"):
            check_positive(getattr(self, name), name)
        if self.H_m < 0:
            raise ValueError("H_m must be non-negative")

    @property
    def alpha_s(self):
        return self.k_s / self.C_s

    @property
    def alpha_l(self):
        return self.k_l / self.C_l

    @classmethod
    def water(cls, T_wall=253.0, T_0=283.0):
        return cls(T_wall=T_wall, T_0=T_0, T_m=273.0, C_s=1.762e6, C_l=4.226e6, k_s=2.22, k_l=0.556, H_m=338e6)


def interface_residual(lam, p):
    """Solid-side minus liquid-side flux minus latent release, per unit sqrt(time)."""
    nu = math.sqrt(p.alpha_s / p.alpha_l)
    solid = p.k_s * (p.T_m - p.T_wall) * math.exp(-lam * lam) / (math.erf(lam) * math.sqrt(math.pi * p.alpha_s))
    liquid = 0.0
    if p.T_0 > p.T_m:
        liquid = (
            p.k_l * (p.T_0 - p.T_m) * math.exp(-lam * lam * nu * nu) / (math.erfc(lam * nu) * math.sqrt(math.pi * p.alpha_l))
        )
    return solid - liquid - p.H_m * lam * math.sqrt(p.alpha_s)


def solve_similarity_constant(p, tol=1e-15):
    """Root of :func:`interface_residual`: bracket by doubling, then Brent's method to full precision."""
    lo = 1e-12
    if not interface_residual(lo, p) > 0:
        raise ValueError("no positive interface residual near zero; check the configuration")
    hi = 0.5
    while interface_residual(hi, p) > 0:
        lo, hi = hi, 2.0 * hi
        if hi > 50.0:
            raise ValueError("no sign change of the interface residual found")
    return brentq(interface_residual, lo, hi, args=(p,), xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


def front_position(p, t, lam=None):
    lam = solve_similarity_constant(p) if lam is None else lam
    return 2.0 * lam * np.sqrt(p.alpha_s * np.asarray(t, dtype=float))


def temperature_at(p, x, t, lam=None):
    """Temperature of the similarity solution at depth(s) ``x`` and time ``t > 0``."""
    if np.any(np.asarray(t) <= 0):
        raise ValueError("t must be positive")
    lam = solve_similarity_constant(p) if lam is None else lam
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    xf = 2.0 * lam * np.sqrt(p.alpha_s * t)
    eta_s = x / (2.0 * np.sqrt(p.alpha_s * t))
    solid = p.T_wall + (p.T_m - p.T_wall) * erf(eta_s) / erf(lam)
    nu = math.sqrt(p.alpha_s / p.alpha_l)
    if p.T_0 > p.T_m:
        eta_l = x / (2.0 * np.sqrt(p.alpha_l * t))
        liquid = p.T_0 - (p.T_0 - p.T_m) * erfc(eta_l) / erfc(lam * nu)
    else:
        liquid = np.full(np.broadcast(x, t).shape, p.T_m)
    return np.where(x < xf, solid, liquid)


def interface_fluxes(p, t, lam=None):
    """Conductive fluxes ``k dT/dx`` on the solid and liquid side of the front at time ``t``."""
    lam = solve_similarity_constant(p) if lam is None else lam
    nu = math.sqrt(p.alpha_s / p.alpha_l)
    ds = (p.T_m - p.T_wall) / erf(lam) * 2.0 / math.sqrt(math.pi) * math.exp(-lam * lam) / (2.0 * math.sqrt(p.alpha_s * t))
    dl = 0.0
    if p.T_0 > p.T_m:
        dl = (
            (p.T_0 - p.T_m)
            / erfc(lam * nu)
            * 2.0
            / math.sqrt(math.pi)
            * math.exp(-lam * lam * nu * nu)
            / (2.0 * math.sqrt(p.alpha_l * t))
        )
    return p.k_s * ds, p.k_l * dl
