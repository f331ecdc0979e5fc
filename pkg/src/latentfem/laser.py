"""Volumetric laser heat source for a powder layer (Gusarov radiative-transfer model).

The beam deposits ``-beta_h * Q0(r) * dq/dxi`` per unit volume, where ``Q0``
is the radial power density, ``xi = beta_h * z`` the optical depth below the
powder surface and ``q`` the normalised net radiative flux.

Two forms of ``q`` are provided. ``"gusarov"`` (the default) pairs the
``exp(+2a(lambda - xi))`` and ``exp(-2a(lambda - xi))`` terms with their own
coefficients and uses ``(1 + a)`` in the second term of ``D``; ``"printed"``
keeps both exponentials as ``exp(+2a(lambda - xi))`` and ``(1 - a)`` in ``D``.
For the 316L powder parameters the printed form yields a flux that increases
with depth, i.e. a negative source, so it is kept only for comparison.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_option, check_positive


@dataclass(frozen=True)
class LaserBeam:
    """Moving beam with Gusarov powder optics.

    Lengths in m, speed in m/s, extinction in 1/m. ``start`` is the in-plane
    beam centre at t = 0 and ``direction`` the scan direction (normalised on
    construction).
    """

    power: float
    radius: float
    speed: float
    reflectivity: float
    extinction: float
    layer_thickness: float
    start: tuple = (0.0, 0.0)
    direction: tuple = (1.0, 0.0)
    variant: str = "gusarov"
    _D: float = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        for name in ("power", "radius", "speed", "extinction", "layer_thickness"):
            check_positive(getattr(self, name), name)
        if not 0.0 < self.reflectivity < 1.0:
            raise ValueError(f"reflectivity must lie in (0, 1), got {self.reflectivity}")
        if abs(4.0 * self.reflectivity - 3.0) < 1e-12:
            raise ValueError("reflectivity 0.75 makes the normalised density singular")
        check_option(self.variant, "variant", {"gusarov", "printed"})
        d = np.asarray(self.direction, dtype=float)
        norm = np.linalg.norm(d)
        if norm == 0:
            raise ValueError("scan direction must be non-zero")
        object.__setattr__(self, "direction", tuple(d / norm))
        object.__setattr__(self, "start", tuple(float(s) for s in self.start))
        object.__setattr__(self, "_D", _denominator(self.a, self.optical_thickness, self.reflectivity, self.variant))
        if abs(self._D) < 1e-300:
            raise ValueError("degenerate optical configuration: D vanishes")

    @property
    def a(self):
        return float(np.sqrt(1.0 - self.reflectivity))

    @property
    def optical_thickness(self):
        return self.extinction * self.layer_thickness

    @property
    def D(self):
        return self._D

    def center(self, t):
        return np.asarray(self.start) + self.speed * t * np.asarray(self.direction)


def _denominator(a, lam, rho, variant):
    second = (1.0 + a) if variant == "gusarov" else (1.0 - a)
    return (1.0 - a) * (1.0 - a - rho * (1.0 + a)) * np.exp(-2.0 * a * lam) - second * (
        1.0 + a - rho * (1.0 - a)
    ) * np.exp(2.0 * a * lam)


def nominal_power_density(r_h, beam):
    """Radial power density in W/m^2; integrates to the beam power over the disc."""
    r = np.asarray(r_h, dtype=float) / beam.radius
    val = 3.0 * beam.power / (np.pi * beam.radius**2) * (1.0 - r) ** 2 * (1.0 + r) ** 2
    return np.where(r < 1.0, val, 0.0)


def _density_terms(xi, beam):
    rho, a, lam = beam.reflectivity, beam.a, beam.optical_thickness
    xi = np.asarray(xi, dtype=float)
    sign = -1.0 if beam.variant == "gusarov" else 1.0
    e_minus = np.exp(-2.0 * a * xi)
    e_plus = np.exp(2.0 * a * xi)
    e_first = np.exp(sign * 2.0 * a * (lam - xi))
    e_second = np.exp(2.0 * a * (lam - xi))
    c_first = 1.0 - a - rho * (a + 1.0)
    c_second = a + rho * (a - 1.0) + 1.0
    pre = rho * a / ((4.0 * rho - 3.0) * beam.D)
    tail = 3.0 * (1.0 - rho) / (4.0 * rho - 3.0)
    return rho, a, lam, sign, e_minus, e_plus, e_first, e_second, c_first, c_second, pre, tail


def normalized_density(xi, beam):
    """Normalised net radiative flux ``q`` at optical depth ``xi`` in [0, lambda]."""
    rho, a, lam, sign, em, ep, ef, es, cf, cs, pre, tail = _density_terms(xi, beam)
    xi = np.asarray(xi, dtype=float)
    brace = np.exp(-lam) * (1.0 - rho**2) * (em * (1.0 - a) + ep * (a + 1.0)) - (ef * cf + es * cs) * (
        rho * np.exp(-2.0 * lam) + 3.0
    )
    return pre * brace - tail * (np.exp(-xi) - rho * np.exp(xi - 2.0 * lam))


def normalized_density_derivative(xi, beam):
    """Closed-form derivative dq/dxi (term-by-term)."""
    rho, a, lam, sign, em, ep, ef, es, cf, cs, pre, tail = _density_terms(xi, beam)
    xi = np.asarray(xi, dtype=float)
    d_brace = np.exp(-lam) * (1.0 - rho**2) * (-2.0 * a * em * (1.0 - a) + 2.0 * a * ep * (a + 1.0)) - (
        -sign * 2.0 * a * ef * cf - 2.0 * a * es * cs
    ) * (rho * np.exp(-2.0 * lam) + 3.0)
    return pre * d_brace - tail * (-np.exp(-xi) - rho * np.exp(xi - 2.0 * lam))


def volumetric_source(points, t, beam):
    """Deposited power density in W/m^3 at ``points`` (..., 3) and time ``t``.

    ``z`` is the depth below the powder surface; outside the layer or beyond
    the beam radius the source vanishes.
    """
    points = np.asarray(points, dtype=float)
    c = beam.center(t)
    r_h = np.hypot(points[..., 0] - c[0], points[..., 1] - c[1])
    z = points[..., 2]
    inside = (z >= 0.0) & (z <= beam.layer_thickness) & (r_h < beam.radius)
    out = np.zeros(points.shape[:-1])
    if np.any(inside):
        xi = beam.extinction * z[inside]
        out[inside] = -beam.extinction * nominal_power_density(r_h[inside], beam) * normalized_density_derivative(
            xi, beam
        )
    return out
