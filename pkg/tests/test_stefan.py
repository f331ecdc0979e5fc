import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq
from scipy.special import erf, erfc

from latentfem.stefan import (
    StefanProblem,
    front_position,
    interface_fluxes,
    interface_residual,
    solve_similarity_constant,
    temperature_at,
)

# frozen root for ice/water cooled from 283 K by a 253 K wall
LAMBDA_WATER = 0.20542692937683366


def _stefan_number_form(p):
    """Same transcendental equation written with Stefan numbers (independent coding)."""
    st_s = p.C_s * (p.T_m - p.T_wall) / p.H_m
    st_l = p.C_l * (p.T_0 - p.T_m) / p.H_m
    nu = math.sqrt(p.alpha_s / p.alpha_l)
    r = math.sqrt(p.alpha_l / p.alpha_s)
    return lambda lam: (
        st_s * math.exp(-lam * lam) / erf(lam)
        - st_l * r * math.exp(-(nu * lam) ** 2) / erfc(nu * lam)
        - lam * math.sqrt(math.pi)
    )


def test_similarity_constant_water():
    p = StefanProblem.water()
    assert solve_similarity_constant(p) == pytest.approx(LAMBDA_WATER, rel=1e-10)
    assert brentq(_stefan_number_form(p), 1e-6, 2.0, xtol=1e-15) == pytest.approx(LAMBDA_WATER, rel=1e-10)


def test_front_at_final_time():
    p = StefanProblem.water()
    assert front_position(p, 72000.0) == pytest.approx(2 * LAMBDA_WATER * math.sqrt(p.alpha_s * 72000.0), rel=1e-10)
    assert front_position(p, 72000.0) == pytest.approx(0.12374, abs=1e-5)


def test_boundary_and_interface_values():
    p = StefanProblem.water()
    t = 5000.0
    xf = front_position(p, t)
    assert temperature_at(p, 0.0, t) == pytest.approx(p.T_wall)
    assert temperature_at(p, xf * (1 - 1e-12), t) == pytest.approx(p.T_m, abs=1e-6)
    assert temperature_at(p, xf * (1 + 1e-12), t) == pytest.approx(p.T_m, abs=1e-6)
    assert temperature_at(p, 50.0, t) == pytest.approx(p.T_0)


def test_temperature_is_monotone_in_space():
    p = StefanProblem.water()
    T = temperature_at(p, np.linspace(0, 0.5, 400), 72000.0)
    assert np.all(np.diff(T) >= 0)


def test_similarity_solution_satisfies_heat_equation():
    p = StefanProblem.water()
    t, h, k = 30000.0, 1e-4, 1.0
    for x, alpha in ((0.02, p.alpha_s), (0.3, p.alpha_l)):
        T_t = (temperature_at(p, x, t + k) - temperature_at(p, x, t - k)) / (2 * k)
        T_xx = (temperature_at(p, x + h, t) - 2 * temperature_at(p, x, t) + temperature_at(p, x - h, t)) / h**2
        assert T_t == pytest.approx(alpha * T_xx, rel=1e-4)


@given(
    T_wall=st.floats(200.0, 270.0),
    dT0=st.floats(0.0, 40.0),
    H_m=st.floats(1e6, 1e9),
    ratio=st.floats(0.2, 5.0),
)
@settings(max_examples=50, deadline=None)
def test_flux_jump_identity(T_wall, dT0, H_m, ratio):
    p = StefanProblem(T_wall, 273.0 + dT0, 273.0, 1.8e6, 1.8e6 * ratio, 2.2, 2.2 / ratio, H_m)
    for t in (10.0, 1e4):
        solid, liquid = interface_fluxes(p, t)
        release = p.H_m * (front_position(p, t * (1 + 1e-7)) - front_position(p, t * (1 - 1e-7))) / (2e-7 * t)
        exact = p.H_m * solve_similarity_constant(p) * math.sqrt(p.alpha_s / t)
        assert release == pytest.approx(exact, rel=1e-6)
        assert solid - liquid == pytest.approx(exact, rel=1e-10)


def test_one_phase_reduction():
    p = StefanProblem(253.0, 273.0, 273.0, 1.762e6, 4.226e6, 2.22, 0.556, 338e6)
    st_ = p.C_s * (p.T_m - p.T_wall) / p.H_m
    lam_ref = brentq(lambda l: l * math.exp(l * l) * erf(l) - st_ / math.sqrt(math.pi), 1e-9, 5.0, xtol=1e-15)
    assert solve_similarity_constant(p) == pytest.approx(lam_ref, rel=1e-10)
    assert abs(interface_residual(lam_ref, p)) < 1e-6


def test_problem_validation():
    with pytest.raises(ValueError):
        StefanProblem(280.0, 290.0, 273.0, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        StefanProblem(250.0, 290.0, 273.0, 1, 1, -1, 1, 1)
