import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from latentfem.latent_heat import (
    ApparentCapacity,
    HeatIntegration,
    HiNodeState,
    apparent_capacity,
    hi_intermediate_T,
    hi_iteration,
    hi_limit,
    hi_modified_capacity,
    hi_skip_original,
    hi_skip_tolerance,
    hi_totals,
)


@pytest.mark.parametrize("bump", ["quartic", "sine"])
def test_bump_integrates_to_latent_heat(bump):
    f = lambda T: apparent_capacity(T, 270.0, 276.0, 338e6, bump=bump)[0]
    val, _ = quad(f, 270.0, 276.0, epsabs=0, epsrel=1e-13)
    assert val == pytest.approx(338e6, rel=1e-12)


@pytest.mark.parametrize("bump", ["quartic", "sine"])
def test_bump_derivative_matches_finite_difference(bump):
    T = np.linspace(270.3, 275.7, 13)
    _, d = apparent_capacity(T, 270.0, 276.0, 1.0, bump=bump)
    h = 1e-6
    fd = (apparent_capacity(T + h, 270.0, 276.0, 1.0, bump=bump)[0] - apparent_capacity(T - h, 270.0, 276.0, 1.0, bump=bump)[0]) / (2 * h)
    assert np.allclose(d, fd, rtol=1e-6, atol=1e-9)


def test_bump_vanishes_outside_interval_and_adds_base():
    C, dC = apparent_capacity(np.array([200.0, 280.0]), 270.0, 276.0, 5.0, base=3.0, base_deriv=0.5)
    assert np.allclose(C, 3.0) and np.allclose(dC, 0.5)


def test_apparent_capacity_constructors():
    ac = ApparentCapacity.isothermal(1700.0, 100.0)
    assert (ac.T_s, ac.T_l) == (1600.0, 1800.0)
    with pytest.raises(ValueError):
        ApparentCapacity(5.0, 5.0)
    with pytest.raises(ValueError):
        ApparentCapacity(1.0, 2.0, bump="box")


def test_heat_integration_validation_and_names():
    assert HeatIntegration("mushy", "tolerance", 1e-3).name == "hi-mushy-tol"
    assert HeatIntegration().name == "hi-iso-orig"
    with pytest.raises(ValueError):
        HeatIntegration("isothermal", "tolerance")
    with pytest.raises(ValueError):
        HeatIntegration("isothermal", "tolerance", 1.5)
    with pytest.raises(ValueError):
        HeatIntegration("slushy")


def test_modified_capacity():
    assert hi_modified_capacity(2.0, 4.0, 10.0, 0.0, 0.0, "isothermal") == 3.0
    # mushy: harmonic-type combination of the interval slope and the mean capacity
    assert hi_modified_capacity(2.0, 4.0, 12.0, 0.0, 6.0, "mushy") == pytest.approx(1.0 / (0.5 + 1.0 / 3.0))


def test_intermediate_temperature():
    assert hi_intermediate_T(-1.0, -4.0, 270.0, 278.0) == pytest.approx(272.0)
    assert hi_intermediate_T(-3.0, -4.0, 273.0, 273.0, "isothermal") == 273.0


@given(
    st.floats(0.0, 1.0),
    st.floats(-5.0, 5.0),
)
def test_limit_keeps_history_within_budget(frac, request):
    q_tot = -2.0
    q_hist = frac * q_tot
    dq = hi_limit(q_hist, request * abs(q_tot), q_tot)
    new = q_hist + dq
    assert q_tot - 1e-12 <= new <= 1e-12
    assert dq * request >= 0
    assert abs(dq) <= abs(request * abs(q_tot)) + 1e-12


def test_limit_reaches_bounds_exactly():
    assert hi_limit(-1.0, -5.0, -2.0) + -1.0 == -2.0
    assert hi_limit(-1.0, 5.0, -2.0) + -1.0 == 0.0


def test_skip_criteria():
    assert hi_skip_original(260.0, 265.0, 270.0, 276.0)
    assert hi_skip_original(290.0, 280.0, 270.0, 276.0)
    assert not hi_skip_original(280.0, 260.0, 270.0, 276.0)
    assert hi_skip_tolerance(273.05, 273.0, 1e-3, 338e6, 3e6)  # bound 0.1127 K
    assert not hi_skip_tolerance(273.2, 273.0, 1e-3, 338e6, 3e6)


def test_totals_scale_with_pseudo_mass():
    assert np.allclose(hi_totals([1.0, 2.0], 10.0, 5.0), [-2.0, -4.0])
    with pytest.raises(ValueError):
        hi_totals([1.0], 1.0, 0.0)


def test_iteration_absorbs_excess_and_resets_to_melting_point():
    m = np.array([1.0, 1.0])
    dt, H, C = 1.0, 100.0, 2.0
    st_ = HiNodeState(np.zeros(2), hi_totals(m, H, dt))
    scheme = HeatIntegration("isothermal", "original")
    upd = hi_iteration(st_, np.array([10.0, -5.0]), np.array([-1.0, -1.0]), scheme, 0.0, 0.0, C, H, m, dt)
    # node 0 crossed T_m: its excess C*(T-T_m)*m/dt is stored, node 1 stayed solid
    assert st_.q_hist[0] == pytest.approx(-20.0)
    assert st_.q_hist[1] == 0.0
    assert upd.reset_nodes.tolist() == [0]
    assert upd.reset_values.tolist() == [0.0]
    assert st_.liquid_fraction[0] == pytest.approx(0.2)


def test_rescale_keeps_liquid_fraction():
    st_ = HiNodeState([-1.0, -3.0], [-4.0, -4.0])
    st_.rescale(2.0, 1.0)
    assert np.allclose(st_.q_tot, -8.0)
    assert np.allclose(st_.liquid_fraction, [0.25, 0.75])


def test_state_rejects_out_of_bounds_history():
    with pytest.raises(RuntimeError):
        HiNodeState([1.0], [-1.0])
