import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latentfem.material import (
    MaterialModel,
    PhaseState,
    PiecewiseLinear,
    effective_property,
    evaluate,
    liquid_fraction_H,
    liquid_fraction_T,
    phase_fractions,
    steel_316l,
    update_consolidated,
    water,
)

fractions = st.floats(0.0, 1.0)


@given(fractions, fractions)
def test_phase_fractions_partition_unity(r_prev, g):
    r_c = update_consolidated(r_prev, g)
    fr = phase_fractions(r_c, g)
    assert fr.powder + fr.melt + fr.solid == pytest.approx(1.0)
    assert min(fr.powder, fr.melt, fr.solid) >= -1e-15
    assert r_c >= r_prev


def test_phase_fractions_reject_melt_above_consolidated():
    with pytest.raises(ValueError):
        phase_fractions(0.2, 0.5)


@given(st.lists(fractions, min_size=1, max_size=30))
def test_consolidated_fraction_never_decreases(gs):
    state = PhaseState(np.zeros(1))
    prev = 0.0
    for g in gs:
        state.commit(np.array([g]))
        assert state.r_c[0] >= prev
        prev = state.r_c[0]
    assert prev == pytest.approx(max(gs))


def test_liquid_fraction_ramp():
    g, dg = liquid_fraction_T(np.array([260.0, 270.0, 273.0, 276.0, 300.0]), 270.0, 276.0)
    assert np.allclose(g, [0, 0, 0.5, 1, 1])
    assert np.allclose(dg, [0, 1 / 6, 1 / 6, 1 / 6, 0])
    with pytest.raises(ValueError):
        liquid_fraction_T(1.0, 5.0, 5.0)


def test_liquid_fraction_from_history():
    assert np.allclose(liquid_fraction_H([0.0, -1.0, -2.0], [-2.0, -2.0, -2.0]), [0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        liquid_fraction_H([0.0], [0.0])


def test_piecewise_linear_clamps_and_differentiates():
    p = PiecewiseLinear((200.0, 1600.0), (0.2, 0.3))
    v, d = evaluate(p, np.array([100.0, 900.0, 2000.0]))
    assert np.allclose(v, [0.2, 0.25, 0.3])
    assert np.allclose(d, [0.0, 0.1 / 1400, 0.0])


@pytest.mark.parametrize("which", ["capacity", "conductivity"])
@given(T=st.floats(1500.0, 1900.0), r_prev=fractions)
@settings(max_examples=40, deadline=None)
def test_effective_property_derivative_matches_finite_difference(which, T, r_prev):
    mat = steel_316l(1650.0, 1750.0)
    h = 1e-4
    # stay away from table and ramp kinks and from the r_c switch point
    g = (T - 1650.0) / 100.0
    if min(abs(T - 1600.0), abs(T - 1650.0), abs(T - 1750.0), abs(g - r_prev) * 100.0) < 1e-2:
        return
    v, d = effective_property(np.array([T]), np.array([r_prev]), mat, which)
    vp, _ = effective_property(np.array([T + h]), np.array([r_prev]), mat, which)
    vm, _ = effective_property(np.array([T - h]), np.array([r_prev]), mat, which)
    assert d[0] == pytest.approx((vp[0] - vm[0]) / (2 * h), rel=1e-5, abs=1e-9 * max(1.0, abs(v[0])))


def test_effective_property_pure_phases():
    mat = water(270.0, 276.0)
    C, _ = effective_property(np.array([250.0, 290.0]), np.ones(2), mat, "capacity")
    assert np.allclose(C, [mat.C_s, mat.C_m])
    steel = steel_316l(1650.0, 1750.0)
    k, _ = effective_property(np.array([1000.0]), np.zeros(1), steel, "conductivity")
    assert k[0] == pytest.approx(0.2 + 0.1 * 800 / 1400)


def test_material_validation():
    with pytest.raises(ValueError):
        MaterialModel(1, 1, 1, 1, 1, 1, T_m=273.0, H_m=-1.0)
    assert water().isothermal
    assert not water(270.0, 276.0).isothermal
