import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latentfem.mesh import (
    build_box_mesh,
    build_layered_hex_mesh,
    build_line_mesh,
    interpolate_nodal,
    pseudo_mass,
    quadrature_rule,
    shape_functions,
)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_gauss_rule_integrates_cubics_exactly(dim):
    pts, w = quadrature_rule(dim)
    assert w.sum() == pytest.approx(2.0**dim)
    # x^2 y^2 ... integrates to (2/3)^dim on [-1,1]^dim; odd powers vanish
    assert np.sum(w * np.prod(pts**2, axis=1)) == pytest.approx((2.0 / 3.0) ** dim)
    assert np.sum(w * np.prod(pts**3, axis=1)) == pytest.approx(0.0, abs=1e-14)


def test_quadrature_rejects_bad_dim():
    with pytest.raises(ValueError):
        quadrature_rule(4)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_shape_functions_partition_of_unity(xi):
    N, dN = shape_functions(np.array([xi]), 3)
    assert N.sum() == pytest.approx(1.0)
    assert np.allclose(dN.sum(axis=1), 0.0, atol=1e-14)
    assert np.all(N >= -1e-15)


def test_shape_functions_are_nodal():
    corners = np.array([[-1, -1, -1], [1, 1, 1], [-1, 1, -1]], dtype=float)
    N, _ = shape_functions(corners, 3)
    assert np.allclose(N.max(axis=1), 1.0)
    assert np.allclose(np.sort(N, axis=1)[:, :-1], 0.0)


def test_line_mesh_tags_and_pseudo_mass():
    mesh = build_line_mesh(2.0, 4)
    assert mesh.n_nodes == 5
    assert mesh.node_set("left").tolist() == [0]
    assert mesh.node_set("right").tolist() == [4]
    assert np.allclose(mesh.pseudo_mass, [0.25, 0.5, 0.5, 0.5, 0.25])
    with pytest.raises(KeyError):
        mesh.node_set("top")


@pytest.mark.parametrize("bad", [0, -3, 2.5])
def test_line_mesh_rejects_bad_counts(bad):
    with pytest.raises(ValueError):
        build_line_mesh(1.0, bad)


@given(
    st.lists(st.floats(0.1, 2.0), min_size=3, max_size=3),
    st.integers(1, 3),
)
@settings(max_examples=25, deadline=None)
def test_pseudo_mass_sums_to_volume(sizes, n):
    axes = [np.cumsum(np.concatenate([[0.0], np.full(n, s)])) for s in sizes]
    mesh = build_box_mesh(*axes)
    assert pseudo_mass(mesh).sum() == pytest.approx(mesh.volume)
    assert mesh.volume == pytest.approx(np.prod(np.array(sizes) * n))
    assert np.all(mesh.pseudo_mass > 0)


def test_consistent_matrix_row_sums_match_pseudo_mass():
    mesh = build_box_mesh([0, 1, 3], [0, 0.5], [0, 2, 2.5])
    M = mesh.consistent_pseudo_mass_matrix()
    assert np.allclose(np.asarray(M.sum(axis=1)).ravel(), mesh.pseudo_mass)
    assert abs(M - M.T).max() < 1e-15


def test_layered_mesh_geometry():
    mesh = build_layered_hex_mesh((0.6e-3, 0.2e-3, 0.2e-3), 0.05e-3, 0.05e-3 / 3, 2.0)
    zs = mesh.axes[2]
    assert np.allclose(zs[:4], np.linspace(0, 0.05e-3, 4))
    assert zs[-1] == pytest.approx(0.2e-3)
    # substrate elements are at most factor * h tall and fill the depth uniformly
    dz = np.diff(zs[3:])
    assert np.allclose(dz, dz[0]) and dz[0] <= 2 * 0.05e-3 / 3 * (1 + 1e-9)
    n_p = len(mesh.element_sets["powder"])
    n_s = len(mesh.element_sets["substrate"])
    assert n_p + n_s == mesh.n_elements
    assert n_p == 36 * 12 * 3
    top = mesh.node_set("top")
    assert np.allclose(mesh.nodes[top, 2], 0.0)


def test_layered_mesh_rejects_indivisible_layer():
    with pytest.raises(ValueError, match="divisible"):
        build_layered_hex_mesh((1.0, 1.0, 1.0), 0.3, 0.07)


def test_mesh_rejects_degenerate_connectivity():
    from latentfem.mesh import Mesh

    with pytest.raises(ValueError):
        Mesh(dim=1, nodes=np.array([[0.0], [1.0]]), elements=np.array([[0, 0]]), element_size=np.array([[1.0]]))


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=30, deadline=None)
def test_interpolation_reproduces_trilinear_fields(a, b, c, d):
    mesh = build_box_mesh([0, 0.3, 1.0], [0, 0.4, 0.5], [0, 0.2, 0.7])
    f = lambda p: a + b * p[:, 0] + c * p[:, 1] * p[:, 2] + d * p[:, 0] * p[:, 1] * p[:, 2]
    pts = np.random.default_rng(0).uniform([0, 0, 0], [1.0, 0.5, 0.7], size=(20, 3))
    # fields in the element-wise trilinear space are interpolated exactly
    assert np.allclose(interpolate_nodal(mesh, f(mesh.nodes), pts), f(pts), atol=1e-10)
