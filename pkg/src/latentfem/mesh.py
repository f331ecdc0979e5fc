"""Structured line and hexahedral meshes with linear (tensor-product) elements.

All meshes are axis aligned, so every element Jacobian is the diagonal matrix
``diag(h / 2)`` and element geometry reduces to a per-element size vector.
For the layered powder-bed mesh the ``z`` axis points *into* the part: the
powder surface sits at ``z = 0`` and the layer occupies ``0 <= z <= L``.
"""

from dataclasses import dataclass, field
from functools import cached_property
import itertools
import math

import numpy as np
import scipy.sparse as sp

from ._validation import check_positive


def quadrature_rule(dim):
    """Tensor-product 2-point Gauss-Legendre rule on the reference element [-1, 1]^dim.

    Returns
    -------
    points : ndarray, shape (2**dim, dim)
    weights : ndarray, shape (2**dim,)
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    gp, gw = np.polynomial.legendre.leggauss(2)
    points = np.array(list(itertools.product(gp, repeat=dim)))
    weights = np.array([np.prod(w) for w in itertools.product(gw, repeat=dim)])
    return points, weights


def _corner_signs(dim):
    # corner ordering matches C-order raveling of the structured node grid
    return np.array(list(itertools.product((-1.0, 1.0), repeat=dim)))


def shape_functions(xi, dim):
    """Linear Lagrange shape functions and reference gradients at points ``xi``.

    Returns ``N`` with shape (n_points, 2**dim) and ``dN`` with shape
    (n_points, 2**dim, dim).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    signs = _corner_signs(dim)
    factors = 0.5 * (1.0 + xi[:, None, :] * signs[None, :, :])
    N = np.prod(factors, axis=2)
    dN = np.empty(factors.shape)
    for d in range(dim):
        others = np.delete(factors, d, axis=2)
        dN[:, :, d] = 0.5 * signs[None, :, d] * np.prod(others, axis=2)
    return N, dN


@dataclass(frozen=True)
class ElementGeometry:
    N: np.ndarray  # (nq, nen)
    B: np.ndarray  # (ne, nq, nen, dim) physical gradients
    wdet: np.ndarray  # (ne, nq) quadrature weight times Jacobian determinant
    points: np.ndarray  # (ne, nq, dim) physical quadrature point coordinates


@dataclass(frozen=True, eq=False)
class Mesh:
    """Structured mesh of linear line (dim=1) or hexahedral (dim=3) elements."""

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    element_size: np.ndarray
    node_sets: dict = field(default_factory=dict)
    element_sets: dict = field(default_factory=dict)
    axes: tuple = ()

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ValueError(f"only dim 1 and 3 are supported, got {self.dim}")
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != self.dim:
            raise ValueError(f"nodes must have shape (n, {self.dim})")
        elements = np.asarray(self.elements, dtype=np.int64)
        nen = 2**self.dim
        if elements.ndim != 2 or elements.shape[1] != nen:
            raise ValueError(f"elements must have shape (ne, {nen})")
        if elements.min() < 0 or elements.max() >= len(nodes):
            raise ValueError("element connectivity references out-of-range nodes")
        sorted_rows = np.sort(elements, axis=1)
        if np.any(sorted_rows[:, 1:] == sorted_rows[:, :-1]):
            raise ValueError("element connectivity contains repeated nodes")
        if np.any(self.element_size <= 0):
            raise ValueError("element Jacobian determinant must be positive")
        boundary = self.boundary_nodes
        for tag, ids in self.node_sets.items():
            if not np.all(np.isin(ids, boundary)):
                raise ValueError(f"node set {tag!r} contains interior nodes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def volume(self):
        return float(np.sum(np.prod(self.element_size, axis=1)))

    @cached_property
    def boundary_nodes(self):
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        tol = 1e-12 * max(1.0, float(np.max(hi - lo)))
        on = np.any((np.abs(self.nodes - lo) < tol) | (np.abs(self.nodes - hi) < tol), axis=1)
        return np.flatnonzero(on)

    def node_set(self, tag):
        try:
            return self.node_sets[tag]
        except KeyError:
            raise KeyError(f"unknown boundary tag {tag!r}; available: {sorted(self.node_sets)}") from None

    @cached_property
    def geometry(self):
        xi, w = quadrature_rule(self.dim)
        N, dN = shape_functions(xi, self.dim)
        half = 0.5 * self.element_size
        B = dN[None, :, :, :] / half[:, None, None, :]
        wdet = w[None, :] * np.prod(half, axis=1)[:, None]
        if np.any(wdet <= 0):
            raise ValueError("non-positive Jacobian determinant at a quadrature point")
        x = self.nodes[self.elements]  # (ne, nen, dim)
        points = np.einsum("qa,ead->eqd", N, x)
        return ElementGeometry(N=N, B=B, wdet=wdet, points=points)

    @cached_property
    def gradient_products(self):
        """Per-quadrature-point products of shape gradients, shape (ne, nq, nen, nen)."""
        B = self.geometry.B
        return np.einsum("eqad,eqbd->eqab", B, B)

    @cached_property
    def sparsity(self):
        """Row/column index arrays for COO assembly of element matrices."""
        nen = self.elements.shape[1]
        rows = np.repeat(self.elements, nen, axis=1).ravel()
        cols = np.tile(self.elements, (1, nen)).ravel()
        return rows, cols

    def consistent_pseudo_mass_matrix(self):
        """Sparse matrix of shape-function products, integral of N_j N_k over the domain."""
        geo = self.geometry
        Me = np.einsum("eq,qa,qb->eab", geo.wdet, geo.N, geo.N)
        rows, cols = self.sparsity
        return sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(self.n_nodes, self.n_nodes))

    @cached_property
    def pseudo_mass(self):
        return pseudo_mass(self)

    def scatter(self, element_vectors):
        """Sum element contributions of shape (ne, nen) into a nodal vector."""
        return np.bincount(
            self.elements.ravel(), weights=np.asarray(element_vectors).ravel(), minlength=self.n_nodes
        )


def pseudo_mass(mesh):
    """Nodal lumped pseudo-mass: row sums of the consistent shape-function product matrix.

    Because the linear shape functions form a partition of unity the row sum
    reduces to the integral of ``N_j`` over the mesh.
    """
    geo = mesh.geometry
    element_rows = np.einsum("eq,qa->ea", geo.wdet, geo.N)
    m = mesh.scatter(element_rows)
    m.setflags(write=False)
    return m


def build_line_mesh(length, n_elements):
    """Uniform line mesh on [0, length] with ``left``/``right`` boundary tags."""
    length = check_positive(length, "length")
    if int(n_elements) != n_elements or n_elements < 1:
        raise ValueError(f"n_elements must be a positive integer, got {n_elements!r}")
    n_elements = int(n_elements)
    x = np.linspace(0.0, length, n_elements + 1)
    elements = np.column_stack([np.arange(n_elements), np.arange(1, n_elements + 1)])
    size = np.diff(x)[:, None]
    return Mesh(
        dim=1,
        nodes=x[:, None],
        elements=elements,
        element_size=size,
        node_sets={"left": np.array([0]), "right": np.array([n_elements])},
        element_sets={"all": np.arange(n_elements)},
        axes=(x,),
    )


def _uniform_axis(length, target):
    n = max(1, math.ceil(length / target - 1e-9))
    return np.linspace(0.0, length, n + 1)


def build_box_mesh(xs, ys, zs):
    """Hexahedral tensor grid through the given axis coordinates."""
    xs, ys, zs = (np.asarray(a, dtype=float) for a in (xs, ys, zs))
    nx, ny, nz = len(xs), len(ys), len(zs)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    ids = np.arange(nx * ny * nz).reshape(nx, ny, nz)
    corners = [
        ids[i : nx - 1 + i, j : ny - 1 + j, k : nz - 1 + k].ravel()
        for i, j, k in itertools.product((0, 1), repeat=3)
    ]
    elements = np.column_stack(corners)
    hx, hy, hz = np.meshgrid(np.diff(xs), np.diff(ys), np.diff(zs), indexing="ij")
    size = np.column_stack([hx.ravel(), hy.ravel(), hz.ravel()])
    node_sets = {
        "x0": ids[0, :, :].ravel(),
        "x1": ids[-1, :, :].ravel(),
        "y0": ids[:, 0, :].ravel(),
        "y1": ids[:, -1, :].ravel(),
        "top": ids[:, :, 0].ravel(),
        "bottom": ids[:, :, -1].ravel(),
    }
    return Mesh(
        dim=3,
        nodes=nodes,
        elements=elements,
        element_size=size,
        node_sets=node_sets,
        element_sets={"all": np.arange(len(elements))},
        axes=(xs, ys, zs),
    )


def build_layered_hex_mesh(extents, powder_layer_thickness, powder_element_size, substrate_z_factor=2.0):
    """Regular hex mesh of a powder layer resting on a substrate.

    The powder layer ``0 <= z <= L`` is meshed with cubic elements of edge
    ``powder_element_size``; the substrate below uses the same in-plane size
    and ``substrate_z_factor`` times the height (rounded up to fill the depth
    uniformly). Element sets ``powder`` and ``substrate`` are tagged.
    """
    lx, ly, lz = (check_positive(float(e), "extent") for e in extents)
    L = check_positive(powder_layer_thickness, "powder_layer_thickness")
    h = check_positive(powder_element_size, "powder_element_size")
    factor = check_positive(substrate_z_factor, "substrate_z_factor")
    if L > lz:
        raise ValueError("powder layer is thicker than the domain")
    n_layer = L / h
    if abs(n_layer - round(n_layer)) > 1e-9 * max(1.0, n_layer):
        raise ValueError(
            f"powder layer thickness {L!r} is not divisible by the element size {h!r} "
            f"(ratio {n_layer:.12g})"
        )
    n_layer = int(round(n_layer))
    xs = _uniform_axis(lx, h)
    ys = _uniform_axis(ly, h)
    z_powder = np.linspace(0.0, L, n_layer + 1)
    if lz - L > 1e-12 * lz:
        z_sub = L + _uniform_axis(lz - L, factor * h)
        zs = np.concatenate([z_powder, z_sub[1:]])
    else:
        zs = z_powder
    mesh = build_box_mesh(xs, ys, zs)
    zc = mesh.geometry.points[:, :, 2].mean(axis=1)
    powder = np.flatnonzero(zc < L)
    substrate = np.flatnonzero(zc >= L)
    mesh.element_sets.update(powder=powder, substrate=substrate)
    return mesh


def locate(mesh, points):
    """Interpolate-ready location of points: element index and reference coordinates."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    idx = []
    for d, axis in enumerate(mesh.axes):
        i = np.clip(np.searchsorted(axis, points[:, d], side="right") - 1, 0, len(axis) - 2)
        idx.append(i)
    shape = tuple(len(a) - 1 for a in mesh.axes)
    elem = np.ravel_multi_index(tuple(idx), shape)
    lo = np.column_stack([mesh.axes[d][idx[d]] for d in range(mesh.dim)])
    hi = np.column_stack([mesh.axes[d][idx[d] + 1] for d in range(mesh.dim)])
    xi = 2.0 * (points - lo) / (hi - lo) - 1.0
    return elem, xi


def interpolate_nodal(mesh, values, points):
    """Evaluate the finite-element interpolant of nodal ``values`` at ``points``."""
    elem, xi = locate(mesh, points)
    N, _ = shape_functions(xi, mesh.dim)
    return np.sum(N * np.asarray(values)[mesh.elements[elem]], axis=1)
