"""Continuous Lagrange finite-element spaces of degree 0-2 on triangles.

Scalar, 2-vector, and 2x2-tensor valued spaces; vector/tensor spaces are
component-wise copies of the scalar space with components interleaved
fastest: global dof = scalar_dof * ncomp + component.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedDegree
from .mesh import Mesh

SCALAR = ()
VECTOR2 = (2,)
TENSOR22 = (2, 2)


def _p0_basis(pts):
    nq = len(pts)
    return np.ones((nq, 1)), np.zeros((nq, 1, 2))


def _p1_basis(pts):
    x, y = pts[:, 0], pts[:, 1]
    phi = np.stack([1.0 - x - y, x, y], axis=1)
    dphi = np.broadcast_to(
        np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (len(pts), 3, 2)
    ).copy()
    return phi, dphi


def _p2_basis(pts):
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    phi = np.stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l0 * l1,
            4 * l1 * l2,
            4 * l2 * l0,
        ],
        axis=1,
    )
    zeros = np.zeros_like(x)
    dl = {  # gradients of barycentrics
        0: (np.full_like(x, -1.0), np.full_like(x, -1.0)),
        1: (np.full_like(x, 1.0), zeros),
        2: (zeros, np.full_like(x, 1.0)),
    }

    def grad_vertex(i, l):
        gx, gy = dl[i]
        return (4 * l - 1) * gx, (4 * l - 1) * gy

    def grad_edge(i, j, li, lj):
        gxi, gyi = dl[i]
        gxj, gyj = dl[j]
        return 4 * (lj * gxi + li * gxj), 4 * (lj * gyi + li * gyj)

    grads = [
        grad_vertex(0, l0),
        grad_vertex(1, l1),
        grad_vertex(2, l2),
        grad_edge(0, 1, l0, l1),
        grad_edge(1, 2, l1, l2),
        grad_edge(2, 0, l2, l0),
    ]
    dphi = np.stack([np.stack(g, axis=-1) for g in grads], axis=1)
    return phi, dphi


_BASIS = {0: _p0_basis, 1: _p1_basis, 2: _p2_basis}

# Reference Lagrange nodes per local dof.
_NODES = {
    1: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    2: np.array(
        [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.5, 0.0],
            [0.5, 0.5],
            [0.0, 0.5],
        ]
    ),
}


@dataclass(eq=False)
class FESpace:
    """Lagrange space of one polynomial degree and value shape on a mesh."""

    mesh: Mesh
    degree: int
    value_shape: tuple = SCALAR
    cell_dofs: np.ndarray = field(init=False)      # (C, nloc) scalar dofs
    num_scalar_dofs: int = field(init=False)

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise UnsupportedDegree(f"degree must be 0, 1 or 2, got {self.degree}")
        mesh = self.mesh
        if self.degree == 0:
            self.cell_dofs = np.arange(mesh.num_cells, dtype=np.int64)[:, None]
            self.num_scalar_dofs = mesh.num_cells
        elif self.degree == 1:
            self.cell_dofs = mesh.cells.copy()
            self.num_scalar_dofs = mesh.num_vertices
        else:
            edges = mesh.edges()
            lookup = {tuple(e): i for i, e in enumerate(edges)}
            nv = mesh.num_vertices
            c = mesh.cells
            edofs = np.empty((mesh.num_cells, 3), dtype=np.int64)
            for loc, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
                for ci in range(mesh.num_cells):
                    i, j = c[ci, a], c[ci, b]
                    edofs[ci, loc] = nv + lookup[(min(i, j), max(i, j))]
            self.cell_dofs = np.hstack([c, edofs])
            self.num_scalar_dofs = nv + len(edges)

    @property
    def ncomp(self):
        n = 1
        for s in self.value_shape:
            n *= s
        return n

    @property
    def num_dofs(self):
        return self.num_scalar_dofs * self.ncomp

    @property
    def nloc(self):
        return self.cell_dofs.shape[1]

    def tabulate(self, points):
        """Reference basis values and gradients at (nq,2) points."""
        return _BASIS[self.degree](np.atleast_2d(np.asarray(points, dtype=float)))

    def dof_coordinates(self):
        """Physical coordinates of scalar Lagrange nodes (k >= 1)."""
        if self.degree == 0:
            raise UnsupportedDegree("P0 space has no Lagrange nodes")
        mesh = self.mesh
        if self.degree == 1:
            return mesh.vertices.copy()
        edges = mesh.edges()
        mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
        return np.vstack([mesh.vertices, mids])


def build_space(mesh: Mesh, degree: int, value_shape: tuple = SCALAR) -> FESpace:
    return FESpace(mesh, degree, value_shape)


def interpolate(space: FESpace, f) -> np.ndarray:
    """Lagrange interpolation: coefficients = f at the Lagrange nodes.

    `f` maps a point (2,) to a value of space.value_shape.
    """
    if space.degree == 0:
        raise UnsupportedDegree("interpolation requires degree >= 1")
    coords = space.dof_coordinates()
    ncomp = space.ncomp
    coeffs = np.empty(space.num_dofs)
    for i, x in enumerate(coords):
        val = np.asarray(f(x), dtype=float).reshape(ncomp)
        coeffs[i * ncomp: (i + 1) * ncomp] = val
    return coeffs


def evaluate(space: FESpace, coeffs, cell: int, xhat):
    """Value and physical gradient of a coefficient field at one reference
    point inside one cell.

    Gradient axes: scalar -> (2,); vector -> (i, j) = d_j v_i;
    tensor -> (a, b, j) = d_j F_ab.
    """
    phi, dphi = space.tabulate(np.asarray(xhat, dtype=float)[None, :])
    phi, dphi = phi[0], dphi[0]                       # (nloc,), (nloc, 2)
    ainvt = space.mesh.AinvT[cell]
    grad_phys = dphi @ ainvt.T                        # (nloc, 2) physical
    dofs = space.cell_dofs[cell]
    ncomp = space.ncomp
    local = np.asarray(coeffs)[
        (dofs[:, None] * ncomp + np.arange(ncomp)[None, :])
    ]                                                 # (nloc, ncomp)
    value = phi @ local                               # (ncomp,)
    grad = np.einsum("lc,lj->cj", local, grad_phys)   # (ncomp, 2)
    shape = space.value_shape
    return value.reshape(shape), grad.reshape(shape + (2,))


def eval_field(space: FESpace, coeffs, phi_ref, dphi_ref):
    """Vectorized evaluation at shared reference quadrature points.

    Returns values (C, nq, ncomp) and physical gradients (C, nq, ncomp, 2)
    for all cells at once; phi_ref/dphi_ref from space.tabulate.
    """
    mesh = space.mesh
    ncomp = space.ncomp
    dofs = space.cell_dofs                             # (C, nloc)
    local = np.asarray(coeffs)[
        dofs[:, :, None] * ncomp + np.arange(ncomp)[None, None, :]
    ]                                                  # (C, nloc, ncomp)
    vals = np.einsum("ql,klc->kqc", phi_ref, local)
    grad_ref = np.einsum("qld,klc->kqcd", dphi_ref, local)
    grads = np.einsum("kqcd,kjd->kqcj", grad_ref, mesh.AinvT)
    return vals, grads
