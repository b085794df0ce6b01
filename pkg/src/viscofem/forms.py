"""Assembly of the bilinear/trilinear forms and load vectors of the scheme.

All volume forms share the convention: trial/test spaces are Lagrange
spaces from `spaces`, matrices are scipy CSR, vectors are numpy arrays.
Physical coefficients (rho, nu, mu, lambda, dt) are applied by the caller;
the functions here assemble the raw integrals.
"""
from functools import partial
from weakref import WeakKeyDictionary

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegreeConstraintViolated, DegreeMismatch
from .quadrature import edge_rule, triangle_rule
from .spaces import FESpace, TENSOR22

DEFAULT_EXACTNESS = 5  # covers every polynomial integrand of the scheme

# many-operand contractions are far cheaper with a planned pairwise path
_einsum = partial(np.einsum, optimize=True)

_TABLE_CACHE = WeakKeyDictionary()


class _Tables:
    """Per-(space, rule) reference and physical basis tables."""

    def __init__(self, space, exactness):
        rule = triangle_rule(exactness)
        self.rule = rule
        self.phi, self.dphi = space.tabulate(rule.points)      # (nq,nl), (nq,nl,2)
        mesh = space.mesh
        # physical gradients g[k,q,l,i] = sum_d dphi[q,l,d] AinvT[k,i,d]
        self.gphys = _einsum("qld,kid->kqli", self.dphi, mesh.AinvT)
        self.wdet = rule.weights[None, :] * mesh.detA[:, None]  # (C,nq)


def tables(space: FESpace, exactness: int) -> _Tables:
    per_space = _TABLE_CACHE.setdefault(space, {})
    if exactness not in per_space:
        per_space[exactness] = _Tables(space, exactness)
    return per_space[exactness]


def _scatter(rows, cols, vals, shape):
    m = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return m.tocsr()


def _scalar_pairs(space):
    """Row/col scalar dof index arrays (C, nloc, nloc) for local blocks."""
    d = space.cell_dofs
    rows = np.repeat(d[:, :, None], space.nloc, axis=2)
    cols = np.repeat(d[:, None, :], space.nloc, axis=1)
    return rows, cols


def expand_components(scalar_matrix, ncomp):
    """Interleaved component expansion (global dof = scalar*ncomp + comp)."""
    if ncomp == 1:
        return scalar_matrix.tocsr()
    return sp.kron(scalar_matrix, sp.identity(ncomp), format="csr")


def assemble_mass(space: FESpace, exactness: int = None) -> sp.csr_matrix:
    """Component-wise L2 mass matrix."""
    t = tables(space, exactness or max(1, 2 * space.degree))
    local = _einsum("kq,qa,qb->kab", t.wdet, t.phi, t.phi)
    rows, cols = _scalar_pairs(space)
    n = space.num_scalar_dofs
    return expand_components(_scatter(rows, cols, local, (n, n)), space.ncomp)


def assemble_stiffness(space: FESpace, exactness: int = None) -> sp.csr_matrix:
    """Component-wise H1 semi-inner-product matrix (grad, grad)."""
    t = tables(space, exactness or max(1, 2 * (space.degree - 1)))
    local = _einsum("kq,kqai,kqbi->kab", t.wdet, t.gphys, t.gphys)
    rows, cols = _scalar_pairs(space)
    n = space.num_scalar_dofs
    return expand_components(_scatter(rows, cols, local, (n, n)), space.ncomp)


def eval_at_quadrature(space: FESpace, coeffs, exactness: int):
    """Values (C,nq,ncomp) and gradients (C,nq,ncomp,2) at quad points."""
    t = tables(space, exactness)
    nc = space.ncomp
    local = np.asarray(coeffs)[
        space.cell_dofs[:, :, None] * nc + np.arange(nc)[None, None, :]
    ]
    vals = _einsum("qa,kac->kqc", t.phi, local)
    grads = _einsum("kqai,kac->kqci", t.gphys, local)
    return vals, grads


def assemble_transport(space: FESpace, uspace: FESpace, v_coeffs,
                       exactness: int = DEFAULT_EXACTNESS) -> sp.csr_matrix:
    """Matrix of (phi_a, (v . grad) phi_b) on `space`, component-wise.

    Rows are test functions, columns trial functions.
    """
    vvals, _ = eval_at_quadrature(uspace, v_coeffs, exactness)
    t = tables(space, exactness)
    local = _einsum("kq,qa,kqi,kqbi->kab", t.wdet, t.phi, vvals, t.gphys)
    rows, cols = _scalar_pairs(space)
    n = space.num_scalar_dofs
    return expand_components(_scatter(rows, cols, local, (n, n)), space.ncomp)


def assemble_ns_convection(uspace: FESpace, v_old,
                           exactness: int = DEFAULT_EXACTNESS) -> sp.csr_matrix:
    """Skew-symmetric Navier-Stokes convection matrix, without the rho/2
    factor: C = (1/2)[((v_old.grad)u, w) - (u, (v_old.grad)w)]."""
    k1 = assemble_transport(uspace, uspace, v_old, exactness)
    return (0.5 * (k1 - k1.T)).tocsr()


def assemble_div_coupling(uspace: FESpace, pspace: FESpace,
                          exactness: int = DEFAULT_EXACTNESS) -> sp.csr_matrix:
    """B[q, w] = (div w, q); rows pressure dofs, cols velocity dofs."""
    tp = tables(pspace, exactness)
    tu = tables(uspace, exactness)
    # local[k, a, b, i] = int psi_a d_i phi_b
    local = _einsum("kq,qa,kqbi->kabi", tp.wdet, tp.phi, tu.gphys)
    pd = pspace.cell_dofs
    ud = uspace.cell_dofs
    rows = np.broadcast_to(pd[:, :, None, None], local.shape)
    cols = np.broadcast_to(
        (ud[:, None, :, None] * 2 + np.arange(2)[None, None, None, :]), local.shape
    )
    return _scatter(rows, cols, local, (pspace.num_dofs, uspace.num_dofs))


def _tensor_at_quadrature(fspace, F, exactness):
    vals, _ = eval_at_quadrature(fspace, F, exactness)
    C, nq = vals.shape[:2]
    return vals.reshape(C, nq, 2, 2)


def assemble_elastic_stress(uspace: FESpace, fspace: FESpace, F,
                            exactness: int = DEFAULT_EXACTNESS) -> np.ndarray:
    """Load vector w -> (F F^T, grad w) on the velocity test space."""
    Fq = _tensor_at_quadrature(fspace, F, exactness)
    B = _einsum("kqim,kqjm->kqij", Fq, Fq)
    tu = tables(uspace, exactness)
    local = _einsum("kq,kqij,kqaj->kai", tu.wdet, B, tu.gphys)
    out = np.zeros(uspace.num_dofs)
    idx = uspace.cell_dofs[:, :, None] * 2 + np.arange(2)[None, None, :]
    np.add.at(out, idx.ravel(), local.ravel())
    return out


def elastic_stress_jacobian(uspace: FESpace, fspace: FESpace, F,
                            exactness: int = DEFAULT_EXACTNESS) -> sp.csr_matrix:
    """d/dF of the elastic stress load: dF -> (dF F^T + F dF^T, grad w)."""
    Fq = _tensor_at_quadrature(fspace, F, exactness)
    tu = tables(uspace, exactness)
    tf = tables(fspace, exactness)
    # trial dF = psi_b E^{gd}: (dF F^T)_{ij} = psi_b delta_{ig} F_{jd},
    # (F dF^T)_{ij} = psi_b F_{id} delta_{jg}
    part1 = _einsum("kq,qb,kqjd,kqaj->kabd", tu.wdet, tf.phi, Fq, tu.gphys)
    part2 = _einsum("kq,qb,kqid,kqag->kabdgi", tu.wdet, tf.phi, Fq, tu.gphys)
    C = uspace.mesh.num_cells
    nlu, nlf = uspace.nloc, fspace.nloc
    local = np.zeros((C, nlu, 2, nlf, 2, 2))
    for g in range(2):
        local[:, :, g, :, g, :] += part1           # i = g fixed by delta
    # part2 indexed [k,a,b,d,g,i]; target [k, a, i, b, g, d]
    local += np.transpose(part2, (0, 1, 5, 2, 4, 3))
    rows = (uspace.cell_dofs[:, :, None] * 2 + np.arange(2)[None, None, :])
    rows = np.broadcast_to(rows[:, :, :, None, None, None], local.shape)
    cols = (
        fspace.cell_dofs[:, :, None, None] * 4
        + (np.arange(2)[None, None, :, None] * 2 + np.arange(2)[None, None, None, :])
    )
    cols = np.broadcast_to(cols[:, None, None, :, :, :], local.shape)
    return _scatter(rows, cols, local, (uspace.num_dofs, fspace.num_dofs))


def elastic_cross_matrix(uspace: FESpace, fspace: FESpace, F_old,
                         exactness: int = DEFAULT_EXACTNESS) -> sp.csr_matrix:
    """Matrix of (F_old F^T, grad w) in trial F (lagged-stress scheme).

    Rows velocity dofs, columns tensor dofs.
    """
    Fq = _tensor_at_quadrature(fspace, F_old, exactness)
    tu = tables(uspace, exactness)
    tf = tables(fspace, exactness)
    # trial F = psi_b E^{gd}: (F_old F^T)_{ij} = psi_b F_old_{id} delta_{jg}
    part = _einsum("kq,qb,kqid,kqag->kabdgi", tu.wdet, tf.phi, Fq, tu.gphys)
    local = np.transpose(part, (0, 1, 5, 2, 4, 3))  # [k, a, i, b, g, d]
    rows = (uspace.cell_dofs[:, :, None] * 2 + np.arange(2)[None, None, :])
    rows = np.broadcast_to(rows[:, :, :, None, None, None], local.shape)
    cols = (
        fspace.cell_dofs[:, :, None, None] * 4
        + (np.arange(2)[None, None, :, None] * 2 + np.arange(2)[None, None, None, :])
    )
    cols = np.broadcast_to(cols[:, None, None, :, :, :], local.shape)
    return _scatter(rows, cols, local, (uspace.num_dofs, fspace.num_dofs))


def giesekus_linear_matrix(fspace: FESpace, F_old,
                           exactness: int = DEFAULT_EXACTNESS) -> sp.csr_matrix:
    """Matrix of (F_old F^T F_old - F, G) in trial F (lagged reaction)."""
    Fq = _tensor_at_quadrature(fspace, F_old, exactness)
    tf = tables(fspace, exactness)
    w, phi = tf.wdet, tf.phi
    C, nl = fspace.mesh.num_cells, fspace.nloc
    local = np.zeros((C, nl, 2, 2, nl, 2, 2))
    # (F_old (psi_b E^{gd})^T F_old)_{al,be} = psi_b F_old_{al,d} F_old_{g,be}
    t = _einsum("kq,qa,qb,kqid,kqgj->kabidgj", w, phi, phi, Fq, Fq)
    local += np.transpose(t, (0, 1, 3, 6, 2, 5, 4))
    pp = _einsum("kq,qa,qb->kab", w, phi, phi)
    for g in range(2):
        for d in range(2):
            local[:, :, g, d, :, g, d] -= pp
    base = (
        fspace.cell_dofs[:, :, None, None] * 4
        + np.arange(2)[None, None, :, None] * 2
        + np.arange(2)[None, None, None, :]
    )
    rows = np.broadcast_to(base[:, :, :, :, None, None, None], local.shape)
    cols = np.broadcast_to(base[:, None, None, None, :, :, :], local.shape)
    n = fspace.num_dofs
    return _scatter(rows, cols, local, (n, n))


def identity_div_load(uspace: FESpace, exactness: int = DEFAULT_EXACTNESS):
    """Load vector w -> (I, grad w) = int div w."""
    tu = tables(uspace, exactness)
    local = _einsum("kq,kqai->kai", tu.wdet, tu.gphys)
    out = np.zeros(uspace.num_dofs)
    idx = uspace.cell_dofs[:, :, None] * 2 + np.arange(2)[None, None, :]
    np.add.at(out, idx.ravel(), local.ravel())
    return out


def lambda_coefficients(fspace: FESpace, F) -> np.ndarray:
    """Element-local piecewise-constant chain-rule surrogate of a P1 tensor
    field: output[k, i, j] is the 2x2 matrix Lambda_{i,j} on cell k.
    """
    if fspace.degree != 1 or fspace.value_shape != TENSOR22:
        raise DegreeMismatch("lambda_coefficients requires a P1 2x2-tensor field")
    mesh = fspace.mesh
    Fv = np.asarray(F).reshape(-1, 2, 2)[mesh.cells]      # (C, 3, 2, 2)
    # reference-element values: hat_m = (F_0 + F_m) / 2, m = 1, 2
    hat = 0.5 * (Fv[:, 0:1, :, :] + Fv[:, 1:3, :, :])     # (C, 2, 2, 2)
    A = mesh.A
    # Lambda_{i,j} = sum_m AinvT[i,m] * A^T[m,j] * hat_m,  A^T[m,j] = A[j,m]
    return _einsum("kim,kjm,kmab->kijab", mesh.AinvT, A, hat)


def conv_matrix(fspace: FESpace, uspace: FESpace, v_coeffs, variant: str,
                exactness: int = DEFAULT_EXACTNESS, *,
                pressure_degree: int = None, strict: bool = True) -> sp.csr_matrix:
    """Matrix C of the convective form: c_h(v, F, G) = G^T @ C @ F.

    Rows test (G) dofs, columns trial (F) dofs. Variants: skew,
    higher_order (requires 2m <= pressure degree when strict),
    lambda (requires P1 tensors).
    """
    if variant == "skew":
        k1 = assemble_transport(fspace, uspace, v_coeffs, exactness)
        return (0.5 * (k1 - k1.T)).tocsr()
    if variant == "higher_order":
        if strict and pressure_degree is not None and 2 * fspace.degree > pressure_degree:
            raise DegreeConstraintViolated(
                f"higher_order variant needs 2m <= k "
                f"(m={fspace.degree}, k={pressure_degree})"
            )
        k1 = assemble_transport(fspace, uspace, v_coeffs, exactness)
        return (-k1.T).tocsr()
    if variant == "lambda":
        return _lambda_conv_matrix(fspace, uspace, v_coeffs, exactness)
    raise ValueError(f"unknown convective variant {variant!r}")


def _lambda_conv_matrix(fspace, uspace, v_coeffs, exactness):
    if fspace.degree != 1 or fspace.value_shape != TENSOR22:
        raise DegreeMismatch("lambda variant requires a P1 2x2-tensor space")
    mesh = fspace.mesh
    vvals, _ = eval_at_quadrature(uspace, v_coeffs, exactness)
    tf = tables(fspace, exactness)
    vint = _einsum("kq,kqi->ki", tf.wdet, vvals)        # int_K v_i
    # trial vertex b contributes (delta_{b0} + delta_{bm}) / 2 to hat_m
    wgt = np.zeros((2, 3))                                 # (m-1, local vertex)
    wgt[0, 0] = wgt[1, 0] = 0.5
    wgt[0, 1] = 0.5
    wgt[1, 2] = 0.5
    # local[k, a, b] = -sum_{i,j,m} vint_i AinvT[i,m] A[j,m] wgt[m,b] g[a,j]
    g = tf.gphys[:, 0, :, :]                               # P1 grads, constant in q
    coef = _einsum("ki,kim,kjm->kmj", vint, mesh.AinvT, mesh.A)
    local = -_einsum("kmj,mb,kaj->kab", coef, wgt, g)
    rows, cols = _scalar_pairs(fspace)
    n = fspace.num_scalar_dofs
    return expand_components(_scatter(rows, cols, local, (n, n)), 4)


def conv_form_F(fspace: FESpace, uspace: FESpace, v_coeffs, F, G, variant: str,
                exactness: int = DEFAULT_EXACTNESS, **kw) -> float:
    """Value of the convective trilinear form c_h(v, F, G)."""
    C = conv_matrix(fspace, uspace, v_coeffs, variant, exactness, **kw)
    return float(np.asarray(G) @ (C @ np.asarray(F)))


def giesekus_residual(fspace: FESpace, F,
                      exactness: int = DEFAULT_EXACTNESS) -> np.ndarray:
    """Load vector G -> (F F^T F - F, G), without the mu/(2 lambda) factor."""
    Fq = _tensor_at_quadrature(fspace, F, exactness)
    R = _einsum("kqim,kqjm,kqjn->kqin", Fq, Fq, Fq) - Fq
    tf = tables(fspace, exactness)
    local = _einsum("kq,kqab,qt->ktab", tf.wdet, R, tf.phi)
    out = np.zeros(fspace.num_dofs)
    idx = (
        fspace.cell_dofs[:, :, None, None] * 4
        + np.arange(2)[None, None, :, None] * 2
        + np.arange(2)[None, None, None, :]
    )
    np.add.at(out, idx.ravel(), local.ravel())
    return out


def giesekus_jacobian(fspace: FESpace, F,
                      exactness: int = DEFAULT_EXACTNESS) -> sp.csr_matrix:
    """Gateaux derivative of the reaction residual:
    dF -> (dF F^T F + F dF^T F + F F^T dF - dF, G)."""
    Fq = _tensor_at_quadrature(fspace, F, exactness)
    FtF = _einsum("kqmi,kqmj->kqij", Fq, Fq)             # F^T F
    FFt = _einsum("kqim,kqjm->kqij", Fq, Fq)             # F F^T
    tf = tables(fspace, exactness)
    w = tf.wdet
    phi = tf.phi
    C = fspace.mesh.num_cells
    nl = fspace.nloc
    # target local[k, a, al, be, b, ga, de]
    local = np.zeros((C, nl, 2, 2, nl, 2, 2))
    pp = _einsum("kq,qa,qb->kab", w, phi, phi)           # plain mass kernel
    # term1: (E^{gd} F^T F)_{al,be} = delta_{al,ga} (F^T F)_{de,be}
    # t1[k,a,b,d,e] = int psi_a psi_b (F^T F)_{d e}
    t1 = _einsum("kq,qa,qb,kqde->kabde", w, phi, phi, FtF)
    for g in range(2):
        local[:, :, g, :, :, g, :] += np.transpose(t1, (0, 1, 4, 2, 3))
    # term2: (F E^{dg} F)... (F dF^T F)_{al,be} = psi F_{al,de} F_{ga,be}
    t2 = _einsum("kq,qa,qb,kqid,kqgj->kabidgj", w, phi, phi, Fq, Fq)
    # t2[k,a,b,i,d,g,j] = int psi_a psi_b F_{id} F_{gj}
    local += np.transpose(t2, (0, 1, 3, 6, 2, 5, 4))
    # term3: (F F^T E^{gd})_{al,be} = (F F^T)_{al,ga} delta_{be,de}
    t3 = _einsum("kq,qa,qb,kqig->kabig", w, phi, phi, FFt)
    for d in range(2):
        local[:, :, :, d, :, :, d] += np.transpose(t3, (0, 1, 3, 2, 4))
    # term4: -dF
    for g in range(2):
        for d in range(2):
            local[:, :, g, d, :, g, d] -= pp
    rows = (
        fspace.cell_dofs[:, :, None, None] * 4
        + np.arange(2)[None, None, :, None] * 2
        + np.arange(2)[None, None, None, :]
    )
    rows = np.broadcast_to(rows[:, :, :, :, None, None, None], local.shape)
    cols = (
        fspace.cell_dofs[:, :, None, None] * 4
        + np.arange(2)[None, None, :, None] * 2
        + np.arange(2)[None, None, None, :]
    )
    cols = np.broadcast_to(cols[:, None, None, None, :, :, :], local.shape)
    n = fspace.num_dofs
    return _scatter(rows, cols, local, (n, n))


def velocity_gradient_coupling_F(fspace: FESpace, uspace: FESpace, v_coeffs,
                                 exactness: int = DEFAULT_EXACTNESS) -> sp.csr_matrix:
    """Matrix of (G, (grad v) F) in trial F for fixed velocity v.

    Rows tensor test dofs, cols tensor trial dofs.
    """
    _, gv = eval_at_quadrature(uspace, v_coeffs, exactness)  # (C,nq,2,2), d_j v_i
    tf = tables(fspace, exactness)
    # ((grad v) psi_b E^{gd})_{al,be} = psi_b (grad v)_{al,ga} delta_{be,de}
    t = _einsum("kq,qa,qb,kqig->kabig", tf.wdet, tf.phi, tf.phi, gv)
    C, nl = fspace.mesh.num_cells, fspace.nloc
    local = np.zeros((C, nl, 2, 2, nl, 2, 2))
    for d in range(2):
        local[:, :, :, d, :, :, d] += np.transpose(t, (0, 1, 3, 2, 4))
    rows = (
        fspace.cell_dofs[:, :, None, None] * 4
        + np.arange(2)[None, None, :, None] * 2
        + np.arange(2)[None, None, None, :]
    )
    rows = np.broadcast_to(rows[:, :, :, :, None, None, None], local.shape)
    colbase = (
        fspace.cell_dofs[:, :, None, None] * 4
        + np.arange(2)[None, None, :, None] * 2
        + np.arange(2)[None, None, None, :]
    )
    cols = np.broadcast_to(colbase[:, None, None, None, :, :, :], local.shape)
    n = fspace.num_dofs
    return _scatter(rows, cols, local, (n, n))


def velocity_gradient_coupling_v(fspace: FESpace, uspace: FESpace, F,
                                 exactness: int = DEFAULT_EXACTNESS) -> sp.csr_matrix:
    """Matrix of (G, (grad w) F) in trial velocity w for fixed tensor F.

    Rows tensor test dofs, cols velocity dofs.
    """
    Fq = _tensor_at_quadrature(fspace, F, exactness)
    tf = tables(fspace, exactness)
    tu = tables(uspace, exactness)
    # trial w = phi_b e_i: ((grad w) F)_{al,be} = delta_{al,i} (grad phi_b . F_{:,be})
    t = _einsum("kq,qa,kqbm,kqme->kabe", tf.wdet, tf.phi, tu.gphys, Fq)
    C = fspace.mesh.num_cells
    nlf, nlu = fspace.nloc, uspace.nloc
    local = np.zeros((C, nlf, 2, 2, nlu, 2))
    for i in range(2):
        local[:, :, i, :, :, i] += np.transpose(t, (0, 1, 3, 2))
    rows = (
        fspace.cell_dofs[:, :, None, None] * 4
        + np.arange(2)[None, None, :, None] * 2
        + np.arange(2)[None, None, None, :]
    )
    rows = np.broadcast_to(rows[:, :, :, :, None, None], local.shape)
    colbase = uspace.cell_dofs[:, :, None] * 2 + np.arange(2)[None, None, :]
    cols = np.broadcast_to(colbase[:, None, None, None, :, :], local.shape)
    return _scatter(rows, cols, local, (fspace.num_dofs, uspace.num_dofs))


def physical_quadrature_points(mesh, exactness: int):
    """Quadrature points mapped to physical space, shape (C, nq, 2)."""
    rule = triangle_rule(exactness)
    return mesh.p0[:, None, :] + _einsum("kij,qj->kqi", mesh.A, rule.points)


def load_vector(space: FESpace, func, exactness: int = DEFAULT_EXACTNESS):
    """Load vector (f, test) for a pointwise function.

    `func` maps an (N, 2) array of points to (N, ncomp) values.
    """
    t = tables(space, exactness)
    mesh = space.mesh
    pts = mesh.p0[:, None, :] + _einsum(
        "kij,qj->kqi", mesh.A, t.rule.points
    )                                                      # (C, nq, 2)
    C, nq = pts.shape[:2]
    vals = np.asarray(func(pts.reshape(-1, 2))).reshape(C, nq, space.ncomp)
    local = _einsum("kq,kqc,qa->kac", t.wdet, vals, t.phi)
    out = np.zeros(space.num_dofs)
    nc = space.ncomp
    idx = space.cell_dofs[:, :, None] * nc + np.arange(nc)[None, None, :]
    np.add.at(out, idx.ravel(), local.ravel())
    return out


def l2_projection(space: FESpace, func, exactness: int = 8):
    """L2 projection of a pointwise function onto the space."""
    M = assemble_mass(space, exactness)
    b = load_vector(space, func, exactness)
    return spla.splu(M.tocsc()).solve(b)


def integral_vector(space: FESpace):
    """Vector c with c_i = integral of basis function i (scalar spaces)."""
    t = tables(space, max(1, space.degree))
    local = _einsum("kq,qa->ka", t.wdet, t.phi)
    out = np.zeros(space.num_scalar_dofs)
    np.add.at(out, space.cell_dofs.ravel(), local.ravel())
    return out


# --- boundary facet machinery -------------------------------------------

_REF_EDGE = {
    0: (np.array([0.0, 0.0]), np.array([1.0, 0.0])),   # v0 -> v1
    1: (np.array([1.0, 0.0]), np.array([-1.0, 1.0])),  # v1 -> v2
    2: (np.array([0.0, 1.0]), np.array([0.0, -1.0])),  # v2 -> v0
}


def boundary_facets(mesh, tag: str):
    """Facets with a given tag as (cell, local_edge, length, outward normal)."""
    wanted = {
        tuple(sorted(e)) for e, t in zip(mesh.boundary_edges, mesh.boundary_tags)
        if t == tag
    }
    out = []
    for ci, tri in enumerate(mesh.cells):
        for loc, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            i, j = int(tri[a]), int(tri[b])
            if (min(i, j), max(i, j)) in wanted:
                pi, pj = mesh.vertices[i], mesh.vertices[j]
                tvec = pj - pi
                length = float(np.linalg.norm(tvec))
                normal = np.array([tvec[1], -tvec[0]]) / length
                out.append((ci, loc, length, normal))
    return out


def facet_transport_matrix(space: FESpace, uspace: FESpace, v_coeffs, facets,
                           exactness: int = 5) -> sp.csr_matrix:
    """Matrix of int_Gamma (n . v) (u . w) over the given facets,
    component-wise on `space` (u trial, w test)."""
    s, w1 = edge_rule(exactness)
    n = space.num_scalar_dofs
    rows, cols, vals = [], [], []
    v_coeffs = np.asarray(v_coeffs)
    for ci, loc, length, normal in facets:
        x0, d = _REF_EDGE[loc]
        pts = x0[None, :] + s[:, None] * d[None, :]
        phi_u, _ = uspace.tabulate(pts)
        udofs = uspace.cell_dofs[ci]
        vloc = v_coeffs[udofs[:, None] * 2 + np.arange(2)[None, :]]
        vn = (phi_u @ vloc) @ normal                        # (nq,)
        phi_s, _ = space.tabulate(pts)
        local = _einsum("q,q,qa,qb->ab", w1 * length, vn, phi_s, phi_s)
        sdofs = space.cell_dofs[ci]
        rows.append(np.repeat(sdofs, len(sdofs)))
        cols.append(np.tile(sdofs, len(sdofs)))
        vals.append(local.ravel())
    if not rows:
        return sp.csr_matrix((n * space.ncomp, n * space.ncomp))
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return expand_components(m, space.ncomp)
