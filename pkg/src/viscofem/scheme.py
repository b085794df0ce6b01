"""Time stepping for the coupled velocity/pressure/deformation system.

Two schemes: an implicit nonlinear step solved monolithically by Newton,
and a fully linear step that lags the deformation field in the stress and
reaction terms.  Both treat convection with the previous velocity and add
a small diffusion term on the tensor equation whose coefficient scales
with the time step.
"""
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms
from .errors import NewtonDivergence, SingularLinearSystem
from .mesh import Mesh, mesh_to_text, mesh_from_lines
from .spaces import FESpace, SCALAR, TENSOR22, VECTOR2, build_space

ASSEMBLY_EXACTNESS = forms.DEFAULT_EXACTNESS


@dataclass(frozen=True)
class PhysParams:
    """Physical constants: density, solvent viscosity, elastic modulus,
    relaxation time. lam = 0 switches to Newtonian mode (tensor frozen)."""

    rho: float = 1.0
    nu: float = 1.0
    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.rho <= 0 or self.nu <= 0 or self.mu <= 0 or self.lam < 0:
            raise ValueError("physical parameters must be positive (lam >= 0)")


@dataclass(frozen=True)
class SchemeConfig:
    dt: float
    t_end: float
    scheme: str = "nonlinear"             # nonlinear | linear
    variant: str = "skew"                 # skew | higher_order | lambda
    stress_diffusion: str = "scale_dt"    # scale_dt | scale_dt2 | none | fixed
    diffusion_eps: float = 0.0            # used when stress_diffusion == fixed
    newton_tol: float = 1e-12
    newton_max_iters: int = 25
    velocity_degree: int = 2
    pressure_degree: int = 1
    tensor_degree: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        if self.scheme not in ("nonlinear", "linear"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.variant not in ("skew", "higher_order", "lambda"):
            raise ValueError(f"unknown convective variant {self.variant!r}")
        if self.stress_diffusion not in ("scale_dt", "scale_dt2", "none", "fixed"):
            raise ValueError(f"unknown stress diffusion mode {self.stress_diffusion!r}")

    def diffusion_coefficient(self) -> float:
        if self.stress_diffusion == "scale_dt":
            return self.dt
        if self.stress_diffusion == "scale_dt2":
            return self.dt ** 2
        if self.stress_diffusion == "fixed":
            return self.diffusion_eps
        return 0.0

    def check_time_step(self, params: PhysParams):
        if params.lam > 0 and self.dt >= params.lam / params.mu:
            warnings.warn(
                "time step is not below the elastic relaxation time "
                f"(dt={self.dt}, lam/mu={params.lam / params.mu}); the "
                "conditional energy estimate does not apply",
                stacklevel=2,
            )


class Discretization:
    """Spaces and step-independent matrices on one mesh."""

    def __init__(self, mesh: Mesh, cfg: SchemeConfig):
        self.mesh = mesh
        self.cfg = cfg
        self.uspace = build_space(mesh, cfg.velocity_degree, VECTOR2)
        self.pspace = build_space(mesh, cfg.pressure_degree, SCALAR)
        self.fspace = build_space(mesh, cfg.tensor_degree, TENSOR22)
        ex = ASSEMBLY_EXACTNESS
        self.Mu = forms.assemble_mass(self.uspace, ex)
        self.Ku = forms.assemble_stiffness(self.uspace, ex)
        self.B = forms.assemble_div_coupling(self.uspace, self.pspace, ex)
        self.Mf = forms.assemble_mass(self.fspace, ex)
        self.Kf = forms.assemble_stiffness(self.fspace, ex)
        self.p_integral = forms.integral_vector(self.pspace)
        self.div_load = forms.identity_div_load(self.uspace, ex)
        self.nu_dofs = self.uspace.num_dofs
        self.np_dofs = self.pspace.num_dofs
        self.nf_dofs = self.fspace.num_dofs
        self.solver = DirectSolver()

    def identity_tensor(self):
        return np.tile(np.eye(2).ravel(), self.fspace.num_scalar_dofs)


@dataclass
class BoundaryData:
    """Strong and natural boundary data for one trajectory.

    v_values may be a static array or a callable of time returning an
    array aligned with v_dofs; tensor data is static.
    """

    v_dofs: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))
    v_values: object = None
    f_dofs: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))
    f_values: np.ndarray = field(default_factory=lambda: np.array([]))
    outlet_facets: list = None
    pin_pressure: bool = True
    stress_shift: bool = False     # momentum stress uses mu (F F^T - I)
    forcing_v: object = None       # callable(points (N,2), t) -> (N,2)
    forcing_F: object = None       # callable(points (N,2), t) -> (N,4)

    def velocity_values(self, t):
        if self.v_values is None:
            return np.zeros(len(self.v_dofs))
        if callable(self.v_values):
            return np.asarray(self.v_values(t))
        return np.asarray(self.v_values)


@dataclass
class State:
    index: int
    time: float
    v: np.ndarray
    p: np.ndarray
    F: np.ndarray


@dataclass
class NewtonStats:
    iterations: int
    residual: float
    increment: float


def initial_state(disc: Discretization, v=None, p=None, F=None) -> State:
    return State(
        index=0,
        time=0.0,
        v=np.zeros(disc.nu_dofs) if v is None else np.asarray(v, dtype=float),
        p=np.zeros(disc.np_dofs) if p is None else np.asarray(p, dtype=float),
        F=disc.identity_tensor() if F is None else np.asarray(F, dtype=float),
    )


def fix_pressure_mean(p, pspace: FESpace):
    """Remove the mean: orthogonal projection against constants."""
    c = forms.integral_vector(pspace)
    area = c.sum()
    return p - (c @ p) / area


def _eliminate(A, r, dofs):
    """Zero rows and columns of the constrained dofs, unit diagonal,
    zero residual entries (increments vanish there)."""
    if len(dofs) == 0:
        return A.tocsc(), r
    n = A.shape[0]
    keep = np.ones(n)
    keep[dofs] = 0.0
    P = sp.diags(keep)
    fix = sp.coo_matrix((np.ones(len(dofs)), (dofs, dofs)), shape=(n, n))
    A2 = (P @ A @ P + fix).tocsc()
    r = r.copy()
    r[dofs] = 0.0
    return A2, r


class DirectSolver:
    """Sparse direct LU, one factorization per system."""

    def solve(self, A, b):
        try:
            lu = spla.splu(A)
        except RuntimeError as e:
            raise SingularLinearSystem(str(e))
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularLinearSystem("non-finite solution from direct solver")
        return x


class ReusingDirectSolver:
    """Direct LU with factorization reuse.

    The latest factorization preconditions GMRES on subsequent systems;
    whenever the true residual misses direct-solve accuracy the matrix is
    refactorized, so every returned solution is accurate to rtol."""

    def __init__(self, rtol=1e-12, restart=30, max_restarts=2):
        self.rtol = rtol
        self.restart = restart
        self.max_restarts = max_restarts
        self._lu = None
        self.num_factorizations = 0

    def _direct(self, A, b):
        try:
            self._lu = spla.splu(A)
            self.num_factorizations += 1
        except RuntimeError as e:
            raise SingularLinearSystem(str(e))
        x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularLinearSystem("non-finite solution from direct solver")
        return x

    def solve(self, A, b):
        bnorm = np.abs(b).max()
        if self._lu is None or bnorm == 0.0:
            return self._direct(A, b)
        M = spla.LinearOperator(A.shape, matvec=self._lu.solve)
        x, _ = spla.gmres(A, b, M=M, rtol=1e-13, atol=0.0,
                          restart=self.restart, maxiter=self.max_restarts)
        if np.all(np.isfinite(x)):
            resid = np.abs(A @ x - b).max()
            if resid <= self.rtol * bnorm:
                return x
        return self._direct(A, b)


def _solve(A, b, solver=None):
    if solver is None:
        solver = DirectSolver()
    return solver.solve(A, b)


class _StepAssembler:
    """Matrices frozen over one time step (previous-velocity transport)."""

    def __init__(self, disc, params, cfg, bc, prev):
        self.disc = disc
        self.params = params
        self.cfg = cfg
        self.bc = bc
        self.prev = prev
        d, pr = disc, params
        ex = ASSEMBLY_EXACTNESS
        self.phi_dt = cfg.diffusion_coefficient()
        self.Avv = (
            pr.rho / cfg.dt * d.Mu
            + pr.rho * forms.assemble_ns_convection(d.uspace, prev.v, ex)
            + pr.nu * d.Ku
        )
        self.Cf = forms.conv_matrix(
            d.fspace, d.uspace, prev.v, cfg.variant, ex, strict=False
        )
        self.Aff_fixed = (1.0 / cfg.dt) * d.Mf + self.Cf + self.phi_dt * d.Kf
        if bc.outlet_facets:
            G = forms.facet_transport_matrix(
                d.uspace, d.uspace, prev.v, bc.outlet_facets
            )
            self.Avv = self.Avv + 0.5 * pr.rho * G
            Gf = forms.facet_transport_matrix(
                d.fspace, d.uspace, prev.v, bc.outlet_facets
            )
            self.Aff_fixed = self.Aff_fixed + 0.5 * Gf
        t_new = prev.time + cfg.dt
        self.rhs_v = pr.rho / cfg.dt * (d.Mu @ prev.v)
        if bc.forcing_v is not None:
            self.rhs_v = self.rhs_v + forms.load_vector(
                d.uspace, lambda x: bc.forcing_v(x, t_new), ex
            )
        if bc.stress_shift:
            self.rhs_v = self.rhs_v + pr.mu * d.div_load
        self.rhs_f = (1.0 / cfg.dt) * (d.Mf @ prev.F)
        if bc.forcing_F is not None:
            self.rhs_f = self.rhs_f + forms.load_vector(
                d.fspace, lambda x: bc.forcing_F(x, t_new), ex
            )
        self.t_new = t_new

    def dirichlet_dofs(self):
        d = self.disc
        nvp = d.nu_dofs + d.np_dofs
        return np.concatenate(
            [self.bc.v_dofs, nvp + np.asarray(self.bc.f_dofs, dtype=np.int64)]
        ).astype(np.int64)

    def residual(self, v, p, F):
        d, pr = self.disc, self.params
        ex = ASSEMBLY_EXACTNESS
        rv = (
            self.Avv @ v
            - d.B.T @ p
            + pr.mu * forms.assemble_elastic_stress(d.uspace, d.fspace, F, ex)
            - self.rhs_v
        )
        rp = d.B @ v
        rf = (
            self.Aff_fixed @ F
            - forms.velocity_gradient_coupling_F(d.fspace, d.uspace, v, ex) @ F
            - self.rhs_f
        )
        if pr.lam > 0:
            rf = rf + pr.mu / (2 * pr.lam) * forms.giesekus_residual(d.fspace, F, ex)
        return rv, rp, rf

    def jacobian(self, v, F):
        d, pr = self.disc, self.params
        ex = ASSEMBLY_EXACTNESS
        JvF = pr.mu * forms.elastic_stress_jacobian(d.uspace, d.fspace, F, ex)
        Jff = self.Aff_fixed - forms.velocity_gradient_coupling_F(
            d.fspace, d.uspace, v, ex
        )
        if pr.lam > 0:
            Jff = Jff + pr.mu / (2 * pr.lam) * forms.giesekus_jacobian(d.fspace, F, ex)
        JFv = -forms.velocity_gradient_coupling_v(d.fspace, d.uspace, F, ex)
        return JvF, Jff, JFv


def _assemble_global(asm, blocks, pin):
    d = asm.disc
    Avv, Avp, AvF, Apv, AFv, AFF = blocks
    rows = [
        [Avv, Avp, AvF, None],
        [Apv, None, None, None],
        [AFv, None, AFF, None],
        [None, None, None, None],
    ]
    if pin:
        c = sp.csr_matrix(asm.disc.p_integral[None, :])
        rows[1][3] = c.T
        rows[3][1] = c
        rows[3][3] = None
        A = sp.bmat(rows, format="csr")
    else:
        A = sp.bmat([r[:3] for r in rows[:3]], format="csr")
    return A


def nonlinear_step(prev: State, disc: Discretization, params: PhysParams,
                   cfg: SchemeConfig, bc: BoundaryData):
    """One implicit step of the coupled system, solved by plain Newton on
    the monolithic residual. Returns (State, NewtonStats)."""
    asm = _StepAssembler(disc, params, cfg, bc, prev)
    d = disc
    v = prev.v.copy()
    p = prev.p.copy()
    F = prev.F.copy()
    v[bc.v_dofs] = bc.velocity_values(asm.t_new)
    if len(bc.f_dofs):
        F[np.asarray(bc.f_dofs, dtype=np.int64)] = bc.f_values
    pin = bc.pin_pressure
    extra = 1 if pin else 0
    n_total = d.nu_dofs + d.np_dofs + d.nf_dofs + extra
    fixed = asm.dirichlet_dofs()
    stats = None
    for it in range(1, cfg.newton_max_iters + 1):
        rv, rp, rf = asm.residual(v, p, F)
        r = np.concatenate([rv, rp, rf, np.zeros(extra)])
        if pin:
            r[-1] = asm.disc.p_integral @ p
        JvF, Jff, JFv = asm.jacobian(v, F)
        A = _assemble_global(
            asm, (asm.Avv, -d.B.T, JvF, d.B, JFv, Jff), pin
        )
        A, r = _eliminate(A.tocsr(), r, fixed)
        dx = _solve(A.tocsc(), -r, disc.solver)
        v += dx[:d.nu_dofs]
        p += dx[d.nu_dofs:d.nu_dofs + d.np_dofs]
        F += dx[d.nu_dofs + d.np_dofs:d.nu_dofs + d.np_dofs + d.nf_dofs]
        inc = np.abs(dx).max() if len(dx) else 0.0
        res = np.abs(r).max()
        stats = NewtonStats(iterations=it, residual=res, increment=inc)
        if inc < cfg.newton_tol:
            break
    else:
        raise NewtonDivergence(
            f"Newton did not converge in {cfg.newton_max_iters} iterations "
            f"(last increment {stats.increment:.3e})",
            iterations=cfg.newton_max_iters,
            residual=stats.residual,
            step_index=prev.index + 1,
        )
    return State(prev.index + 1, asm.t_new, v, p, F), stats


def linear_step(prev: State, disc: Discretization, params: PhysParams,
                cfg: SchemeConfig, bc: BoundaryData) -> State:
    """One step of the fully linear scheme: stress and reaction use the
    previous tensor field, so a single solve advances the step."""
    asm = _StepAssembler(disc, params, cfg, bc, prev)
    d, pr = disc, params
    ex = ASSEMBLY_EXACTNESS
    X = forms.elastic_cross_matrix(d.uspace, d.fspace, prev.F, ex)
    Jff = asm.Aff_fixed
    if pr.lam > 0:
        Jff = Jff + pr.mu / (2 * pr.lam) * forms.giesekus_linear_matrix(
            d.fspace, prev.F, ex
        )
    JFv = -forms.velocity_gradient_coupling_v(d.fspace, d.uspace, prev.F, ex)
    pin = bc.pin_pressure
    extra = 1 if pin else 0
    A = _assemble_global(asm, (asm.Avv, -d.B.T, pr.mu * X, d.B, JFv, Jff), pin)
    rhs = np.concatenate([asm.rhs_v, np.zeros(d.np_dofs), asm.rhs_f, np.zeros(extra)])
    fixed = asm.dirichlet_dofs()
    # move known boundary values to the right-hand side, then eliminate
    x_bc = np.zeros(A.shape[0])
    x_bc[bc.v_dofs] = bc.velocity_values(asm.t_new)
    nvp = d.nu_dofs + d.np_dofs
    if len(bc.f_dofs):
        x_bc[nvp + np.asarray(bc.f_dofs, dtype=np.int64)] = bc.f_values
    rhs = rhs - A @ x_bc
    A, rhs = _eliminate(A.tocsr(), rhs, fixed)
    x = _solve(A.tocsc(), rhs, disc.solver) + x_bc
    v = x[:d.nu_dofs]
    p = x[d.nu_dofs:nvp]
    F = x[nvp:nvp + d.nf_dofs]
    if pin:
        p = fix_pressure_mean(p, d.pspace)
    return State(prev.index + 1, asm.t_new, v, p, F)


def newtonian_step(prev: State, disc: Discretization, params: PhysParams,
                   cfg: SchemeConfig, bc: BoundaryData) -> State:
    """Navier-Stokes step with the tensor frozen at the identity."""
    asm = _StepAssembler(disc, params, cfg, bc, prev)
    d, pr = disc, params
    pin = bc.pin_pressure
    extra = 1 if pin else 0
    if pin:
        c = sp.csr_matrix(d.p_integral[None, :])
        A = sp.bmat(
            [[asm.Avv, -d.B.T, None], [d.B, None, c.T], [None, c, None]],
            format="csr",
        )
    else:
        A = sp.bmat([[asm.Avv, -d.B.T], [d.B, None]], format="csr")
    rhs_v = asm.rhs_v
    if not bc.stress_shift:
        # frozen identity tensor still exerts mu (I, grad w)
        rhs_v = rhs_v - pr.mu * d.div_load
    rhs = np.concatenate([rhs_v, np.zeros(d.np_dofs + extra)])
    x_bc = np.zeros(A.shape[0])
    x_bc[bc.v_dofs] = bc.velocity_values(asm.t_new)
    rhs = rhs - A @ x_bc
    A, rhs = _eliminate(A.tocsr(), rhs, np.asarray(bc.v_dofs, dtype=np.int64))
    x = _solve(A.tocsc(), rhs, disc.solver) + x_bc
    v = x[:d.nu_dofs]
    p = x[d.nu_dofs:d.nu_dofs + d.np_dofs]
    if pin:
        p = fix_pressure_mean(p, d.pspace)
    return State(prev.index + 1, asm.t_new, v, p, prev.F.copy())


def step(prev, disc, params, cfg, bc):
    """Dispatch one step; returns (State, NewtonStats or None)."""
    if params.lam == 0:
        return newtonian_step(prev, disc, params, cfg, bc), None
    if cfg.scheme == "linear":
        return linear_step(prev, disc, params, cfg, bc), None
    return nonlinear_step(prev, disc, params, cfg, bc)


def run(init: State, disc: Discretization, params: PhysParams, cfg: SchemeConfig,
        bc: BoundaryData, hooks=()):
    """Advance from init to t_end, calling each hook(prev, state, stats)
    after every step. Returns (final State, list of hook results)."""
    cfg.check_time_step(params)
    n_steps_f = cfg.t_end / cfg.dt
    n_steps = int(round(n_steps_f))
    if abs(n_steps_f - n_steps) > 1e-9:
        raise ValueError(f"t_end/dt = {n_steps_f} is not close to an integer")
    state = init
    results = []
    for _ in range(n_steps):
        prev = state
        state, stats = step(prev, disc, params, cfg, bc)
        results.append([hook(prev, state, stats) for hook in hooks])
    return state, results


def project_div_free(disc: Discretization, v, bc_dofs=None):
    """Project a velocity vector onto the discretely divergence-free
    subspace (constrained L2 projection with a pressure multiplier)."""
    d = disc
    bc_dofs = np.asarray(bc_dofs if bc_dofs is not None else [], dtype=np.int64)
    c = sp.csr_matrix(d.p_integral[None, :])
    A = sp.bmat(
        [[d.Mu, -d.B.T, None], [d.B, None, c.T], [None, c, None]], format="csr"
    )
    rhs = np.concatenate([d.Mu @ v, np.zeros(d.np_dofs + 1)])
    x_bc = np.zeros(A.shape[0])
    x_bc[bc_dofs] = v[bc_dofs]
    rhs = rhs - A @ x_bc
    A, rhs = _eliminate(A, rhs, bc_dofs)
    x = _solve(A.tocsc(), rhs) + x_bc
    return x[:d.nu_dofs]


def save_checkpoint(path, mesh: Mesh, state: State):
    """Serialize a state with its mesh; exact round-trip."""
    parts = [
        "checkpoint v1",
        f"index {state.index}",
        f"time {state.time!r}",
        mesh_to_text(mesh).rstrip("\n"),
    ]
    for name, arr in (("velocity", state.v), ("pressure", state.p),
                      ("tensor", state.F)):
        parts.append(f"field {name} {len(arr)}")
        parts.extend(repr(float(x)) for x in arr)
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def load_checkpoint(path):
    """Read a checkpoint; returns (mesh, State)."""
    with open(path) as f:
        lines = [ln for ln in f.read().split("\n") if ln.strip()]
    it = iter(lines)
    if next(it).strip() != "checkpoint v1":
        raise ValueError("bad checkpoint header")
    index = int(next(it).split()[1])
    time = float(next(it).split()[1])
    mesh = mesh_from_lines(it)
    fields = {}
    for _ in range(3):
        _, name, n = next(it).split()
        fields[name] = np.array([float(next(it)) for _ in range(int(n))])
    return mesh, State(index, time, fields["velocity"], fields["pressure"],
                       fields["tensor"])
