"""The 4:1 planar contraction benchmark: geometry, boundary data, the
nondimensional parameter sweep, and the four stabilization cases."""
import math
from dataclasses import dataclass, field

import numpy as np

from . import forms
from .errors import NewtonDivergence, UntaggedBoundary
from .mesh import (GeometrySpec, INLET, OUTLET, WALL, generate_contraction,
                   refine_ball)
from .scheme import (BoundaryData, Discretization, PhysParams,
                     ReusingDirectSolver, SchemeConfig, initial_state, step)
from .diagnostics import make_report, timeseries_writer

CASES = {
    "a": (0.01, "scale_dt"),
    "b": (0.0025, "scale_dt"),
    "c": (0.01, "scale_dt2"),
    "d": (0.01, "none"),
}

KNOWN_TAGS = {INLET, OUTLET, WALL}


@dataclass
class ContractionConfig:
    wi: float = 1.0
    case: str = "a"
    t_end: float = 2.0          # paper setting is 10; desk scale default
    h: float = 0.1              # paper setting is 1/20
    refine_levels: int = 3      # paper setting is 5
    L: float = 0.5
    V_in: float = 0.1
    mu: float = 1.0
    variant: str = "skew"
    snapshot_every: int = 50

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"case must be one of {sorted(CASES)}, got {self.case!r}")
        if self.wi < 0:
            raise ValueError("wi must be nonnegative")

    @property
    def lam(self):
        return wi_to_lambda(self.wi, self)

    def params(self) -> PhysParams:
        if self.wi == 0:
            # purely Newtonian: unit viscosity, density 0.05 nu
            return PhysParams(rho=0.05, nu=1.0, mu=self.mu, lam=0.0)
        lam = self.lam
        return PhysParams(rho=lam / 18.0, nu=lam / 9.0, mu=self.mu, lam=lam)

    def scheme_config(self) -> SchemeConfig:
        dt, diffusion = CASES[self.case]
        return SchemeConfig(
            dt=dt, t_end=self.t_end, variant=self.variant,
            stress_diffusion=diffusion,
        )

    def dimensionless(self):
        """Reported Reynolds, Weissenberg, and retardation numbers."""
        p = self.params()
        re = 4 * p.rho * self.V_in * self.L / (p.nu + p.lam)
        wi = 4 * p.lam * self.V_in / (p.mu * self.L)
        alpha = p.lam / (p.nu + p.lam)
        return {"Re": re, "Wi": wi, "alpha": alpha}


def wi_to_lambda(wi, cfg: ContractionConfig = None) -> float:
    """Relaxation time realizing a target Weissenberg number."""
    mu = cfg.mu if cfg else 1.0
    V_in = cfg.V_in if cfg else 0.1
    L = cfg.L if cfg else 0.5
    return wi * mu * L / (4 * V_in)


def build_mesh(cfg: ContractionConfig):
    """Contraction mesh with graded refinement at the re-entrant corners."""
    mesh = generate_contraction(GeometrySpec(kind="contraction", L=cfg.L), cfg.h)
    for corner in ((0.0, cfg.L), (0.0, -cfg.L)):
        mesh = refine_ball(mesh, np.array(corner), cfg.L / 2, cfg.refine_levels)
    return mesh


def _tagged_scalar_dofs(mesh, space, tags):
    """Scalar dof indices of a Lagrange space lying on tagged boundary edges."""
    edges = mesh.edges()
    lookup = {tuple(e): i for i, e in enumerate(edges)}
    nv = mesh.num_vertices
    out = {t: set() for t in tags}
    for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        if tag not in KNOWN_TAGS:
            raise UntaggedBoundary(f"boundary edge {(i, j)} has unknown tag {tag!r}")
        if tag not in out:
            continue
        out[tag].update((int(i), int(j)))
        if space.degree == 2:
            out[tag].add(nv + lookup[(min(i, j), max(i, j))])
    return {t: np.array(sorted(s), dtype=np.int64) for t, s in out.items()}


def inlet_profile(x2, cfg: ContractionConfig):
    return cfg.V_in * (1.0 - (np.asarray(x2) / (4 * cfg.L)) ** 2)


def apply_boundary_conditions(mesh, disc: Discretization,
                              cfg: ContractionConfig) -> BoundaryData:
    """Strong inlet/wall data and the outlet facet list.

    Inlet: parabolic horizontal velocity and identity tensor; walls:
    no slip; outlet: natural (traction with the identity-shifted stress),
    so no Dirichlet rows there.
    """
    udofs = _tagged_scalar_dofs(mesh, disc.uspace, (INLET, WALL))
    coords = disc.uspace.dof_coordinates()
    # walls first, inlet values override at the shared corners (both zero)
    wall = udofs[WALL]
    inlet = udofs[INLET]
    inlet_only = np.setdiff1d(inlet, wall)
    scalar = np.concatenate([wall, inlet_only])
    v_dofs = np.concatenate([scalar * 2, scalar * 2 + 1])
    values = np.zeros(len(v_dofs))
    vx = np.zeros(len(scalar))
    vx[len(wall):] = inlet_profile(coords[inlet_only, 1], cfg)
    values[:len(scalar)] = vx
    fdofs = _tagged_scalar_dofs(mesh, disc.fspace, (INLET,))[INLET]
    f_dofs = (fdofs[:, None] * 4 + np.arange(4)[None, :]).ravel()
    f_values = np.tile(np.eye(2).ravel(), len(fdofs))
    return BoundaryData(
        v_dofs=v_dofs,
        v_values=values,
        f_dofs=f_dofs,
        f_values=f_values,
        outlet_facets=forms.boundary_facets(mesh, OUTLET),
        pin_pressure=False,
        stress_shift=True,
    )


def stress_magnitude(disc: Discretization, F, mu: float):
    """Pointwise mu |F F^T - I| at the tensor Lagrange nodes."""
    Fm = np.asarray(F).reshape(-1, 2, 2)
    B = np.einsum("kim,kjm->kij", Fm, Fm) - np.eye(2)
    return mu * np.sqrt(np.einsum("kij,kij->k", B, B))


@dataclass
class BenchmarkResult:
    config: ContractionConfig
    reports: list
    completed: bool
    failure: str = ""
    failed_step: int = 0
    final_state: object = None
    blowup_step: int = field(default=-1)


def run_benchmark(cfg: ContractionConfig, outdir=None, mesh=None) -> BenchmarkResult:
    """Run one case/Wi combination from rest; energy series always kept,
    CSV and VTK snapshots written when an output directory is given.

    Newton divergence is a recorded outcome, not a crash; a non-positive
    determinant flags the log-energy series but the run continues.
    A prebuilt mesh may be passed to share it across sweep members.
    """
    if mesh is None:
        mesh = build_mesh(cfg)
    scfg = cfg.scheme_config()
    disc = Discretization(mesh, scfg)
    # the coupled systems change little between Newton iterations and
    # steps, so one factorization serves many solves
    disc.solver = ReusingDirectSolver()
    params = cfg.params()
    bc = apply_boundary_conditions(mesh, disc, cfg)
    state = initial_state(disc)
    n_steps = int(round(scfg.t_end / scfg.dt))
    reports = []
    completed = True
    failure = ""
    failed_step = 0
    blowup_step = -1
    writer = None
    if outdir is not None:
        from . import io_cli
        import os
        os.makedirs(outdir, exist_ok=True)
        writer = lambda st: io_cli.write_vtk(
            os.path.join(outdir, f"snapshot_{st.index:05d}.vtk"),
            mesh, disc, st, mu=params.mu,
        )
        writer(state)
    for n in range(1, n_steps + 1):
        prev = state
        try:
            state, stats = step(prev, disc, params, scfg, bc)
        except NewtonDivergence as e:
            completed = False
            failure = str(e)
            failed_step = n
            break
        report = make_report(prev, state, disc, params, scfg, stats)
        reports.append(report)
        if report.logdet == math.inf and blowup_step < 0:
            blowup_step = n
        if writer is not None and n % cfg.snapshot_every == 0:
            writer(state)
    if outdir is not None:
        import os
        timeseries_writer(os.path.join(outdir, "energy.csv"), reports)
        with open(os.path.join(outdir, "summary.txt"), "w") as f:
            dims = cfg.dimensionless()
            f.write(f"case {cfg.case}\nwi {cfg.wi}\n")
            f.write(f"Re {dims['Re']!r}\nalpha {dims['alpha']!r}\n")
            f.write(f"completed {completed}\n")
            if not completed:
                f.write(f"failure step {failed_step}: {failure}\n")
            if blowup_step >= 0:
                f.write(f"logdet blowup at step {blowup_step}\n")
    return BenchmarkResult(
        config=cfg, reports=reports, completed=completed, failure=failure,
        failed_step=failed_step, final_state=state, blowup_step=blowup_step,
    )
