"""Configuration files, VTK export, and the command-line interface."""
import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, forms, mesh as meshmod, mms, spaces
from .contraction import ContractionConfig, run_benchmark
from .errors import (NewtonDivergence, ParseError, SingularLinearSystem,
                     ValidationError, ViscofemError)
from .scheme import (BoundaryData, Discretization, PhysParams, SchemeConfig,
                     initial_state, run)

_SCHEMA = {
    "run": {"kind", "output", "snapshot_every"},
    "scheme": {"dt", "t_end", "scheme", "variant", "stress_diffusion",
               "diffusion_eps", "newton_tol", "newton_max_iters"},
    "physics": {"rho", "nu", "mu", "lam"},
    "mesh": {"source", "n", "h", "refine_levels", "path"},
    "contraction": {"wi", "case"},
}

_DEFAULTS = {
    ("run", "kind"): "custom",
    ("run", "output"): ".",
    ("run", "snapshot_every"): "50",
    ("scheme", "scheme"): "nonlinear",
    ("scheme", "variant"): "skew",
    ("scheme", "stress_diffusion"): "scale_dt",
    ("scheme", "diffusion_eps"): "0.0",
    ("scheme", "newton_tol"): "1e-12",
    ("scheme", "newton_max_iters"): "25",
    ("physics", "rho"): "1.0",
    ("physics", "nu"): "1.0",
    ("physics", "mu"): "1.0",
    ("physics", "lam"): "1.0",
    ("mesh", "source"): "unit_square",
    ("mesh", "n"): "8",
    ("mesh", "h"): "0.1",
    ("mesh", "refine_levels"): "3",
    ("contraction", "wi"): "1.0",
    ("contraction", "case"): "a",
}


@dataclass
class RunConfig:
    kind: str
    scheme: SchemeConfig
    params: PhysParams
    mesh_source: str
    mesh_n: int
    mesh_h: float
    refine_levels: int
    mesh_path: str
    output: str
    snapshot_every: int
    wi: float
    case: str
    raw: dict = field(default_factory=dict, repr=False)


def parse_config(path) -> RunConfig:
    """Read and validate a sections/key=value configuration file."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as f:
            cp.read_file(f, source=path)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except configparser.MissingSectionHeaderError as e:
        raise ParseError(f"{path}:{e.lineno}: key outside any section")
    except configparser.ParsingError as e:
        lineno = e.errors[0][0] if e.errors else "?"
        raise ParseError(f"{path}:{lineno}: malformed line")
    values = dict(_DEFAULTS)
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ValidationError(f"unknown section [{section}]")
        for key, val in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ValidationError(f"unknown key {key!r} in section [{section}]")
            values[(section, key)] = val
    return _build_config(values)


def _get_float(values, section, key, positive=False, nonnegative=False):
    raw = values.get((section, key))
    try:
        x = float(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"{section}.{key} must be a number, got {raw!r}")
    if positive and x <= 0:
        raise ValidationError(f"{section}.{key} must be > 0, got {raw}")
    if nonnegative and x < 0:
        raise ValidationError(f"{section}.{key} must be >= 0, got {raw}")
    return x


def _build_config(values) -> RunConfig:
    kind = values[("run", "kind")]
    if kind not in ("mms", "contraction", "custom"):
        raise ValidationError(f"run.kind must be mms/contraction/custom, got {kind!r}")
    if ("scheme", "dt") not in values or ("scheme", "t_end") not in values:
        raise ValidationError("scheme.dt and scheme.t_end are required")
    try:
        scfg = SchemeConfig(
            dt=_get_float(values, "scheme", "dt", positive=True),
            t_end=_get_float(values, "scheme", "t_end", positive=True),
            scheme=values[("scheme", "scheme")],
            variant=values[("scheme", "variant")],
            stress_diffusion=values[("scheme", "stress_diffusion")],
            diffusion_eps=_get_float(values, "scheme", "diffusion_eps",
                                     nonnegative=True),
            newton_tol=_get_float(values, "scheme", "newton_tol", positive=True),
            newton_max_iters=int(values[("scheme", "newton_max_iters")]),
        )
        params = PhysParams(
            rho=_get_float(values, "physics", "rho", positive=True),
            nu=_get_float(values, "physics", "nu", positive=True),
            mu=_get_float(values, "physics", "mu", positive=True),
            lam=_get_float(values, "physics", "lam", nonnegative=True),
        )
    except ValueError as e:
        raise ValidationError(str(e))
    source = values[("mesh", "source")]
    if source not in ("unit_square", "contraction", "file"):
        raise ValidationError(f"mesh.source invalid: {source!r}")
    path = values.get(("mesh", "path"), "")
    if source == "file" and not os.path.exists(path):
        raise ValidationError(f"mesh.path not resolvable: {path!r}")
    case = values[("contraction", "case")]
    if case not in ("a", "b", "c", "d"):
        raise ValidationError(f"contraction.case invalid: {case!r}")
    return RunConfig(
        kind=kind,
        scheme=scfg,
        params=params,
        mesh_source=source,
        mesh_n=int(values[("mesh", "n")]),
        mesh_h=_get_float(values, "mesh", "h", positive=True),
        refine_levels=int(values[("mesh", "refine_levels")]),
        mesh_path=path,
        output=values[("run", "output")],
        snapshot_every=int(values[("run", "snapshot_every")]),
        wi=_get_float(values, "contraction", "wi", nonnegative=True),
        case=case,
        raw={k: v for k, v in values.items()},
    )


def serialize_config(cfg: RunConfig) -> str:
    """Config text that parses back to an equal RunConfig."""
    sections = {}
    for (section, key), val in sorted(cfg.raw.items()):
        sections.setdefault(section, []).append((key, val))
    lines = []
    for section in sections:
        lines.append(f"[{section}]")
        for key, val in sections[section]:
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)


def write_vtk(path, mesh, disc, state, mu=1.0):
    """Legacy ASCII VTK unstructured grid with velocity, pressure,
    determinant, stress magnitude, and the four tensor components at the
    mesh vertices."""
    nv = mesh.num_vertices
    v = np.asarray(state.v).reshape(-1, 2)[:nv]
    if disc.pspace.degree >= 1:
        p = np.asarray(state.p)[:nv]
    else:
        p = np.zeros(nv)
    F = np.asarray(state.F).reshape(-1, 2, 2)[:nv]
    det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    B = np.einsum("kim,kjm->kij", F, F) - np.eye(2)
    stress = mu * np.sqrt(np.einsum("kij,kij->k", B, B))
    lines = [
        "# vtk DataFile Version 3.0",
        "viscofem fields",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r} 0.0")
    lines.append(f"CELLS {mesh.num_cells} {4 * mesh.num_cells}")
    for i, j, k in mesh.cells:
        lines.append(f"3 {i} {j} {k}")
    lines.append(f"CELL_TYPES {mesh.num_cells}")
    lines.extend(["5"] * mesh.num_cells)
    lines.append(f"POINT_DATA {nv}")
    lines.append("VECTORS velocity double")
    for vx, vy in v:
        lines.append(f"{float(vx)!r} {float(vy)!r} 0.0")

    def scalar(name, arr):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(repr(float(x)) for x in arr)

    scalar("pressure", p)
    scalar("det_F", det)
    scalar("stress_magnitude", stress)
    for a in range(2):
        for b in range(2):
            scalar(f"F_{a}{b}", F[:, a, b])
    try:
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"cannot write VTK file at {path}: {e}")


def _build_mesh(cfg: RunConfig):
    if cfg.mesh_source == "unit_square":
        return meshmod.generate_friedrichs_keller(cfg.mesh_n)
    if cfg.mesh_source == "file":
        return meshmod.load_text(cfg.mesh_path)
    m = meshmod.generate_contraction(
        meshmod.GeometrySpec(kind="contraction", L=0.5), cfg.mesh_h
    )
    for corner in ((0.0, 0.5), (0.0, -0.5)):
        m = meshmod.refine_ball(m, np.array(corner), 0.25, cfg.refine_levels)
    return m


def _run_command(cfg: RunConfig):
    mesh = _build_mesh(cfg)
    disc = Discretization(mesh, cfg.scheme)
    if cfg.kind == "contraction":
        ccfg = ContractionConfig(
            wi=cfg.wi, case=cfg.case, t_end=cfg.scheme.t_end, h=cfg.mesh_h,
            refine_levels=cfg.refine_levels, variant=cfg.scheme.variant,
            snapshot_every=cfg.snapshot_every,
        )
        run_benchmark(ccfg, outdir=cfg.output)
        return
    coords = disc.uspace.dof_coordinates()
    xmin, ymin = mesh.vertices.min(axis=0)
    xmax, ymax = mesh.vertices.max(axis=0)
    onb = (np.isclose(coords[:, 0], xmin) | np.isclose(coords[:, 0], xmax)
           | np.isclose(coords[:, 1], ymin) | np.isclose(coords[:, 1], ymax))
    vdofs = np.where(np.repeat(onb, 2))[0]
    bc = BoundaryData(v_dofs=vdofs)
    init = initial_state(disc)
    if cfg.kind == "mms":
        bc.forcing_v = lambda x, t: mms.forcing_v(x, t, cfg.params)
        bc.forcing_F = lambda x, t: mms.forcing_F(x, t, cfg.params)
        v0 = forms.l2_projection(disc.uspace, lambda x: mms.exact_v(x, 0.0), 8)
        v0[vdofs] = 0.0
        F0 = forms.l2_projection(disc.fspace, lambda x: mms.exact_F(x, 0.0), 8)
        init = initial_state(disc, v=v0, F=F0)
    reports = []
    hook = diagnostics.energy_hook(disc, cfg.params, cfg.scheme, reports)
    os.makedirs(cfg.output, exist_ok=True)

    def snapshot(prev, state, stats):
        if cfg.snapshot_every > 0 and state.index % cfg.snapshot_every == 0:
            write_vtk(os.path.join(cfg.output, f"snapshot_{state.index:05d}.vtk"),
                      mesh, disc, state, mu=cfg.params.mu)

    run(init, disc, cfg.params, cfg.scheme, bc, hooks=(hook, snapshot))
    diagnostics.timeseries_writer(os.path.join(cfg.output, "energy.csv"), reports)


def _check_command() -> int:
    """Invariant suite: quadrature, convective identities, matrix
    inequalities, and forcing consistency. Returns count of failures."""
    rng = np.random.default_rng(1234)
    failures = []

    def check(name, ok):
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
        if not ok:
            failures.append(name)

    from .quadrature import triangle_rule
    r = triangle_rule(5)
    exact = 1.0 / ((5 + 1) * (5 + 2))
    val = float((r.weights * r.points[:, 0] ** 5).sum())
    check("quadrature exactness 5", abs(val - exact) < 1e-14)

    m = meshmod.generate_friedrichs_keller(4)
    u2 = spaces.build_space(m, 2, spaces.VECTOR2)
    p1 = spaces.build_space(m, 1)
    f1 = spaces.build_space(m, 1, spaces.TENSOR22)
    coords = u2.dof_coordinates()
    onb = (np.isclose(coords[:, 0], 0) | np.isclose(coords[:, 0], 1)
           | np.isclose(coords[:, 1], 0) | np.isclose(coords[:, 1], 1))
    free = ~np.repeat(onb, 2)
    B = forms.assemble_div_coupling(u2, p1).toarray()
    v = np.zeros(u2.num_dofs)
    v[free] = rng.standard_normal(free.sum())
    corr, *_ = np.linalg.lstsq(B[:, free], B @ v, rcond=None)
    v[free] -= corr
    F = rng.standard_normal(f1.num_dofs)
    for variant in ("skew", "lambda"):
        C = forms.conv_matrix(f1, u2, v, variant)
        check(f"convective identity {variant}",
              abs(F @ (C @ F)) < 1e-11 * (1 + F @ F))

    lam = forms.lambda_coefficients(f1, F)
    ok = True
    Fv = F.reshape(-1, 2, 2)[m.cells]
    g = p1.tabulate(np.array([[1 / 3, 1 / 3]]))[1][0]
    for k in range(m.num_cells):
        gphys = g @ m.AinvT[k].T
        gradF = np.einsum("lab,lj->abj", Fv[k], gphys)
        lhs = np.einsum("ijab,abj->i", lam[k], gradF)
        # gradient of the vertex interpolant of |F|^2 / 2
        normsq = 0.5 * np.einsum("lab,lab->l", Fv[k], Fv[k])
        rhs = gphys.T @ normsq
        if np.abs(lhs - rhs).max() > 1e-12:
            ok = False
    check("chain rule of the element-local surrogate", ok)

    ok = True
    for _ in range(200):
        A = rng.standard_normal((2, 2))
        lo, mid, hi = diagnostics.matrix_norm_bounds(A)
        if not (lo <= mid + 1e-12 * hi and mid <= hi + 1e-12 * hi):
            ok = False
    check("norm equivalence of |A A^T| and |A|^2", ok)

    lhs, rhs = diagnostics.lndet_convexity_sides(
        np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[2.0, 0.0], [1.0, 2.0]])
    )
    check("log-det convexity counterexample", lhs < rhs and abs(lhs - 1) < 1e-12)

    params = PhysParams()
    worst = 0.0
    for _ in range(20):
        x = rng.uniform(0.05, 0.95, 2)
        t = rng.uniform(0.0, 0.1)
        h = 1e-5
        v0, p0, F0 = mms.exact_eval(x, t)
        fe, Ge = mms.mms_forcing(x, t, params)
        vt = (mms.exact_eval(x, t + h)[0] - mms.exact_eval(x, t - h)[0]) / (2 * h)
        Ft = (mms.exact_eval(x, t + h)[2] - mms.exact_eval(x, t - h)[2]) / (2 * h)
        dv = np.zeros((2, 2))
        dp = np.zeros(2)
        dF = np.zeros((2, 2, 2))
        lap = np.zeros(2)
        dB = np.zeros((2, 2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            vp, pp, Fp = mms.exact_eval(x + e, t)
            vm, pm, Fm = mms.exact_eval(x - e, t)
            dv[:, j] = (vp - vm) / (2 * h)
            dp[j] = (pp - pm) / (2 * h)
            dF[:, :, j] = (Fp - Fm) / (2 * h)
            lap += (vp - 2 * v0 + vm) / h ** 2
            dB[:, :, j] = (Fp @ Fp.T - Fm @ Fm.T) / (2 * h)
        f_v = (params.rho * vt + params.rho * (dv @ v0) + dp - params.nu * lap
               - params.mu * dB[:, [0, 1], [0, 1]].sum(axis=1))
        G_F = (Ft + np.einsum("j,abj->ab", v0, dF)
               + params.mu / (2 * params.lam) * (F0 @ F0.T @ F0 - F0) - dv @ F0)
        worst = max(worst, np.abs(f_v - fe).max(), np.abs(G_F - Ge).max())
    check("manufactured forcing vs finite differences", worst < 1e-6)
    return len(failures)


def _add_run_flags(sub):
    sub.add_argument("--config", required=True)
    sub.add_argument("--dt", type=float)
    sub.add_argument("--t-end", type=float)
    sub.add_argument("--variant")
    sub.add_argument("--scheme")
    sub.add_argument("--output")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    from dataclasses import replace
    sch = cfg.scheme
    kw = {}
    if args.dt is not None:
        kw["dt"] = args.dt
    if getattr(args, "t_end", None) is not None:
        kw["t_end"] = args.t_end
    if args.variant is not None:
        kw["variant"] = args.variant
    if args.scheme is not None:
        kw["scheme"] = args.scheme
    if kw:
        cfg.scheme = replace(sch, **kw)
    if args.output is not None:
        cfg.output = args.output
    return cfg


def cli(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="viscofem",
        description="2D viscoelastic flow solver in deformation-gradient form",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    runp = subs.add_parser("run", help="execute one trajectory from a config file")
    _add_run_flags(runp)
    mmsp = subs.add_parser("mms-convergence", help="manufactured-solution rate table")
    mmsp.add_argument("--max-j", type=int, default=4,
                      help="number of spatial levels, meshes 2^-2 .. 2^-(max_j+1)")
    mmsp.add_argument("--max-l", type=int, default=3,
                      help="temporal levels 1 .. max_l")
    mmsp.add_argument("--variant", default="skew")
    mmsp.add_argument("--scheme", default="nonlinear")
    mmsp.add_argument("--output", default="rates.csv")
    conp = subs.add_parser("contraction", help="run the contraction benchmark")
    conp.add_argument("--wi", type=float, default=1.0)
    conp.add_argument("--case", default="a", choices=list("abcd"))
    conp.add_argument("--t-end", type=float, default=2.0)
    conp.add_argument("--h", type=float, default=0.1)
    conp.add_argument("--refine-levels", type=int, default=3)
    conp.add_argument("--variant", default="skew")
    conp.add_argument("--output", default="contraction_out")
    subs.add_parser("check", help="run the fast invariant suite")
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            return 1 if _check_command() else 0
        if args.command == "run":
            cfg = parse_config(args.config)
            cfg = _apply_overrides(cfg, args)
            _run_command(cfg)
            return 0
        if args.command == "mms-convergence":
            js = range(2, args.max_j + 2)
            ls = range(1, args.max_l + 1)
            rows = mms.convergence_study(js, ls, variant=args.variant,
                                         scheme=args.scheme)
            mms.write_rate_csv(args.output, rows)
            base, ext = os.path.splitext(args.output)
            mms.write_rates_derived_csv(base + "_rates" + ext, rows)
            return 0
        if args.command == "contraction":
            ccfg = ContractionConfig(
                wi=args.wi, case=args.case, t_end=args.t_end, h=args.h,
                refine_levels=args.refine_levels, variant=args.variant,
            )
            result = run_benchmark(ccfg, outdir=args.output)
            if not result.completed:
                print(f"newton divergence at step {result.failed_step} "
                      f"(recorded outcome)", file=sys.stderr)
            return 0
    except (ParseError, ValidationError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (NewtonDivergence, SingularLinearSystem, ViscofemError) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli())
