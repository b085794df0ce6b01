"""Manufactured solution on the unit square: closed-form fields, source
terms derived symbolically, space-time error norms, and convergence
studies over mesh size and time step."""
from functools import lru_cache

import numpy as np
import sympy as sy

from . import forms
from .mesh import generate_friedrichs_keller
from .quadrature import triangle_rule
from .scheme import (BoundaryData, Discretization, PhysParams,
                     ReusingDirectSolver, SchemeConfig, initial_state, run)

T_FINAL = 0.1
ERROR_EXACTNESS = 8
RATE_CSV_HEADER = "h,dt,err_v,err_p,err_F"


@lru_cache(maxsize=1)
def _symbolic():
    x1, x2, t = sy.symbols("x1 x2 t", real=True)
    rho, nu, mu, lam = sy.symbols("rho nu mu lam", positive=True)
    et = sy.exp(-t)
    v1 = et * x1 ** 2 * (x1 - 1) ** 2 * x2 * (x2 - 1) * (2 * x2 - 1)
    v2 = -et * x1 * (x1 - 1) * (2 * x1 - 1) * x2 ** 2 * (x2 - 1) ** 2
    p = et * (2 * x1 - 1) * (2 * x2 - 1)
    c = sy.Rational(1, 6) * et * sy.cos(4 * sy.pi * x1) * sy.cos(4 * sy.pi * x2)
    F = sy.Matrix([[1 + c, 0], [0, 1 - c]])
    v = sy.Matrix([v1, v2])
    xs = (x1, x2)

    grad_v = sy.Matrix(2, 2, lambda i, j: sy.diff(v[i], xs[j]))
    conv_v = sy.Matrix([sum(v[j] * sy.diff(v[i], xs[j]) for j in range(2))
                        for i in range(2)])
    lap_v = sy.Matrix([sum(sy.diff(v[i], xs[j], 2) for j in range(2))
                       for i in range(2)])
    grad_p = sy.Matrix([sy.diff(p, xs[0]), sy.diff(p, xs[1])])
    B = F * F.T
    div_B = sy.Matrix([sum(sy.diff(B[i, j], xs[j]) for j in range(2))
                       for i in range(2)])
    f_v = rho * v.diff(t) + rho * conv_v + grad_p - nu * lap_v - mu * div_B

    conv_F = sy.Matrix(2, 2, lambda i, j: sum(
        v[k] * sy.diff(F[i, j], xs[k]) for k in range(2)))
    reaction = (mu / (2 * lam)) * (F * F.T * F - F)
    G_F = F.diff(t) + conv_F + reaction - grad_v * F

    args = (x1, x2, t, rho, nu, mu, lam)
    simple_args = (x1, x2, t)
    return {
        "v": sy.lambdify(simple_args, [v1, v2], "numpy"),
        "p": sy.lambdify(simple_args, p, "numpy"),
        "F": sy.lambdify(simple_args, [F[0, 0], F[0, 1], F[1, 0], F[1, 1]], "numpy"),
        "f_v": sy.lambdify(args, [sy.simplify(f_v[0]), sy.simplify(f_v[1])], "numpy"),
        "G_F": sy.lambdify(args, [G_F[0, 0], G_F[0, 1], G_F[1, 0], G_F[1, 1]], "numpy"),
    }


def exact_eval(x, t):
    """Closed-form (v, p, F) at one point and time."""
    fns = _symbolic()
    x = np.asarray(x, dtype=float)
    v = np.array(fns["v"](x[0], x[1], t), dtype=float)
    p = float(fns["p"](x[0], x[1], t))
    F = np.array(fns["F"](x[0], x[1], t), dtype=float).reshape(2, 2)
    return v, p, F


def exact_v(points, t):
    fns = _symbolic()
    pts = np.asarray(points, dtype=float)
    out = fns["v"](pts[..., 0], pts[..., 1], t)
    return np.stack(np.broadcast_arrays(*out), axis=-1)


def exact_p(points, t):
    fns = _symbolic()
    pts = np.asarray(points, dtype=float)
    return np.broadcast_to(
        np.asarray(fns["p"](pts[..., 0], pts[..., 1], t), dtype=float),
        pts.shape[:-1],
    )[..., None]


def exact_F(points, t):
    fns = _symbolic()
    pts = np.asarray(points, dtype=float)
    out = fns["F"](pts[..., 0], pts[..., 1], t)
    return np.stack(np.broadcast_arrays(*[np.asarray(o, float) for o in out]), axis=-1)


def mms_forcing(x, t, params: PhysParams):
    """Momentum and tensor source terms at one point and time."""
    fns = _symbolic()
    x = np.asarray(x, dtype=float)
    a = (x[0], x[1], t, params.rho, params.nu, params.mu, params.lam)
    f_v = np.array(fns["f_v"](*a), dtype=float)
    G_F = np.array(fns["G_F"](*a), dtype=float).reshape(2, 2)
    return f_v, G_F


def forcing_v(points, t, params: PhysParams):
    fns = _symbolic()
    pts = np.asarray(points, dtype=float)
    out = fns["f_v"](pts[..., 0], pts[..., 1], t,
                     params.rho, params.nu, params.mu, params.lam)
    return np.stack(np.broadcast_arrays(*[np.asarray(o, float) for o in out]), axis=-1)


def forcing_F(points, t, params: PhysParams):
    fns = _symbolic()
    pts = np.asarray(points, dtype=float)
    out = fns["G_F"](pts[..., 0], pts[..., 1], t,
                     params.rho, params.nu, params.mu, params.lam)
    return np.stack(np.broadcast_arrays(*[np.asarray(o, float) for o in out]), axis=-1)


def _field_error_sq(space, coeffs, exact_fn, t):
    """Integral of |u_h - exact|^2 with a high-order spatial rule."""
    vals, _ = forms.eval_at_quadrature(space, coeffs, ERROR_EXACTNESS)
    pts = forms.physical_quadrature_points(space.mesh, ERROR_EXACTNESS)
    exact = exact_fn(pts.reshape(-1, 2), t).reshape(vals.shape)
    diff = vals - exact
    w = triangle_rule(ERROR_EXACTNESS).weights
    wdet = w[None, :] * space.mesh.detA[:, None]
    return float(np.einsum("kq,kqc,kqc->", wdet, diff, diff))


def l2_space_time_error(states, disc: Discretization, dt: float):
    """Composite L2(space-time) errors over the stored right-endpoint
    states; returns (err_v, err_p, err_F)."""
    acc = np.zeros(3)
    for st in states:
        acc[0] += dt * _field_error_sq(disc.uspace, st.v, exact_v, st.time)
        acc[1] += dt * _field_error_sq(disc.pspace, st.p, exact_p, st.time)
        acc[2] += dt * _field_error_sq(disc.fspace, st.F, exact_F, st.time)
    return tuple(np.sqrt(acc))


def boundary_velocity_dofs(disc: Discretization):
    coords = disc.uspace.dof_coordinates()
    onb = (
        np.isclose(coords[:, 0], 0.0) | np.isclose(coords[:, 0], 1.0)
        | np.isclose(coords[:, 1], 0.0) | np.isclose(coords[:, 1], 1.0)
    )
    return np.where(np.repeat(onb, 2))[0]


def run_case(j: int, ell: int, variant: str = "skew", scheme: str = "nonlinear",
             params: PhysParams = None, stress_diffusion: str = "scale_dt"):
    """One manufactured-solution run: mesh 2^-j, step (T/5) 2^-ell.

    Returns (errors triple, max Newton iterations).
    """
    params = params or PhysParams()
    dt = (T_FINAL / 5.0) * 2.0 ** (-ell)
    cfg = SchemeConfig(dt=dt, t_end=T_FINAL, variant=variant, scheme=scheme,
                       stress_diffusion=stress_diffusion)
    mesh = generate_friedrichs_keller(2 ** j)
    disc = Discretization(mesh, cfg)
    disc.solver = ReusingDirectSolver()
    vdofs = boundary_velocity_dofs(disc)
    bc = BoundaryData(
        v_dofs=vdofs,
        forcing_v=lambda x, t: forcing_v(x, t, params),
        forcing_F=lambda x, t: forcing_F(x, t, params),
    )
    v0 = forms.l2_projection(disc.uspace, lambda x: exact_v(x, 0.0), 8)
    v0[vdofs] = 0.0
    F0 = forms.l2_projection(disc.fspace, lambda x: exact_F(x, 0.0), 8)
    p0 = forms.l2_projection(disc.pspace, lambda x: exact_p(x, 0.0), 8)
    init = initial_state(disc, v=v0, p=p0, F=F0)
    states = []
    newton_iters = []

    def hook(prev, state, stats):
        states.append(state)
        if stats is not None:
            newton_iters.append(stats.iterations)

    run(init, disc, params, cfg, bc, hooks=(hook,))
    errs = l2_space_time_error(states, disc, dt)
    return errs, (max(newton_iters) if newton_iters else 0)


def convergence_study(js, ells, variant: str = "skew", scheme: str = "nonlinear",
                      pairs=None, stress_diffusion: str = "scale_dt"):
    """Error table over the (j, ell) grid (or an explicit pair list).

    Returns rows of (h, dt, err_v, err_p, err_F).
    """
    if pairs is None:
        pairs = [(j, ell) for j in js for ell in ells]
    rows = []
    for j, ell in pairs:
        errs, _ = run_case(j, ell, variant=variant, scheme=scheme,
                           stress_diffusion=stress_diffusion)
        rows.append((2.0 ** (-j), (T_FINAL / 5.0) * 2.0 ** (-ell)) + tuple(errs))
    return rows


def write_rate_csv(path, rows):
    lines = [RATE_CSV_HEADER]
    for row in rows:
        lines.append(",".join(repr(float(x)) for x in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_rates_derived_csv(path, rows):
    """log2 error ratios along each refinement axis, per field."""
    lines = ["axis,coarse,fine,rate_v,rate_p,rate_F"]
    by_dt = {}
    by_h = {}
    for h, dt, ev, ep, ef in rows:
        by_dt.setdefault(dt, {})[h] = (ev, ep, ef)
        by_h.setdefault(h, {})[dt] = (ev, ep, ef)
    for dt, table in sorted(by_dt.items()):
        hs = sorted(table, reverse=True)
        for a, b in zip(hs, hs[1:]):
            rates = [float(np.log2(table[a][i] / table[b][i])) for i in range(3)]
            lines.append("h,%r,%r,%s" % (float(a), float(b),
                                         ",".join(repr(r) for r in rates)))
    for h, table in sorted(by_h.items()):
        dts = sorted(table, reverse=True)
        for a, b in zip(dts, dts[1:]):
            rates = [float(np.log2(table[a][i] / table[b][i])) for i in range(3)]
            lines.append("dt,%r,%r,%s" % (float(a), float(b),
                                          ",".join(repr(r) for r in rates)))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
