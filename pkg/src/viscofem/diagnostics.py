"""Energy functionals, the per-step energy balance residual, and
determinant monitoring for the tensor field."""
import math
from dataclasses import dataclass

import numpy as np

from . import forms
from .scheme import ASSEMBLY_EXACTNESS, Discretization, PhysParams, SchemeConfig, State

ENERGY_CSV_HEADER = (
    "step,time,kinetic,elastic,logdet,visc_diss,relax_diss,diff_diss,"
    "identity_residual,min_det,newton_iters"
)


@dataclass
class EnergyReport:
    step: int
    time: float
    kinetic: float
    elastic: float
    logdet: float          # math.inf when the determinant is non-positive
    visc_diss: float
    relax_diss: float
    diff_diss: float
    identity_residual: float
    min_det: float
    newton_iters: int


def energy(state: State, disc: Discretization, params: PhysParams):
    """Kinetic and elastic (Frobenius) energies."""
    kinetic = 0.5 * params.rho * float(state.v @ (disc.Mu @ state.v))
    elastic = 0.5 * params.mu * float(state.F @ (disc.Mf @ state.F))
    return kinetic, elastic


def conformation_norm_sq(disc: Discretization, F,
                         exactness: int = ASSEMBLY_EXACTNESS) -> float:
    """Squared L2 norm of F F^T, with the assembly quadrature."""
    t = forms.tables(disc.fspace, exactness)
    vals, _ = forms.eval_at_quadrature(disc.fspace, F, exactness)
    Fm = vals.reshape(vals.shape[0], vals.shape[1], 2, 2)
    B = np.einsum("kqim,kqjm->kqij", Fm, Fm)
    return float(np.einsum("kq,kqij,kqij->", t.wdet, B, B))


def log_energy(state_or_F, disc: Discretization, params: PhysParams):
    """Logarithmic energy -(mu/2) int ln det(F F^T) with an exactness-8
    rule; returns (value, min_det). The value is +inf (a flag, not an
    error) when det F is non-positive at any quadrature point."""
    F = state_or_F.F if isinstance(state_or_F, State) else state_or_F
    vals, _ = forms.eval_at_quadrature(disc.fspace, F, 8)
    Fm = vals.reshape(vals.shape[0], vals.shape[1], 2, 2)
    det = Fm[..., 0, 0] * Fm[..., 1, 1] - Fm[..., 0, 1] * Fm[..., 1, 0]
    min_det = float(det.min())
    if min_det <= 0.0:
        return math.inf, min_det
    t = forms.tables(disc.fspace, 8)
    # ln det(F F^T) = 2 ln det F
    value = -params.mu * float(np.einsum("kq,kq->", t.wdet, np.log(det)))
    return value, min_det


def energy_identity_residual(prev: State, state: State, disc: Discretization,
                             params: PhysParams, cfg: SchemeConfig) -> float:
    """Signed relative defect of the one-step energy balance, evaluated
    with the assembly quadrature. Zero (to rounding) for converged steps
    with homogeneous velocity data, no forcing, and an energy-consistent
    convective variant."""
    rho, mu, nu, lam = params.rho, params.mu, params.nu, params.lam
    dt = cfg.dt
    phi = cfg.diffusion_coefficient()
    dv = state.v - prev.v
    dF = state.F - prev.F
    lhs = (
        rho / (2 * dt) * float(state.v @ (disc.Mu @ state.v))
        + rho / (2 * dt) * float(dv @ (disc.Mu @ dv))
        + mu / (2 * dt) * float(state.F @ (disc.Mf @ state.F))
        + mu / (2 * dt) * float(dF @ (disc.Mf @ dF))
        + nu * float(state.v @ (disc.Ku @ state.v))
        + mu * phi * float(state.F @ (disc.Kf @ state.F))
    )
    rhs = (
        rho / (2 * dt) * float(prev.v @ (disc.Mu @ prev.v))
        + mu / (2 * dt) * float(prev.F @ (disc.Mf @ prev.F))
    )
    if lam > 0:
        lhs += mu ** 2 / (2 * lam) * conformation_norm_sq(disc, state.F)
        rhs += mu ** 2 / (2 * lam) * float(state.F @ (disc.Mf @ state.F))
    return (lhs - rhs) / abs(rhs) if rhs != 0 else lhs - rhs


def make_report(prev: State, state: State, disc: Discretization,
                params: PhysParams, cfg: SchemeConfig, stats=None) -> EnergyReport:
    kinetic, elastic = energy(state, disc, params)
    logdet, min_det = log_energy(state, disc, params)
    phi = cfg.diffusion_coefficient()
    relax = (
        params.mu ** 2 / (2 * params.lam) * conformation_norm_sq(disc, state.F)
        if params.lam > 0 else 0.0
    )
    return EnergyReport(
        step=state.index,
        time=state.time,
        kinetic=kinetic,
        elastic=elastic,
        logdet=logdet,
        visc_diss=params.nu * float(state.v @ (disc.Ku @ state.v)),
        relax_diss=relax,
        diff_diss=params.mu * phi * float(state.F @ (disc.Kf @ state.F)),
        identity_residual=energy_identity_residual(prev, state, disc, params, cfg),
        min_det=min_det,
        newton_iters=stats.iterations if stats is not None else 0,
    )


def energy_hook(disc, params, cfg, reports: list):
    """Step hook for scheme.run that appends an EnergyReport per step."""
    def hook(prev, state, stats):
        report = make_report(prev, state, disc, params, cfg, stats)
        reports.append(report)
        return report
    return hook


def matrix_norm_bounds(A):
    """Triple ((1/d)|A|^4, |A A^T|^2, |A|^4) in the Frobenius norm;
    the middle value lies between the outer two for every square A."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    quart = float(np.sum(A * A)) ** 2
    mid = float(np.sum((A @ A.T) ** 2))
    return quart / d, mid, quart


def lndet_convexity_sides(A, B):
    """LHS and RHS of the log-det convexity inequality
    (A - B) : (-A^{-T}) >= -1/2 ln det(A A^T) + 1/2 ln det(B B^T),
    which holds for symmetric regular matrices but fails in general."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    lhs = float(np.sum((A - B) * (-np.linalg.inv(A).T)))
    rhs = -0.5 * math.log(np.linalg.det(A @ A.T)) \
        + 0.5 * math.log(np.linalg.det(B @ B.T))
    return lhs, rhs


def _fmt(x):
    if x == math.inf:
        return "inf"
    return repr(float(x))


def timeseries_writer(path, reports):
    """Write the energy time series CSV; floats use shortest round-trip
    formatting, a flagged logdet is the literal token `inf`."""
    lines = [ENERGY_CSV_HEADER]
    for r in reports:
        lines.append(
            ",".join(
                [str(r.step), _fmt(r.time), _fmt(r.kinetic), _fmt(r.elastic),
                 _fmt(r.logdet), _fmt(r.visc_diss), _fmt(r.relax_diss),
                 _fmt(r.diff_diss), _fmt(r.identity_residual), _fmt(r.min_det),
                 str(r.newton_iters)]
            )
        )
    try:
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"cannot write energy CSV at {path}: {e}")


def read_timeseries(path):
    """Parse an energy CSV back into EnergyReport objects."""
    with open(path) as f:
        lines = [ln for ln in f.read().split("\n") if ln.strip()]
    if lines[0] != ENERGY_CSV_HEADER:
        raise ValueError(f"unexpected energy CSV header in {path}")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        out.append(EnergyReport(
            step=int(parts[0]), time=float(parts[1]), kinetic=float(parts[2]),
            elastic=float(parts[3]),
            logdet=math.inf if parts[4] == "inf" else float(parts[4]),
            visc_diss=float(parts[5]), relax_diss=float(parts[6]),
            diff_diss=float(parts[7]), identity_residual=float(parts[8]),
            min_det=float(parts[9]), newton_iters=int(parts[10]),
        ))
    return out
