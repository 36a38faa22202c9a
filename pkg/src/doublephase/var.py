"""Variational problem: descent on ``I = Phi - lambda Psi`` from the cut-off function."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import unit_ball_volume
from .descent import NonConvergence, armijo_descent
from .mesh import DiscreteFunction, Mesh
from .musielak import norm_W1H0, notation_pow
from .operators import (NonlinearitySpec, ProblemFields, energy_Phi, energy_Psi,
                        grad_Phi, grad_Psi)

__all__ = [
    "CutoffSpec", "VarParams", "VarSolveReport", "cutoff_u_bar", "minimize_I",
    "certify_nontrivial", "remark_4_1_growth", "cutoff_sandwich", "NonConvergence",
]

NONTRIVIAL_TOL = 1e-12
PHI_CAP = 1.0


@dataclass(frozen=True)
class CutoffSpec:
    center: tuple = (0.0, 0.0)
    R: float = 2.0
    height: float = 0.2

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not 0 < self.height < 1:
            raise ValueError("plateau height must lie in (0, 1)")


@dataclass(frozen=True)
class VarParams:
    tol_res: float = 1e-8
    max_iters: int = 20000
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    step0: float = 1.0


@dataclass
class VarSolveReport:
    u: DiscreteFunction
    I_value: float
    Phi_value: float
    residual_inf: float
    nontrivial: bool
    ps_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    I_start: float = math.nan
    phi_below_cap: bool = True
    norm: float = 0.0


def _ball_inside(spec: CutoffSpec, mesh: Mesh, rtol=1e-9):
    c = np.asarray(spec.center, float)
    bnd = mesh.vertices[mesh.boundary_mask]
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    if np.any(c < lo) or np.any(c > hi):
        return False
    return bool(np.all(np.hypot(*(bnd - c).T) >= spec.R * (1 - rtol)))


def cutoff_u_bar(spec: CutoffSpec, mesh: Mesh) -> DiscreteFunction:
    """Nodal interpolant of the radial cut-off: ``h`` on ``B(x0, R/2)``,
    linear decay ``2h/R (R - |x - x0|)`` to zero at ``|x - x0| = R``."""
    if not _ball_inside(spec, mesh):
        raise ValueError("the ball B(x0, R) is not contained in the mesh domain")
    d = np.hypot(*(mesh.vertices - np.asarray(spec.center, float)).T)
    h, R = spec.height, spec.R
    # vertices generated on the circles |x - x0| = R/2, R carry rounding noise
    d = np.where(np.isclose(d, R / 2, rtol=1e-12), R / 2, d)
    vals = np.where(d <= R / 2, h, np.where(d < R, 2 * h / R * (R - d), 0.0))
    vals[mesh.boundary_mask] = 0.0
    return DiscreteFunction(mesh, vals)


def certify_nontrivial(report_or_value) -> bool:
    """True when ``I(u*) < -1e-12``; the trivial function has ``I = 0``."""
    val = getattr(report_or_value, "I_value", report_or_value)
    return bool(val < -NONTRIVIAL_TOL)


def minimize_I(lam, spec: NonlinearitySpec, fields: ProblemFields,
               start: DiscreteFunction, params=VarParams()) -> VarSolveReport:
    """Steepest descent with Armijo backtracking on ``Phi - lam Psi``.

    ``ps_trace`` holds ``(I, Phi, max|I'|)`` per iterate. The ``Phi < 1``
    sub-level set is monitored, not enforced; ``phi_below_cap`` records
    whether every iterate stayed inside it.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    mesh = start.mesh
    p, q, mu = fields.p, fields.q, fields.mu

    def energy(x):
        u = DiscreteFunction(mesh, x)
        return energy_Phi(u, p, q, mu) - lam * energy_Psi(u, spec)

    def gradient(x):
        u = DiscreteFunction(mesh, x)
        return grad_Phi(u, p, q, mu) - lam * grad_Psi(u, spec)

    def monitor(x):
        return energy_Phi(DiscreteFunction(mesh, x), p, q, mu)

    res = armijo_descent(energy, gradient, start.values, mesh.free, tol_res=params.tol_res,
                         max_iters=params.max_iters, c=params.armijo_c,
                         ratio=params.backtrack, step0=params.step0, grow=None,
                         monitor=monitor)
    u = DiscreteFunction(mesh, res.x)
    trace = list(zip(res.energy_trace, res.extra_trace, res.grad_trace))
    I_val = res.energy_trace[-1]
    report = VarSolveReport(
        u=u, I_value=I_val, Phi_value=res.extra_trace[-1], residual_inf=res.residual,
        nontrivial=certify_nontrivial(I_val), ps_trace=trace, iterations=res.iterations,
        converged=res.converged, I_start=res.energy_trace[0],
        phi_below_cap=all(ph < PHI_CAP for ph in res.extra_trace),
        norm=norm_W1H0(u, p, q, mu))
    if not res.converged:
        raise NonConvergence(f"descent stopped after {res.iterations} iterations with "
                             f"residual {res.residual:.3e}", u, res.residual, report)
    return report


def remark_4_1_growth(spec: NonlinearitySpec, p_minus, t_grid=None, points=None):
    """Slack of ``F(x, t) >= (lambda0 / p-) t^p-`` on sampled small ``t``.

    Uses the witness ``lambda0 = c1 p-``. Returns ``(lambda0, min slack)``.
    """
    if spec.family != "paper_f1" or spec.c1 <= 0:
        raise ValueError("the c1 p- witness needs the paper_f1 family with c1 > 0")
    lam0 = spec.c1 * p_minus
    t = np.geomspace(1e-6, 1.0, 61) if t_grid is None else np.asarray(t_grid, float)
    pts = np.zeros((1, 2)) if points is None else np.asarray(points, float)
    P = np.repeat(pts, len(t), axis=0)
    T = np.tile(t, len(pts))
    slack = spec.F_values(P, T) - lam0 / p_minus * T ** p_minus
    return lam0, float(slack.min())


def cutoff_sandwich(u_bar: DiscreteFunction, spec: CutoffSpec, fields: ProblemFields):
    """Lower/upper estimates of ``Phi(u_bar)`` next to the computed value.

    The two-dimensional forms of the estimates are used, with the exact
    annulus measure ``omega_2 (R^2 - (R/2)^2)`` replaced by the measure of
    the elements on which the discrete cut-off has a nonzero gradient.
    Returns a dict with ``lower``, ``value``, ``upper`` and both slacks.
    """
    mesh = u_bar.mesh
    g = mesh.gradients(u_bar.values)
    # a constant plateau gives gradients at rounding level, not exactly zero
    t = 2 * spec.height / spec.R
    support = np.hypot(g[:, 0], g[:, 1]) > 1e-9 * t
    area = float(mesh.areas[support].sum())
    pv = mesh.sample(fields.p, 1)[:, 0]
    qv = mesh.sample(fields.q, 1)[:, 0]
    muv = mesh.sample(fields.mu, 1)[:, 0]
    pm, pp, qm, qp = pv.min(), pv.max(), qv.min(), qv.max()
    mu_inf = float(np.abs(muv).max())
    value = energy_Phi(u_bar, fields.p, fields.q, fields.mu)
    lower = notation_pow(t, pm, pp, "meet") * area / qp
    upper = (1 + mu_inf) / pm * area * notation_pow(t, pm, qp, "join")
    exact_area = unit_ball_volume(2) * (spec.R ** 2 - (spec.R / 2) ** 2)
    return dict(lower=lower, value=value, upper=upper, lower_slack=value - lower,
                upper_slack=upper - value, discrete_area=area, exact_area=exact_area)
