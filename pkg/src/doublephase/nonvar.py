"""Nonvariational double-phase problem with a gradient-dependent right-hand side.

For a fixed load the operator ``T = Phi' + L'`` is the gradient of
``J(u) = Phi(u) + L(u) - <f, u>``, so the inner solve minimises ``J`` by
steepest descent. An outer Picard loop updates the convective load
``f = g - nu . grad u`` from the previous iterate.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .descent import NonConvergence, armijo_descent
from .fieldexpr import ScalarField, as_field
from .mesh import DiscreteFunction, Mesh
from .musielak import norm_W1H0
from .operators import (ProblemFields, apply_T, energy_L, energy_Phi, load_vector)

__all__ = [
    "RhsSpec", "SolverParams", "SolveReport", "NonConvergence",
    "solve_monotone", "solve_convection", "gl_solve", "gl_fields",
    "monotonicity_probe", "coercivity_probe", "hemicontinuity_probe",
    "convection_bound_certificate", "trace_to_csv",
]

TRIVIAL_NORM = 1e-10


@dataclass(frozen=True)
class RhsSpec:
    g: ScalarField = 0.0
    nu: tuple = (0.0, 0.0)
    mode: str = "convective"

    def __post_init__(self):
        object.__setattr__(self, "g", as_field(self.g, "g"))
        if self.mode not in ("fixed", "convective"):
            raise ValueError(f"rhs mode must be 'fixed' or 'convective', not {self.mode!r}")
        nu = tuple(float(v) for v in self.nu)
        if len(nu) != 2 or not np.all(np.isfinite(nu)):
            raise ValueError("nu must be two finite numbers")
        object.__setattr__(self, "nu", nu)

    @property
    def velocity(self):
        return self.nu if self.mode == "convective" else (0.0, 0.0)


@dataclass(frozen=True)
class SolverParams:
    tol_res: float = 1e-8
    max_iters: int = 10000
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    step0: float = 1.0
    tol_fix: float = 1e-7
    max_outer: int = 200
    damping: float = 1.0


@dataclass
class SolveReport:
    u: DiscreteFunction
    outer_iters: int
    inner_iters: int
    residual_inf: float
    delta_norm: float
    energy_trace: list
    converged: bool
    residual_trace: list = field(default_factory=list)
    delta_trace: list = field(default_factory=list)
    inner_energy_traces: list = field(default_factory=list)
    norm: float = 0.0
    trivial: bool = True
    contractive: bool = False


def _J(mesh, fields, fvec):
    def energy(x):
        u = DiscreteFunction(mesh, x)
        return (energy_Phi(u, fields.p, fields.q, fields.mu)
                + energy_L(u, fields.alpha, fields.gamma, fields.r) - fvec @ x)

    def gradient(x):
        return apply_T(DiscreteFunction(mesh, x), fields) - fvec

    return energy, gradient


def _inner(mesh, fvec, fields, params, start=None):
    x0 = np.zeros(mesh.n_vertices) if start is None else start.values
    energy, gradient = _J(mesh, fields, np.asarray(fvec, float))
    return armijo_descent(energy, gradient, x0, mesh.free, tol_res=params.tol_res,
                          max_iters=params.max_iters, c=params.armijo_c,
                          ratio=params.backtrack, step0=params.step0, grow=None)


def solve_monotone(fvec, fields: ProblemFields, mesh: Mesh, params=SolverParams(),
                   start=None) -> DiscreteFunction:
    """Solve ``T(u) = f`` for a nodal load ``fvec`` (entries ``<f, phi_i>``).

    Raises :class:`NonConvergence` carrying the best iterate when the
    iteration budget runs out.
    """
    res = _inner(mesh, fvec, fields, params, start)
    u = DiscreteFunction(mesh, res.x)
    if not res.converged:
        raise NonConvergence(f"descent stopped after {res.iterations} iterations with "
                             f"residual {res.residual:.3e}", u, res.residual)
    return u


def _full_residual(u, fields, rhs):
    f = load_vector(u.mesh, rhs.g, rhs.velocity, u)
    r = apply_T(u, fields) - f
    return float(np.max(np.abs(r[u.mesh.free]))) if u.mesh.free.size else 0.0


def _is_contractive(deltas):
    d = [x for x in deltas if x > 0]
    if len(d) < 3:
        return False
    ratios = np.array(d[1:]) / np.array(d[:-1])
    return bool(np.all(ratios < 1))


def solve_convection(rhs: RhsSpec, fields: ProblemFields, mesh: Mesh,
                     params=SolverParams(), start=None) -> SolveReport:
    """Picard iteration ``u <- (1-theta) u + theta S(g - nu . grad u)``.

    ``S`` is the inner monotone solve. Iteration stops when the update is
    below ``tol_fix`` relative to ``max(1, ||u||)`` in the zero-trace norm
    and the full residual is below ``tol_res``.
    """
    theta = params.damping
    if not 0 < theta <= 1:
        raise ValueError("damping must lie in (0, 1]")
    u = start or DiscreteFunction.zeros(mesh)
    p, q, mu = fields.p, fields.q, fields.mu
    deltas, residuals, energies, inner_traces = [], [], [], []
    inner_total = 0
    delta = np.inf
    for k in range(1, params.max_outer + 1):
        fvec = load_vector(mesh, rhs.g, rhs.velocity, u)
        res = _inner(mesh, fvec, fields, params, start=u)
        inner_total += res.iterations
        inner_traces.append(res.energy_trace)
        if not res.converged:
            raise NonConvergence(
                f"inner solve failed at outer iteration {k} (residual {res.residual:.3e})",
                DiscreteFunction(mesh, res.x), res.residual)
        new = DiscreteFunction(mesh, (1 - theta) * u.values + theta * res.x)
        delta = norm_W1H0(new - u, p, q, mu)
        scale = max(1.0, norm_W1H0(new, p, q, mu))
        u = new
        r = _full_residual(u, fields, rhs)
        deltas.append(delta)
        residuals.append(r)
        energies.append(res.energy_trace[-1])
        if delta <= params.tol_fix * scale and r < params.tol_res:
            break
    else:
        rep = _report(u, k, inner_total, residuals, deltas, energies, inner_traces, False, fields)
        raise NonConvergence(
            f"outer iteration did not converge in {params.max_outer} steps "
            f"(last update {delta:.3e}); try a smaller damping factor", u, residuals[-1], rep)
    return _report(u, k, inner_total, residuals, deltas, energies, inner_traces, True, fields)


def _report(u, k, inner_total, residuals, deltas, energies, inner_traces, ok, fields):
    n = norm_W1H0(u, fields.p, fields.q, fields.mu)
    return SolveReport(u=u, outer_iters=k, inner_iters=inner_total,
                       residual_inf=residuals[-1], delta_norm=deltas[-1],
                       energy_trace=energies, converged=ok, residual_trace=residuals,
                       delta_trace=deltas, inner_energy_traces=inner_traces, norm=n,
                       trivial=n < TRIVIAL_NORM, contractive=_is_contractive(deltas))


def gl_fields(alpha) -> ProblemFields:
    """Ginzburg-Landau data: p = r = 2, mu = 0, gamma = 1."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return ProblemFields(p=2.0, q=2.0, mu=0.0, alpha=alpha, gamma=1.0, r=2.0)


def gl_solve(nu, alpha, g, mesh, params=SolverParams()) -> SolveReport:
    """``-lap psi + alpha (psi^2/2 - 1) psi = g - nu . grad psi``, zero on the boundary."""
    return solve_convection(RhsSpec(g, tuple(nu), "convective"), gl_fields(alpha), mesh, params)


def convection_bound_certificate(psi: DiscreteFunction, nu, phi: DiscreteFunction):
    """Return ``(|int (nu.grad psi) phi|, |nu| |grad psi|_2 |phi|_2)``."""
    mesh = psi.mesh
    gp = mesh.gradients(psi.values) @ np.asarray(nu, float)       # (m,)
    phq = mesh.values_at(phi.values, 3)                           # (m, 3)
    w = mesh.areas / 3.0
    lhs = abs(float(np.sum(w[:, None] * gp[:, None] * phq)))
    grad_l2 = np.sqrt(np.sum(mesh.areas * np.sum(mesh.gradients(psi.values) ** 2, axis=1)))
    phi_l2 = np.sqrt(np.sum(w[:, None] * phq ** 2))
    return lhs, float(np.hypot(*nu) * grad_l2 * phi_l2)


# --------------------------------------------------------------------------
# probes of the operator properties used in the existence argument
# --------------------------------------------------------------------------

def monotonicity_probe(u, v, fields) -> float:
    """``<T(u) - T(v), u - v>``."""
    return float((apply_T(u, fields) - apply_T(v, fields)) @ (u.values - v.values))


def coercivity_probe(w, t_grid, fields):
    """``<T(t w), t w> / ||t w||`` for each ``t``."""
    out = []
    for t in t_grid:
        tw = w * t
        n = norm_W1H0(tw, fields.p, fields.q, fields.mu)
        out.append(float(apply_T(tw, fields) @ tw.values) / n)
    return out


def hemicontinuity_probe(u, w, v, theta_grid, fields) -> float:
    """Largest jump of ``theta -> <T(u + theta w), v>`` between grid neighbours."""
    vals = [float(apply_T(u + w * th, fields) @ v.values) for th in theta_grid]
    return float(np.max(np.abs(np.diff(vals)))) if len(vals) > 1 else 0.0


def trace_to_csv(report: SolveReport) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["iter", "J", "residual_inf", "delta_norm"])
    for i, (J, r, d) in enumerate(zip(report.energy_trace, report.residual_trace,
                                      report.delta_trace), start=1):
        wr.writerow([i, f"{J:.17g}", f"{r:.17g}", f"{d:.17g}"])
    return buf.getvalue()
