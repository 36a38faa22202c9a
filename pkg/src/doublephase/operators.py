"""Discrete energies and their derivatives as nodal residual arrays.

Residual arrays have one entry per mesh vertex; entries at
Dirichlet-constrained vertices are zero by convention.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fieldexpr import ScalarField, as_field
from .mesh import DiscreteFunction, THREE_POINT

__all__ = [
    "ProblemFields", "NonlinearitySpec",
    "energy_Phi", "grad_Phi", "energy_L", "grad_L", "energy_L_bound",
    "energy_Psi", "grad_Psi", "apply_T", "load_vector",
    "ineq_kernel_36", "ineq_kernel_37",
]


@dataclass(frozen=True)
class ProblemFields:
    """Exponents and coefficients of the double-phase problem."""

    p: ScalarField = 2.5
    q: ScalarField = 2.8
    mu: ScalarField = 1.0
    alpha: ScalarField = 1.0
    gamma: ScalarField = 1.0
    r: ScalarField = 2.0

    def __post_init__(self):
        for name in ("p", "q", "mu", "alpha", "gamma", "r"):
            object.__setattr__(self, name, as_field(getattr(self, name), name))


def _grad_coef(mesh, u, p, q, mu):
    g = mesh.gradients(u.values)
    a = np.hypot(g[:, 0], g[:, 1])
    pv = mesh.sample(as_field(p), 1)[:, 0]
    qv = mesh.sample(as_field(q), 1)[:, 0]
    muv = mesh.sample(as_field(mu), 1)[:, 0]
    return g, a, pv, qv, muv


def energy_Phi(u: DiscreteFunction, p, q, mu) -> float:
    """``int |grad u|^p/p + mu |grad u|^q/q``."""
    mesh = u.mesh
    _, a, pv, qv, muv = _grad_coef(mesh, u, p, q, mu)
    return float(mesh.areas @ (a ** pv / pv + muv * a ** qv / qv))


def grad_Phi(u: DiscreteFunction, p, q, mu) -> np.ndarray:
    mesh = u.mesh
    g, a, pv, qv, muv = _grad_coef(mesh, u, p, q, mu)
    nz = a > 0
    coef = np.zeros_like(a)
    # flux vanishes with the gradient (limit value for exponents > 1)
    coef[nz] = a[nz] ** (pv[nz] - 2) + muv[nz] * a[nz] ** (qv[nz] - 2)
    flux = (coef * mesh.areas)[:, None] * g
    local = np.einsum("md,mjd->mj", flux, mesh.basis_gradients)
    res = mesh.assemble(local)
    res[mesh.boundary_mask] = 0.0
    return res


def _quad(mesh, u):
    return mesh.values_at(u.values, THREE_POINT)


def _weights(mesh):
    return mesh.areas[:, None] * THREE_POINT.weights[None, :]


def _test_assemble(mesh, integrand):
    """Assemble ``int integrand * phi_i`` from values at the 3 quadrature points."""
    w = _weights(mesh) * integrand
    local = w @ THREE_POINT.points  # (m, 3) by basis function
    res = mesh.assemble(local)
    res[mesh.boundary_mask] = 0.0
    return res


def _signed_pow(t, e):
    """``|t|^(e-1) t``, exactly zero at t = 0."""
    return np.sign(t) * np.abs(t) ** e


def energy_L(u: DiscreteFunction, alpha, gamma, r) -> float:
    """``int alpha/2 (|u|^r / r - gamma)^2``."""
    mesh = u.mesh
    uq = _quad(mesh, u)
    al = mesh.sample(as_field(alpha))
    ga = mesh.sample(as_field(gamma))
    rv = mesh.sample(as_field(r))
    return float(np.sum(_weights(mesh) * 0.5 * al * (np.abs(uq) ** rv / rv - ga) ** 2))


def grad_L(u: DiscreteFunction, alpha, gamma, r) -> np.ndarray:
    mesh = u.mesh
    uq = _quad(mesh, u)
    al = mesh.sample(as_field(alpha))
    ga = mesh.sample(as_field(gamma))
    rv = mesh.sample(as_field(r))
    h = al * (np.abs(uq) ** rv / rv - ga) * _signed_pow(uq, rv - 1)
    return _test_assemble(mesh, h)


def energy_L_bound(u, alpha, r, p, q, mu, C) -> float:
    """Upper bound ``C |alpha|_inf / (r^-)^2 * ||u||^(2 r_M)`` for ``energy_L``.

    ``C`` is an embedding constant (an estimate, in practice); exponent
    extremes are taken over the quadrature points in use.
    """
    from .musielak import norm_W1H0

    mesh = u.mesh
    rv = mesh.sample(as_field(r))
    a_inf = float(np.abs(mesh.sample(as_field(alpha))).max())
    r_minus, r_plus = float(rv.min()), float(rv.max())
    return C * a_inf / r_minus ** 2 * norm_W1H0(u, p, q, mu) ** (2 * max(r_minus, r_plus))


# --------------------------------------------------------------------------
# nonlinearity for the variational problem
# --------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class NonlinearitySpec:
    """Right-hand side ``f(x, t)`` of the variational problem.

    ``family="paper_f1"`` is ``f = c1 + c2 |t|^(s-2) t`` with the closed-form
    primitive ``F = c1 t + c2 |t|^s / s``. ``family="expression"`` takes
    ``f`` as an expression in ``x``, ``y`` and ``t``; ``F`` is then computed
    by composite Gauss-Legendre quadrature refined until it stops changing.
    ``c1``, ``c2`` and ``s`` also serve as the growth constants that bound
    ``|f(x, t)| <= c1 + c2 |t|^(s-1)``.
    """

    family: str = "paper_f1"
    c1: float = 1.0
    c2: float = 1.0
    s: ScalarField = 1.5
    f: ScalarField = None

    def __post_init__(self):
        if self.family not in ("paper_f1", "expression"):
            raise ValueError(f"unknown nonlinearity family {self.family!r}")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("growth constants must be nonnegative")
        object.__setattr__(self, "s", as_field(self.s, "s"))
        if self.family == "expression":
            if self.f is None:
                raise ValueError("expression family needs f")
            object.__setattr__(self, "f", as_field(self.f, "f"))

    def f_values(self, X, t, s_vals=None):
        """``f`` at points ``X`` (..., 2) and values ``t``."""
        if self.family == "paper_f1":
            sv = self.s(X[..., 0], X[..., 1]) if s_vals is None else s_vals
            return self.c1 + self.c2 * _signed_pow(t, sv - 1)
        return self.f(X[..., 0], X[..., 1], t=t)

    def F_values(self, X, t, s_vals=None, tol=1e-9):
        """Primitive ``F(x, t) = int_0^t f(x, s) ds``."""
        t = np.asarray(t, dtype=float)
        if self.family == "paper_f1":
            sv = self.s(X[..., 0], X[..., 1]) if s_vals is None else s_vals
            return self.c1 * t + self.c2 * np.abs(t) ** sv / sv
        prev = None
        for panels in (1, 2, 4, 8, 16, 32, 64, 128, 256):
            est = self._composite(X, t, panels)
            if prev is not None and np.max(np.abs(est - prev)) <= tol * (1 + np.max(np.abs(est))):
                return est
            prev = est
        raise ArithmeticError("primitive of f did not converge to the requested tolerance")

    def _composite(self, X, t, panels):
        total = np.zeros_like(t)
        for k in range(panels):
            a, b = k / panels, (k + 1) / panels
            for node, wt in zip(_GL_NODES, _GL_WEIGHTS):
                tau = 0.5 * (a + b) + 0.5 * (b - a) * node
                total = total + 0.5 * (b - a) * wt * self.f_values(X, tau * t)
        return t * total


def _psi_data(u, spec):
    mesh = u.mesh
    X = mesh.quadrature_points(THREE_POINT)
    sv = mesh.sample(spec.s) if spec.family == "paper_f1" else None
    return mesh, X, _quad(mesh, u), sv


def energy_Psi(u: DiscreteFunction, spec: NonlinearitySpec) -> float:
    mesh, X, uq, sv = _psi_data(u, spec)
    return float(np.sum(_weights(mesh) * spec.F_values(X, uq, sv)))


def grad_Psi(u: DiscreteFunction, spec: NonlinearitySpec) -> np.ndarray:
    mesh, X, uq, sv = _psi_data(u, spec)
    return _test_assemble(mesh, spec.f_values(X, uq, sv))


def apply_T(u: DiscreteFunction, fields: ProblemFields) -> np.ndarray:
    """Nodal action of ``Phi' + L'``."""
    return (grad_Phi(u, fields.p, fields.q, fields.mu)
            + grad_L(u, fields.alpha, fields.gamma, fields.r))


def load_vector(mesh, g=0.0, nu=(0.0, 0.0), u=None) -> np.ndarray:
    """Entries ``int (g - nu . grad u) phi_i``; the convection part needs ``u``."""
    gv = mesh.sample(as_field(g))
    res = _test_assemble(mesh, gv)
    if u is not None and (nu[0] or nu[1]):
        gu = mesh.gradients(u.values)
        conv = (gu @ np.asarray(nu, float)) * mesh.areas / 3.0
        extra = mesh.assemble(np.repeat(conv[:, None], 3, axis=1))
        extra[mesh.boundary_mask] = 0.0
        res = res - extra
    return res


# --------------------------------------------------------------------------
# scalar inequality kernels
# --------------------------------------------------------------------------

def _norm(v):
    return np.linalg.norm(v, axis=-1)


def _phi_m(v, m):
    n = _norm(v)
    out = np.zeros_like(v, dtype=float)
    nz = n > 0
    out[nz] = (n[nz] ** (m - 2))[..., None] * v[nz]
    return out


def ineq_kernel_36(a, b, m):
    """``c_m |a-b| (|a|+|b|)^(m-2) - | |a|^(m-2) a - |b|^(m-2) b |`` with ``c_m = 2^m``.

    Works on single vectors or stacks of shape (k, N); the slack is
    nonnegative when the inequality holds.
    """
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    s = _norm(a) + _norm(b)
    diff = _norm(_phi_m(a, m) - _phi_m(b, m))
    bound = np.zeros_like(s)
    nz = s > 0
    bound[nz] = 2.0 ** m * _norm(a - b)[nz] * s[nz] ** (m - 2)
    out = bound - diff
    return float(out[0]) if out.size == 1 else out


def ineq_kernel_37(x, y, s):
    """``(|x|^(s-2) x - |y|^(s-2) y).(x-y) - 2^-s |x-y|^s``."""
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    lhs = np.sum((_phi_m(x, s) - _phi_m(y, s)) * (x - y), axis=-1)
    out = lhs - 2.0 ** -s * _norm(x - y) ** s
    return float(out[0]) if out.size == 1 else out
