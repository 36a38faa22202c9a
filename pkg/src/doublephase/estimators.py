"""scikit-learn style wrappers around the solvers.

The solvers take no training data: ``fit`` builds the mesh from the
constructor parameters and solves, and ``predict`` evaluates the fitted
piecewise linear solution at query points of shape ``(n, 2)``. Points
outside the mesh give NaN.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import estimate_embedding_constant
from .mesh import build_disc_mesh, build_rect_mesh, evaluate_at
from .nonvar import RhsSpec, SolverParams, solve_convection
from .operators import NonlinearitySpec, ProblemFields
from .var import CutoffSpec, VarParams, cutoff_u_bar, minimize_I

__all__ = ["ConvectionSolver", "VariationalSolver", "EmbeddingConstantEstimator"]


def _mesh(bounds, nx, ny, pattern="crisscross"):
    x0, y0, x1, y1 = bounds
    return build_rect_mesh(x0, y0, x1, y1, nx, ny, pattern=pattern)


class _FieldPredictor(BaseEstimator):
    """Shared ``predict`` for estimators whose fitted state is ``solution_``."""

    def predict(self, X):
        check_is_fitted(self, "solution_")
        X = check_array(X, ensure_min_features=2)
        if X.shape[1] != 2:
            raise ValueError(f"expected points of shape (n, 2), got {X.shape}")
        return evaluate_at(self.solution_, X)


class ConvectionSolver(_FieldPredictor):
    """Double-phase problem with convection ``-div a(x, grad u) + L'(u) = g - nu . grad u``.

    Ginzburg-Landau is the special case ``p = q = r = 2, mu = 0, gamma = 1``.
    """

    def __init__(self, p=2.5, q=2.8, mu=1.0, alpha=1.0, gamma=1.0, r=2.0, g=1.0,
                 nu=(0.0, 0.0), bounds=(0.0, 0.0, 1.0, 1.0), nx=32, ny=32,
                 tol_res=1e-8, max_iters=10000, tol_fix=1e-7, max_outer=200, damping=1.0):
        self.p = p
        self.q = q
        self.mu = mu
        self.alpha = alpha
        self.gamma = gamma
        self.r = r
        self.g = g
        self.nu = nu
        self.bounds = bounds
        self.nx = nx
        self.ny = ny
        self.tol_res = tol_res
        self.max_iters = max_iters
        self.tol_fix = tol_fix
        self.max_outer = max_outer
        self.damping = damping

    def fit(self, X=None, y=None):
        """Solve on the configured mesh. ``X`` and ``y`` are ignored."""
        mesh = _mesh(self.bounds, self.nx, self.ny)
        fields = ProblemFields(self.p, self.q, self.mu, self.alpha, self.gamma, self.r)
        params = SolverParams(tol_res=self.tol_res, max_iters=self.max_iters,
                              tol_fix=self.tol_fix, max_outer=self.max_outer,
                              damping=self.damping)
        report = solve_convection(RhsSpec(self.g, tuple(self.nu), "convective"), fields, mesh,
                                  params)
        self.report_ = report
        self.solution_ = report.u
        self.mesh_ = mesh
        self.residual_ = report.residual_inf
        self.n_iter_ = report.outer_iters
        return self


class VariationalSolver(_FieldPredictor):
    """Minimiser of ``Phi - lam Psi`` started from the radial cut-off function."""

    def __init__(self, lam=25.0, c1=0.01, c2=0.01, s=1.5, p=2.5, q=2.8, mu=1.0,
                 bounds=(-2.0, -2.0, 2.0, 2.0), nx=32, ny=32, center=(0.0, 0.0), R=2.0,
                 height=0.2, tol_res=1e-8, max_iters=20000):
        self.lam = lam
        self.c1 = c1
        self.c2 = c2
        self.s = s
        self.p = p
        self.q = q
        self.mu = mu
        self.bounds = bounds
        self.nx = nx
        self.ny = ny
        self.center = center
        self.R = R
        self.height = height
        self.tol_res = tol_res
        self.max_iters = max_iters

    def fit(self, X=None, y=None):
        mesh = _mesh(self.bounds, self.nx, self.ny)
        start = cutoff_u_bar(CutoffSpec(tuple(self.center), self.R, self.height), mesh)
        spec = NonlinearitySpec("paper_f1", self.c1, self.c2, self.s)
        fields = ProblemFields(p=self.p, q=self.q, mu=self.mu)
        report = minimize_I(self.lam, spec, fields, start,
                            VarParams(tol_res=self.tol_res, max_iters=self.max_iters))
        self.report_ = report
        self.solution_ = report.u
        self.mesh_ = mesh
        self.energy_ = report.I_value
        self.nontrivial_ = report.nontrivial
        self.n_iter_ = report.iterations
        return self


class EmbeddingConstantEstimator(BaseEstimator):
    """Lower bound on the best constant in ``|u|_h <= c ||grad u||_H``.

    ``shape="rect"`` uses ``bounds`` and ``nx``; ``shape="disc"`` uses
    ``bounds`` as ``(cx, cy, radius)`` and ``nx`` as the ring count.
    """

    def __init__(self, h=2.0, p=2.0, q=2.0, mu=0.0, shape="rect",
                 bounds=(0.0, 0.0, 1.0, 1.0), nx=32, trials=20, sweeps=20, random_state=42):
        self.h = h
        self.p = p
        self.q = q
        self.mu = mu
        self.shape = shape
        self.bounds = bounds
        self.nx = nx
        self.trials = trials
        self.sweeps = sweeps
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if self.shape == "rect":
            mesh = _mesh(self.bounds, self.nx, self.nx)
        elif self.shape == "disc":
            cx, cy, radius = self.bounds
            mesh = build_disc_mesh((cx, cy), radius, self.nx)
        else:
            raise ValueError(f"unknown shape {self.shape!r}")
        seed = self.random_state if self.random_state is not None else 42
        value, argmax = estimate_embedding_constant(
            mesh, self.h, self.p, self.q, self.mu, trials=self.trials, sweeps=self.sweeps,
            seed=int(seed), return_argmax=True)
        self.mesh_ = mesh
        self.constant_ = value
        self.argmax_ = argmax
        return self

    def predict(self, X=None):
        """The fitted constant, repeated once per row of ``X`` when given."""
        check_is_fitted(self, "constant_")
        if X is None:
            return self.constant_
        X = check_array(X)
        return np.full(X.shape[0], self.constant_)
