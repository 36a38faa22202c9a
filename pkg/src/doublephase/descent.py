"""Steepest descent with Armijo backtracking on free nodal coefficients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonConvergence(RuntimeError):
    """Iteration budget exhausted; carries the best iterate seen."""

    def __init__(self, message, best=None, residual=np.inf, report=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.report = report


@dataclass
class DescentResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    energy_trace: list = field(default_factory=list)
    grad_trace: list = field(default_factory=list)
    extra_trace: list = field(default_factory=list)


def armijo_descent(energy, gradient, x0, free, tol_res=1e-8, max_iters=10000,
                   c=1e-4, ratio=0.5, step0=1.0, grow=2.0, monitor=None):
    """Minimise ``energy`` over the entries ``free`` of ``x0``.

    The search direction is the negative nodal gradient. Each line search
    starts from ``step0`` or, when ``grow`` is set, from ``grow`` times the
    previously accepted step (capped at ``step0``), then halves by
    ``ratio`` until the Armijo condition
    ``E(x - a g) <= E(x) - c a |g|^2`` holds. Stops when
    ``max |g_free| < tol_res``. ``monitor(x)`` may return a value that is
    appended to ``extra_trace`` each iteration.
    """
    x = np.array(x0, dtype=float)
    E = energy(x)
    g = gradient(x)[free]
    res = float(np.max(np.abs(g))) if g.size else 0.0
    out = DescentResult(x, 0, res, res < tol_res, [E], [res])
    if monitor is not None:
        out.extra_trace.append(monitor(x))
    step = step0
    it = 0
    while res >= tol_res and it < max_iters:
        it += 1
        gg = float(g @ g)
        a = min(step0, step * grow) if grow else step0
        trial = x.copy()
        while True:
            trial[free] = x[free] - a * g
            Et = energy(trial)
            if Et <= E - c * a * gg:
                break
            a *= ratio
            if a < 1e-300:
                # no decrease possible in floating point; report what we have
                out.x, out.iterations, out.residual = x, it, res
                return out
        step = a
        x, E = trial, Et
        g = gradient(x)[free]
        res = float(np.max(np.abs(g)))
        out.energy_trace.append(E)
        out.grad_trace.append(res)
        if monitor is not None:
            out.extra_trace.append(monitor(x))
    out.x, out.iterations, out.residual, out.converged = x, it, res, res < tol_res
    return out
