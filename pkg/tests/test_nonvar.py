import numpy as np
import pytest

from doublephase.mesh import DiscreteFunction, build_rect_mesh
from doublephase.nonvar import (NonConvergence, RhsSpec, SolverParams, coercivity_probe,
                                convection_bound_certificate, gl_fields, gl_solve,
                                hemicontinuity_probe, monotonicity_probe, solve_convection,
                                solve_monotone, trace_to_csv)
from doublephase.operators import ProblemFields, apply_T, load_vector

from test_operators import stiffness


@pytest.fixture(scope="module")
def mesh16():
    return build_rect_mesh(0, 0, 1, 1, 16, 16)


def poisson_oracle(mesh):
    K = stiffness(mesh)
    f = load_vector(mesh, 1.0)
    free = ~mesh.boundary_mask
    u = np.zeros(mesh.n_vertices)
    u[free] = np.linalg.solve(K[np.ix_(free, free)], f[free])
    return u


def test_zero_load_gives_zero(mesh16):
    fields = ProblemFields(alpha=0.0)
    u = solve_monotone(np.zeros(mesh16.n_vertices), fields, mesh16)
    assert np.all(u.values == 0)


def test_linear_poisson_matches_direct_solve(mesh16):
    fields = ProblemFields(p=2, q=2, mu=0, alpha=0)
    u = solve_monotone(load_vector(mesh16, 1.0), fields, mesh16)
    assert np.max(np.abs(u.values - poisson_oracle(mesh16))) < 1e-6


def test_residual_certificate(mesh16):
    fields = ProblemFields()
    f = load_vector(mesh16, "1 + x*y")
    u = solve_monotone(f, fields, mesh16)
    r = apply_T(u, fields) - f
    assert np.max(np.abs(r[mesh16.free])) < 1e-8
    # Dirichlet rows are not tested against; u vanishes there
    assert np.all(u.values[mesh16.boundary_mask] == 0)


def test_budget_exhaustion_raises(mesh16):
    with pytest.raises(NonConvergence) as err:
        solve_monotone(load_vector(mesh16, 1.0), ProblemFields(), mesh16,
                       SolverParams(max_iters=3))
    assert isinstance(err.value.best, DiscreteFunction)
    assert err.value.residual > 1e-8


def test_zero_data_fixed_point(mesh16):
    rep = solve_convection(RhsSpec(0.0, (0.0, 0.0)), ProblemFields(), mesh16)
    assert rep.outer_iters == 1 and rep.converged and rep.trivial
    assert np.all(rep.u.values == 0)


def test_gl_zero_data(mesh16):
    rep = gl_solve((0, 0), 1.0, 0.0, mesh16)
    assert rep.outer_iters == 1 and rep.trivial


def test_gl_with_source(mesh16):
    rep = gl_solve((0.1, 0.0), 1.0, 1.0, mesh16)
    assert rep.converged and not rep.trivial and rep.residual_inf < 1e-6
    assert rep.contractive
    lhs, bound = convection_bound_certificate(rep.u, (0.1, 0.0), rep.u)
    assert lhs <= bound
    rng = np.random.default_rng(3)
    for _ in range(5):
        v = rng.standard_normal(mesh16.n_vertices)
        v[mesh16.boundary_mask] = 0
        lhs, bound = convection_bound_certificate(rep.u, (0.1, 0.0), DiscreteFunction(mesh16, v))
        assert lhs <= bound


def test_energy_traces_nonincreasing(mesh16):
    rep = solve_convection(RhsSpec(1.0, (0.2, 0.1)), ProblemFields(), mesh16)
    for trace in rep.inner_energy_traces:
        assert np.all(np.diff(trace) <= 1e-15)
    assert rep.converged and rep.delta_norm <= 1e-7 * max(1, rep.norm)


def test_fixed_mode_ignores_velocity(mesh16):
    a = solve_convection(RhsSpec(1.0, (5.0, 5.0), "fixed"), ProblemFields(), mesh16)
    b = solve_convection(RhsSpec(1.0, (0.0, 0.0), "fixed"), ProblemFields(), mesh16)
    assert np.array_equal(a.u.values, b.u.values)


def test_damping_recorded(mesh16):
    full = solve_convection(RhsSpec(1.0, (0.3, 0.0)), ProblemFields(), mesh16)
    half = solve_convection(RhsSpec(1.0, (0.3, 0.0)), ProblemFields(), mesh16,
                            SolverParams(damping=0.5))
    assert full.converged and half.converged
    assert np.max(np.abs(full.u.values - half.u.values)) < 1e-6


def test_outer_budget_raises(mesh16):
    with pytest.raises(NonConvergence) as err:
        solve_convection(RhsSpec(1.0, (0.3, 0.0)), ProblemFields(), mesh16,
                         SolverParams(max_outer=1))
    assert "damping" in str(err.value)
    assert err.value.report is not None and not err.value.report.converged


@pytest.mark.parametrize("bad", [0.0, 1.5, -1])
def test_damping_range(mesh16, bad):
    with pytest.raises(ValueError):
        solve_convection(RhsSpec(1.0), ProblemFields(), mesh16, SolverParams(damping=bad))


def test_rhs_validation():
    with pytest.raises(ValueError):
        RhsSpec(1.0, (0, 0), "other")
    with pytest.raises(ValueError):
        RhsSpec(1.0, (np.inf, 0))
    assert RhsSpec(1.0, (1, 2), "fixed").velocity == (0.0, 0.0)


def test_gl_fields():
    f = gl_fields(2.0)
    assert f.p.is_constant and f.p(0, 0) == 2 and f.mu(0, 0) == 0 and f.gamma(0, 0) == 1
    with pytest.raises(ValueError):
        gl_fields(0.0)


def _interior(mesh, rng, scale=1.0):
    v = rng.standard_normal(mesh.n_vertices) * scale
    v[mesh.boundary_mask] = 0
    return DiscreteFunction(mesh, v)


def test_probes(mesh16):
    rng = np.random.default_rng(5)
    fields = ProblemFields()
    u = _interior(mesh16, rng)
    assert monotonicity_probe(u, u, fields) == 0
    w = _interior(mesh16, rng, 0.1)
    ratios = coercivity_probe(w, np.geomspace(1, 300, 25), fields)
    assert np.all(np.diff(ratios[-10:]) > 0)
    v = _interior(mesh16, rng)
    coarse = hemicontinuity_probe(u, w, v, np.linspace(0, 1, 11), fields)
    fine = hemicontinuity_probe(u, w, v, np.linspace(0, 1, 21), fields)
    assert fine <= 0.5 * coarse * 1.05


def test_trace_csv(mesh16):
    rep = solve_convection(RhsSpec(1.0, (0.1, 0.0)), ProblemFields(), mesh16)
    lines = trace_to_csv(rep).splitlines()
    assert lines[0] == "iter,J,residual_inf,delta_norm"
    assert len(lines) == 1 + rep.outer_iters
