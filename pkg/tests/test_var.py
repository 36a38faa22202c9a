import math

import numpy as np
import pytest

from doublephase.mesh import DiscreteFunction, build_disc_mesh, build_rect_mesh, evaluate_at
from doublephase.operators import (NonlinearitySpec, ProblemFields, energy_Phi, energy_Psi,
                                   grad_Phi, grad_Psi)
from doublephase.var import (CutoffSpec, NonConvergence, VarParams, certify_nontrivial,
                             cutoff_sandwich, cutoff_u_bar, minimize_I, remark_4_1_growth)

EXACT = 0.2 ** 2.5 / 2.5 * math.pi * (2 ** 2 - 1 ** 2)


@pytest.fixture(scope="module")
def square():
    return build_rect_mesh(-2, -2, 2, 2, 16, 16)


def test_cutoff_values(disc6):
    u = cutoff_u_bar(CutoffSpec((0, 0), 2.0, 0.2), disc6)
    assert u.values[0] == 0.2
    assert np.all(u.values[disc6.boundary_mask] == 0)
    assert evaluate_at(u, [[1.5, 0.0]])[0] == pytest.approx(0.1, abs=1e-12)
    d = np.hypot(*disc6.vertices.T)
    assert np.all(u.values[d <= 1 + 1e-12] == 0.2)


def test_cutoff_spec_validation(square):
    with pytest.raises(ValueError):
        CutoffSpec(R=0)
    with pytest.raises(ValueError):
        CutoffSpec(height=1.0)
    with pytest.raises(ValueError):
        cutoff_u_bar(CutoffSpec((1.0, 0.0), 2.0, 0.2), square)


@pytest.mark.parametrize("levels,tol", [(6, 0.02), (8, 0.005)])
def test_cutoff_energy(levels, tol):
    m = build_disc_mesh((0, 0), 2.0, levels)
    u = cutoff_u_bar(CutoffSpec((0, 0), 2.0, 0.2), m)
    assert abs(energy_Phi(u, 2.5, 2.8, 0.0) / EXACT - 1) < tol


@pytest.mark.parametrize("mu", [0.0, 1.0])
def test_cutoff_sandwich(disc6, mu):
    spec = CutoffSpec((0, 0), 2.0, 0.2)
    s = cutoff_sandwich(cutoff_u_bar(spec, disc6), spec, ProblemFields(mu=mu))
    assert s["lower"] <= s["value"] <= s["upper"]
    assert s["discrete_area"] == pytest.approx(s["exact_area"], rel=1e-3)


def test_certify_nontrivial():
    assert certify_nontrivial(-0.03)
    assert not certify_nontrivial(0.0)
    assert not certify_nontrivial(-1e-13)


def test_baseline_zero(square):
    z = DiscreteFunction.zeros(square)
    assert energy_Phi(z, 2.5, 2.8, 1) == 0 and energy_Psi(z, NonlinearitySpec()) == 0


def test_minimize_nontrivial(square):
    spec = NonlinearitySpec("paper_f1", 0.01, 0.01, 1.5)
    fields = ProblemFields(p=2.5, q=2.8, mu=1.0)
    start = cutoff_u_bar(CutoffSpec((0, 0), 2.0, 0.2), square)
    rep = minimize_I(25.0, spec, fields, start)
    assert rep.converged and rep.nontrivial and rep.I_value < 0
    assert rep.I_value <= rep.I_start
    assert rep.norm > 0
    Is = [t[0] for t in rep.ps_trace]
    assert np.all(np.diff(Is) <= 0)
    res = grad_Phi(rep.u, 2.5, 2.8, 1.0) - 25.0 * grad_Psi(rep.u, spec)
    assert np.max(np.abs(res[square.free])) == pytest.approx(rep.residual_inf)
    assert rep.residual_inf < 1e-8
    assert rep.phi_below_cap == all(t[1] < 1 for t in rep.ps_trace)


def test_minimize_small_lambda_stays_nonnegative(square):
    # superlinear f (s larger than the gradient exponents) and small lambda:
    # the origin is a strict local minimum and descent returns to it
    spec = NonlinearitySpec("paper_f1", 0.0, 1.0, 3.5)
    start = cutoff_u_bar(CutoffSpec((0, 0), 2.0, 0.2), square)
    rep = minimize_I(1e-3, spec, ProblemFields(p=2, q=2, mu=0), start,
                     VarParams(tol_res=1e-12))
    assert not rep.nontrivial
    assert rep.norm < 1e-10 and rep.I_value >= -1e-12


def test_minimize_budget(square):
    start = cutoff_u_bar(CutoffSpec((0, 0), 2.0, 0.2), square)
    with pytest.raises(NonConvergence) as err:
        minimize_I(25.0, NonlinearitySpec("paper_f1", 0.01, 0.01, 1.5), ProblemFields(), start,
                   VarParams(max_iters=2))
    assert err.value.report.iterations == 2


def test_minimize_rejects_lambda(square):
    with pytest.raises(ValueError):
        minimize_I(0.0, NonlinearitySpec(), ProblemFields(), DiscreteFunction.zeros(square))


def test_remark_growth():
    lam0, slack = remark_4_1_growth(NonlinearitySpec("paper_f1", 0.01, 0.01, 1.5), 2.5)
    assert lam0 == pytest.approx(0.025) and slack >= 0
    with pytest.raises(ValueError):
        remark_4_1_growth(NonlinearitySpec("paper_f1", 0.0, 1.0, 1.5), 2.5)
