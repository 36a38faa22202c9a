import numpy as np
import pytest
from scipy.optimize import brentq

from doublephase.mesh import DiscreteFunction, build_rect_mesh
from doublephase.musielak import (BracketError, Modular, check_section2_props, lp_norm,
                                  luxemburg_norm, modular_H, modular_px, norm_H, norm_W1H0,
                                  notation_pow, props_to_csv)


def const(mesh, c):
    return DiscreteFunction(mesh, np.full(mesh.n_vertices, float(c)), dirichlet=False)


def linear_x(mesh):
    return DiscreteFunction.interpolate(mesh, lambda x, y: x, dirichlet=False)


@pytest.mark.parametrize("t,a,b,join,meet", [(0.5, 1, 2, 0.5, 0.25), (2, 1, 2, 4, 2),
                                             (1, 1.3, 7, 1, 1), (0, 2, 3, 0, 0),
                                             (0.5, 2, 1, 0.5, 0.25)])
def test_notation_pow(t, a, b, join, meet):
    assert notation_pow(t, a, b, "join") == pytest.approx(join)
    assert notation_pow(t, a, b, "meet") == pytest.approx(meet)
    if t > 0:
        assert notation_pow(t, a, b, "join") == pytest.approx(max(t ** a, t ** b))
        assert notation_pow(t, a, b, "meet") == pytest.approx(min(t ** a, t ** b))


def test_notation_pow_errors():
    with pytest.raises(ValueError):
        notation_pow(-1, 1, 2)
    with pytest.raises(ValueError):
        notation_pow(1, 1, 2, "both")


def test_modular_px_examples(unit_mesh):
    assert modular_px(const(unit_mesh, 2), 2) == pytest.approx(4, abs=1e-10)
    assert modular_px(const(unit_mesh, 0), 2) == 0
    assert modular_px(linear_x(unit_mesh), 2) == pytest.approx(1 / 3, abs=1e-12)


def test_modular_H_examples(unit_mesh):
    assert modular_H(const(unit_mesh, 1), 2.5, 2.8, 1) == pytest.approx(2, abs=1e-10)
    assert modular_H(linear_x(unit_mesh), 2, 3, 1, gradient=True) == pytest.approx(2, abs=1e-12)


def test_mu_zero_degeneracy_is_exact(unit_mesh, rng):
    u = DiscreteFunction(unit_mesh, rng.standard_normal(unit_mesh.n_vertices), dirichlet=False)
    p = "2 + 0.5*x*y"
    assert modular_H(u, p, 3.5, 0.0) == modular_px(u, p)


def test_negative_mu_rejected(unit_mesh):
    with pytest.raises(ValueError, match="mu"):
        modular_H(const(unit_mesh, 1), 2, 3, "-1")


def test_plastic_number(unit_mesh):
    root = brentq(lambda z: z ** 3 - z - 1, 1, 2, xtol=1e-15)
    assert norm_H(const(unit_mesh, 1), 2, 3, 1) == pytest.approx(root, abs=1e-6)
    assert root == pytest.approx(1.3247179, abs=1e-7)


@pytest.mark.parametrize("p", [1.5, 2.0, 2.5, 3.7])
def test_constant_exponent_reduction(unit_mesh, rng, p):
    for _ in range(5):
        u = DiscreteFunction(unit_mesh, rng.standard_normal(unit_mesh.n_vertices) * 3,
                             dirichlet=False)
        classical = modular_px(u, p) ** (1 / p)
        assert lp_norm(u, p) == pytest.approx(classical, rel=1e-8)


def test_zero_norms(unit_mesh):
    z = const(unit_mesh, 0)
    assert lp_norm(z, 2) == 0 and norm_H(z, 2, 3, 1) == 0 and norm_W1H0(z, 2, 3, 1) == 0


def test_norm_W1H0_examples(unit_mesh, rng):
    assert norm_W1H0(linear_x(unit_mesh), 2, 3, 0) == pytest.approx(1, abs=1e-8)
    v = rng.standard_normal(unit_mesh.n_vertices)
    v[unit_mesh.boundary_mask] = 0
    u = DiscreteFunction(unit_mesh, v)
    assert norm_W1H0(u * 2, 2.5, 3, 0) == pytest.approx(2 * norm_W1H0(u, 2.5, 3, 0), rel=1e-8)


def test_unit_modular_identity(unit_mesh, rng):
    for _ in range(20):
        u = DiscreteFunction(unit_mesh, rng.standard_normal(unit_mesh.n_vertices)
                             * 10 ** rng.uniform(-3, 3), dirichlet=False)
        m = Modular(u.mesh.values_at(u.values, 3),
                    u.mesh.areas[:, None] * np.full((1, 3), 1 / 3), 2.2, 3.1, 0.7)
        n = luxemburg_norm(m)
        assert abs(m(n) - 1) <= 1e-8


def test_modular_strictly_decreasing_in_zeta(unit_mesh, rng):
    u = DiscreteFunction(unit_mesh, rng.standard_normal(unit_mesh.n_vertices), dirichlet=False)
    X = u.mesh.quadrature_points(3)
    m = Modular(u.mesh.values_at(u.values, 3), u.mesh.areas[:, None] / 3, 2 + X[..., 0], 3.5, 1.0)
    vals = [m(z) for z in np.geomspace(1e-2, 1e2, 200)]
    assert np.all(np.diff(vals) < 0)


def test_bracket_failure():
    class Broken:
        is_zero = False

        def __call__(self, zeta=1.0):
            return np.inf

    with pytest.raises(BracketError):
        luxemburg_norm(Broken(), max_doublings=20)


def _samples(mesh, rng, n):
    return [DiscreteFunction(mesh, rng.standard_normal(mesh.n_vertices) * 10 ** rng.uniform(-2, 2),
                             dirichlet=False) for _ in range(n)]


@pytest.mark.parametrize("p,q,mu", [(2.5, 2.8, 1.0), ("2 + 0.3*x", "2.6 + 0.2*y", "1 + x*y"),
                                    (1.5, 2.0, 0.0)])
def test_section2_props_hold(unit_mesh, rng, p, q, mu):
    reps = check_section2_props(_samples(unit_mesh, rng, 40), p, q, mu)
    for r in reps:
        assert r.ok, {k: c for k, c in r.slacks.items() if not c.verdict}
        assert (r.rho == 0) == (r.norm == 0)


def test_rescaled_sample_is_unit(unit_mesh, rng):
    u = _samples(unit_mesh, rng, 1)[0]
    n = norm_H(u, 2.5, 2.8, 1)
    r = check_section2_props([u / n], 2.5, 2.8, 1)[0]
    assert r.rho == pytest.approx(1, abs=1e-6)
    assert r.regime == "equal_one" or abs(r.norm - 1) < 1e-9


def test_prop_constant_outer_power(unit_mesh, rng):
    for r in check_section2_props(_samples(unit_mesh, rng, 10), "2 + x", 3.5, 1):
        assert abs(r.slacks["prop2.2bb(iii)"].slack) <= 1e-7


def test_props_csv(unit_mesh, rng):
    text = props_to_csv(check_section2_props(_samples(unit_mesh, rng, 2), 2.5, 2.8, 1))
    lines = text.splitlines()
    assert lines[0] == "sample,property_id,verdict,slack"
    assert len(lines) == 1 + 2 * 9
    assert {l.split(",")[2] for l in lines[1:]} <= {"pass", "fail", "n/a"}
