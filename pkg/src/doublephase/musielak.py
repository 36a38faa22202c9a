"""Modulars and Luxemburg norms for variable-exponent and double-phase spaces.

All integrals are quadrature sums over the mesh. Plain functions use the
3-point rule by default; gradients are piecewise constant and use the
element centroid.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .fieldexpr import as_field
from .mesh import DiscreteFunction, RULES

__all__ = [
    "notation_pow", "Modular", "modular_px", "modular_H", "luxemburg_norm",
    "lp_norm", "norm_H", "norm_W1H0", "ModularReport", "check_section2_props",
    "props_to_csv", "BracketError",
]

UNIT_TOL = 1e-8


class BracketError(RuntimeError):
    """The unit level set of a modular could not be bracketed."""


def notation_pow(t, a, b, mode="join"):
    """Bracket powers ``t^(a v b)`` (join) and ``t^(a ^ b)`` (meet).

    >>> notation_pow(0.5, 1, 2, "join"), notation_pow(0.5, 1, 2, "meet")
    (0.5, 0.25)
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    lo, hi = min(a, b), max(a, b)
    if mode == "join":
        return t ** lo if t < 1 else t ** hi
    if mode == "meet":
        return t ** hi if t < 1 else t ** lo
    raise ValueError(f"mode must be 'join' or 'meet', not {mode!r}")


def _flat(a, shape):
    """Broadcast ``a`` against the sample array of ``shape`` and flatten."""
    a = np.asarray(a, float)
    if a.size == int(np.prod(shape)):
        return a.ravel()
    return np.broadcast_to(a, shape).ravel()


@dataclass
class Modular:
    """``rho(v) = sum w * (|v|^p + mu |v|^q)`` over sample points.

    Calling the object with ``zeta`` returns ``rho(v / zeta)``, which is the
    evaluator :func:`luxemburg_norm` expects.
    """

    values: np.ndarray
    weights: np.ndarray
    p: np.ndarray
    q: np.ndarray = None
    mu: np.ndarray = None

    def __post_init__(self):
        vals = np.abs(np.asarray(self.values, dtype=float))
        shape = vals.shape
        self.values = vals.ravel()
        self.weights = _flat(self.weights, shape)
        self.p = _flat(self.p, shape)
        if self.mu is not None:
            self.mu = _flat(self.mu, shape)
            self.q = _flat(self.q, shape)
            if np.any(self.mu < 0):
                raise ValueError("mu < 0 at a sample point; (H2) requires mu >= 0")
        keep = self.values > 0
        self._v, self._w, self._p = self.values[keep], self.weights[keep], self._sub(self.p, keep)
        self._q, self._mu = self._sub(self.q, keep), self._sub(self.mu, keep)

    @staticmethod
    def _sub(a, keep):
        return None if a is None else a[keep]

    @property
    def is_zero(self):
        return self._v.size == 0

    @property
    def exponent_range(self):
        """(smallest, largest) exponent seen at the sample points."""
        lo, hi = self.p.min(), self.p.max()
        if self.mu is not None and np.any(self.mu > 0):
            hi = max(hi, self.q.max())
        return float(lo), float(hi)

    def __call__(self, zeta=1.0):
        s = self._v / zeta
        with np.errstate(over="ignore"):
            out = self._w @ s ** self._p
            if self._mu is not None:
                out += self._w @ (self._mu * s ** self._q)
        return float(out)


def _point_data(u, rule):
    """|u| at quadrature points and matching weights (element area x rule weight)."""
    rule = RULES[rule]
    vals = u.mesh.values_at(u.values, rule)
    w = u.mesh.areas[:, None] * rule.weights[None, :]
    return vals, w


def _grad_data(u):
    g = u.gradients()
    return np.hypot(g[:, 0], g[:, 1]), u.mesh.areas


def _make(u, p, q=None, mu=None, gradient=False, rule=3):
    mesh = u.mesh
    if gradient:
        vals, w = _grad_data(u)
        take = lambda f: mesh.sample(as_field(f), 1)[:, 0]
    else:
        vals, w = _point_data(u, rule)
        take = lambda f: mesh.sample(as_field(f), rule)
    pv = take(p)
    if mu is None:
        return Modular(vals, w, pv)
    return Modular(vals, w, pv, take(q), take(mu))


def modular_px(u: DiscreteFunction, p, rule=3) -> float:
    """``int |u|^p(x) dx``."""
    return _make(u, p, rule=rule)()


def modular_H(u: DiscreteFunction, p, q, mu, gradient=False, rule=3) -> float:
    """Double-phase modular of ``u`` or, with ``gradient=True``, of ``|grad u|``."""
    return _make(u, p, q, mu, gradient=gradient, rule=rule)()


def luxemburg_norm(modular, u=None, rtol=1e-10, max_doublings=200) -> float:
    """Root ``zeta`` of ``modular(zeta) == 1`` by bracketing and bisection.

    ``modular`` maps ``zeta`` to ``rho(u / zeta)``; it must be continuous and
    strictly decreasing for nonzero ``u``. Returns 0 when ``u`` (or the
    modular itself) vanishes.
    """
    if u is not None and not np.any(np.asarray(getattr(u, "values", u))):
        return 0.0
    if getattr(modular, "is_zero", False) or modular(1.0) == 0.0:
        return 0.0
    lo = hi = 1.0
    if modular(1.0) > 1.0:
        for _ in range(max_doublings):
            lo, hi = hi, hi * 2.0
            if modular(hi) <= 1.0:
                break
        else:
            raise BracketError("modular stayed above 1 after %d doublings" % max_doublings)
    else:
        for _ in range(max_doublings):
            hi, lo = lo, lo / 2.0
            if modular(lo) > 1.0:
                break
        else:
            raise BracketError("modular stayed below 1 after %d halvings" % max_doublings)
    # invariant: modular(lo) > 1 >= modular(hi)
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if modular(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lp_norm(u, p, rule=3):
    """Luxemburg norm in L^p(x)."""
    return luxemburg_norm(_make(u, p, rule=rule))


def norm_H(u, p, q, mu, rule=3):
    return luxemburg_norm(_make(u, p, q, mu, rule=rule))


def norm_W1H0(u, p, q, mu):
    """``||grad u||_H``, the norm used on the zero-trace space."""
    return luxemburg_norm(_make(u, p, q, mu, gradient=True))


# --------------------------------------------------------------------------
# property harness
# --------------------------------------------------------------------------

@dataclass
class Check:
    verdict: bool
    slack: float
    applicable: bool = True


@dataclass
class ModularReport:
    rho: float
    norm: float
    regime: str
    slacks: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(c.verdict for c in self.slacks.values())


def _regime(n, tol=1e-12):
    if abs(n - 1.0) <= tol:
        return "equal_one"
    return "below_one" if n < 1.0 else "above_one"


def _sandwich(n, rho, lo_exp, hi_exp):
    # n > 1: n^lo <= rho <= n^hi ;  n <= 1: n^hi <= rho <= n^lo
    if n > 1:
        return min(rho - n ** lo_exp, n ** hi_exp - rho)
    return min(rho - n ** hi_exp, n ** lo_exp - rho)


def _rel(slack, scale):
    return slack / max(1.0, abs(scale))


def check_section2_props(samples, p, q, mu, tol=1e-8):
    """Check modular/norm relations on each nonzero discrete sample.

    Returns one :class:`ModularReport` per sample whose ``slacks`` map a
    property id to a :class:`Check`. Slacks are relative to
    ``max(1, |bound|)``; a property holds when its slack is at least
    ``-tol``. Checks that do not apply to a sample's regime are marked
    ``applicable=False``.
    """
    from .operators import energy_Phi

    reports = []
    for u in samples:
        checks = {}

        # L^p(x) norm vs modular
        m_p = _make(u, p)
        n_p = luxemburg_norm(m_p)
        rho_p = m_p()
        pm, pp = m_p.exponent_range if not m_p.is_zero else (0.0, 0.0)
        s = (n_p - 1.0) * (rho_p - 1.0)
        checks["prop2.2(i)"] = Check(s >= -tol, s)
        s = _rel(_sandwich(n_p, rho_p, pm, pp), rho_p)
        checks["prop2.2(ii)"] = Check(s >= -tol, s)

        # double-phase norm vs modular
        m_h = _make(u, p, q, mu)
        n_h = luxemburg_norm(m_h)
        rho_h = m_h()
        hm, hp = m_h.exponent_range if not m_h.is_zero else (0.0, 0.0)
        if n_h > 0:
            s = UNIT_TOL - abs(m_h(n_h) - 1.0)
            checks["prop2.2a(i)"] = Check(s >= 0, s)
        s = (n_h - 1.0) * (rho_h - 1.0)
        checks["prop2.2a(ii)"] = Check(s >= -tol, s)
        s = _rel(_sandwich(n_h, rho_h, hm, hp), rho_h)
        checks["prop2.2a(iii)"] = Check(s >= -tol, s, n_h < 1)
        checks["prop2.2a(iv)"] = Check(s >= -tol, s, n_h > 1)
        if n_h >= 1:
            checks["prop2.2a(iii)"] = Check(True, math.nan, False)
        if n_h <= 1:
            checks["prop2.2a(iv)"] = Check(True, math.nan, False)

        # constant outer power 2: || |u|^2 ||_p(x) == |u|^2_{2p(x)}
        vals, w = _point_data(u, 3)
        pv = u.mesh.sample(as_field(p), 3)
        lhs = luxemburg_norm(Modular(vals ** 2, w, pv))
        rhs = luxemburg_norm(Modular(vals, w, 2 * pv)) ** 2
        s = -abs(lhs - rhs) / max(1.0, abs(rhs))
        checks["prop2.2bb(iii)"] = Check(s >= -tol, s)

        # energy sandwich in terms of the gradient norm
        m_g = _make(u, p, q, mu, gradient=True)
        n_g = luxemburg_norm(m_g)
        if n_g > 0:
            gm, gp = m_g.exponent_range
            phi = energy_Phi(u, p, q, mu)
            if n_g < 1:
                s = min(phi - n_g ** gp / gp, n_g ** gm / gm - phi)
            else:
                s = min(phi - n_g ** gm / gp, n_g ** gp / gm - phi)
            s = _rel(s, phi)
            checks["rem2.1a(i)"] = Check(s >= -tol, s, n_g < 1)
            checks["rem2.1a(ii)"] = Check(s >= -tol, s, n_g > 1)
            if n_g >= 1:
                checks["rem2.1a(i)"] = Check(True, math.nan, False)
            if n_g <= 1:
                checks["rem2.1a(ii)"] = Check(True, math.nan, False)

        reports.append(ModularReport(rho_h, n_h, _regime(n_h), checks))
    return reports


def props_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample", "property_id", "verdict", "slack"])
    for i, rep in enumerate(reports):
        for pid, c in rep.slacks.items():
            verdict = "n/a" if not c.applicable else ("pass" if c.verdict else "fail")
            w.writerow([i, pid, verdict, f"{c.slack:.17g}"])
    return buf.getvalue()
