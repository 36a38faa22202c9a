"""Command-line entry point.

Usage::

    doublephase SUBCOMMAND [--config FILE] [--set SECTION.KEY=VALUE ...]

Subcommands: check, constants, props, solve-p, solve-plambda, gl,
example41 and echo-config. Reports go to stdout as ``path.to.key = value``
lines; diagnostics go to stderr.

Exit codes: 0 success, 1 hypothesis violation (or a failed check or
reproduced figure), 2 solver non-convergence, 3 config or parse error.
"""
from __future__ import annotations

import argparse
import configparser
import io
import math
import sys
from dataclasses import dataclass

import numpy as np

from .analysis import (EXAMPLE_4_1, PAPER_FIGURES, check_hypotheses,
                       estimate_embedding_constant, example_4_1_constants)
from .descent import NonConvergence
from .fieldexpr import DomainSpec, ExprEvalError, ExprSyntaxError, ScalarField, field_extrema
from .mesh import DiscreteFunction, build_disc_mesh, build_rect_mesh, function_to_csv
from .musielak import check_section2_props, props_to_csv
from .nonvar import RhsSpec, SolverParams, gl_solve, solve_convection, trace_to_csv
from .operators import NonlinearitySpec, ProblemFields
from .var import CutoffSpec, VarParams, cutoff_sandwich, cutoff_u_bar, minimize_I

EXIT_OK, EXIT_HYPOTHESIS, EXIT_NONCONVERGENCE, EXIT_CONFIG = 0, 1, 2, 3

SUBCOMMANDS = ("check", "constants", "props", "solve-p", "solve-plambda", "gl",
               "example41", "echo-config")

# every recognised key with its default; values are kept as strings until
# the typed accessors below convert them
DEFAULTS = {
    "domain": {"shape": "rect", "x0": "0", "y0": "0", "x1": "1", "y1": "1",
               "nx": "32", "ny": "32", "cx": "0", "cy": "0", "radius": "1",
               "levels": "8", "pattern": "crisscross"},
    "exponents": {"p": "2.5", "q": "2.8", "r": "2", "s": "1.5"},
    "coefficients": {"mu": "1", "alpha": "1", "gamma": "1"},
    "rhs": {"g": "1", "nu_x": "0", "nu_y": "0", "mode": "fixed"},
    "nonlinearity": {"family": "paper_f1", "c1": "0.01", "c2": "0.01", "f": ""},
    "solver": {"tol_res": "1e-8", "max_iters": "10000", "armijo_c": "1e-4",
               "backtrack": "0.5", "step0": "1", "tol_fix": "1e-7", "max_outer": "200",
               "damping": "1", "lambda": "25"},
    "analysis": {"N": "3", "lambda0": "1", "c1_hat": "0.01", "c2_hat": "0.01",
                 "c_H": "", "seed": "42", "trials": "20", "sweeps": "20",
                 "samples": "1000", "sampling": "101", "props_nx": "8"},
    "cutoff": {"cx": "0", "cy": "0", "R": "2", "height": "0.2"},
    "output": {"field_csv": "", "trace_csv": "", "props_csv": "", "report": ""},
}

# defaults that differ per subcommand, applied before the user's file
OVERLAYS = {
    "solve-plambda": {"domain": {"x0": "-2", "y0": "-2", "x1": "2", "y1": "2"},
                      "solver": {"max_iters": "20000"}},
    "gl": {"rhs": {"g": "1", "nu_x": "0.1", "nu_y": "0", "mode": "convective"},
           "coefficients": {"alpha": "1"}},
}

EXPRESSION_KEYS = {("exponents", k) for k in ("p", "q", "r", "s")} | {
    ("coefficients", k) for k in ("mu", "alpha", "gamma")} | {("rhs", "g")}


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 3."""


class HypothesisViolation(ValueError):
    """Data outside the range the solver needs; maps to exit code 1."""


def _parser():
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (N, R, c_H)
    return cp


@dataclass
class Config:
    """Resolved configuration: section -> key -> raw string value."""

    data: dict

    @classmethod
    def load(cls, text="", overrides=(), command=None):
        data = {sec: dict(keys) for sec, keys in DEFAULTS.items()}
        for sec, keys in OVERLAYS.get(command, {}).items():
            data[sec].update(keys)
        cp = _parser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config syntax: {exc}") from None
        for sec in cp.sections():
            if sec not in DEFAULTS:
                raise ConfigError(f"unknown section [{sec}]")
            for key, value in cp.items(sec):
                _set(data, sec, key, value)
        for item in overrides:
            path, sep, value = item.partition("=")
            sec, dot, key = path.strip().partition(".")
            if not sep or not dot:
                raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
            if sec not in DEFAULTS:
                raise ConfigError(f"unknown section [{sec}]")
            _set(data, sec, key, value.strip())
        cfg = cls(data)
        cfg.validate()
        return cfg

    def get(self, sec, key):
        return self.data[sec][key]

    def float(self, sec, key):
        raw = self.get(sec, key)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{sec}] {key}: expected a number, got {raw!r}") from None

    def int(self, sec, key):
        raw = self.get(sec, key)
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{sec}] {key}: expected an integer, got {raw!r}") from None

    def field(self, sec, key):
        raw = self.get(sec, key)
        try:
            return ScalarField.parse(raw, key)
        except ExprSyntaxError as exc:
            raise ConfigError(f"[{sec}] {key}: {exc}") from None

    def validate(self):
        for sec, key in sorted(EXPRESSION_KEYS):
            self.field(sec, key)
        for sec, keys in DEFAULTS.items():
            for key, default in keys.items():
                if default == "" or (sec, key) in EXPRESSION_KEYS:
                    continue
                if sec == "domain" and key in ("shape", "pattern"):
                    continue
                if (sec, key) in (("rhs", "mode"), ("nonlinearity", "family")):
                    continue
                self.float(sec, key)
        if self.get("nonlinearity", "family") == "expression" and not self.get("nonlinearity", "f"):
            raise ConfigError("missing required key [nonlinearity] f (family = expression)")
        if self.get("nonlinearity", "f"):
            self.field("nonlinearity", "f")

    def echo(self) -> str:
        cp = _parser()
        for sec in DEFAULTS:
            cp[sec] = self.data[sec]
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    # typed views --------------------------------------------------------

    def domain(self) -> DomainSpec:
        g = self.get
        try:
            return DomainSpec(shape=g("domain", "shape"), x0=self.float("domain", "x0"),
                              y0=self.float("domain", "y0"), x1=self.float("domain", "x1"),
                              y1=self.float("domain", "y1"), cx=self.float("domain", "cx"),
                              cy=self.float("domain", "cy"),
                              radius=self.float("domain", "radius"))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[domain] {exc}") from None

    def mesh(self, nx=None):
        d = self.domain()
        try:
            if d.shape == "rect":
                n = nx or self.int("domain", "nx")
                m = nx or self.int("domain", "ny")
                return build_rect_mesh(d.x0, d.y0, d.x1, d.y1, n, m,
                                       pattern=self.get("domain", "pattern"))
            return build_disc_mesh((d.cx, d.cy), d.radius, self.int("domain", "levels"))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[domain] {exc}") from None

    def fields(self) -> ProblemFields:
        return ProblemFields(p=self.field("exponents", "p"), q=self.field("exponents", "q"),
                             mu=self.field("coefficients", "mu"),
                             alpha=self.field("coefficients", "alpha"),
                             gamma=self.field("coefficients", "gamma"),
                             r=self.field("exponents", "r"))

    def nonlinearity(self) -> NonlinearitySpec:
        fam = self.get("nonlinearity", "family")
        f = self.field("nonlinearity", "f") if self.get("nonlinearity", "f") else None
        try:
            return NonlinearitySpec(family=fam, c1=self.float("nonlinearity", "c1"),
                                    c2=self.float("nonlinearity", "c2"),
                                    s=self.field("exponents", "s"), f=f)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[nonlinearity] {exc}") from None

    def rhs(self) -> RhsSpec:
        try:
            return RhsSpec(self.field("rhs", "g"),
                           (self.float("rhs", "nu_x"), self.float("rhs", "nu_y")),
                           self.get("rhs", "mode"))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[rhs] {exc}") from None

    def solver(self) -> SolverParams:
        f, i = self.float, self.int
        return SolverParams(tol_res=f("solver", "tol_res"), max_iters=i("solver", "max_iters"),
                            armijo_c=f("solver", "armijo_c"), backtrack=f("solver", "backtrack"),
                            step0=f("solver", "step0"), tol_fix=f("solver", "tol_fix"),
                            max_outer=i("solver", "max_outer"), damping=f("solver", "damping"))

    def var_params(self) -> VarParams:
        f = self.float
        return VarParams(tol_res=f("solver", "tol_res"), max_iters=self.int("solver", "max_iters"),
                         armijo_c=f("solver", "armijo_c"), backtrack=f("solver", "backtrack"),
                         step0=f("solver", "step0"))

    def cutoff(self) -> CutoffSpec:
        try:
            return CutoffSpec((self.float("cutoff", "cx"), self.float("cutoff", "cy")),
                              self.float("cutoff", "R"), self.float("cutoff", "height"))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[cutoff] {exc}") from None


def _set(data, sec, key, value):
    if key not in DEFAULTS[sec]:
        raise ConfigError(f"unknown key {key!r} in section [{sec}]")
    data[sec][key] = value


# --------------------------------------------------------------------------
# report serialisation
# --------------------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def flatten(obj, prefix=""):
    """Yield ``(path, value)`` pairs of a nested dict/list structure."""
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from flatten(v, f"{prefix}.{i}")
    else:
        yield prefix, obj


def format_report(obj) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in flatten(obj))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _hypothesis_dict(rep):
    return {"N": rep.N, "passed": rep.passed,
            "extrema": {k: {"min": lo, "max": hi} for k, (lo, hi) in rep.extrema.items()},
            "margin": rep.margins,
            "verdict": {k: (v if isinstance(v, str) else ("pass" if v else "fail"))
                        for k, v in rep.verdicts.items()},
            "f2_witness_lambda0": rep.f2_witness_lambda0, "notes": rep.notes}


def cmd_check(cfg, out):
    try:
        rep = check_hypotheses(cfg.fields(), cfg.int("analysis", "N"), cfg.nonlinearity(),
                               cfg.domain(), cfg.int("analysis", "sampling"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out["hypotheses"] = _hypothesis_dict(rep)
    return EXIT_OK if rep.passed else EXIT_HYPOTHESIS


def _c_H(cfg):
    """Configured embedding constant, or a numerical lower bound on the mesh.

    The constant is the larger of the embedding constants into ``L^1`` and
    ``L^s``, the two targets of the growth bound on ``f``.
    """
    raw = cfg.get("analysis", "c_H")
    if raw:
        return cfg.float("analysis", "c_H"), "config"
    fields, mesh = cfg.fields(), cfg.mesh()
    est = max(estimate_embedding_constant(mesh, h, fields.p, fields.q, fields.mu,
                                          trials=cfg.int("analysis", "trials"),
                                          sweeps=cfg.int("analysis", "sweeps"),
                                          seed=cfg.int("analysis", "seed"))
              for h in (1.0, cfg.field("exponents", "s")))
    return est, "lower bound (mesh estimate, max over h = 1 and h = s)"


def cmd_constants(cfg, out):
    status = cmd_check(cfg, out)
    dom, n = cfg.domain(), cfg.int("analysis", "sampling")
    fields = cfg.fields()
    pm, _ = field_extrema(fields.p, dom, n)
    _, qp = field_extrema(fields.q, dom, n)
    _, sp_ = field_extrema(cfg.field("exponents", "s"), dom, n)
    mu_inf = max(abs(v) for v in field_extrema(fields.mu, dom, n))
    cut = cfg.cutoff()
    c_H, source = _c_H(cfg)
    rep = example_4_1_constants(
        cfg.float("analysis", "lambda0"), c1_hat=cfg.float("analysis", "c1_hat"),
        c2_hat=cfg.float("analysis", "c2_hat"), s_plus=sp_, c_H=c_H,
        N=cfg.int("analysis", "N"), mu=mu_inf, p=pm, q=qp, R=cut.R, r_lambda=cut.height)
    d = rep.as_dict()
    d["c_H_source"] = source
    out["constants"] = d
    return status


def cmd_example41(cfg, out):
    lam0 = cfg.float("analysis", "lambda0")
    rep = example_4_1_constants(lam0)
    figures = {
        "r_lambda_bound": (rep.r_lambda_bound, PAPER_FIGURES["r_lambda_bound"], 0.01),
        "F_inf_coeff": (rep.F_inf_coeff / lam0, PAPER_FIGURES["F_inf_coeff"], 0.0005),
        "ratio_coeff": (rep.ratio_coeff / lam0, PAPER_FIGURES["ratio_coeff"], 0.01),
        "omega_N": (rep.omega_N, PAPER_FIGURES["omega_N"], 1e-10),
    }
    ok = True
    fig = {}
    for name, (val, ref, tol) in figures.items():
        good = abs(val - ref) <= tol
        ok &= good
        fig[name] = {"computed": val, "reference": ref, "tolerance": tol,
                     "verdict": "pass" if good else "fail"}
    out["example41"] = {"data": dict(EXAMPLE_4_1), "lambda0": lam0, "figures": fig,
                        "lambda_lower": rep.lambda_lower,
                        "lambda_lower_rounded": rep.lambda_lower_rounded,
                        "lambda1": rep.lambda1, "lambda": rep.lambda_,
                        "ratio_coeff_join": rep.ratio_coeff_join,
                        "passed": ok, "notes": rep.notes}
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def cmd_props(cfg, out, csv_stream):
    rng = np.random.default_rng(cfg.int("analysis", "seed"))
    fields = cfg.fields()
    d = cfg.domain()
    nx = cfg.int("analysis", "props_nx")
    mesh = (build_rect_mesh(d.x0, d.y0, d.x1, d.y1, nx, nx) if d.shape == "rect"
            else build_disc_mesh((d.cx, d.cy), d.radius, max(2, nx // 2)))
    samples = []
    for _ in range(cfg.int("analysis", "samples")):
        amp = 10.0 ** rng.uniform(-2, 2)
        samples.append(DiscreteFunction(mesh, amp * rng.standard_normal(mesh.n_vertices),
                                        dirichlet=False))
    try:
        reports = check_section2_props(samples, fields.p, fields.q, fields.mu)
    except ValueError as exc:
        raise HypothesisViolation(str(exc)) from None
    text = props_to_csv(reports)
    path = cfg.get("output", "props_csv")
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        csv_stream.write(text)
    summary = {}
    for rep in reports:
        for pid, chk in rep.slacks.items():
            s = summary.setdefault(pid, {"checked": 0, "failed": 0, "min_slack": math.inf})
            if chk.applicable:
                s["checked"] += 1
                s["failed"] += int(not chk.verdict)
                s["min_slack"] = min(s["min_slack"], chk.slack)
    failed = sum(s["failed"] for s in summary.values())
    out["props"] = {"samples": len(samples), "failed": failed, "property": summary}
    return EXIT_OK if failed == 0 else EXIT_HYPOTHESIS


def _require_solver_range(fields, mesh):
    """The discrete energies need p, q > 1, mu >= 0 and alpha >= 0."""
    for name in ("p", "q"):
        v = mesh.sample(getattr(fields, name), 1)
        if np.min(v) <= 1:
            raise HypothesisViolation(f"{name} must exceed 1 (min {np.min(v):.6g})")
    for name in ("mu", "alpha"):
        v = mesh.sample(getattr(fields, name), 3)
        if np.min(v) < 0:
            raise HypothesisViolation(f"{name} must be nonnegative (min {np.min(v):.6g})")


def _dump(cfg, u=None, report=None):
    path = cfg.get("output", "field_csv")
    if path and u is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(function_to_csv(u))
    path = cfg.get("output", "trace_csv")
    if path and report is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(trace_to_csv(report))


def _solve_dict(rep):
    return {"converged": rep.converged, "outer_iters": rep.outer_iters,
            "inner_iters": rep.inner_iters, "residual_inf": rep.residual_inf,
            "delta_norm": rep.delta_norm, "norm": rep.norm, "trivial": rep.trivial,
            "nontrivial": not rep.trivial, "contractive": rep.contractive,
            "energy_final": rep.energy_trace[-1] if rep.energy_trace else math.nan,
            "max_abs_u": float(np.abs(rep.u.values).max())}


def cmd_solve_p(cfg, out):
    mesh, fields = cfg.mesh(), cfg.fields()
    _require_solver_range(fields, mesh)
    try:
        rep = solve_convection(cfg.rhs(), fields, mesh, cfg.solver())
    except NonConvergence as exc:
        out["solve"] = {"converged": False, "residual_inf": exc.residual, "message": str(exc)}
        _dump(cfg, exc.best, exc.report)
        return EXIT_NONCONVERGENCE
    out["solve"] = _solve_dict(rep)
    _dump(cfg, rep.u, rep)
    return EXIT_OK


def cmd_gl(cfg, out):
    mesh = cfg.mesh()
    rhs = cfg.rhs()
    alpha = cfg.float("coefficients", "alpha")
    try:
        rep = gl_solve(rhs.nu, alpha, rhs.g, mesh, cfg.solver())
    except NonConvergence as exc:
        out["gl"] = {"converged": False, "residual_inf": exc.residual, "message": str(exc)}
        _dump(cfg, exc.best, exc.report)
        return EXIT_NONCONVERGENCE
    except ValueError as exc:
        raise HypothesisViolation(str(exc)) from None
    out["gl"] = {"alpha": alpha, "nu": list(rhs.nu), "g": rhs.g.text, **_solve_dict(rep)}
    _dump(cfg, rep.u, rep)
    return EXIT_OK


def cmd_solve_plambda(cfg, out):
    mesh, fields, spec = cfg.mesh(), cfg.fields(), cfg.nonlinearity()
    _require_solver_range(fields, mesh)
    lam = cfg.float("solver", "lambda")
    cut = cfg.cutoff()
    try:
        u_bar = cutoff_u_bar(cut, mesh)
    except ValueError as exc:
        raise ConfigError(f"[cutoff] {exc}") from None
    try:
        rep = minimize_I(lam, spec, fields, u_bar, cfg.var_params())
    except NonConvergence as exc:
        out["solve"] = {"lambda": lam, "converged": False, "residual_inf": exc.residual,
                        "message": str(exc)}
        _dump(cfg, exc.best)
        return EXIT_NONCONVERGENCE
    except ValueError as exc:
        raise HypothesisViolation(str(exc)) from None
    sandwich = cutoff_sandwich(u_bar, cut, fields)
    out["solve"] = {"lambda": lam, "converged": rep.converged, "iterations": rep.iterations,
                    "I_start": rep.I_start, "I_value": rep.I_value, "Phi_value": rep.Phi_value,
                    "residual_inf": rep.residual_inf, "nontrivial": rep.nontrivial,
                    "phi_below_cap": rep.phi_below_cap, "norm": rep.norm,
                    "max_abs_u": float(np.abs(rep.u.values).max())}
    out["cutoff"] = {k: float(v) for k, v in sandwich.items()}
    _dump(cfg, rep.u)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry points
# --------------------------------------------------------------------------

def build_arg_parser():
    ap = argparse.ArgumentParser(prog="doublephase",
                                 description="Double-phase problems with variable exponents.")
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", "-c", help="sectioned key = value config file")
    ap.add_argument("--set", "-s", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one config key (repeatable)")
    return ap


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_arg_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = Config.load(text, args.set, command=args.command)
        if args.command == "echo-config":
            stdout.write(cfg.echo())
            return EXIT_OK
        out = {"command": args.command}
        if args.command == "props":
            status = cmd_props(cfg, out, stdout)
            stderr.write(format_report(out))
            return status
        handler = {"check": cmd_check, "constants": cmd_constants, "solve-p": cmd_solve_p,
                   "solve-plambda": cmd_solve_plambda, "gl": cmd_gl,
                   "example41": cmd_example41}[args.command]
        status = handler(cfg, out)
    except (ConfigError, OSError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except ExprEvalError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except HypothesisViolation as exc:
        stderr.write(f"hypothesis violation: {exc}\n")
        return EXIT_HYPOTHESIS
    out["exit_code"] = status
    report = format_report(out)
    path = cfg.get("output", "report")
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report)
    else:
        stdout.write(report)
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
