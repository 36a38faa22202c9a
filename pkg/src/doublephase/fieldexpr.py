"""Arithmetic expressions for spatial exponent and coefficient fields.

Grammar (whitespace is ignored between tokens)::

    expr   := term   (("+" | "-") term)*
    term   := power  (("*" | "/") power)*
    power  := unary  ("^" power)?          # right-associative
    unary  := "-" unary | atom             # binds tighter than "^": -2^2 == 4
    atom   := NUMBER
            | NAME                          # x, y, t, pi
            | FUNC "(" expr ("," expr)* ")"
            | "(" expr ")"
    NUMBER := digits ["." digits] [("e"|"E") ["+"|"-"] digits]  (or ".5")
    FUNC   := sin | cos | exp | abs | sqrt | min | max

Evaluation is vectorised over numpy arrays of coordinates. Division by
zero, square roots of negative numbers and any other non-finite
intermediate raise :class:`ExprEvalError` naming the offending
subexpression.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Expr",
    "ExprSyntaxError", "ExprEvalError",
    "parse_expr", "unparse", "evaluate",
    "ScalarField", "as_field", "DomainSpec", "eval_field", "field_extrema",
]

VARIABLES = ("x", "y", "t")
CONSTANTS = {"pi": math.pi}
FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "abs": 1, "sqrt": 1, "min": 2, "max": 2}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]


class ExprSyntaxError(ValueError):
    """Raised by :func:`parse_expr`; ``offset`` is a 0-based character index."""

    def __init__(self, message, offset, expected):
        super().__init__(f"{message} at offset {offset} (expected {expected})")
        self.offset = offset
        self.expected = expected


class ExprEvalError(ArithmeticError):
    def __init__(self, message, subexpr):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr


# --------------------------------------------------------------------------
# tokenizer / parser
# --------------------------------------------------------------------------

def _tokenize(src):
    tokens = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
        elif c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == ".":
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    while k < n and src[k].isdigit():
                        k += 1
                    j = k
            tokens.append(("num", src[i:j], i))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(("name", src[i:j], i))
            i = j
        elif c in "+-*/^(),":
            tokens.append(("op", c, i))
            i += 1
        else:
            raise ExprSyntaxError(f"unexpected character {c!r}", i, "a number, name, operator or parenthesis")
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src):
        self.tokens = _tokenize(src)
        self.pos = 0

    @property
    def tok(self):
        return self.tokens[self.pos]

    def accept(self, value):
        kind, text, _ = self.tok
        if kind == "op" and text == value:
            self.pos += 1
            return True
        return False

    def expect(self, value):
        if not self.accept(value):
            kind, text, off = self.tok
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"unexpected {found}", off, repr(value))

    def parse(self):
        node = self.expr()
        kind, text, off = self.tok
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", off, "an operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while True:
            if self.accept("+"):
                node = BinOp("+", node, self.term())
            elif self.accept("-"):
                node = BinOp("-", node, self.term())
            else:
                return node

    def term(self):
        node = self.power()
        while True:
            if self.accept("*"):
                node = BinOp("*", node, self.power())
            elif self.accept("/"):
                node = BinOp("/", node, self.power())
            else:
                return node

    def power(self):
        base = self.unary()
        if self.accept("^"):
            return BinOp("^", base, self.power())
        return base

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        kind, text, off = self.tok
        if kind == "num":
            self.pos += 1
            return Num(float(text))
        if kind == "name":
            self.pos += 1
            if text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                if len(args) != FUNCTIONS[text]:
                    raise ExprSyntaxError(
                        f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}",
                        self.tok[2], "')'")
                self.expect(")")
                return Call(text, tuple(args))
            if text in VARIABLES:
                return Var(text)
            if text in CONSTANTS:
                return Var(text)
            raise ExprSyntaxError(f"unknown name {text!r}", off,
                                  "one of x, y, t, pi or a function name")
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", off, "a number, name or '('")


def parse_expr(src: str) -> Expr:
    """Parse ``src`` into an expression tree."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0, "an expression")
    return _Parser(src).parse()


def unparse(node: Expr) -> str:
    """Render a tree back to text that reparses to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{unparse(node.operand)})"
    if isinstance(node, BinOp):
        return f"({unparse(node.left)} {node.op} {unparse(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(unparse(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def free_variables(node: Expr) -> set:
    if isinstance(node, Var):
        return set() if node.name in CONSTANTS else {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, BinOp):
        return free_variables(node.left) | free_variables(node.right)
    return set().union(*(free_variables(a) for a in node.args))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _check(value, node, what="non-finite value"):
    if not np.all(np.isfinite(value)):
        raise ExprEvalError(what, unparse(node))
    return value


def evaluate(node: Expr, env: dict):
    """Evaluate ``node`` with variables bound in ``env`` (scalars or arrays)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in CONSTANTS:
            return CONSTANTS[node.name]
        try:
            return env[node.name]
        except KeyError:
            raise ExprEvalError(f"variable {node.name!r} is not bound", unparse(node)) from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, BinOp):
        a = evaluate(node.left, env)
        b = evaluate(node.right, env)
        with np.errstate(all="ignore"):
            if node.op == "+":
                out = np.add(a, b)
            elif node.op == "-":
                out = np.subtract(a, b)
            elif node.op == "*":
                out = np.multiply(a, b)
            elif node.op == "/":
                if np.any(np.asarray(b) == 0):
                    raise ExprEvalError("division by zero", unparse(node))
                out = np.divide(a, b)
            else:
                base = np.asarray(a, dtype=float)
                if np.any(base < 0) and np.any(np.asarray(b) != np.round(b)):
                    raise ExprEvalError("negative base with non-integer exponent", unparse(node))
                if np.any(base == 0) and np.any(np.asarray(b) < 0):
                    raise ExprEvalError("zero raised to a negative power", unparse(node))
                out = np.power(base, b)
        return _check(out, node)
    if isinstance(node, Call):
        args = [evaluate(a, env) for a in node.args]
        with np.errstate(all="ignore"):
            if node.name == "sqrt":
                if np.any(np.asarray(args[0]) < 0):
                    raise ExprEvalError("square root of a negative number", unparse(node))
                out = np.sqrt(args[0])
            elif node.name == "min":
                out = np.minimum(*args)
            elif node.name == "max":
                out = np.maximum(*args)
            else:
                out = getattr(np, node.name)(args[0])
        return _check(out, node)
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarField:
    """A named spatial function given by an expression in ``x`` and ``y``."""

    expr: Expr
    label: str = "field"
    source: str = field(default="", compare=False)

    @classmethod
    def parse(cls, src, label="field"):
        return cls(parse_expr(str(src)), label, str(src))

    @property
    def text(self):
        return self.source or unparse(self.expr)

    @property
    def is_constant(self):
        return not free_variables(self.expr)

    def __call__(self, x, y, **extra):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = evaluate(self.expr, {"x": x, "y": y, **extra})
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape).copy()


def as_field(value, label="field") -> ScalarField:
    """Coerce a number, expression string or field into a :class:`ScalarField`."""
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return ScalarField(Num(float(value)), label, repr(float(value)))
    return ScalarField.parse(value, label)


@dataclass(frozen=True)
class DomainSpec:
    """Rectangle ``(x0, y0, x1, y1)`` or disc ``(cx, cy, radius)``."""

    shape: str = "rect"
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0
    cx: float = 0.0
    cy: float = 0.0
    radius: float = 1.0

    def __post_init__(self):
        if self.shape not in ("rect", "disc"):
            raise ValueError(f"unknown domain shape {self.shape!r}")
        if self.shape == "rect" and not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("degenerate rectangle")
        if self.shape == "disc" and not self.radius > 0:
            raise ValueError("disc radius must be positive")

    @property
    def bbox(self):
        if self.shape == "rect":
            return self.x0, self.y0, self.x1, self.y1
        r = self.radius
        return self.cx - r, self.cy - r, self.cx + r, self.cy + r

    def contains(self, x, y, tol=1e-12):
        if self.shape == "rect":
            return np.ones(np.broadcast(x, y).shape, dtype=bool)
        return np.hypot(x - self.cx, y - self.cy) <= self.radius * (1 + tol)


def eval_field(f, point) -> float:
    f = as_field(f)
    return float(f(point[0], point[1]))


def field_extrema(f, domain: DomainSpec, n: int = 101):
    """Grid-sampled (min, max) of ``f`` over ``domain`` on an n-by-n grid."""
    if n < 2:
        raise ValueError("need at least 2 samples per axis")
    f = as_field(f)
    if f.is_constant:
        v = float(f(0.0, 0.0))
        return v, v
    x0, y0, x1, y1 = domain.bbox
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
    inside = domain.contains(X, Y)
    vals = f(X[inside], Y[inside])
    return float(vals.min()), float(vals.max())
