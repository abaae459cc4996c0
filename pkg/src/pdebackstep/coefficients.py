"""Coefficient functions on [0, 1] and the small expression language they use.

Plant coefficients (diffusion, transport velocities, reaction and coupling
matrices) are scalar functions of one or two spatial variables.  Two
representations are supported:

* closed-form expressions in a deliberately tiny grammar
  (variables ``z``/``zeta``, operators ``+ - * / ^``, functions
  ``sin cos exp log``, constant ``pi``), and
* values sampled on a uniform grid, interpolated with a natural cubic
  spline (the kernel solvers need C^2-smooth coefficients, so linear
  interpolation is not an option).

Expression coefficients carry exact symbolic derivatives; sampled ones
differentiate their spline.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "ExpressionError",
    "EvaluationDomainError",
    "Coefficient",
    "ExpressionCoefficient",
    "SampledCoefficient",
    "CoefficientMatrix",
    "parse_expression",
    "parse_coefficient",
    "as_coefficient",
    "zero_coefficient",
]


class ExpressionError(ValueError):
    """Syntax or identifier error, with the offending position."""

    def __init__(self, message, text, pos):
        super().__init__(f"{message} at position {pos} in {text!r}")
        self.text = text
        self.pos = pos


class EvaluationDomainError(ArithmeticError):
    """Raised when an expression is evaluated outside its domain."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

_FUNCTIONS = ("sin", "cos", "exp", "log")


class _Node:
    def ev(self, z, zeta):
        raise NotImplementedError

    def diff(self, var):
        raise NotImplementedError


class _Num(_Node):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def ev(self, z, zeta):
        return self.value

    def diff(self, var):
        return _Num(0.0)

    def __repr__(self):
        return repr(self.value)


class _Var(_Node):
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def ev(self, z, zeta):
        return z if self.name == "z" else zeta

    def diff(self, var):
        return _Num(1.0 if var == self.name else 0.0)

    def __repr__(self):
        return self.name


class _Bin(_Node):
    __slots__ = ("op", "a", "b")

    def __init__(self, op, a, b):
        self.op = op
        self.a = a
        self.b = b

    def ev(self, z, zeta):
        a = self.a.ev(z, zeta)
        b = self.b.ev(z, zeta)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if np.any(np.asarray(b) == 0.0):
                raise EvaluationDomainError("division by zero")
            return a / b
        # power: integer exponents pass through, fractional ones need a
        # nonnegative base
        if np.ndim(b) == 0 and float(b) == int(b):
            return a ** float(b)
        if np.any(np.asarray(a) < 0.0):
            raise EvaluationDomainError("negative base with non-integer exponent")
        return a ** b

    def diff(self, var):
        da, db = self.a.diff(var), self.b.diff(var)
        if self.op == "+":
            return _add(da, db)
        if self.op == "-":
            return _sub(da, db)
        if self.op == "*":
            return _add(_mul(da, self.b), _mul(self.a, db))
        if self.op == "/":
            num = _sub(_mul(da, self.b), _mul(self.a, db))
            return _div(num, _mul(self.b, self.b))
        # d(a^b); constant exponent gets the short form b*a^(b-1)*a'
        if isinstance(self.b, _Num):
            c = self.b.value
            return _mul(_mul(_Num(c), _Bin("^", self.a, _Num(c - 1.0))), da)
        term1 = _mul(db, _Call("log", self.a))
        term2 = _div(_mul(self.b, da), self.a)
        return _mul(self, _add(term1, term2))

    def __repr__(self):
        return f"({self.a!r} {self.op} {self.b!r})"


class _Call(_Node):
    __slots__ = ("fn", "arg")

    def __init__(self, fn, arg):
        self.fn = fn
        self.arg = arg

    def ev(self, z, zeta):
        a = self.arg.ev(z, zeta)
        if self.fn == "sin":
            return np.sin(a)
        if self.fn == "cos":
            return np.cos(a)
        if self.fn == "exp":
            return np.exp(a)
        if np.any(np.asarray(a) <= 0.0):
            raise EvaluationDomainError("log of nonpositive value")
        return np.log(a)

    def diff(self, var):
        da = self.arg.diff(var)
        if self.fn == "sin":
            return _mul(_Call("cos", self.arg), da)
        if self.fn == "cos":
            return _mul(_Num(-1.0), _mul(_Call("sin", self.arg), da))
        if self.fn == "exp":
            return _mul(self, da)
        return _div(da, self.arg)

    def __repr__(self):
        return f"{self.fn}({self.arg!r})"


def _is_const(node, value=None):
    if not isinstance(node, _Num):
        return False
    return True if value is None else node.value == value


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return _Num(a.value + b.value)
    return _Bin("+", a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return _Num(a.value - b.value)
    return _Bin("-", a, b)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _Num(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return _Num(a.value * b.value)
    return _Bin("*", a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return _Num(0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return _Num(a.value / b.value)
    return _Bin("/", a, b)


# ---------------------------------------------------------------------------
# Recursive-descent parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def error(self, message):
        raise ExpressionError(message, self.text, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch):
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def parse(self):
        node = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            self.error(f"unexpected character {self.text[self.pos]!r}")
        return node

    def expr(self):
        node = self.term()
        while True:
            if self.take("+"):
                node = _add(node, self.term())
            elif self.take("-"):
                node = _sub(node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            if self.take("*"):
                node = _mul(node, self.unary())
            elif self.take("/"):
                node = _div(node, self.unary())
            else:
                return node

    def unary(self):
        if self.take("-"):
            return _mul(_Num(-1.0), self.unary())
        if self.take("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.take("^"):
            return _Bin("^", base, self.unary())
        return base

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if not self.take(")"):
                self.error("expected ')'")
            return node
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha():
            return self.identifier()
        self.error("expected a number, identifier or '('")

    def number(self):
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isdigit() or text[self.pos] == "."):
            self.pos += 1
        # exponent suffix like 1e-3
        if self.pos < len(text) and text[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < len(text) and text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(text) and text[self.pos].isdigit():
                while self.pos < len(text) and text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark
        try:
            return _Num(float(text[start:self.pos]))
        except ValueError:
            self.pos = start
            self.error("malformed number")

    def identifier(self):
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isalnum() or text[self.pos] == "_"):
            self.pos += 1
        name = text[start:self.pos]
        if name == "pi":
            return _Num(math.pi)
        if name in ("z", "zeta"):
            return _Var(name)
        if name in _FUNCTIONS:
            if not self.take("("):
                self.error(f"function {name!r} needs an argument in parentheses")
            node = self.expr()
            if not self.take(")"):
                self.error("expected ')'")
            return _Call(name, node)
        self.pos = start
        self.error(f"unknown identifier {name!r}")


def parse_expression(text: str) -> _Node:
    """Parse an expression string into an AST; raises ExpressionError."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", text, 0)
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Coefficient objects
# ---------------------------------------------------------------------------


class Coefficient:
    """A scalar coefficient function of z (and optionally zeta) on [0, 1].

    Instances are immutable and evaluation is pure, so they can be shared
    freely between solvers.
    """

    def __call__(self, z, zeta=None):
        raise NotImplementedError

    def derivative(self, var="z", order=1) -> "Coefficient":
        raise NotImplementedError

    @property
    def is_literal_zero(self) -> bool:
        return False


class ExpressionCoefficient(Coefficient):
    def __init__(self, expression: str, _ast=None):
        self.expression = expression
        self._ast = parse_expression(expression) if _ast is None else _ast

    def __call__(self, z, zeta=None):
        z = np.asarray(z, dtype=float)
        zt = None if zeta is None else np.asarray(zeta, dtype=float)
        val = np.asarray(self._ast.ev(z, zt), dtype=float)
        shape = z.shape if zt is None else np.broadcast_shapes(z.shape, zt.shape)
        if val.shape != shape:
            val = np.broadcast_to(val, shape).copy()
        return val

    def derivative(self, var="z", order=1):
        ast = self._ast
        for _ in range(order):
            ast = ast.diff(var)
        return ExpressionCoefficient(f"d{var}^{order}[{self.expression}]", _ast=ast)

    @property
    def is_literal_zero(self):
        return _is_const(self._ast, 0.0)

    def __repr__(self):
        return f"ExpressionCoefficient({self.expression!r})"


class SampledCoefficient(Coefficient):
    """Values on a uniform grid over [0, 1], natural-cubic-spline interpolated."""

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("sampled coefficient needs at least 2 values")
        self.samples = samples
        self._nodes = np.linspace(0.0, 1.0, samples.size)
        if samples.size < 4:
            # natural spline needs >= 4 points; fall back to the low-order exact fit
            self._spline = CubicSpline(self._nodes, samples)
        else:
            self._spline = CubicSpline(self._nodes, samples, bc_type="natural")

    def __call__(self, z, zeta=None):
        return np.asarray(self._spline(np.asarray(z, dtype=float)), dtype=float)

    def derivative(self, var="z", order=1):
        if var != "z":
            return zero_coefficient()
        out = SampledCoefficient.__new__(SampledCoefficient)
        out.samples = self.samples
        out._nodes = self._nodes
        out._spline = self._spline.derivative(order)
        return out

    @property
    def is_literal_zero(self):
        return bool(np.all(self.samples == 0.0))

    def __repr__(self):
        return f"SampledCoefficient(n={self.samples.size})"


def parse_coefficient(spec) -> Coefficient:
    """Build a Coefficient from an expression string, a number or a dict.

    Dicts use ``{"kind": "expression", "expression": ...}`` or
    ``{"kind": "samples", "samples": [...]}``; bare strings and numbers are
    shorthand for expressions and constants.
    """
    if isinstance(spec, Coefficient):
        return spec
    if isinstance(spec, (int, float)):
        return ExpressionCoefficient(repr(float(spec)), _ast=_Num(float(spec)))
    if isinstance(spec, str):
        return ExpressionCoefficient(spec)
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "expression":
            return ExpressionCoefficient(spec["expression"])
        if kind == "samples":
            return SampledCoefficient(spec["samples"])
        raise ValueError(f"unknown coefficient kind {kind!r}")
    raise TypeError(f"cannot interpret {type(spec).__name__} as a coefficient")


def zero_coefficient() -> Coefficient:
    return ExpressionCoefficient("0", _ast=_Num(0.0))


as_coefficient = parse_coefficient


class CoefficientMatrix:
    """A rows x cols matrix of Coefficients, evaluated as one ndarray."""

    def __init__(self, entries, shape=None):
        if shape is not None:
            rows, cols = shape
            if entries is None:
                entries = [[zero_coefficient() for _ in range(cols)] for _ in range(rows)]
        self.entries = [[parse_coefficient(e) for e in row] for row in entries]
        self.rows = len(self.entries)
        self.cols = len(self.entries[0]) if self.rows else 0
        for row in self.entries:
            if len(row) != self.cols:
                raise ValueError("ragged coefficient matrix")

    @classmethod
    def zeros(cls, rows, cols):
        return cls(None, shape=(rows, cols))

    @classmethod
    def from_config(cls, data, rows, cols, name=""):
        if data is None:
            return cls.zeros(rows, cols)
        mat = cls(data)
        if (mat.rows, mat.cols) != (rows, cols):
            raise ValueError(
                f"coupling matrix {name or '<anonymous>'} has shape "
                f"{mat.rows}x{mat.cols}, expected {rows}x{cols}")
        return mat

    def __call__(self, z, zeta=None):
        """Evaluate at scalar or vector z (and zeta); leading axes are z (, zeta)."""
        z = np.asarray(z, dtype=float)
        if zeta is None:
            out = np.zeros(z.shape + (self.rows, self.cols))
            for i, row in enumerate(self.entries):
                for j, c in enumerate(row):
                    out[..., i, j] = c(z)
            return out
        zeta = np.asarray(zeta, dtype=float)
        zz = z.reshape(z.shape + (1,) * zeta.ndim)
        tt = zeta.reshape((1,) * z.ndim + zeta.shape)
        out = np.zeros(np.broadcast_shapes(zz.shape, tt.shape) + (self.rows, self.cols))
        for i, row in enumerate(self.entries):
            for j, c in enumerate(row):
                out[..., i, j] = np.broadcast_to(c(zz, tt), out.shape[:-2])
        return out

    def derivative(self, var="z", order=1):
        return CoefficientMatrix(
            [[c.derivative(var, order) for c in row] for row in self.entries])

    @property
    def is_literal_zero(self):
        return all(c.is_literal_zero for row in self.entries for c in row)

    def sup_on_grid(self, z, zeta=None) -> float:
        vals = self(z) if zeta is None else self(z, zeta)
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def __repr__(self):
        return f"CoefficientMatrix({self.rows}x{self.cols})"
