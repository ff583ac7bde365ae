"""Tiny expression language for coefficient functions of one variable.

Grammar: numbers (decimal/scientific), one free variable (``t`` or ``r``),
``+ - * / ^`` with the usual precedence (``^`` right-associative), unary
minus, parentheses, the functions ``sqrt ln exp sin cos abs pow`` and the
constant ``pi``.  Parsed expressions are immutable and safe to evaluate
from concurrent code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Expr", "Num", "Var", "Unary", "Binary", "Call",
    "ExprError", "ParseError", "DomainError",
    "parse_expr", "eval_expr", "format_expr", "compile_expr",
]

_FUNCTIONS = {"sqrt": 1, "ln": 1, "exp": 1, "sin": 1, "cos": 1, "abs": 1, "pow": 2}
_VARIABLES = ("t", "r")
_CONSTANTS = {"pi": math.pi}


class ExprError(Exception):
    pass


class ParseError(ExprError):
    """Syntax or identifier error, carrying the byte offset into the source."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class DomainError(ExprError):
    """Evaluation left the real domain (log/sqrt of negatives, division by zero, ...)."""

    def __init__(self, reason, x):
        super().__init__(f"{reason} at x = {x!r}")
        self.reason = reason
        self.x = x


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Expr = Num | Var | Unary | Binary | Call


# --- lexer ---------------------------------------------------------------

_TOK_OPS = "+-*/^(),"


def _tokenize(src):
    toks = []  # (kind, text, offset)
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c in _TOK_OPS:
            toks.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and (src[j].isdigit() or src[j] == "."):
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            text = src[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"malformed number {text!r}", i) from None
            toks.append(("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(("name", src[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    toks.append(("end", "", n))
    return toks


# --- parser --------------------------------------------------------------

class _Parser:
    def __init__(self, src):
        self.toks = _tokenize(src)
        self.pos = 0
        self.var_name = None

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        kind, t, off = self.peek()
        if kind != "op" or t != text:
            raise ParseError(f"expected {text!r}", off)
        return self.next()

    def parse(self):
        e = self.sum()
        kind, t, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {t!r}", off)
        return e

    def sum(self):
        e = self.product()
        while True:
            kind, t, _ = self.peek()
            if kind == "op" and t in "+-":
                self.next()
                e = Binary(t, e, self.product())
            else:
                return e

    def product(self):
        e = self.unary()
        while True:
            kind, t, _ = self.peek()
            if kind == "op" and t in "*/":
                self.next()
                e = Binary(t, e, self.unary())
            else:
                return e

    def unary(self):
        kind, t, _ = self.peek()
        if kind == "op" and t == "-":
            self.next()
            return Unary("-", self.unary())
        if kind == "op" and t == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        kind, t, _ = self.peek()
        if kind == "op" and t == "^":
            self.next()
            # right-associative; exponent may itself carry a unary minus
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, t, off = self.next()
        if kind == "num":
            v = float(t)
            if not math.isfinite(v):
                raise ParseError(f"literal {t!r} overflows double precision", off)
            return Num(v)
        if kind == "op" and t == "(":
            e = self.sum()
            self.expect(")")
            return e
        if kind == "name":
            if t in _FUNCTIONS:
                self.expect("(")
                args = [self.sum()]
                while True:
                    k2, t2, o2 = self.peek()
                    if k2 == "op" and t2 == ",":
                        self.next()
                        args.append(self.sum())
                    else:
                        break
                self.expect(")")
                if len(args) != _FUNCTIONS[t]:
                    raise ParseError(
                        f"{t} takes {_FUNCTIONS[t]} argument(s), got {len(args)}", off)
                return Call(t, tuple(args))
            if t in _CONSTANTS:
                return Num(_CONSTANTS[t])
            if t in _VARIABLES:
                if self.var_name is None:
                    self.var_name = t
                elif self.var_name != t:
                    raise ParseError(
                        f"second free variable {t!r} (already using {self.var_name!r})", off)
                return Var(t)
            raise ParseError(f"unknown identifier {t!r}", off)
        raise ParseError(f"unexpected token {t!r}" if t else "unexpected end of input", off)


def parse_expr(src: str) -> Expr:
    """Parse ``src`` into an immutable expression tree.

    Raises ParseError (with byte offset) on syntax errors, unknown
    identifiers, arity mismatches, or a second free variable.
    """
    return _Parser(src).parse()


# --- evaluation ----------------------------------------------------------

def eval_expr(e: Expr, x: float) -> float:
    """Evaluate ``e`` at ``x`` in double precision.

    Out-of-domain operations (ln/sqrt of a negative, division by zero,
    fractional power of a negative base, overflow) raise DomainError
    carrying ``x`` rather than returning NaN/inf.
    """
    v = _eval(e, x)
    if not math.isfinite(v):
        raise DomainError("non-finite result", x)
    return v


def _eval(e, x):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(x)
    if isinstance(e, Unary):
        return -_eval(e.arg, x)
    if isinstance(e, Binary):
        a = _eval(e.left, x)
        b = _eval(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise DomainError("division by zero", x)
            return a / b
        if e.op == "^":
            return _pow(a, b, x)
        raise AssertionError(e.op)
    if isinstance(e, Call):
        args = [_eval(a, x) for a in e.args]
        return _call(e.fn, args, x)
    raise AssertionError(type(e))


def _pow(a, b, x):
    if a < 0.0 and b != math.floor(b):
        raise DomainError("fractional power of negative base", x)
    if a == 0.0 and b < 0.0:
        raise DomainError("zero to a negative power", x)
    try:
        return a ** b
    except OverflowError:
        raise DomainError("overflow in power", x) from None


def _call(fn, args, x):
    a = args[0]
    try:
        if fn == "sqrt":
            if a < 0.0:
                raise DomainError("sqrt of negative", x)
            return math.sqrt(a)
        if fn == "ln":
            if a <= 0.0:
                raise DomainError("ln of non-positive", x)
            return math.log(a)
        if fn == "exp":
            return math.exp(a)
        if fn == "sin":
            return math.sin(a)
        if fn == "cos":
            return math.cos(a)
        if fn == "abs":
            return abs(a)
        if fn == "pow":
            return _pow(a, args[1], x)
    except OverflowError:
        raise DomainError(f"overflow in {fn}", x) from None
    raise AssertionError(fn)


# --- printing ------------------------------------------------------------

def format_expr(e: Expr) -> str:
    """Fully parenthesized canonical form; parse(format(e)) == e structurally."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        return f"(-{format_expr(e.arg)})"
    if isinstance(e, Binary):
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(format_expr(a) for a in e.args)})"
    raise AssertionError(type(e))


def compile_expr(src: str):
    """Parse ``src`` and return a plain ``float -> float`` callable."""
    e = parse_expr(src)

    def f(x):
        return eval_expr(e, x)

    f.expr = e
    f.source = src
    return f
