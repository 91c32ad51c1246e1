"""Coefficient expression language.

Grammar (``^`` binds tighter than unary minus and is right associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sin | cos | exp | sqrt | log | abs

Expressions are kept as a small AST.  Besides numpy evaluation, an AST can be
flattened to postfix bytecode (``Expr.program``) that the compiled integrator
kernel interprets.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ExprSyntaxError, UnknownIdentifier

FUNCS = ("sin", "cos", "exp", "sqrt", "log", "abs")
_NP_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp,
             "sqrt": np.sqrt, "log": np.log, "abs": np.abs}
CONSTANTS = {"pi": math.pi}

# bytecode
OP_CONST, OP_X, OP_NEG, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW = range(8)
OP_FUNC = {name: 8 + i for i, name in enumerate(FUNCS)}
_OP_BIN = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}
MAX_STACK = 32


class Expr:
    """Base AST node. Call with a float or an array to evaluate."""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = self._eval(x)
        return np.broadcast_to(out, x.shape).astype(float) if x.ndim else float(out)

    def program(self):
        """Postfix program as (ops, args, consts, stack depth)."""
        ops, args, consts = [], [], []
        depth = self._emit(ops, args, consts)
        return ops, args, consts, depth

    def is_constant(self):
        return False

    def __str__(self):
        return self._fmt()


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float

    def _eval(self, x):
        return np.float64(self.value)

    def _fmt(self):
        return repr(float(self.value)) if self.value >= 0 else f"({float(self.value)!r})"

    def _emit(self, ops, args, consts):
        ops.append(OP_CONST)
        args.append(len(consts))
        consts.append(float(self.value))
        return 1

    def is_constant(self):
        return True


@dataclass(frozen=True, eq=True)
class Var(Expr):
    def _eval(self, x):
        return x

    def _fmt(self):
        return "x"

    def _emit(self, ops, args, consts):
        ops.append(OP_X)
        args.append(0)
        return 1


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr

    def _eval(self, x):
        return -self.arg._eval(x)

    def _fmt(self):
        return f"(-{self.arg._fmt()})"

    def _emit(self, ops, args, consts):
        d = self.arg._emit(ops, args, consts)
        ops.append(OP_NEG)
        args.append(0)
        return d

    def is_constant(self):
        return self.arg.is_constant()


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def _eval(self, x):
        a, b = self.left._eval(x), self.right._eval(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return np.divide(a, b)
        return np.power(a, b)

    def _fmt(self):
        return f"({self.left._fmt()} {self.op} {self.right._fmt()})"

    def _emit(self, ops, args, consts):
        d1 = self.left._emit(ops, args, consts)
        d2 = self.right._emit(ops, args, consts)
        ops.append(_OP_BIN[self.op])
        args.append(0)
        return max(d1, d2 + 1)

    def is_constant(self):
        return self.left.is_constant() and self.right.is_constant()


@dataclass(frozen=True, eq=True)
class Call(Expr):
    func: str
    arg: Expr

    def _eval(self, x):
        return _NP_FUNCS[self.func](self.arg._eval(x))

    def _fmt(self):
        return f"{self.func}({self.arg._fmt()})"

    def _emit(self, ops, args, consts):
        d = self.arg._emit(ops, args, consts)
        ops.append(OP_FUNC[self.func])
        args.append(0)
        return d

    def is_constant(self):
        return self.arg.is_constant()


def linear(x0, y0, x1, y1):
    """Expression of the straight line through (x0, y0) and (x1, y1)."""
    slope = (y1 - y0) / (x1 - x0)
    return BinOp("+", Num(float(y0)), BinOp("*", Num(float(slope)), BinOp("-", Var(), Num(float(x0)))))


# --- parsing ---------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), pos))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


def _byte_offset(text, pos):
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(msg, _byte_offset(self.text, tok[2]))

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            found = tok[1] or "end of input"
            raise self.error(f"expected {value!r}, found {found!r}", tok)

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, val = tok[0], tok[1]
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val == "x":
                return Var()
            if val in CONSTANTS:
                return Num(CONSTANTS[val])
            if val in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise UnknownIdentifier(f"unknown identifier {val!r}", _byte_offset(self.text, tok[2]))
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"unexpected {val or 'end of input'!r}", tok)


def parse_expr(text):
    """Parse ``text`` into an :class:`Expr`.

    Raises ``ExprSyntaxError`` (with a byte ``offset``) on malformed input and
    ``UnknownIdentifier`` for names outside the grammar.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()


def as_expr(value):
    """Coerce a string, number or Expr to an Expr."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Num(float(value))
    return parse_expr(value)
