"""Lagrangian densities written as text.

Expressions are parsed once into an immutable tree and compiled into nested
closures, so the same parse evaluates over floats, numpy batches, complex
numbers and jets.  Named constants (``m``, ``g``, ...) are not coordinates:
they are looked up in an environment at evaluation time, so one parse serves a
whole parameter sweep.

Grammar (see ``docs/expression-grammar.md``)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := primary ("^" unary)?
    primary := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``; ``a^b^c`` is
``a^(b^c)``.  The exponent must not involve coordinates.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import scalarcalc as sc
from .scalarcalc import ScalarKind

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownVariableError",
    "ImaginaryUnitError",
    "UnboundConstantError",
    "CoordSignature",
    "LagrangianExpr",
    "parse",
    "evaluate",
    "Num",
    "Imag",
    "Var",
    "Const",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "FUNCTIONS",
]


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, line: int, col: int, source: str = ""):
        self.line = line
        self.col = col
        self.reason = message
        super().__init__(f"syntax error at line {line}, column {col}: {message}")


class UnknownVariableError(ExprError):
    def __init__(self, name: str, line: int = 0, col: int = 0):
        self.name = name
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line else ""
        super().__init__(f"unknown identifier {name!r}{where}")


class ImaginaryUnitError(ExprError):
    pass


class UnboundConstantError(ExprError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Imag:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


Node = Union[Num, Imag, Var, Const, Neg, BinOp, Pow, Call]

FUNCTIONS: dict = {
    "sqrt": sc.sqrt,
    "sin": sc.sin,
    "cos": sc.cos,
    "exp": sc.exp,
    "log": sc.log,
    "abs": sc.fabs,
}


def walk(node) -> Iterable:
    yield node
    if isinstance(node, (Neg,)):
        yield from walk(node.arg)
    elif isinstance(node, BinOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Pow):
        yield from walk(node.base)
        yield from walk(node.exponent)
    elif isinstance(node, Call):
        yield from walk(node.arg)


def count_ops(node, op: str) -> int:
    """Number of binary operations ``op`` in a tree."""
    return sum(isinstance(n, BinOp) and n.op == op for n in walk(node))


def _fmt_num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def to_text(node) -> str:
    """Render a tree as parseable text (binary operations fully parenthesized)."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Imag):
        return "i"
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base)}^{to_text(node.exponent)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def substitute(node, mapping: Mapping[str, object]):
    """Replace variables by subtrees (used to build lifted densities)."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Neg):
        return Neg(substitute(node.arg, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, mapping), node.exponent)
    if isinstance(node, Call):
        return Call(node.func, substitute(node.arg, mapping))
    return node


# ---------------------------------------------------------------------------
# coordinate signatures


def _label(i: int, labels: Optional[Sequence[str]]) -> str:
    return labels[i] if labels is not None else str(i + 1)


def _tuple_name(prefix: str, idx: Sequence[int], labels: Optional[Sequence[str]], sep: str) -> str:
    return prefix + sep.join(_label(i, labels) for i in idx)


def z_key_name(blocks: Sequence[Sequence[int]], nu: Sequence[int], labels=None, sep: str = "") -> str:
    """Name of the second-order field coordinate keyed by I-blocks and a residual tuple."""
    text = "z" + "_".join(sep.join(_label(i, labels) for i in b) for b in blocks)
    if nu:
        text += "v" + sep.join(_label(i, labels) for i in nu)
    return text


@dataclass(frozen=True)
class CoordSignature:
    """Ordered coordinate names of a chart, grouped into a base block and fibre blocks.

    ``aliases`` maps extra spellings to ``(canonical name, sign)``; a sign of 0
    means the spelling denotes the zero function (repeated multi-index).
    """

    base_names: tuple
    fiber_blocks: tuple = ()
    aliases: Mapping = field(default_factory=dict)
    keys: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "base_names", tuple(self.base_names))
        object.__setattr__(self, "fiber_blocks", tuple((t, tuple(ns)) for t, ns in self.fiber_blocks))
        names = self.names
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate coordinate names: {dup}")
        for a in self.aliases:
            if a in names:
                raise ValueError(f"alias {a!r} collides with a coordinate name")

    @property
    def names(self) -> tuple:
        out = list(self.base_names)
        for _, ns in self.fiber_blocks:
            out.extend(ns)
        return tuple(out)

    def block(self, tag: str) -> tuple:
        for t, ns in self.fiber_blocks:
            if t == tag:
                return ns
        raise KeyError(tag)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __len__(self) -> int:
        return len(self.names)

    # builders ----------------------------------------------------------
    @classmethod
    def plain(cls, names: Sequence[str]) -> "CoordSignature":
        return cls(tuple(names))

    @classmethod
    def mechanics(cls, n: int, order: int = 1, labels: Optional[Sequence[str]] = None, start: int = 0):
        """(x, y) or (x, y, z) chart; default names x0..x{n-1} (``start`` shifts the numbering)."""
        if labels is None:
            labels = [str(start + i) for i in range(n)]
        if len(labels) != n:
            raise ValueError(f"need {n} labels, got {len(labels)}")
        base = tuple("x" + s for s in labels)
        blocks = [("y", tuple("y" + s for s in labels))]
        if order >= 2:
            blocks.append(("z", tuple("z" + s for s in labels)))
        return cls(base, tuple(blocks))

    @classmethod
    def areal(cls, n: int, k: int, labels: Optional[Sequence[str]] = None, order: int = 1):
        """(x, y^I) chart over ordered multi-indices I; permuted spellings are signed aliases.

        With ``order=2`` the mixed second-order coordinates are appended (see
        :func:`areal2_keys` for the canonical order).
        """
        if not 1 <= k <= n:
            raise ValueError("need 1 <= k <= n")
        if labels is None:
            labels = [str(i + 1) for i in range(n)]
        sep = "" if all(len(s) == 1 for s in labels) else "_"
        base = tuple("x" + s for s in labels)
        ordered = list(itertools.combinations(range(n), k))
        ynames = tuple(_tuple_name("y", I, labels, sep) for I in ordered)
        aliases = {}
        if k > 1:
            for tup in itertools.product(range(n), repeat=k):
                name = _tuple_name("y", tup, labels, sep)
                if len(set(tup)) < k:
                    aliases[name] = (None, 0)
                    continue
                srt = tuple(sorted(tup))
                if srt == tup:
                    continue
                aliases[name] = (_tuple_name("y", srt, labels, sep), _perm_sign(tup))
        keys = {nm: ("y", I) for nm, I in zip(ynames, ordered)}
        blocks = [("yI", ynames)]
        if order >= 2:
            zkeys = areal2_keys(n, k)
            znames = tuple(z_key_name(b, nu, labels, sep) for b, nu in zkeys)
            blocks.append(("zI", znames))
            keys.update({nm: ("z", key) for nm, key in zip(znames, zkeys)})
        return cls(base, tuple(blocks), aliases, keys)


def _perm_sign(tup: Sequence[int]) -> int:
    tup = list(tup)
    sign = 1
    for i in range(len(tup)):
        for j in range(i + 1, len(tup)):
            if tup[i] == tup[j]:
                return 0
            if tup[i] > tup[j]:
                sign = -sign
    return sign


def areal2_keys(n: int, k: int) -> list:
    """Canonical order of second-order field coordinates.

    A key is ``(blocks, nu)``: ``l >= 1`` ordered k-multi-indices in strictly
    increasing lexicographic order, plus a strictly increasing residual tuple
    of length ``k - l``.  Keys are sorted by ``l``, then blocks, then ``nu``.
    """
    ordered = list(itertools.combinations(range(n), k))
    out = []
    for l in range(1, k + 1):
        for blocks in itertools.combinations(ordered, l):
            for nu in itertools.combinations(range(n), k - l):
                out.append((tuple(blocks), tuple(nu)))
    return out


# ---------------------------------------------------------------------------
# tokenizer and parser

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list:
    toks = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            for k, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    line_start = pos + k + 1
        else:
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("end", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, source: str, resolve: Callable):
        self.toks = _tokenize(source)
        self.i = 0
        self.resolve = resolve

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        raise ExprSyntaxError(msg, tok.line, tok.col)

    def expect(self, text: str) -> None:
        t = self.peek()
        if t.text != text or t.kind != "op":
            self.fail(f"expected {text!r}" + (f", found {t.text!r}" if t.text else " before end of input"))
        self.take()

    def parse(self):
        if self.peek().kind == "end":
            self.fail("empty expression")
        node = self.expr()
        if self.peek().kind != "end":
            self.fail(f"unexpected {self.peek().text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        t = self.peek()
        if t.kind == "op" and t.text in "+-":
            self.take()
            arg = self.unary()
            return Neg(arg) if t.text == "-" else arg
        return self.power()

    def power(self):
        base = self.primary()
        t = self.peek()
        if t.kind == "op" and t.text == "^":
            self.take()
            etok = self.peek()
            exponent = self.unary()
            for nd in walk(exponent):
                if isinstance(nd, Var):
                    self.fail(f"exponent must not depend on coordinate {nd.name!r}", etok)
            return Pow(base, exponent)
        return base

    def primary(self):
        t = self.take()
        if t.kind == "num":
            return Num(float(t.text))
        if t.kind == "name":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                if t.text not in FUNCTIONS:
                    raise UnknownVariableError(t.text, t.line, t.col)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            return self.resolve(t)
        if t.kind == "op" and t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "end":
            raise ExprSyntaxError("unexpected end of input", t.line, t.col)
        raise ExprSyntaxError(f"unexpected {t.text!r}", t.line, t.col)


# ---------------------------------------------------------------------------
# compilation


def _compile(node, index: Mapping[str, int]) -> Callable:
    """Turn a tree into a closure f(values, consts)."""
    if isinstance(node, Num):
        v = node.value
        return lambda vals, consts: v
    if isinstance(node, Imag):
        return lambda vals, consts: 1j
    if isinstance(node, Var):
        k = index[node.name]
        return lambda vals, consts: vals[k]
    if isinstance(node, Const):
        name = node.name

        def const(vals, consts):
            try:
                return consts[name]
            except KeyError:
                raise UnboundConstantError(f"constant {name!r} has no value") from None

        return const
    if isinstance(node, Neg):
        f = _compile(node.arg, index)
        return lambda vals, consts: -f(vals, consts)
    if isinstance(node, BinOp):
        a = _compile(node.left, index)
        b = _compile(node.right, index)
        if node.op == "+":
            return lambda vals, consts: a(vals, consts) + b(vals, consts)
        if node.op == "-":
            return lambda vals, consts: a(vals, consts) - b(vals, consts)
        if node.op == "*":
            return lambda vals, consts: a(vals, consts) * b(vals, consts)

        def div(vals, consts):
            num = a(vals, consts)
            den = b(vals, consts)
            if not isinstance(den, sc.Jet) and not isinstance(num, sc.Jet):
                if np.any(np.asarray(den) == 0):
                    raise sc.JetError("division by zero")
                return np.true_divide(num, den) if np.ndim(num) or np.ndim(den) else num / den
            return num / den

        return div
    if isinstance(node, Pow):
        base = _compile(node.base, index)
        ex = _compile(node.exponent, index)

        def pw(vals, consts):
            e = ex(vals, consts)
            if np.ndim(e):
                raise ExprError("exponent must be a scalar constant")
            return sc.power(base(vals, consts), e)

        return pw
    if isinstance(node, Call):
        fn = FUNCTIONS[node.func]
        a = _compile(node.arg, index)
        return lambda vals, consts: fn(a(vals, consts))
    raise TypeError(f"not an expression node: {node!r}")


class LagrangianExpr:
    """A parsed scalar expression over named chart coordinates.

    Attributes:
        ast: the expression tree.
        var_names: ordered coordinate names; ``evaluate`` takes values in this order.
        kind: real or complex.
        constants: names of constants the expression refers to.
    """

    __slots__ = ("ast", "var_names", "kind", "constants", "_fn")

    def __init__(self, ast, var_names: Sequence[str], kind: ScalarKind = ScalarKind.REAL):
        self.ast = ast
        self.var_names = tuple(var_names)
        self.kind = ScalarKind.parse(kind)
        idx = {n: i for i, n in enumerate(self.var_names)}
        consts = []
        for nd in walk(ast):
            if isinstance(nd, Var) and nd.name not in idx:
                raise UnknownVariableError(nd.name)
            if isinstance(nd, Imag) and self.kind is ScalarKind.REAL:
                raise ImaginaryUnitError("the imaginary unit 'i' is only allowed in complex mode")
            if isinstance(nd, Const) and nd.name not in consts:
                consts.append(nd.name)
        self.constants = tuple(consts)
        self._fn = _compile(ast, idx)

    def __repr__(self) -> str:
        return f"LagrangianExpr({self.text!r})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LagrangianExpr)
            and self.ast == other.ast
            and self.var_names == other.var_names
            and self.kind == other.kind
        )

    def __hash__(self) -> int:
        return hash((self.ast, self.var_names, self.kind))

    @property
    def text(self) -> str:
        return to_text(self.ast)

    def evaluate(self, values: Sequence, env: Optional[Mapping[str, object]] = None):
        if len(values) != len(self.var_names):
            raise ValueError(f"expected {len(self.var_names)} values, got {len(values)}")
        return self._fn(values, env or {})

    __call__ = evaluate

    def bind(self, env: Optional[Mapping[str, object]] = None) -> Callable:
        """Fix the constants; returns ``f(values)``."""
        env = dict(env or {})
        missing = [c for c in self.constants if c not in env]
        if missing:
            raise UnboundConstantError(f"no value for constant(s) {', '.join(missing)}")
        fn = self._fn
        n = len(self.var_names)

        def f(values):
            if len(values) != n:
                raise ValueError(f"expected {n} values, got {len(values)}")
            return fn(values, env)

        return f

    def substitute(self, mapping: Mapping[str, object], var_names: Sequence[str]) -> "LagrangianExpr":
        return LagrangianExpr(substitute(self.ast, mapping), var_names, self.kind)

    def depends_on(self, name: str) -> bool:
        return any(isinstance(nd, Var) and nd.name == name for nd in walk(self.ast))


def parse(
    source: str,
    sig: Union[CoordSignature, Sequence[str]],
    kind: Union[ScalarKind, str] = ScalarKind.REAL,
    constants: Iterable[str] = (),
) -> LagrangianExpr:
    """Parse ``source`` over the coordinates of ``sig``.

    Identifiers that are neither coordinates (or their aliases), declared
    ``constants``, function names nor (in complex mode) ``i`` are rejected.
    """
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 1, 1)
    if not isinstance(sig, CoordSignature):
        sig = CoordSignature.plain(sig)
    kind = ScalarKind.parse(kind)
    names = set(sig.names)
    consts = set(constants)

    def resolve(tok: _Tok):
        name = tok.text
        if name in names:
            return Var(name)
        if name in sig.aliases:
            target, sign = sig.aliases[name]
            if sign == 0:
                return Num(0.0)
            return Var(target) if sign > 0 else Neg(Var(target))
        if name in consts:
            return Const(name)
        if name == "i":
            if kind is ScalarKind.COMPLEX:
                return Imag()
            raise ImaginaryUnitError(
                f"the imaginary unit 'i' (line {tok.line}, column {tok.col}) is only allowed in complex mode"
            )
        raise UnknownVariableError(name, tok.line, tok.col)

    try:
        ast = _Parser(source, resolve).parse()
    except RecursionError:
        raise ExprSyntaxError("expression nested too deeply", 1, 1) from None
    return LagrangianExpr(ast, sig.names, kind)


def evaluate(e: LagrangianExpr, values: Sequence, env: Optional[Mapping[str, object]] = None):
    return e.evaluate(values, env)


def from_ast(ast, var_names: Sequence[str], kind=ScalarKind.REAL) -> LagrangianExpr:
    return LagrangianExpr(ast, var_names, kind)
