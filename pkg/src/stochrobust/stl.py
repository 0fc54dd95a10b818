"""Signal Temporal Logic formulas: AST and parser.

Grammar (whitespace-insensitive, loosest binding first)::

    phi  := phi -> phi                    (sugar for !phi | phi)
          | phi | phi
          | phi & phi
          | phi U[a,b] phi
          | !phi | F[a,b] phi | G[a,b] phi
          | T | ( phi ) | expr OP expr     OP in >=, >, <=, <

``X >= 300`` denotes the secondary signal ``X - 300 >= 0``; ``X < 20``
denotes ``20 - X >= 0``.  Interval bounds and atomic constants may use
named parameters that are substituted at parse time.
"""

import re
from dataclasses import dataclass

from . import expr
from .errors import FormulaSyntaxError, ModelError

__all__ = [
    "Formula",
    "TrueFormula",
    "Atomic",
    "Not",
    "And",
    "Or",
    "Until",
    "Eventually",
    "Always",
    "parse_formula",
    "TOP",
]

# robustness of the true formula; finite so that min/max stay total
TOP = 1e300


class Formula:
    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    @property
    def depth(self):
        """Time depth: how far past ``t`` the value at ``t`` looks."""
        raise NotImplementedError

    def variables(self):
        out = set()
        for node in self.walk():
            if isinstance(node, Atomic):
                out |= node.variables()
        return out

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    children = ()

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class TrueFormula(Formula):
    depth = 0.0

    def render(self):
        return "T"


@dataclass(frozen=True)
class Atomic(Formula):
    """Predicate ``y(x) >= 0`` where ``y`` is the expression ``signal``."""

    signal: str
    text: str = None

    depth = 0.0

    def __post_init__(self):
        if self.text is None:
            object.__setattr__(self, "text", f"{self.signal} >= 0")
        try:
            expr.names_in(self.signal)
        except ModelError as exc:
            raise FormulaSyntaxError(str(exc)) from None

    def variables(self):
        return expr.names_in(self.signal)

    def render(self):
        return f"({self.text})"


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)

    @property
    def depth(self):
        return self.arg.depth

    def render(self):
        return f"!{self.arg.render()}"


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)

    @property
    def depth(self):
        return max(self.left.depth, self.right.depth)

    def render(self):
        return f"({self.left.render()} & {self.right.render()})"


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)

    @property
    def depth(self):
        return max(self.left.depth, self.right.depth)

    def render(self):
        return f"({self.left.render()} | {self.right.render()})"


def _check_interval(lo, hi):
    if not (0 <= lo < hi) or hi == float("inf"):
        raise FormulaSyntaxError(f"invalid interval [{lo:g},{hi:g}]: need 0 <= a < b < inf")


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula
    lo: float
    hi: float

    def __post_init__(self):
        _check_interval(self.lo, self.hi)

    @property
    def children(self):
        return (self.left, self.right)

    @property
    def depth(self):
        return self.hi + max(self.left.depth, self.right.depth)

    def render(self):
        return f"({self.left.render()} U[{self.lo!r},{self.hi!r}] {self.right.render()})"


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula
    lo: float
    hi: float

    def __post_init__(self):
        _check_interval(self.lo, self.hi)

    @property
    def children(self):
        return (self.arg,)

    @property
    def depth(self):
        return self.hi + self.arg.depth

    def render(self):
        return f"F[{self.lo!r},{self.hi!r}] {self.arg.render()}"


@dataclass(frozen=True)
class Always(Formula):
    arg: Formula
    lo: float
    hi: float

    def __post_init__(self):
        _check_interval(self.lo, self.hi)

    @property
    def children(self):
        return (self.arg,)

    @property
    def depth(self):
        return self.hi + self.arg.depth

    def render(self):
        return f"G[{self.lo!r},{self.hi!r}] {self.arg.render()}"


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>->|>=|<=|==|\*\*|[<>!&|()\[\],+\-*/^])"
    r")"
)


def _tokenize(text):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise FormulaSyntaxError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Backtrack(Exception):
    pass


class _Parser:
    def __init__(self, text, params):
        self.tokens = _tokenize(text)
        self.i = 0
        self.params = params

    # -- helpers ------------------------------------------------------------
    @property
    def tok(self):
        return self.tokens[self.i]

    def peek(self, value, offset=0):
        kind, val, _ = self.tokens[min(self.i + offset, len(self.tokens) - 1)]
        return val == value and kind != "end"

    def expect(self, value):
        if not self.peek(value):
            self.fail(f"expected {value!r}")
        self.i += 1

    def fail(self, message):
        kind, val, col = self.tok
        found = "end of input" if kind == "end" else repr(val)
        raise FormulaSyntaxError(f"{message}, found {found}", col)

    def is_temporal(self, name):
        return self.tok[0] == "name" and self.tok[1] == name and self.peek("[", 1)

    # -- formula levels -----------------------------------------------------
    def parse(self):
        phi = self.implies()
        if self.tok[0] != "end":
            self.fail("unexpected trailing input")
        return phi

    def implies(self):
        left = self.disjunction()
        if self.peek("->"):
            self.i += 1
            return Or(Not(left), self.implies())
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.peek("|"):
            self.i += 1
            left = Or(left, self.conjunction())
        return left

    def conjunction(self):
        left = self.until()
        while self.peek("&"):
            self.i += 1
            left = And(left, self.until())
        return left

    def until(self):
        left = self.unary()
        while self.is_temporal("U"):
            self.i += 1
            lo, hi = self.interval()
            left = Until(left, self.unary(), lo, hi)
        return left

    def unary(self):
        if self.peek("!"):
            self.i += 1
            return Not(self.unary())
        for name, cls in (("F", Eventually), ("G", Always)):
            if self.is_temporal(name):
                self.i += 1
                lo, hi = self.interval()
                return cls(self.unary(), lo, hi)
        return self.primary()

    def primary(self):
        kind, val, _ = self.tok
        if kind == "name" and val in ("T", "true") and not self._starts_comparison(1):
            self.i += 1
            return TrueFormula()
        start = self.i
        try:
            return self.atomic()
        except _Backtrack:
            self.i = start
        if self.peek("("):
            self.i += 1
            phi = self.implies()
            self.expect(")")
            return phi
        self.fail("expected a formula")

    def _starts_comparison(self, offset):
        kind, val, _ = self.tokens[min(self.i + offset, len(self.tokens) - 1)]
        return val in (">=", "<=", ">", "<", "+", "-", "*", "/", "^", "**")

    def interval(self):
        self.expect("[")
        lo = self.bound()
        self.expect(",")
        hi = self.bound()
        self.expect("]")
        col = self.tokens[self.i - 1][2]
        try:
            _check_interval(lo, hi)
        except FormulaSyntaxError as exc:
            raise FormulaSyntaxError(str(exc), col) from None
        return lo, hi

    def bound(self):
        start_col = self.tok[2]
        try:
            text = self.arith()
        except _Backtrack:
            self.fail("expected an interval bound")
        names = expr.names_in(text)
        if names:
            raise FormulaSyntaxError(f"unknown parameter(s) {sorted(names)} in interval bound", start_col)
        return float(eval(text, {"__builtins__": {}}, {}))  # noqa: S307 - only numbers and operators remain

    # -- atomic predicates --------------------------------------------------
    def atomic(self):
        lhs = self.arith()
        kind, op, _ = self.tok
        if op not in (">=", ">", "<=", "<") or kind != "op":
            raise _Backtrack
        self.i += 1
        try:
            rhs = self.arith()
        except _Backtrack:
            self.fail(f"expected an expression after {op!r}")
        if op in (">=", ">"):
            signal = f"({lhs}) - ({rhs})"
        else:
            signal = f"({rhs}) - ({lhs})"
        return Atomic(signal, f"{lhs} {op} {rhs}")

    def arith(self):
        out = self.term()
        while self.peek("+") or self.peek("-"):
            op = self.tok[1]
            self.i += 1
            out = f"{out} {op} {self.term()}"
        return out

    def term(self):
        out = self.factor()
        while self.peek("*") or self.peek("/"):
            op = self.tok[1]
            self.i += 1
            out = f"{out} {op} {self.factor()}"
        return out

    def factor(self):
        base = self.signed()
        if self.peek("^") or self.peek("**"):
            self.i += 1
            return f"{base} ** {self.factor()}"
        return base

    def signed(self):
        if self.peek("-") or self.peek("+"):
            op = self.tok[1]
            self.i += 1
            return f"{op}{self.signed()}"
        return self.atom()

    def atom(self):
        kind, val, _ = self.tok
        if kind == "num":
            self.i += 1
            return val
        if kind == "name":
            if val in ("F", "G", "U") and self.peek("[", 1):
                raise _Backtrack
            self.i += 1
            if self.peek("("):
                self.i += 1
                args = [self.arith()]
                while self.peek(","):
                    self.i += 1
                    args.append(self.arith())
                if not self.peek(")"):
                    raise _Backtrack
                self.i += 1
                return f"{val}({', '.join(args)})"
            if val in self.params:
                return repr(float(self.params[val]))
            return val
        if kind == "op" and val == "(":
            self.i += 1
            inner = self.arith()
            if not self.peek(")"):
                raise _Backtrack
            self.i += 1
            return f"({inner})"
        raise _Backtrack


def parse_formula(text, params=None):
    """Parse ``text`` into a :class:`Formula`.

    ``params`` maps names used in the text (interval bounds, thresholds) to
    numbers.  Names not in ``params`` inside predicates are trajectory
    variables, checked at monitoring time.
    """
    return _Parser(text, dict(params or {})).parse()
