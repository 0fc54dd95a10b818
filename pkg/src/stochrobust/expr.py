"""Translation of rate, flow, hazard and predicate expressions into Python source.

Expressions are written in a small arithmetic language (``+ - * / ^ **``,
numbers, identifiers, ``exp log sqrt abs min max pow`` and ``ind(cond)``).
They are parsed with :mod:`ast`, checked against a whitelist, and re-emitted
as source text where every identifier is replaced by an array access.  The
same source is executed either by plain Python (scalar or numpy-vectorized)
or compiled with numba for the simulation kernels.
"""

import ast
import math
import re

import numpy as np

from .errors import ModelError

_SCALAR_FUNCS = {
    "exp": "math.exp",
    "log": "math.log",
    "sqrt": "math.sqrt",
    "abs": "abs",
    "min": "min",
    "max": "max",
    "pow": "math.pow",
}
_VECTOR_FUNCS = {
    "exp": "np.exp",
    "log": "np.log",
    "sqrt": "np.sqrt",
    "abs": "np.abs",
    "min": "np.minimum",
    "max": "np.maximum",
    "pow": "np.power",
}
_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.Pow: "**"}
_CMPOPS = {ast.Eq: "==", ast.NotEq: "!=", ast.Lt: "<", ast.LtE: "<=", ast.Gt: ">", ast.GtE: ">="}


def _preprocess(text):
    text = text.replace("&&", " and ").replace("||", " or ")
    # '^' is exponentiation in model files; Python's '^' is xor
    text = text.replace("^", "**")
    return text.strip()


def parse_expression(text):
    """Parse ``text`` into a Python AST expression node."""
    try:
        tree = ast.parse(_preprocess(text), mode="eval")
    except SyntaxError as exc:
        raise ModelError(f"invalid expression {text!r}: {exc.msg}") from None
    return tree.body


def names_in(text):
    """Identifiers referenced by an expression (function names excluded)."""
    node = parse_expression(text)
    found = set()
    for sub in ast.walk(node):
        if isinstance(sub, ast.Call):
            continue
        if isinstance(sub, ast.Name):
            found.add(sub.id)
    for sub in ast.walk(node):
        if isinstance(sub, ast.Call) and isinstance(sub.func, ast.Name):
            found.discard(sub.func.id)
    return found


class Translator:
    """Emit Python source for an expression.

    ``names`` maps identifiers to the source text that replaces them.
    ``symbols`` maps a discrete variable name to ``{symbol: code}`` so that
    ``g1 == free`` compiles to ``d[0] == 0``.
    """

    def __init__(self, names, symbols=None, vector=False):
        self.names = names
        self.symbols = symbols or {}
        self.vector = vector

    def __call__(self, text):
        return self._emit(parse_expression(text), text)

    def _name(self, name, text):
        if name not in self.names:
            raise ModelError(f"undeclared name {name!r} in expression {text!r}")
        return self.names[name]

    def _emit(self, node, text):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ModelError(f"unsupported constant in {text!r}")
            return repr(float(node.value))
        if isinstance(node, ast.Name):
            return self._name(node.id, text)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            left = self._emit(node.left, text)
            right = self._emit(node.right, text)
            return f"({left} {_BINOPS[type(node.op)]} {right})"
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            sign = "-" if isinstance(node.op, ast.USub) else "+"
            return f"({sign}{self._emit(node.operand, text)})"
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            fname = node.func.id
            if fname == "ind":
                if len(node.args) != 1:
                    raise ModelError(f"ind() takes one condition in {text!r}")
                cond = self._cond(node.args[0], text)
                if self.vector:
                    return f"np.where({cond}, 1.0, 0.0)"
                return f"(1.0 if {cond} else 0.0)"
            table = _VECTOR_FUNCS if self.vector else _SCALAR_FUNCS
            if fname in table:
                args = ", ".join(self._emit(a, text) for a in node.args)
                return f"{table[fname]}({args})"
            raise ModelError(f"unknown function {fname!r} in {text!r}")
        raise ModelError(f"unsupported syntax in expression {text!r}")

    def condition(self, text):
        """Emit a boolean condition (guards)."""
        return self._cond(parse_expression(text), text)

    def _cond(self, node, text):
        if isinstance(node, ast.BoolOp):
            op = " and " if isinstance(node.op, ast.And) else " or "
            if self.vector:
                op = " & " if op == " and " else " | "
            return "(" + op.join(self._cond(v, text) for v in node.values) + ")"
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.BitAnd, ast.BitOr)):
            if self.vector:
                op = " & " if isinstance(node.op, ast.BitAnd) else " | "
            else:
                op = " and " if isinstance(node.op, ast.BitAnd) else " or "
            return f"({self._cond(node.left, text)}{op}{self._cond(node.right, text)})"
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.Not):
            inner = self._cond(node.operand, text)
            return f"(~{inner})" if self.vector else f"(not {inner})"
        if isinstance(node, ast.Compare) and len(node.ops) == 1 and type(node.ops[0]) in _CMPOPS:
            left, right = node.left, node.comparators[0]
            op = _CMPOPS[type(node.ops[0])]
            # discrete variable compared against one of its symbols
            if isinstance(left, ast.Name) and left.id in self.symbols:
                return f"({self._name(left.id, text)} {op} {self._symbol(left.id, right, text)})"
            if isinstance(right, ast.Name) and right.id in self.symbols:
                return f"({self._symbol(right.id, left, text)} {op} {self._name(right.id, text)})"
            return f"({self._emit(left, text)} {op} {self._emit(right, text)})"
        raise ModelError(f"unsupported condition in {text!r}")

    def _symbol(self, var, node, text):
        if isinstance(node, ast.Name) and node.id in self.symbols[var]:
            return self.symbols[var][node.id]
        raise ModelError(f"{ast.unparse(node)!r} is not a value of {var!r} in {text!r}")


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def is_identifier(name):
    return bool(_IDENT.match(name))


def compile_function(name, args, body_lines, numba_jit=False):
    """Build a function from generated source lines.

    The function body is exec'd with ``math`` and ``np`` in scope.  With
    ``numba_jit`` the result is wrapped by :func:`numba.njit`.
    """
    src = f"def {name}({', '.join(args)}):\n" + "\n".join("    " + ln for ln in body_lines) + "\n"
    namespace = {"math": math, "np": np, "inf": math.inf}
    exec(compile(src, f"<generated {name}>", "exec"), namespace)
    fn = namespace[name]
    fn.__source__ = src
    if numba_jit:
        import numba

        fn = numba.njit(cache=False)(fn)
    return fn
