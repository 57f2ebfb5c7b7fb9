"""Expressions denoting entire maps of the complex plane.

The accepted language is deliberately small:

    identifiers   z  i  pi  e
    functions     exp  sin  cos
    operators     +  -  *  /  ^   (unary minus, parentheses)
    numbers       decimal literals, optionally with an ``i`` suffix

``^`` takes a literal integer exponent.  Division is only legal when the
divisor contains no ``z`` (otherwise the function would have poles), and a
negative exponent on a ``z``-dependent base is rejected for the same reason.
Both violations raise NonEntireError with a byte offset; plain syntax errors
raise ExprSyntaxError likewise.

Derivatives are computed two ways on purpose: evaluation carries first-order
dual numbers through the tree (the jet path used by Newton solvers), and an
independent symbolic transform produces a new expression (used when a solver
needs the derivative *as a map*, e.g. to locate critical points).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import EvalOverflowError, ExprSyntaxError, NonEntireError

__all__ = [
    "Jet",
    "EntireMap",
    "parse_map",
    "eval_jet",
]


class Jet(NamedTuple):
    """Value and first derivative of a map at a point."""

    value: complex
    deriv: complex


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Sub:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Mul:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Div:
    # parser guarantees the divisor is z-free
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Call:
    func: str  # exp | sin | cos
    arg: "Node"


Node = Union[Var, Const, Add, Sub, Mul, Div, Pow, Neg, Call]

_FUNCTIONS = ("exp", "sin", "cos")
_CONSTANTS = {"i": 1j, "pi": complex(math.pi), "e": complex(math.e)}


def contains_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Const):
        return False
    if isinstance(node, (Add, Sub, Mul, Div)):
        return contains_var(node.left) or contains_var(node.right)
    if isinstance(node, Pow):
        return contains_var(node.base)
    if isinstance(node, Neg):
        return contains_var(node.operand)
    if isinstance(node, Call):
        return contains_var(node.arg)
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Lexer

_TOK_NUM = "num"
_TOK_IMAG = "imag"
_TOK_IDENT = "ident"
_TOK_OP = "op"
_TOK_END = "end"


class _Token(NamedTuple):
    kind: str
    text: str
    pos: int


def _lex(src: str) -> list[_Token]:
    toks = []
    n = len(src)
    k = 0
    while k < n:
        c = src[k]
        if c in " \t\r\n":
            k += 1
            continue
        if c.isdigit() or (c == "." and k + 1 < n and src[k + 1].isdigit()):
            start = k
            seen_dot = False
            while k < n and (src[k].isdigit() or (src[k] == "." and not seen_dot)):
                if src[k] == ".":
                    seen_dot = True
                k += 1
            text = src[start:k]
            # an immediate 'i' not followed by more identifier characters is
            # an imaginary-literal suffix: "2i", "0.5i"
            if k < n and src[k] == "i" and not (k + 1 < n and (src[k + 1].isalnum() or src[k + 1] == "_")):
                k += 1
                toks.append(_Token(_TOK_IMAG, text, start))
            else:
                toks.append(_Token(_TOK_NUM, text, start))
            continue
        if c.isalpha() or c == "_":
            start = k
            while k < n and (src[k].isalnum() or src[k] == "_"):
                k += 1
            toks.append(_Token(_TOK_IDENT, src[start:k], start))
            continue
        if c in "+-*/^()":
            toks.append(_Token(_TOK_OP, c, k))
            k += 1
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", k)
    toks.append(_Token(_TOK_END, "", n))
    return toks


# ---------------------------------------------------------------------------
# Parser (recursive descent; ^ binds tightest, then unary -, then * /, then + -)


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _lex(src)
        self.k = 0

    def peek(self) -> _Token:
        return self.toks[self.k]

    def next(self) -> _Token:
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect_op(self, text: str) -> _Token:
        t = self.next()
        if t.kind != _TOK_OP or t.text != text:
            raise ExprSyntaxError(f"expected {text!r}", t.pos)
        return t

    def parse(self) -> Node:
        node = self.sum()
        t = self.peek()
        if t.kind != _TOK_END:
            raise ExprSyntaxError(f"unexpected {t.text!r}", t.pos)
        return node

    def sum(self) -> Node:
        node = self.term()
        while True:
            t = self.peek()
            if t.kind == _TOK_OP and t.text in "+-":
                self.next()
                rhs = self.term()
                node = Add(node, rhs) if t.text == "+" else Sub(node, rhs)
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            t = self.peek()
            if t.kind == _TOK_OP and t.text in "*/":
                self.next()
                rhs = self.unary()
                if t.text == "*":
                    node = Mul(node, rhs)
                else:
                    if contains_var(rhs):
                        raise NonEntireError(
                            "division by a z-dependent expression", t.pos
                        )
                    node = Div(node, rhs)
            else:
                return node

    def unary(self) -> Node:
        t = self.peek()
        if t.kind == _TOK_OP and t.text == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        t = self.peek()
        if t.kind == _TOK_OP and t.text == "^":
            self.next()
            sign = 1
            t2 = self.peek()
            if t2.kind == _TOK_OP and t2.text == "-":
                self.next()
                sign = -1
            t3 = self.next()
            if t3.kind != _TOK_NUM or "." in t3.text:
                raise ExprSyntaxError("exponent must be an integer literal", t3.pos)
            exponent = sign * int(t3.text)
            if exponent < 0 and contains_var(base):
                raise NonEntireError(
                    "negative power of a z-dependent expression", t.pos
                )
            return Pow(base, exponent)
        return base

    def atom(self) -> Node:
        t = self.next()
        if t.kind == _TOK_NUM:
            return Const(complex(float(t.text)))
        if t.kind == _TOK_IMAG:
            return Const(complex(0.0, float(t.text)))
        if t.kind == _TOK_IDENT:
            if t.text == "z":
                return Var()
            if t.text in _CONSTANTS:
                return Const(_CONSTANTS[t.text])
            if t.text in _FUNCTIONS:
                self.expect_op("(")
                arg = self.sum()
                self.expect_op(")")
                return Call(t.text, arg)
            raise ExprSyntaxError(f"unknown identifier {t.text!r}", t.pos)
        if t.kind == _TOK_OP and t.text == "(":
            node = self.sum()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(
            f"expected a value, got {t.text!r}" if t.text else "unexpected end of input",
            t.pos,
        )


# ---------------------------------------------------------------------------
# Pretty printer.  Produces a string that reparses to the same tree.

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4, Call: 5, Var: 5, Const: 5}


def _fmt_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _fmt_const(c: complex) -> str:
    # pure real / pure imaginary constants print compactly; the general case
    # prints as a parenthesised sum
    if c.imag == 0.0:
        body = _fmt_real(c.real)
        return f"({body})" if c.real < 0 else body
    if c.real == 0.0:
        if c.imag == 1.0:
            return "i"
        body = _fmt_real(c.imag) + "i"
        return f"({body})" if c.imag < 0 else body
    re = _fmt_real(c.real)
    im = _fmt_real(abs(c.imag)) + "i"
    op = "+" if c.imag > 0 else "-"
    return f"({re}{op}{im})"


def unparse(node: Node) -> str:
    prec = _PREC[type(node)]
    if isinstance(node, Var):
        return "z"
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, (Add, Sub)):
        op = "+" if isinstance(node, Add) else "-"
        lhs = _wrap(node.left, prec)
        rhs = _wrap(node.right, prec + 1)  # left associative
        return f"{lhs} {op} {rhs}"
    if isinstance(node, (Mul, Div)):
        op = "*" if isinstance(node, Mul) else "/"
        lhs = _wrap(node.left, prec)
        rhs = _wrap(node.right, prec + 1)
        return f"{lhs}{op}{rhs}"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, prec + 1)
    if isinstance(node, Pow):
        base = _wrap(node.base, prec + 1)
        if node.exponent < 0:
            return f"{base}^-{-node.exponent}"
        return f"{base}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    raise TypeError(f"unknown node {node!r}")


def _wrap(node: Node, min_prec: int) -> str:
    s = unparse(node)
    return f"({s})" if _PREC[type(node)] < min_prec else s


# ---------------------------------------------------------------------------
# Symbolic derivative with a light simplifier (keeps derived sources readable)

_ZERO = Const(0j)
_ONE = Const(1 + 0j)


def _is_const(n: Node, v: complex | None = None) -> bool:
    return isinstance(n, Const) and (v is None or n.value == v)


def simplify(n: Node) -> Node:
    if isinstance(n, (Var, Const)):
        return n
    if isinstance(n, Add):
        a, b = simplify(n.left), simplify(n.right)
        if _is_const(a, 0j):
            return b
        if _is_const(b, 0j):
            return a
        if _is_const(a) and _is_const(b):
            return Const(a.value + b.value)
        return Add(a, b)
    if isinstance(n, Sub):
        a, b = simplify(n.left), simplify(n.right)
        if _is_const(b, 0j):
            return a
        if _is_const(a, 0j):
            return simplify(Neg(b))
        if _is_const(a) and _is_const(b):
            return Const(a.value - b.value)
        return Sub(a, b)
    if isinstance(n, Mul):
        a, b = simplify(n.left), simplify(n.right)
        if _is_const(a, 0j) or _is_const(b, 0j):
            return _ZERO
        if _is_const(a, 1 + 0j):
            return b
        if _is_const(b, 1 + 0j):
            return a
        if _is_const(a) and _is_const(b):
            return Const(a.value * b.value)
        return Mul(a, b)
    if isinstance(n, Div):
        a, b = simplify(n.left), simplify(n.right)
        if _is_const(a, 0j):
            return _ZERO
        if _is_const(b, 1 + 0j):
            return a
        if _is_const(a) and _is_const(b):
            return Const(a.value / b.value)
        return Div(a, b)
    if isinstance(n, Neg):
        a = simplify(n.operand)
        if _is_const(a):
            return Const(-a.value)
        if isinstance(a, Neg):
            return a.operand
        return Neg(a)
    if isinstance(n, Pow):
        a = simplify(n.base)
        if n.exponent == 0:
            return _ONE
        if n.exponent == 1:
            return a
        if _is_const(a):
            return Const(a.value ** n.exponent)
        return Pow(a, n.exponent)
    if isinstance(n, Call):
        return Call(n.func, simplify(n.arg))
    raise TypeError(f"unknown node {n!r}")


def derivative_ast(n: Node) -> Node:
    if isinstance(n, Var):
        return _ONE
    if isinstance(n, Const):
        return _ZERO
    if isinstance(n, Add):
        return Add(derivative_ast(n.left), derivative_ast(n.right))
    if isinstance(n, Sub):
        return Sub(derivative_ast(n.left), derivative_ast(n.right))
    if isinstance(n, Mul):
        return Add(
            Mul(derivative_ast(n.left), n.right),
            Mul(n.left, derivative_ast(n.right)),
        )
    if isinstance(n, Div):
        return Div(derivative_ast(n.left), n.right)
    if isinstance(n, Neg):
        return Neg(derivative_ast(n.operand))
    if isinstance(n, Pow):
        if n.exponent == 0:
            return _ZERO
        return Mul(
            Mul(Const(complex(n.exponent)), Pow(n.base, n.exponent - 1)),
            derivative_ast(n.base),
        )
    if isinstance(n, Call):
        inner = derivative_ast(n.arg)
        if n.func == "exp":
            outer = Call("exp", n.arg)
        elif n.func == "sin":
            outer = Call("cos", n.arg)
        elif n.func == "cos":
            outer = Neg(Call("sin", n.arg))
        else:
            raise TypeError(f"unknown function {n.func!r}")
        return Mul(outer, inner)
    raise TypeError(f"unknown node {n!r}")


# ---------------------------------------------------------------------------
# Code generation.  One source text serves every backend: the free names
# exp/sin/cos are bound at exec time to cmath (scalars), numpy (arrays), or
# left for numba to resolve.  Integer powers are unrolled into multiply
# chains so all backends perform identical arithmetic.


class _Emitter:
    def __init__(self):
        self.lines: list[str] = []
        self.counter = 0

    def tmp(self, rhs: str) -> str:
        name = f"t{self.counter}"
        self.counter += 1
        self.lines.append(f"    {name} = {rhs}")
        return name


def _emit_pow(em: _Emitter, base: str, n: int) -> str:
    # binary powering as explicit multiplies
    if n == 0:
        return em.tmp("1.0+0.0j")
    if n < 0:
        pos = _emit_pow(em, base, -n)
        return em.tmp(f"(1.0+0.0j)/{pos}")
    result = None
    square = base
    k = n
    while k:
        if k & 1:
            result = square if result is None else em.tmp(f"{result}*{square}")
        k >>= 1
        if k:
            square = em.tmp(f"{square}*{square}")
    return result


def _emit_value(em: _Emitter, n: Node) -> str:
    if isinstance(n, Var):
        return "z"
    if isinstance(n, Const):
        return em.tmp(repr(n.value))
    if isinstance(n, Add):
        a, b = _emit_value(em, n.left), _emit_value(em, n.right)
        return em.tmp(f"{a}+{b}")
    if isinstance(n, Sub):
        a, b = _emit_value(em, n.left), _emit_value(em, n.right)
        return em.tmp(f"{a}-{b}")
    if isinstance(n, Mul):
        a, b = _emit_value(em, n.left), _emit_value(em, n.right)
        return em.tmp(f"{a}*{b}")
    if isinstance(n, Div):
        a, b = _emit_value(em, n.left), _emit_value(em, n.right)
        return em.tmp(f"{a}/{b}")
    if isinstance(n, Neg):
        a = _emit_value(em, n.operand)
        return em.tmp(f"-{a}")
    if isinstance(n, Pow):
        a = _emit_value(em, n.base)
        return _emit_pow(em, a, n.exponent)
    if isinstance(n, Call):
        a = _emit_value(em, n.arg)
        return em.tmp(f"{n.func}({a})")
    raise TypeError(f"unknown node {n!r}")


def _emit_jet(em: _Emitter, n: Node) -> tuple[str, str]:
    if isinstance(n, Var):
        return "z", "one"
    if isinstance(n, Const):
        return em.tmp(repr(n.value)), "zero"
    if isinstance(n, Add):
        av, ad = _emit_jet(em, n.left)
        bv, bd = _emit_jet(em, n.right)
        return em.tmp(f"{av}+{bv}"), em.tmp(f"{ad}+{bd}")
    if isinstance(n, Sub):
        av, ad = _emit_jet(em, n.left)
        bv, bd = _emit_jet(em, n.right)
        return em.tmp(f"{av}-{bv}"), em.tmp(f"{ad}-{bd}")
    if isinstance(n, Mul):
        av, ad = _emit_jet(em, n.left)
        bv, bd = _emit_jet(em, n.right)
        v = em.tmp(f"{av}*{bv}")
        d = em.tmp(f"{ad}*{bv}+{av}*{bd}")
        return v, d
    if isinstance(n, Div):
        av, ad = _emit_jet(em, n.left)
        bv = _emit_value(em, n.right)  # z-free: derivative is zero
        return em.tmp(f"{av}/{bv}"), em.tmp(f"{ad}/{bv}")
    if isinstance(n, Neg):
        av, ad = _emit_jet(em, n.operand)
        return em.tmp(f"-{av}"), em.tmp(f"-{ad}")
    if isinstance(n, Pow):
        av, ad = _emit_jet(em, n.base)
        if n.exponent == 0:
            return em.tmp("1.0+0.0j"), "zero"
        if n.exponent == 1:
            return av, ad
        pm1 = _emit_pow(em, av, n.exponent - 1)
        v = em.tmp(f"{pm1}*{av}")
        d = em.tmp(f"{float(n.exponent)!r}*{pm1}*{ad}")
        return v, d
    if isinstance(n, Call):
        av, ad = _emit_jet(em, n.arg)
        if n.func == "exp":
            v = em.tmp(f"exp({av})")
            d = em.tmp(f"{v}*{ad}")
        elif n.func == "sin":
            v = em.tmp(f"sin({av})")
            d = em.tmp(f"cos({av})*{ad}")
        else:  # cos
            v = em.tmp(f"cos({av})")
            d = em.tmp(f"-sin({av})*{ad}")
        return v, d
    raise TypeError(f"unknown node {n!r}")


def generate_value_source(n: Node, name: str = "_f") -> str:
    em = _Emitter()
    result = _emit_value(em, n)
    body = "\n".join(em.lines) or "    pass"
    return f"def {name}(z):\n{body}\n    return {result}\n"


def generate_jet_source(n: Node, name: str = "_fjet") -> str:
    em = _Emitter()
    em.lines.append("    one = 1.0+0.0j")
    em.lines.append("    zero = 0.0+0.0j")
    v, d = _emit_jet(em, n)
    body = "\n".join(em.lines)
    return f"def {name}(z):\n{body}\n    return {v}, {d}\n"


def _compile_source(source: str, name: str, namespace: dict):
    ns = dict(namespace)
    exec(compile(source, f"<hfbound:{name}>", "exec"), ns)
    return ns[name]


_CMATH_NS = {"exp": cmath.exp, "sin": cmath.sin, "cos": cmath.cos}
_NUMPY_NS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}


# ---------------------------------------------------------------------------
# Public map type


@dataclass(frozen=True)
class EntireMap:
    """A parsed entire map together with compiled evaluators.

    Compiled callables are built lazily and cached on the instance via
    object.__setattr__ (the dataclass is frozen for value semantics).
    """

    source: str
    ast: Node

    def __post_init__(self):
        object.__setattr__(self, "_cache", {})

    def _compiled(self, flavor: str):
        cache = self._cache
        fn = cache.get(flavor)
        if fn is None:
            if flavor == "scalar":
                fn = _compile_source(
                    generate_value_source(self.ast), "_f", _CMATH_NS
                )
            elif flavor == "scalar_jet":
                fn = _compile_source(
                    generate_jet_source(self.ast), "_fjet", _CMATH_NS
                )
            elif flavor == "array":
                fn = _compile_source(
                    generate_value_source(self.ast), "_f", _NUMPY_NS
                )
            elif flavor == "array_jet":
                fn = _compile_source(
                    generate_jet_source(self.ast), "_fjet", _NUMPY_NS
                )
            else:
                raise ValueError(flavor)
            cache[flavor] = fn
        return fn

    # -- evaluation --------------------------------------------------------

    def eval(self, z):
        """Evaluate at a complex scalar or an ndarray of complex values.

        Scalar overflow raises EvalOverflowError; array evaluation leaves
        non-finite entries in place for the caller to mask.
        """
        if isinstance(z, np.ndarray):
            with np.errstate(over="ignore", invalid="ignore"):
                return self._compiled("array")(z.astype(np.complex128))
        try:
            w = self._compiled("scalar")(complex(z))
        except OverflowError as exc:
            raise EvalOverflowError(f"evaluation overflowed at z={z!r}") from exc
        if not (math.isfinite(w.real) and math.isfinite(w.imag)):
            raise EvalOverflowError(f"evaluation overflowed at z={z!r}")
        return w

    def jet(self, z) -> Jet:
        """Value and derivative via forward dual-number evaluation."""
        if isinstance(z, np.ndarray):
            with np.errstate(over="ignore", invalid="ignore"):
                v, d = self._compiled("array_jet")(z.astype(np.complex128))
            return Jet(v, d)
        try:
            v, d = self._compiled("scalar_jet")(complex(z))
        except OverflowError as exc:
            raise EvalOverflowError(f"jet evaluation overflowed at z={z!r}") from exc
        if not all(math.isfinite(x) for x in (v.real, v.imag, d.real, d.imag)):
            raise EvalOverflowError(f"jet evaluation overflowed at z={z!r}")
        return Jet(v, d)

    def __call__(self, z):
        return self.eval(z)

    # -- structure ---------------------------------------------------------

    def derivative(self) -> "EntireMap":
        """The derivative as a new map (symbolic transform, simplified)."""
        d = simplify(derivative_ast(self.ast))
        return EntireMap(unparse(d), d)

    def substituted_scaled(self, factor: complex) -> Node:
        """AST of self with z replaced by factor*z (used by rescaling)."""
        return _subst_scale(self.ast, factor)


def _subst_scale(n: Node, factor: complex) -> Node:
    if isinstance(n, Var):
        return Mul(Const(factor), Var())
    if isinstance(n, Const):
        return n
    if isinstance(n, Add):
        return Add(_subst_scale(n.left, factor), _subst_scale(n.right, factor))
    if isinstance(n, Sub):
        return Sub(_subst_scale(n.left, factor), _subst_scale(n.right, factor))
    if isinstance(n, Mul):
        return Mul(_subst_scale(n.left, factor), _subst_scale(n.right, factor))
    if isinstance(n, Div):
        return Div(_subst_scale(n.left, factor), n.right)
    if isinstance(n, Neg):
        return Neg(_subst_scale(n.operand, factor))
    if isinstance(n, Pow):
        return Pow(_subst_scale(n.base, factor), n.exponent)
    if isinstance(n, Call):
        return Call(n.func, _subst_scale(n.arg, factor))
    raise TypeError(f"unknown node {n!r}")


def parse_map(source: str) -> EntireMap:
    """Parse an expression into an EntireMap.

    Raises ExprSyntaxError (malformed input) or NonEntireError (the function
    denoted would have poles), both carrying byte offsets.
    """
    ast = _Parser(source).parse()
    return EntireMap(source, ast)


def eval_jet(f: EntireMap, z) -> Jet:
    """Module-level jet evaluation (same as f.jet)."""
    return f.jet(z)
