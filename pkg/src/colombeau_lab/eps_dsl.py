"""Expression trees for representatives u(eps, x1, ..., xn).

Representatives of nets are closed-form expressions in the parameter ``eps``
and spatial coordinates ``x1 .. xn``.  They are written as S-expressions::

    (* (exp (neg (/ 1 eps))) (sin x1))

Constants are exact rationals, ``pow`` carries an exact rational exponent, and
``smoothstep`` is the C-infinity transition

    s(t) = g(t) / (g(t) + g(1 - t)),   g(t) = exp(-1/t) for t > 0, else 0.

Derivatives of ``smoothstep`` are represented by the primitive
``(dsmoothstep k t)``, the k-th derivative of s evaluated at t.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "Expr", "VarBinding", "ParseError", "ArityError", "PowDomainError",
    "EvalDomainError", "NonSmoothError",
    "const", "EPS", "x", "var", "neg", "exp", "log", "sin", "cos", "atan",
    "absolute", "smoothstep", "dsmoothstep", "power",
    "parse", "to_text", "evaluate", "evaluate_many", "compile_expr",
    "differentiate", "simplify", "substitute", "free_vars", "depends_on",
    "max_coord_index", "smoothstep_derivatives", "normal_form",
    "is_identically_zero", "rebuild",
]

UNARY = ("neg", "exp", "log", "sin", "cos", "atan", "abs", "smoothstep")
BINARY = ("add", "sub", "mul", "div")
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
_ALIASES = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


class ParseError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ArityError(ParseError):
    pass


class PowDomainError(ValueError):
    pass


class EvalDomainError(ArithmeticError):
    def __init__(self, message, node):
        super().__init__(f"{message} in {to_text(node)}")
        self.node = node


class NonSmoothError(ValueError):
    def __init__(self, node, variable):
        super().__init__(f"non-smooth fragment: {to_text(node)} depends on {variable}")
        self.node = node


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError("constants must be finite")
        return Fraction(float(v))
    return Fraction(v)


class Expr:
    """Immutable expression node.

    ``value`` holds the rational for ``const``, the coordinate index for
    ``x``, the exponent for ``pow`` and the derivative order for
    ``dsmoothstep``.
    """

    __slots__ = ("op", "args", "value", "_hash")

    def __init__(self, op: str, args: tuple = (), value=None):
        self.op = op
        self.args = tuple(args)
        self.value = value
        self._hash = hash((op, self.args, value))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash:
            return False
        return self.op == other.op and self.value == other.value and self.args == other.args

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    __str__ = lambda self: to_text(self)

    # arithmetic sugar, mirroring the grammar
    def __add__(self, other):
        return Expr("add", (self, _lift(other)))

    def __radd__(self, other):
        return Expr("add", (_lift(other), self))

    def __sub__(self, other):
        return Expr("sub", (self, _lift(other)))

    def __rsub__(self, other):
        return Expr("sub", (_lift(other), self))

    def __mul__(self, other):
        return Expr("mul", (self, _lift(other)))

    def __rmul__(self, other):
        return Expr("mul", (_lift(other), self))

    def __truediv__(self, other):
        return Expr("div", (self, _lift(other)))

    def __rtruediv__(self, other):
        return Expr("div", (_lift(other), self))

    def __neg__(self):
        return Expr("neg", (self,))

    def __pow__(self, q):
        return power(self, q)

    @property
    def is_const(self):
        return self.op == "const"


def _lift(v) -> Expr:
    return v if isinstance(v, Expr) else const(v)


def const(v) -> Expr:
    return Expr("const", (), _frac(v))


EPS = Expr("eps")


def x(i: int) -> Expr:
    if i < 1:
        raise ValueError("coordinate indices start at 1")
    return Expr("x", (), int(i))


def var(name: str) -> Expr:
    if name == "eps":
        return EPS
    m = re.fullmatch(r"x(\d+)", name)
    if not m:
        raise ValueError(f"unknown variable {name!r}")
    return x(int(m.group(1)))


def neg(a):
    return Expr("neg", (_lift(a),))


def exp(a):
    return Expr("exp", (_lift(a),))


def log(a):
    return Expr("log", (_lift(a),))


def sin(a):
    return Expr("sin", (_lift(a),))


def cos(a):
    return Expr("cos", (_lift(a),))


def atan(a):
    return Expr("atan", (_lift(a),))


def absolute(a):
    return Expr("abs", (_lift(a),))


def smoothstep(a):
    return Expr("smoothstep", (_lift(a),))


def dsmoothstep(k: int, a):
    if k < 1:
        raise ValueError("derivative order must be >= 1")
    return Expr("dsmoothstep", (_lift(a),), int(k))


def power(base, q) -> Expr:
    base = _lift(base)
    q = _frac(q)
    nonneg_int = q.denominator == 1 and q >= 0
    if base.is_const and not nonneg_int:
        if base.value < 0 or (base.value == 0 and q < 0):
            raise PowDomainError(f"pow base {base.value} with exponent {q}")
    return Expr("pow", (base,), q)


@dataclass(frozen=True)
class VarBinding:
    eps: float
    coords: tuple = ()

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be strictly positive")
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))


# ---------------------------------------------------------------- text format

_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")
_DECIMAL = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_RATIONAL = re.compile(r"[+-]?\d+/\d+")


def _atom(tok: str, offset: int) -> Expr:
    if tok == "eps":
        return EPS
    if re.fullmatch(r"x\d+", tok):
        i = int(tok[1:])
        if i < 1:
            raise ParseError(f"bad coordinate {tok!r}", offset)
        return x(i)
    if _RATIONAL.fullmatch(tok):
        p, q = tok.split("/")
        if int(q) == 0:
            raise ParseError("zero denominator", offset)
        return const(Fraction(int(p), int(q)))
    if _DECIMAL.fullmatch(tok):
        return const(Fraction(tok))
    raise ParseError(f"unknown atom {tok!r}", offset)


def parse(text: str) -> Expr:
    """Parse the S-expression format into an :class:`Expr`."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ParseError("unexpected character", len(text[:pos].encode()))
        start = m.start(m.lastindex)
        tokens.append((m.group(m.lastindex), len(text[:start].encode()), m.lastindex))
        pos = m.end()
    if not tokens:
        raise ParseError("empty input", 0)

    idx = 0

    def form():
        nonlocal idx
        if idx >= len(tokens):
            raise ParseError("unexpected end of input", len(text.encode()))
        tok, off, kind = tokens[idx]
        idx += 1
        if kind == 2:
            raise ParseError("unexpected ')'", off)
        if kind == 3:
            return _atom(tok, off)
        if idx >= len(tokens) or tokens[idx][2] != 3:
            raise ParseError("expected operator after '('", off)
        op, op_off, _ = tokens[idx]
        idx += 1
        if op in ("pow", "dsmoothstep"):
            if op == "pow":
                base = form()
                q = form()
                if not q.is_const:
                    raise ParseError("pow exponent must be a rational constant", op_off)
                args_end()
                try:
                    return power(base, q.value)
                except PowDomainError as err:
                    raise ParseError(f"pow-domain: {err}", op_off) from None
            k = form()
            if not k.is_const or k.value.denominator != 1 or k.value < 1:
                raise ParseError("dsmoothstep order must be a positive integer", op_off)
            t = form()
            args_end()
            return dsmoothstep(int(k.value), t)
        name = _ALIASES.get(op, op)
        args = []
        while idx < len(tokens) and tokens[idx][2] != 2:
            args.append(form())
        args_end()
        if name in UNARY:
            if len(args) != 1:
                raise ArityError(f"{op} expects 1 argument, got {len(args)}", op_off)
            return Expr(name, (args[0],))
        if name in BINARY:
            if name == "sub" and len(args) == 1:
                return Expr("neg", (args[0],))
            if len(args) < 2 or (len(args) > 2 and name in ("sub", "div")):
                raise ArityError(f"{op} expects 2 arguments, got {len(args)}", op_off)
            out = args[0]
            for a in args[1:]:
                out = Expr(name, (out, a))
            return out
        raise ParseError(f"unknown operator {op!r}", op_off)

    def args_end():
        nonlocal idx
        if idx >= len(tokens) or tokens[idx][2] != 2:
            off = tokens[idx][1] if idx < len(tokens) else len(text.encode())
            raise ArityError("too many arguments or missing ')'", off)
        idx += 1

    tree = form()
    if idx != len(tokens):
        raise ParseError("trailing input", tokens[idx][1])
    return tree


def _const_text(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def to_text(e: Expr) -> str:
    if e.op == "const":
        return _const_text(e.value)
    if e.op == "eps":
        return "eps"
    if e.op == "x":
        return f"x{e.value}"
    if e.op == "pow":
        return f"(pow {to_text(e.args[0])} {_const_text(e.value)})"
    if e.op == "dsmoothstep":
        return f"(dsmoothstep {e.value} {to_text(e.args[0])})"
    name = _SYMBOL.get(e.op, e.op)
    return "(" + name + " " + " ".join(to_text(a) for a in e.args) + ")"


# ----------------------------------------------------------------- evaluation

def smoothstep_derivatives(t, order: int):
    """Return [s(t), s'(t), ..., s^(order)(t)] for an array ``t``.

    Inside (0, 1), s = logistic(h) with h(t) = 1/(1-t) - 1/t; the Taylor
    coefficients follow from the ODE y' = y (1 - y) h'.  Outside (0, 1) all
    derivatives vanish.
    """
    t = np.asarray(t, dtype=float)
    out = [np.where(t >= 1.0, 1.0, 0.0)] + [np.zeros_like(t) for _ in range(order)]
    inside = (t > 0.0) & (t < 1.0)
    if not inside.any():
        return out
    ti = t[inside]
    a, b = 1.0 / (1.0 - ti), 1.0 / ti
    # Taylor coefficients of h about ti: 1/(1-t) -> a^(j+1), -1/t -> -(-1)^j b^(j+1)
    h = [a ** (j + 1) - ((-1) ** j) * b ** (j + 1) for j in range(order + 1)]
    y = [expit(h[0])]
    # saturated logistic: the true derivatives are below any float resolution
    live = (np.abs(h[0]) < 700.0)
    w = []
    for k in range(order):
        w.append(y[k] - sum(y[i] * y[k - i] for i in range(k + 1)))
        hp = [(j + 1) * h[j + 1] for j in range(k + 1)]
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = sum(w[i] * hp[k - i] for i in range(k + 1)) / (k + 1)
        y.append(np.where(live, nxt, 0.0))
    out[0][inside] = y[0]
    for k in range(1, order + 1):
        out[k][inside] = math.factorial(k) * y[k]
    return out


def _check(cond_bad, msg, node):
    if np.any(cond_bad):
        raise EvalDomainError(msg, node)


@lru_cache(maxsize=4096)
def compile_expr(e: Expr) -> Callable:
    """Compile ``e`` to a closure ``f(env)`` over numpy arrays.

    ``env`` maps ``"eps"`` and integer coordinate indices to arrays.
    """
    op = e.op
    if op == "const":
        c = float(e.value)
        return lambda env: c
    if op == "eps":
        return lambda env: env["eps"]
    if op == "x":
        i = e.value
        return lambda env: env[i]
    if op in BINARY:
        fa, fb = compile_expr(e.args[0]), compile_expr(e.args[1])
        if op == "add":
            return lambda env: fa(env) + fb(env)
        if op == "sub":
            return lambda env: fa(env) - fb(env)
        if op == "mul":
            return lambda env: fa(env) * fb(env)

        def div(env):
            den = fb(env)
            _check(np.asarray(den) == 0, "division by zero", e)
            return fa(env) / den
        return div
    fa = compile_expr(e.args[0])
    if op == "neg":
        return lambda env: -fa(env)
    if op == "exp":
        return lambda env: np.exp(fa(env))
    if op == "sin":
        return lambda env: np.sin(fa(env))
    if op == "cos":
        return lambda env: np.cos(fa(env))
    if op == "atan":
        return lambda env: np.arctan(fa(env))
    if op == "abs":
        return lambda env: np.abs(fa(env))
    if op == "log":
        def log_(env):
            v = fa(env)
            _check(np.asarray(v) <= 0, "log of non-positive value", e)
            return np.log(v)
        return log_
    if op == "smoothstep":
        return lambda env: smoothstep_derivatives(fa(env), 0)[0]
    if op == "dsmoothstep":
        k = e.value
        return lambda env: smoothstep_derivatives(fa(env), k)[k]
    if op == "pow":
        q = e.value
        qf = float(q)
        if q.denominator == 1 and q >= 0:
            n = int(q)
            return lambda env: fa(env) ** n

        def pow_(env):
            b = np.asarray(fa(env), dtype=float)
            if q.denominator == 1:
                _check(b == 0, "pow of zero with negative exponent", e)
                return b ** int(q)
            _check(b < 0, "pow of negative base with fractional exponent", e)
            _check((b == 0) & (q < 0), "pow of zero with negative exponent", e)
            return b ** qf
        return pow_
    raise ValueError(f"cannot compile node {op!r}")


def evaluate_many(e: Expr, eps, coords: Sequence = ()):
    """Evaluate ``e`` with numpy broadcasting over ``eps`` and the coordinates."""
    env = {"eps": np.asarray(eps, dtype=float)}
    for i, c in enumerate(coords, start=1):
        env[i] = np.asarray(c, dtype=float)
    need = max_coord_index(e)
    if need > len(coords):
        raise ValueError(f"expression uses x{need} but only {len(coords)} coordinates bound")
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        out = compile_expr(e)(env)
    shape = np.broadcast(*env.values()).shape
    out = np.asarray(out, dtype=float)
    return out if out.shape == shape else np.broadcast_to(out, shape).copy()


def evaluate(e: Expr, b: VarBinding) -> float:
    return float(evaluate_many(e, b.eps, b.coords))


# ------------------------------------------------------------------ structure

@lru_cache(maxsize=None)
def free_vars(e: Expr) -> frozenset:
    if e.op == "eps":
        return frozenset({"eps"})
    if e.op == "x":
        return frozenset({f"x{e.value}"})
    out = frozenset()
    for a in e.args:
        out |= free_vars(a)
    return out


def depends_on(e: Expr, v: str) -> bool:
    return v in free_vars(e)


def max_coord_index(e: Expr) -> int:
    return max((int(v[1:]) for v in free_vars(e) if v != "eps"), default=0)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneously replace variables by expressions."""
    mapping = {k: _lift(v) for k, v in mapping.items()}
    cache = {}

    def go(n):
        if n in cache:
            return cache[n]
        if n.op == "eps":
            r = mapping.get("eps", n)
        elif n.op == "x":
            r = mapping.get(f"x{n.value}", n)
        elif not n.args or not (free_vars(n) & mapping.keys()):
            r = n
        else:
            r = Expr(n.op, tuple(go(a) for a in n.args), n.value)
        cache[n] = r
        return r

    return go(e)


# ------------------------------------------------------------ differentiation

ZERO, ONE = const(0), const(1)


def differentiate(e: Expr, v: str) -> Expr:
    """Symbolic derivative of ``e`` with respect to ``"eps"`` or ``"xi"``."""
    cache = {}

    def d(n):
        if not depends_on(n, v):
            return ZERO
        if n in cache:
            return cache[n]
        op = n.op
        if op in ("eps", "x"):
            r = ONE
        elif op == "neg":
            r = neg(d(n.args[0]))
        elif op in ("add", "sub"):
            r = Expr(op, (d(n.args[0]), d(n.args[1])))
        elif op == "mul":
            a, b = n.args
            r = d(a) * b + a * d(b)
        elif op == "div":
            a, b = n.args
            r = d(a) / b - a * d(b) / (b * b)
        elif op == "pow":
            b, q = n.args[0], n.value
            if q == 1:
                r = d(b)
            else:
                r = const(q) * Expr("pow", (b,), q - 1) * d(b)
        else:
            u = n.args[0]
            du = d(u)
            if op == "exp":
                r = n * du
            elif op == "log":
                r = du / u
            elif op == "sin":
                r = cos(u) * du
            elif op == "cos":
                r = neg(sin(u)) * du
            elif op == "atan":
                r = du / (ONE + u * u)
            elif op == "smoothstep":
                r = dsmoothstep(1, u) * du
            elif op == "dsmoothstep":
                r = dsmoothstep(n.value + 1, u) * du
            elif op == "abs":
                raise NonSmoothError(n, v)
            else:
                raise ValueError(f"cannot differentiate {op!r}")
        cache[n] = r
        return r

    return simplify(d(e))


def simplify(e: Expr) -> Expr:
    """Constant folding and 0/1 identities; nothing that changes values."""
    cache = {}

    def go(n):
        if not n.args:
            return n
        if n in cache:
            return cache[n]
        args = tuple(go(a) for a in n.args)
        r = _simplify_node(n.op, args, n.value)
        cache[n] = r
        return r

    return go(e)


def _is(c: Expr, value) -> bool:
    return c.is_const and c.value == value


def _simplify_node(op, args, value) -> Expr:
    if op == "add":
        a, b = args
        if a.is_const and b.is_const:
            return const(a.value + b.value)
        if _is(b, 0):
            return a
        if _is(a, 0):
            return b
    elif op == "sub":
        a, b = args
        if a.is_const and b.is_const:
            return const(a.value - b.value)
        if _is(b, 0):
            return a
        if _is(a, 0):
            return _simplify_node("neg", (b,), None)
    elif op == "mul":
        a, b = args
        if a.is_const and b.is_const:
            return const(a.value * b.value)
        if _is(a, 0) or _is(b, 0):
            return ZERO
        if _is(a, 1):
            return b
        if _is(b, 1):
            return a
    elif op == "div":
        a, b = args
        if a.is_const and b.is_const and b.value != 0:
            return const(a.value / b.value)
        if _is(b, 1):
            return a
        if _is(a, 0):
            return ZERO
    elif op == "neg":
        (a,) = args
        if a.is_const:
            return const(-a.value)
        if a.op == "neg":
            return a.args[0]
    elif op == "pow":
        (b,) = args
        if value == 1:
            return b
        if value == 0:
            return ONE
        if b.is_const and value.denominator == 1 and (b.value != 0 or value > 0):
            return const(b.value ** int(value))
        if _is(b, 1):
            return ONE
    elif len(args) == 1 and args[0].is_const:
        c = args[0].value
        if op in ("sin", "atan") and c == 0:
            return ZERO
        if op in ("cos", "exp") and c == 0:
            return ONE
        if op == "log" and c == 1:
            return ZERO
        if op == "abs":
            return const(abs(c))
        if op == "smoothstep" and (c <= 0 or c >= 1):
            return ZERO if c <= 0 else ONE
        if op == "dsmoothstep" and (c <= 0 or c >= 1):
            return ZERO
    return Expr(op, args, value)


# ---------------------------------------------------------------- normal form
#
# Polynomials over "atoms" with exact rational coefficients.  A monomial is a
# frozenset of (atom key, exponent); atoms are eps, coordinates, transcendental
# nodes and non-polynomial bases.  Two expressions with equal normal forms are
# pointwise equal on their common domain.

_MAX_EXPAND = 6


def _poly_key(p: dict) -> frozenset:
    return frozenset(p.items())


def _pmul(p, q):
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            exps = dict(m1)
            for k, e in m2:
                exps[k] = exps.get(k, 0) + e
            m = frozenset((k, e) for k, e in exps.items() if e != 0)
            c = out.get(m, 0) + c1 * c2
            if c:
                out[m] = c
            else:
                out.pop(m, None)
    return out


def _padd(p, q, sign=1):
    out = dict(p)
    for m, c in q.items():
        v = out.get(m, 0) + sign * c
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def _reduce_trig(p, bases):
    """Rewrite sin(u)^k, k >= 2, as sin(u)^(k-2) (1 - cos(u)^2)."""
    changed = True
    while changed:
        changed = False
        for m, c in list(p.items()):
            for k, e in m:
                if k[0] == "sin" and e.denominator == 1 and e >= 2:
                    ckey = ("cos",) + k[1:]
                    bases.setdefault(ckey, cos(bases[k].args[0]))
                    rest = frozenset((kk, ee) for kk, ee in m if kk != k)
                    if e > 2:
                        rest = rest | {(k, e - 2)}
                    repl = _pmul({rest: c}, {frozenset(): Fraction(1), frozenset({(ckey, Fraction(2))}): Fraction(-1)})
                    del p[m]
                    p = _padd(p, repl)
                    changed = True
                    break
            if changed:
                break
    return p


def _atom_poly(key):
    return {frozenset({(key, Fraction(1))}): Fraction(1)}


@lru_cache(maxsize=8192)
def _nf(e: Expr):
    """Return (poly, bases) with bases mapping atom keys to expressions."""
    op = e.op
    if op == "const":
        return ({frozenset(): e.value} if e.value else {}), {}
    if op == "eps":
        return _atom_poly(("eps",)), {("eps",): e}
    if op == "x":
        k = ("x", e.value)
        return _atom_poly(k), {k: e}
    if op in ("add", "sub"):
        (p, b1), (q, b2) = _nf(e.args[0]), _nf(e.args[1])
        return _padd(p, q, 1 if op == "add" else -1), {**b1, **b2}
    if op == "neg":
        p, b = _nf(e.args[0])
        return {m: -c for m, c in p.items()}, b
    if op == "mul":
        (p, b1), (q, b2) = _nf(e.args[0]), _nf(e.args[1])
        bases = {**b1, **b2}
        return _reduce_trig(_pmul(p, q), bases), bases
    if op == "div":
        (p, b1), (q, b2) = _nf(e.args[0]), _nf(Expr("pow", (e.args[1],), Fraction(-1)))
        bases = {**b1, **b2}
        return _reduce_trig(_pmul(p, q), bases), bases
    if op == "pow":
        return _nf_pow(e)
    p, b = _nf(e.args[0])
    key = (op, e.value, _poly_key(p))
    bases = dict(b)
    bases[key] = Expr(op, (rebuild(p, b),), e.value)
    return _atom_poly(key), bases


def _nf_pow(e: Expr):
    q = e.value
    p, b = _nf(e.args[0])
    bases = dict(b)
    if not p:
        return {}, bases
    if q.denominator == 1 and q >= 0 and (len(p) == 1 or q <= _MAX_EXPAND):
        out = {frozenset(): Fraction(1)}
        for _ in range(int(q)):
            out = _pmul(out, p)
        return _reduce_trig(out, bases), bases
    if len(p) == 1:
        (m, c), = p.items()
        positive_atoms = all(k == ("eps",) for k, _ in m) or (len(m) == 1 and next(iter(m))[1] == 1)
        if q.denominator == 1 and c != 0:
            return {frozenset((k, ee * q) for k, ee in m): c ** int(q)}, bases
        if positive_atoms and c == 1:
            return {frozenset((k, ee * q) for k, ee in m): Fraction(1)}, bases
    key = ("poly", None, _poly_key(p))
    bases[key] = rebuild(p, b)
    return {frozenset({(key, q)}): Fraction(1)}, bases


def _sort_key(item):
    return repr(sorted(map(repr, item[0]))) + repr(item[1])


def rebuild(p: dict, bases: dict) -> Expr:
    """Turn a normal-form polynomial back into an expression."""
    terms = []
    for m, c in sorted(p.items(), key=_sort_key):
        factors = []
        for k, ee in sorted(m, key=repr):
            base = bases[k]
            factors.append(base if ee == 1 else Expr("pow", (base,), ee))
        term = None
        for f in factors:
            term = f if term is None else term * f
        if term is None:
            term = const(c)
        elif c != 1:
            term = const(c) * term
        terms.append(term)
    if not terms:
        return ZERO
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def normal_form(e: Expr) -> Expr:
    p, b = _nf(e)
    return rebuild(p, b)


def is_identically_zero(e: Expr) -> bool:
    """Exact check: the normal form of ``e`` is the zero polynomial."""
    return not _nf(simplify(e))[0]
