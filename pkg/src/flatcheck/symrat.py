"""
Scalar symbolic expressions over a declared chart.

Expressions are thin immutable wrappers around sympy trees that are kept in a
canonical rational form: elementary function applications (sin, cos, tan, exp,
ln, sqrt) act as opaque kernels, everything else is collected into a reduced
numerator/denominator pair by ``sympy.cancel``.  Equality of two rational
expressions is therefore a structural comparison.

Evaluation does not go through sympy: each expression is compiled once into a
small Python function that works on ``Fraction`` (exact) or ``float`` values.
"""

import math
import random
from fractions import Fraction

import sympy as sp

__all__ = [
    "SymratError", "ParseError", "ExprSyntaxError", "UndeclaredIdentifier",
    "DifferentiationAgainstConstant", "DivisionByZero", "NonRationalExpr",
    "DomainError", "Chart", "Expr", "parse_expr", "print_expr", "differentiate",
    "substitute", "eval_exact", "eval_float", "is_zero", "ZERO", "ONE",
    "FUNCTIONS",
]


class SymratError(Exception):
    pass


class ParseError(SymratError):
    pass


class ExprSyntaxError(ParseError):
    """Raised on text that does not match the expression grammar."""

    def __init__(self, position, expected, text=""):
        self.position = position
        self.expected = tuple(sorted(expected))
        self.text = text
        got = text[position:position + 10] if text else ""
        super().__init__("at column %d: expected one of %s, got %r"
                         % (position + 1, ", ".join(self.expected), got or "end of input"))


class UndeclaredIdentifier(ParseError):
    def __init__(self, name, position=None):
        self.name = name
        self.position = position
        where = "" if position is None else " (column %d)" % (position + 1)
        super().__init__("undeclared identifier %r%s" % (name, where))


class DifferentiationAgainstConstant(SymratError):
    pass


class DivisionByZero(SymratError):
    pass


class NonRationalExpr(SymratError):
    pass


class DomainError(SymratError):
    pass


# grammar name -> sympy constructor
FUNCTIONS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "exp": sp.exp,
    "ln": sp.log,
    "sqrt": sp.sqrt,
}
_KERNEL_TYPES = (sp.sin, sp.cos, sp.tan, sp.exp, sp.log)
_BAD_ATOMS = (sp.zoo, sp.nan, sp.oo, -sp.oo)


def _is_kernel(e):
    if isinstance(e, _KERNEL_TYPES):
        return True
    return e.is_Pow and not e.exp.is_Integer


def _has_kernel(e):
    if e.is_Atom:
        return False
    return any(_is_kernel(a) for a in sp.preorder_traversal(e))


def _canonical_kernel(k):
    if k.is_Pow:
        return sp.Pow(_canonical(k.base), k.exp)
    return k.func(_canonical(k.args[0]))


def _canonical(e):
    if e.is_Atom:
        return e
    kernels = [a for a in sp.preorder_traversal(e) if _is_kernel(a)]
    if kernels:
        repl = {}
        for k in kernels:
            ck = _canonical_kernel(k)
            if ck != k:
                repl[k] = ck
        if repl:
            e = e.xreplace(repl)
    return sp.cancel(e)


def _check(e):
    if e.has(*_BAD_ATOMS):
        raise DivisionByZero("expression has a structural pole: %s" % e)
    if e.has(sp.I):
        raise DomainError("expression is not real: %s" % e)
    return e


class Chart:
    """Ordered coordinate names plus symbolic constants.

    Coordinates are the directions of differentiation; constants are
    parameters that get sampled at generic points but are never
    differentiated against.
    """

    def __init__(self, coords, constants=()):
        coords = tuple(coords)
        constants = tuple(constants)
        names = coords + constants
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError("duplicate chart names: %s" % ", ".join(dup))
        for n in names:
            if not _is_ident(n):
                raise ValueError("invalid identifier %r" % n)
        self.coords = coords
        self.constants = constants
        self.symbols = tuple(sp.Symbol(n) for n in coords)
        self.constant_symbols = tuple(sp.Symbol(n) for n in constants)
        self._index = {n: i for i, n in enumerate(coords)}

    @property
    def dim(self):
        return len(self.coords)

    @property
    def names(self):
        return self.coords + self.constants

    def index(self, name):
        return self._index[name]

    def is_constant(self, name):
        return name in self.constants

    def __contains__(self, name):
        return name in self._index or name in self.constants

    def var(self, name):
        if name not in self:
            raise UndeclaredIdentifier(name)
        return Expr(sp.Symbol(name), _normalized=True)

    def extend(self, coords=(), constants=()):
        return Chart(self.coords + tuple(coords), self.constants + tuple(constants))

    def sub(self, coords):
        """Chart on a subset of the coordinates, same constants."""
        keep = set(coords)
        return Chart([c for c in self.coords if c in keep], self.constants)

    def __eq__(self, other):
        return (isinstance(other, Chart) and self.coords == other.coords
                and self.constants == other.constants)

    def __hash__(self):
        return hash((self.coords, self.constants))

    def __repr__(self):
        if self.constants:
            return "Chart(%s; constants %s)" % (", ".join(self.coords), ", ".join(self.constants))
        return "Chart(%s)" % ", ".join(self.coords)


def _is_ident(s):
    return bool(s) and (s[0].isalpha() or s[0] == "_") and all(
        c.isalnum() or c == "_" for c in s) and s.isascii()


class Expr:
    """Immutable normalized scalar expression.

    Arithmetic operators build new normalized expressions.  ``side_conditions``
    holds denominators that were cancelled while parsing (assumed nonzero at
    generic points); it does not take part in equality.
    """

    __slots__ = ("sym", "side_conditions", "_hash", "_fns", "_names")

    def __init__(self, value, _normalized=False, side_conditions=()):
        if isinstance(value, Expr):
            value = value.sym
        elif isinstance(value, Fraction):
            value = sp.Rational(value.numerator, value.denominator)
        elif not isinstance(value, sp.Basic):
            value = _const(value)
        if not _normalized:
            value = _canonical(_check(value))
        object.__setattr__(self, "sym", _check(value))
        object.__setattr__(self, "side_conditions", tuple(side_conditions))
        object.__setattr__(self, "_hash", None)
        object.__setattr__(self, "_fns", {})
        object.__setattr__(self, "_names", None)

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    # structural identity of canonical trees
    def __eq__(self, other):
        if isinstance(other, Expr):
            return self.sym == other.sym
        if isinstance(other, (int, Fraction)):
            return self.sym == sp.Rational(other)
        return NotImplemented

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(self.sym)
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        return "Expr(%s)" % print_expr(self)

    def __str__(self):
        return print_expr(self)

    def _wrap(self, other):
        return other.sym if isinstance(other, Expr) else _const(other)

    def __add__(self, other):
        return Expr(self.sym + self._wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Expr(self.sym - self._wrap(other))

    def __rsub__(self, other):
        return Expr(self._wrap(other) - self.sym)

    def __mul__(self, other):
        return Expr(self.sym * self._wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        den = self._wrap(other)
        if den == 0:
            raise DivisionByZero("division by zero")
        return Expr(self.sym / den)

    def __rtruediv__(self, other):
        if self.sym == 0:
            raise DivisionByZero("division by zero")
        return Expr(self._wrap(other) / self.sym)

    def __neg__(self):
        return Expr(-self.sym, _normalized=True) if self.sym.is_Atom else Expr(-self.sym)

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if k < 0 and self.sym == 0:
            raise DivisionByZero("zero to a negative power")
        return Expr(self.sym ** k)

    @property
    def is_zero(self):
        """Structural zero; see :func:`is_zero` for kernel expressions."""
        return self.sym == 0

    @property
    def is_constant(self):
        return not self.sym.free_symbols

    @property
    def is_rational(self):
        return not _has_kernel(self.sym)

    def free_names(self):
        names = self._names
        if names is None:
            names = frozenset(s.name for s in self.sym.free_symbols)
            object.__setattr__(self, "_names", names)
        return names

    def depends_on(self, name):
        return name in self.free_names()

    def numer_denom(self):
        n, d = sp.fraction(self.sym)
        return Expr(n, _normalized=True), Expr(d, _normalized=True)

    def compiled(self, mode):
        fn = self._fns.get(mode)
        if fn is None:
            fn = _compile(self.sym, mode)
            self._fns[mode] = fn
        return fn


def _const(v):
    if isinstance(v, Fraction):
        return sp.Rational(v.numerator, v.denominator)
    if isinstance(v, int):
        return sp.Integer(v)
    if isinstance(v, sp.Basic):
        return v
    raise TypeError("cannot combine Expr with %r" % type(v).__name__)


ZERO = Expr(sp.Integer(0), _normalized=True)
ONE = Expr(sp.Integer(1), _normalized=True)


def as_expr(v):
    if isinstance(v, Expr):
        return v
    return Expr(_const(v) if not isinstance(v, str) else sp.Symbol(v))


# ---------------------------------------------------------------- parsing

_PUNCT = set("+-*/^()")


def _tokenize(text):
    toks = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(("int", text[i:j], i))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("ident", text[i:j], i))
            i = j
        elif c in _PUNCT:
            toks.append((c, c, i))
            i += 1
        else:
            raise ExprSyntaxError(i, {"number", "identifier", "operator"}, text)
    toks.append(("end", "", n))
    return toks


class _Parser:
    _BASE_START = {"number", "identifier", "function", "(", "-"}

    def __init__(self, text, chart):
        self.text = text
        self.chart = chart
        self.toks = _tokenize(text)
        self.pos = 0
        self.denominators = []

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, expected):
        raise ExprSyntaxError(self.peek()[2], expected, self.text)

    def expect(self, kind):
        if self.peek()[0] != kind:
            self.fail({kind})
        return self.take()

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail({"+", "-", "*", "/", "^", "end of input"})
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self):
        e = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            f = self.factor()
            if op == "*":
                e = e * f
            else:
                if f == 0:
                    raise DivisionByZero("division by zero at column %d" % (self.toks[self.pos - 1][2] + 1))
                self.denominators.append(f)
                e = e / f
        return e

    def factor(self):
        b = self.base()
        if self.peek()[0] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "-":
                self.take()
                sign = -1
            k = sign * int(self.expect("int")[1])
            if k < 0 and b == 0:
                raise DivisionByZero("zero to a negative power")
            if k < 0:
                self.denominators.append(b)
            b = b ** k
        return b

    def base(self):
        kind, val, p = self.peek()
        if kind == "int":
            self.take()
            num = int(val)
            if self.peek()[0] == "/" and self.toks[self.pos + 1][0] == "int":
                self.take()
                den = int(self.take()[1])
                if den == 0:
                    raise DivisionByZero("zero denominator in number at column %d" % (p + 1))
                return sp.Rational(num, den)
            return sp.Integer(num)
        if kind == "ident":
            self.take()
            if val in FUNCTIONS and self.peek()[0] == "(":
                self.take()
                arg = self.expr()
                self.expect(")")
                if val == "ln" and arg == 0:
                    raise DomainError("ln(0)")
                return FUNCTIONS[val](arg)
            if val in FUNCTIONS:
                self.fail({"("})
            if val not in self.chart:
                raise UndeclaredIdentifier(val, p)
            return sp.Symbol(val)
        if kind == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        if kind == "-":
            # conventional precedence: -x^2 is -(x^2)
            self.take()
            return -self.factor()
        self.fail(self._BASE_START)


def parse_expr(text, chart):
    """Parse ``text`` against ``chart`` and return the normalized expression."""
    p = _Parser(text, chart)
    tree = p.parse()
    conds = []
    for d in p.denominators:
        if not d.free_symbols:
            continue
        c = Expr(d)
        if c not in conds:
            conds.append(c)
    return Expr(tree, side_conditions=conds)


# ---------------------------------------------------------------- printing

def _num_str(r):
    if r.q == 1:
        return str(r.p)
    return "%d/%d" % (r.p, r.q)


def _split_mul(e):
    """Return (sign, rational coefficient, numerator factors, denominator factors)."""
    coeff = sp.Integer(1)
    num, den = [], []
    factors = e.args if e.is_Mul else (e,)
    for f in factors:
        if f.is_Rational:
            coeff *= f
        elif f.is_Pow and f.exp.is_Rational and f.exp < 0:
            den.append(sp.Pow(f.base, -f.exp))
        else:
            num.append(f)
    sign = -1 if coeff < 0 else 1
    return sign, abs(coeff), num, den


def _print_power(e):
    base, k = e.base, e.exp
    if k.is_Integer:
        return "%s^%d" % (_print_atomic(base), int(k))
    # half-integer exponents come from sqrt
    if k.q == 2:
        s = "sqrt(%s)" % _print(base)
        return s if k.p == 1 else "%s^%d" % (s, int(k.p))
    raise NonRationalExpr("unsupported exponent %s" % k)


def _print_atomic(e):
    s = _print(e)
    if e.is_Symbol or (e.is_Integer and e >= 0) or isinstance(e, _KERNEL_TYPES) or (
            e.is_Pow and e.exp == sp.Rational(1, 2)):
        return s
    return "(%s)" % s


def _print_product(coeff, num, den):
    parts = []
    if coeff.p != 1 or not num:
        parts.append(str(coeff.p))
    for f in num:
        parts.append(_print_factor(f))
    s = "*".join(parts)
    dparts = []
    if coeff.q != 1:
        dparts.append(str(coeff.q))
    dparts.extend(_print_factor(f) for f in den)
    if dparts:
        if len(dparts) == 1:
            s += "/" + dparts[0]
        else:
            s += "/(" + "*".join(dparts) + ")"
    return s


def _negate(body, coeff, num):
    # unary minus binds tighter than '^' in the grammar
    if coeff.p != 1 or not num or not num[0].is_Pow:
        return "-" + body
    return "-(%s)" % body


def _print_factor(f):
    if f.is_Add:
        return "(%s)" % _print(f)
    if f.is_Pow:
        return _print_power(f)
    return _print(f)


def _print(e):
    if e.is_Rational:
        return _num_str(e)
    if e.is_Symbol:
        return e.name
    if isinstance(e, _KERNEL_TYPES):
        name = "ln" if isinstance(e, sp.log) else type(e).__name__
        return "%s(%s)" % (name, _print(e.args[0]))
    if e.is_Pow:
        if e.exp.is_negative:
            return _print_product(sp.Integer(1), [], [sp.Pow(e.base, -e.exp)])
        return _print_power(e)
    if e.is_Mul:
        sign, coeff, num, den = _split_mul(e)
        s = _print_product(coeff, num, den)
        return _negate(s, coeff, num) if sign < 0 else s
    if e.is_Add:
        terms = sp.Add.make_args(e)
        terms = sorted(terms, key=sp.default_sort_key)
        out = []
        for i, t in enumerate(terms):
            if t.is_Rational or t.is_Mul:
                sign, coeff, num, den = _split_mul(t)
                body = _print_product(coeff, num, den)
            else:
                sign, body = 1, _print_factor(t)
            if i == 0:
                out.append(_negate(body, coeff, num) if sign < 0 else body)
            else:
                out.append((" - " if sign < 0 else " + ") + body)
        return "".join(out)
    raise NonRationalExpr("cannot print %s" % type(e).__name__)


def print_expr(e):
    """Render ``e`` in the input grammar; ``parse_expr`` reads it back."""
    return _print(e.sym if isinstance(e, Expr) else e)


# ---------------------------------------------------------------- calculus

def differentiate(e, v, chart=None):
    """Partial derivative of ``e`` with respect to coordinate ``v``."""
    name = v if isinstance(v, str) else v.sym.name
    if chart is not None:
        if chart.is_constant(name):
            raise DifferentiationAgainstConstant(name)
        if name not in chart:
            raise UndeclaredIdentifier(name)
    if name not in e.free_names():
        return ZERO
    return Expr(sp.diff(e.sym, sp.Symbol(name)))


def substitute(e, bindings):
    """Simultaneous substitution ``{name: Expr}`` followed by normalization."""
    repl = {sp.Symbol(k if isinstance(k, str) else k.sym.name): as_expr(v).sym
            for k, v in bindings.items()}
    if not repl:
        return e
    return Expr(e.sym.xreplace(repl))


# ---------------------------------------------------------------- evaluation

class _CodeGen:
    def __init__(self, mode):
        self.mode = mode
        self.consts = {}

    def const(self, r):
        if r.q == 1 and self.mode == "exact":
            return "(%d)" % r.p
        key = "_c%d" % len(self.consts)
        self.consts[key] = Fraction(r.p, r.q) if self.mode == "exact" else float(r.p) / float(r.q)
        return key

    def gen(self, e):
        if e.is_Rational:
            return self.const(e)
        if e.is_Symbol:
            return "env[%r]" % e.name
        if e.is_Add:
            return "(" + " + ".join(self.gen(a) for a in e.args) + ")"
        if e.is_Mul:
            return "(" + " * ".join(self.gen(a) for a in e.args) + ")"
        if e.is_Pow:
            k = e.exp
            if k.is_Integer:
                return "(%s ** %d)" % (self.gen(e.base), int(k))
            if self.mode == "exact":
                raise NonRationalExpr(str(e))
            if k.q == 2:
                return "(_sqrt(%s) ** %d)" % (self.gen(e.base), int(k.p))
            raise NonRationalExpr(str(e))
        if isinstance(e, _KERNEL_TYPES):
            if self.mode == "exact":
                raise NonRationalExpr(str(e))
            name = "log" if isinstance(e, sp.log) else type(e).__name__
            return "_%s(%s)" % (name, self.gen(e.args[0]))
        raise NonRationalExpr("cannot evaluate %s" % type(e).__name__)


def _compile(sym, mode):
    g = _CodeGen(mode)
    src = "lambda env: " + g.gen(sym)
    ns = dict(g.consts)
    if mode == "float":
        ns.update(_sqrt=math.sqrt, _sin=math.sin, _cos=math.cos, _tan=math.tan,
                  _exp=math.exp, _log=math.log)
    return eval(compile(src, "<expr>", "eval"), ns)


def _env(point):
    return {(k if isinstance(k, str) else k.sym.name): v for k, v in point.items()}


def eval_exact(e, point):
    """Exact rational value of a kernel-free expression at ``point``."""
    fn = e.compiled("exact")
    env = _env(point)
    try:
        val = fn(env)
    except ZeroDivisionError:
        raise DivisionByZero("pole at %s" % _fmt_point(env)) from None
    except KeyError as exc:
        raise UndeclaredIdentifier(exc.args[0]) from None
    return Fraction(val)


def eval_float(e, point):
    """Float value; domain violations raise instead of producing NaN."""
    fn = e.compiled("float")
    env = {k: float(v) for k, v in _env(point).items()}
    try:
        val = fn(env)
    except ZeroDivisionError:
        raise DivisionByZero("pole at %s" % _fmt_point(env)) from None
    except (ValueError, OverflowError) as exc:
        raise DomainError("%s at %s" % (exc, _fmt_point(env))) from None
    except KeyError as exc:
        raise UndeclaredIdentifier(exc.args[0]) from None
    if isinstance(val, complex) or not math.isfinite(val):
        raise DomainError("non-finite value at %s" % _fmt_point(env))
    return float(val)


def _fmt_point(env):
    return "{" + ", ".join("%s=%s" % kv for kv in sorted(env.items())) + "}"


ZERO_TEST_POINTS = 8
ZERO_TEST_TOL = 1e-9


def is_zero(e, seed=0x5EED):
    """Zero test: structural for rational expressions, sampled otherwise.

    Kernel expressions are evaluated at ``ZERO_TEST_POINTS`` random points in
    [-2, 2] (points raising domain errors are skipped) and declared zero when
    every value is below ``ZERO_TEST_TOL``.
    """
    if e.sym == 0:
        return True
    if e.is_rational:
        return False
    names = sorted(e.free_names())
    rng = random.Random("%d:%s" % (seed, e.sym))
    hits = 0
    for _ in range(20 * ZERO_TEST_POINTS):
        point = {n: rng.uniform(-2.0, 2.0) for n in names}
        try:
            val = eval_float(e, point)
        except (DivisionByZero, DomainError):
            continue
        if abs(val) > ZERO_TEST_TOL:
            return False
        hits += 1
        if hits == ZERO_TEST_POINTS:
            return True
    raise DomainError("no admissible sample points for zero test of %s" % e)
