"""
Coordinate differential geometry on a :class:`~flatcheck.symrat.Chart`.

Vector fields and one-forms are dense tuples of normalized expressions.  Rank
decisions are made at generic points: the coefficient matrix is evaluated at a
few random rational points and the maximal rank is taken.  Symbolic linear
algebra (kernels, annihilators, characteristic distributions) picks its pivots
at such a point, so every pivot is generically nonzero.
"""

import hashlib
import random
from fractions import Fraction
from itertools import combinations

import sympy as sp

from . import _linalg
from .symrat import (ZERO, Chart, DivisionByZero, DomainError, Expr, SymratError, differentiate,
                     eval_exact, eval_float, is_zero)

DEFAULT_SEED = 0x5EED
RANK_SAMPLES = 3
SAMPLE_BUDGET = 20
COORD_RANGE = 997
MAX_DENOMINATOR = 97
FLOAT_BOX = (-2.0, 2.0)


class GeometryError(SymratError):
    pass


class EvaluationFailed(GeometryError):
    pass


class SolveFailed(GeometryError):
    pass


class InternalInconsistency(GeometryError):
    pass


class StraighteningFailed(GeometryError):
    """No first integrals could be completed by the heuristic search.

    ``found`` holds the integrals obtained so far and ``missing`` the residual
    corank.
    """

    def __init__(self, msg, found=(), missing=0):
        super().__init__(msg)
        self.found = list(found)
        self.missing = missing


class Sampler:
    """Source of generic points.

    Each rank decision derives its own random stream from the seed and the
    content of the matrix, so results do not depend on call order.  Rank
    disagreements between sample points are collected in ``warnings``.
    """

    def __init__(self, seed=DEFAULT_SEED, force_float=False):
        self.seed = seed
        self.force_float = force_float
        self.warnings = []

    def rng(self, key):
        digest = hashlib.sha256(("%d|%s" % (self.seed, key)).encode()).hexdigest()
        return random.Random(int(digest[:16], 16))

    @staticmethod
    def rational_value(rng):
        num = 0
        while num == 0:
            num = rng.randint(-COORD_RANGE, COORD_RANGE)
        return Fraction(num, rng.randint(1, MAX_DENOMINATOR))

    def point(self, rng, names, exact):
        if exact:
            return {n: self.rational_value(rng) for n in names}
        return {n: rng.uniform(*FLOAT_BOX) for n in names}

    def warn(self, msg):
        if msg not in self.warnings:
            self.warnings.append(msg)


_default_sampler = Sampler()


def _sampler(s):
    return _default_sampler if s is None else s


def _matrix_names(matrix):
    names = set()
    for row in matrix:
        for e in row:
            names |= e.free_names()
    return sorted(names)


def _is_exact(matrix, sampler):
    return not sampler.force_float and all(e.is_rational for row in matrix for e in row)


def evaluate_matrix(matrix, point, exact):
    ev = eval_exact if exact else eval_float
    zero = Fraction(0) if exact else 0.0
    return [[zero if e.is_zero else ev(e, point) for e in row] for row in matrix]


class GenericSamples:
    """Numeric evaluations of an expression matrix at generic points."""

    def __init__(self, matrix, sampler=None, purpose="rank", count=RANK_SAMPLES, rank_rows=None):
        sampler = _sampler(sampler)
        self.matrix = matrix
        self.exact = _is_exact(matrix, sampler)
        names = _matrix_names(matrix)
        key = purpose + "|" + ";".join(",".join(str(e.sym) for e in row) for row in matrix)
        rng = sampler.rng(key)
        self.points, self.values = [], []
        attempts = 0
        while len(self.points) < count and attempts < SAMPLE_BUDGET:
            attempts += 1
            pt = sampler.point(rng, names, self.exact)
            try:
                vals = evaluate_matrix(matrix, pt, self.exact)
            except (DivisionByZero, DomainError):
                continue
            self.points.append(pt)
            self.values.append(vals)
        if not self.points:
            raise EvaluationFailed("all %d sample points hit poles or domain errors" % SAMPLE_BUDGET)
        self.ranks = [_linalg.rank(v[:rank_rows], self.exact) for v in self.values]
        self.rank = max(self.ranks)
        self.best = self.ranks.index(self.rank)
        if len(set(self.ranks)) > 1:
            sampler.warn("rank varies between sample points (%s); generic rank %d assumed"
                         % (", ".join(map(str, self.ranks)), self.rank))

    @property
    def point(self):
        return self.points[self.best]

    @property
    def value(self):
        return self.values[self.best]


# ---------------------------------------------------------------- fields and forms

class _Tensor1:
    __slots__ = ("chart", "comps", "_hash")

    def __init__(self, chart, comps):
        comps = tuple(c if isinstance(c, Expr) else Expr(c) for c in comps)
        if len(comps) != chart.dim:
            raise ValueError("expected %d components, got %d" % (chart.dim, len(comps)))
        self.chart = chart
        self.comps = comps
        self._hash = None

    @classmethod
    def from_dict(cls, chart, comps):
        """Sparse constructor: unmentioned components are zero."""
        vals = [ZERO] * chart.dim
        for name, e in comps.items():
            vals[chart.index(name)] = e if isinstance(e, Expr) else Expr(e)
        return cls(chart, vals)

    @classmethod
    def basis(cls, chart, name):
        return cls.from_dict(chart, {name: Expr(1)})

    def __getitem__(self, name):
        return self.comps[self.chart.index(name)] if isinstance(name, str) else self.comps[name]

    def items(self):
        """Nonzero components as (name, Expr) pairs."""
        return [(n, c) for n, c in zip(self.chart.coords, self.comps) if not c.is_zero]

    @property
    def is_zero(self):
        return all(c.is_zero for c in self.comps)

    def _same(self, other):
        if self.chart != other.chart:
            raise ValueError("objects live on different charts")

    def __add__(self, other):
        self._same(other)
        return type(self)(self.chart, [a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other):
        self._same(other)
        return type(self)(self.chart, [a - b for a, b in zip(self.comps, other.comps)])

    def scale(self, h):
        return type(self)(self.chart, [ZERO if c.is_zero else c * h for c in self.comps])

    def __neg__(self):
        return type(self)(self.chart, [-c for c in self.comps])

    def __eq__(self, other):
        return type(self) is type(other) and self.chart == other.chart and self.comps == other.comps

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((type(self).__name__, self.chart, self.comps))
        return self._hash

    def subs(self, bindings):
        from .symrat import substitute
        return type(self)(self.chart, [substitute(c, bindings) for c in self.comps])

    def free_names(self):
        out = set()
        for c in self.comps:
            out |= c.free_names()
        return out

    def restrict(self, chart):
        """Drop components outside ``chart`` (which must be a sub-chart)."""
        return type(self)(chart, [self[n] for n in chart.coords])

    def __repr__(self):
        body = " + ".join("(%s)%s%s" % (c, self._prefix, n) for n, c in self.items())
        return "%s(%s)" % (type(self).__name__, body or "0")


class VectorField(_Tensor1):
    _prefix = "∂"


class OneForm(_Tensor1):
    _prefix = "d"

    @classmethod
    def d(cls, h, chart):
        """Exact differential of a function on ``chart``."""
        return cls(chart, [differentiate(h, n) for n in chart.coords])

    def pair(self, v):
        return Expr(sp.Add(*[a.sym * b.sym for a, b in zip(self.comps, v.comps)]))


class TwoForm:
    """Antisymmetric coefficient array, upper triangle stored."""

    def __init__(self, chart, upper):
        self.chart = chart
        self.upper = {k: v for k, v in upper.items() if not v.is_zero}

    def coeff(self, i, j):
        if isinstance(i, str):
            i, j = self.chart.index(i), self.chart.index(j)
        if i == j:
            return ZERO
        if i < j:
            return self.upper.get((i, j), ZERO)
        return -self.upper.get((j, i), ZERO)

    @property
    def is_zero(self):
        return not self.upper

    def numeric(self, point, exact):
        n = self.chart.dim
        zero = Fraction(0) if exact else 0.0
        m = [[zero] * n for _ in range(n)]
        ev = eval_exact if exact else eval_float
        for (i, j), c in self.upper.items():
            v = ev(c, point)
            m[i][j] = v
            m[j][i] = -v
        return m

    def __repr__(self):
        c = self.chart.coords
        body = " + ".join("(%s)d%s∧d%s" % (v, c[i], c[j]) for (i, j), v in sorted(self.upper.items()))
        return "TwoForm(%s)" % (body or "0")


def _diff_sym(e, name):
    return sp.diff(e.sym, sp.Symbol(name)) if name in e.free_names() else sp.Integer(0)


def lie_derivative_fn(v, h):
    """L_v h = v^i dh/dx^i."""
    terms = [c.sym * _diff_sym(h, n) for n, c in zip(v.chart.coords, v.comps)
             if not c.is_zero and n in h.free_names()]
    return Expr(sp.Add(*terms)) if terms else ZERO


def lie_bracket(v, w):
    """[v, w]^i = v^j dw^i/dx^j - w^j dv^i/dx^j."""
    v._same(w)
    coords = v.chart.coords
    comps = []
    for wi, vi in zip(w.comps, v.comps):
        terms = []
        for n, vj, wj in zip(coords, v.comps, w.comps):
            if not vj.is_zero and n in wi.free_names():
                terms.append(vj.sym * _diff_sym(wi, n))
            if not wj.is_zero and n in vi.free_names():
                terms.append(-wj.sym * _diff_sym(vi, n))
        comps.append(Expr(sp.Add(*terms)) if terms else ZERO)
    return VectorField(v.chart, comps)


def lie_derivative_form(v, w):
    """(L_v w)_i = v^j dw_i/dx^j + w_j dv^j/dx^i."""
    v._same(w)
    coords = v.chart.coords
    comps = []
    for i, wi in zip(coords, w.comps):
        terms = [vj.sym * _diff_sym(wi, j) for j, vj in zip(coords, v.comps)
                 if not vj.is_zero and j in wi.free_names()]
        terms += [wj.sym * _diff_sym(vj, i) for wj, vj in zip(w.comps, v.comps)
                  if not wj.is_zero and i in vj.free_names()]
        comps.append(Expr(sp.Add(*terms)) if terms else ZERO)
    return OneForm(v.chart, comps)


def exterior_derivative(w):
    """(dw)_ij = dw_j/dx^i - dw_i/dx^j."""
    coords = w.chart.coords
    upper = {}
    for i, j in combinations(range(len(coords)), 2):
        a = _diff_sym(w.comps[j], coords[i])
        b = _diff_sym(w.comps[i], coords[j])
        if a != 0 or b != 0:
            upper[(i, j)] = Expr(a - b)
    return TwoForm(w.chart, upper)


# ---------------------------------------------------------------- spans

def _rows(objs):
    return [list(o.comps) for o in objs]


def generic_rank(rows, sampler=None):
    """Rank of the coefficient matrix of vector fields or one-forms at a generic point."""
    rows = [r for r in rows if not r.is_zero]
    if not rows:
        return 0
    return GenericSamples(_rows(rows), sampler).rank


class _Span:
    _member = None

    def __init__(self, chart, generators=()):
        gens = []
        for g in generators:
            if g.chart != chart:
                raise ValueError("generator on a different chart")
            if not g.is_zero and g not in gens:
                gens.append(g)
        self.chart = chart
        self.generators = tuple(gens)
        self._rank = {}
        self._basis = {}

    def _samples(self, sampler):
        return GenericSamples(_rows(self.generators), sampler)

    def rank(self, sampler=None):
        sampler = _sampler(sampler)
        key = (sampler.seed, sampler.force_float)
        if key not in self._rank:
            self._rank[key] = self._samples(sampler).rank if self.generators else 0
        return self._rank[key]

    def basis(self, sampler=None):
        """Same span generated by a maximal independent subset of the generators."""
        sampler = _sampler(sampler)
        key = (sampler.seed, sampler.force_float)
        if key not in self._basis:
            if not self.generators:
                self._basis[key] = self
            else:
                s = self._samples(sampler)
                idx = _linalg.independent_rows(s.value, s.exact)
                b = type(self)(self.chart, [self.generators[i] for i in idx])
                b._rank[key] = len(idx)
                self._rank[key] = len(idx)
                self._basis[key] = b
        return self._basis[key]

    def __add__(self, other):
        if isinstance(other, _Span):
            other = other.generators
        return type(self)(self.chart, self.generators + tuple(other))

    def contains(self, obj, sampler=None):
        """Membership as a rank comparison."""
        if obj.is_zero:
            return True
        return (self + [obj]).rank(sampler) == self.rank(sampler)

    def includes(self, other, sampler=None):
        return (self + other).rank(sampler) == self.rank(sampler)

    def same_span(self, other, sampler=None):
        return self.includes(other, sampler) and other.includes(self, sampler)

    @property
    def codim(self):
        return self.chart.dim - self.rank()

    def __len__(self):
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    def __repr__(self):
        return "%s[%s]" % (type(self).__name__, ", ".join(map(repr, self.generators)))


class Distribution(_Span):
    pass


class Codistribution(_Span):
    pass


# ---------------------------------------------------------------- symbolic linear algebra

def _solve_multi(S, B, S0, B0, exact):
    """Gauss-Jordan on [S | B] with pivots chosen from the numeric copy."""
    r = len(S)
    k = len(B[0]) if B else 0
    A = [list(S[i]) + list(B[i]) for i in range(r)]
    A0 = [list(S0[i]) + list(B0[i]) for i in range(r)]
    for col in range(r):
        if exact:
            piv = next(i for i in range(col, r) if A0[i][col] != 0)
        else:
            piv = max(range(col, r), key=lambda i: abs(A0[i][col]))
        A[col], A[piv] = A[piv], A[col]
        A0[col], A0[piv] = A0[piv], A0[col]
        p, p0 = A[col][col], A0[col][col]
        A[col] = [x if x.is_zero else x / p for x in A[col]]
        A0[col] = [x / p0 for x in A0[col]]
        for i in range(r):
            if i == col or A[i][col].is_zero:
                continue
            f, f0 = A[i][col], A0[i][col]
            A[i] = [a if b.is_zero else a - f * b for a, b in zip(A[i], A[col])]
            A0[i] = [a - f0 * b for a, b in zip(A0[i], A0[col])]
    return [[A[i][r + j] for j in range(k)] for i in range(r)]


def symbolic_kernel(matrix, ncols, sampler=None, verify=True):
    """Right kernel of an expression matrix over the field of functions.

    Returns one kernel vector per non-pivot column, with a 1 in that column.
    """
    matrix = [list(r) for r in matrix if any(not e.is_zero for e in r)]
    if not matrix:
        return [[Expr(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    s = GenericSamples(matrix, sampler, purpose="kernel")
    M0 = s.value
    prows = _linalg.independent_rows(M0, s.exact)
    _, pcols = _linalg.rref([M0[i] for i in prows], s.exact)
    free = [j for j in range(ncols) if j not in pcols]
    if not free:
        return []
    S = [[matrix[i][j] for j in pcols] for i in prows]
    S0 = [[M0[i][j] for j in pcols] for i in prows]
    B = [[-matrix[i][j] for j in free] for i in prows]
    B0 = [[-M0[i][j] for j in free] for i in prows]
    sol = _solve_multi(S, B, S0, B0, s.exact)
    vectors = []
    for t, j in enumerate(free):
        v = [ZERO] * ncols
        v[j] = Expr(1)
        for i, pc in enumerate(pcols):
            v[pc] = sol[i][t]
        vectors.append(_clear_denominators(v))
    if verify:
        for v in vectors:
            for row in matrix:
                dot = Expr(sp.Add(*[a.sym * b.sym for a, b in zip(row, v) if not a.is_zero and not b.is_zero]))
                if not is_zero(dot):
                    raise SolveFailed("kernel vector does not annihilate the matrix symbolically")
    return vectors


def _clear_denominators(v):
    dens = [c.numer_denom()[1] for c in v if not c.is_zero]
    if not dens or all(d.is_constant for d in dens):
        return v
    m = sp.lcm_list([d.sym for d in dens if not d.is_constant])
    return [c if c.is_zero else c * Expr(m) for c in v]


def annihilator(D, sampler=None):
    """One-forms vanishing on every vector of ``D`` (or vector fields killed by a codistribution)."""
    target = Codistribution if isinstance(D, Distribution) else Distribution
    member = OneForm if target is Codistribution else VectorField
    if not D.generators:
        return target(D.chart, [member.basis(D.chart, n) for n in D.chart.coords])
    B = D.basis(sampler)
    vecs = symbolic_kernel(_rows(B.generators), D.chart.dim, sampler)
    out = target(D.chart, [member(D.chart, v) for v in vecs])
    out._rank[(_sampler(sampler).seed, _sampler(sampler).force_float)] = len(vecs)
    return out


# ---------------------------------------------------------------- involutivity

def _brackets(gens):
    return [lie_bracket(a, b) for a, b in combinations(gens, 2)]


def is_involutive(D, sampler=None):
    B = D.basis(sampler)
    if B.rank(sampler) in (0, 1, D.chart.dim):
        return True
    return (B + _brackets(B.generators)).rank(sampler) == B.rank(sampler)


def involutive_closure(D, sampler=None):
    cur = D.basis(sampler)
    while True:
        nxt = (cur + _brackets(cur.generators)).basis(sampler)
        if nxt.rank(sampler) == cur.rank(sampler):
            return cur
        cur = nxt


def cauchy_characteristic(D, sampler=None):
    """Characteristic distribution: fields v in D with [v, D] contained in D.

    For v = a^k g_k the condition reduces to the pointwise linear system
    <w, a^k [g_k, g_j]> = 0 for all annihilating forms w and all j, solved
    symbolically over the function field.
    """
    B = D.basis(sampler)
    gens = B.generators
    r = len(gens)
    if r == D.chart.dim or is_involutive(B, sampler):
        return B
    ann = annihilator(B, sampler).generators
    brk = {}
    for k, j in combinations(range(r), 2):
        brk[(k, j)] = lie_bracket(gens[k], gens[j])
    rows = []
    for w in ann:
        for j in range(r):
            row = []
            for k in range(r):
                if k == j:
                    row.append(ZERO)
                elif k < j:
                    row.append(w.pair(brk[(k, j)]))
                else:
                    row.append(-w.pair(brk[(j, k)]))
            rows.append(row)
    coeffs = symbolic_kernel(rows, r, sampler)
    fields = []
    for a in coeffs:
        v = None
        for ak, g in zip(a, gens):
            if ak.is_zero:
                continue
            term = g.scale(ak)
            v = term if v is None else v + term
        if v is not None:
            fields.append(v)
    return Distribution(D.chart, fields)


def _wedge_obstruction(W, dws, point, exact):
    """Largest component of dw_i ^ w_1 ^ ... ^ w_p in an adapted coframe.

    Completing w_1..w_p by coordinate covectors to a coframe, the wedge vanishes
    iff no dw_i has a component on a pair of the completing covectors, i.e.
    V^T (dw_i) V = 0 for V a kernel basis of the w's.
    """
    V = _linalg.nullspace(W, len(W[0]), exact)
    worst = 0
    for dw in dws:
        if dw.is_zero:
            continue
        O = dw.numeric(point, exact)
        scale = 1 if exact else (max(abs(x) for row in O for x in row) or 1)
        for a, b in combinations(V, 2):
            val = sum(a[i] * O[i][j] * b[j] for i in range(len(a)) if a[i] for j in range(len(b)) if b[j])
            worst = max(worst, abs(val) / scale)
    return worst


def active_chart(objs, chart):
    """Sub-chart of coordinates that appear in coefficients or carry a nonzero component."""
    used = set()
    for o in objs:
        used |= o.free_names()
        used |= {n for n, _ in o.items()}
    return chart.sub([c for c in chart.coords if c in used])


def frobenius_wedge_test(Q, sampler=None):
    sampler = _sampler(sampler)
    B = Q.basis(sampler)
    if B.rank(sampler) in (0, Q.chart.dim):
        return True
    ws = B.generators
    dws = [exterior_derivative(w) for w in ws]
    n = Q.chart.dim
    entries = [list(w.comps) for w in ws]
    for dw in dws:
        vals = list(dw.upper.values())
        for k in range(0, len(vals), n):
            chunk = vals[k:k + n]
            entries.append(chunk + [ZERO] * (n - len(chunk)))
    s = GenericSamples(entries, sampler, purpose="frobenius", rank_rows=len(ws))
    tol = 0 if s.exact else _linalg.FLOAT_PIVOT_TOL
    verdicts = []
    for pt, vals, rk in zip(s.points, s.values, s.ranks):
        if rk < len(ws):
            continue
        verdicts.append(_wedge_obstruction(vals[:len(ws)], dws, pt, s.exact) <= tol)
    if not verdicts:
        raise EvaluationFailed("no sample point with full generator rank")
    return all(verdicts)


def is_completely_integrable(Q, sampler=None):
    """Frobenius test, cross-checked against involutivity of the annihilator."""
    sampler = _sampler(sampler)
    if not Q.generators:
        return True
    chart = active_chart(Q.generators, Q.chart)
    Qa = Codistribution(chart, [w.restrict(chart) for w in Q.generators])
    wedge = frobenius_wedge_test(Qa, sampler)
    dual = is_involutive(annihilator(Qa, sampler), sampler)
    if wedge != dual:
        raise InternalInconsistency("Frobenius wedge test (%s) and annihilator involutivity (%s) disagree"
                                    % (wedge, dual))
    return wedge


# ---------------------------------------------------------------- first integrals

def _annihilates(D, h):
    return all(is_zero(lie_derivative_fn(g, h)) for g in D.generators)


def _independent_of(funcs, h, chart, sampler):
    if h.is_constant:
        return False
    forms = [OneForm.d(f, chart) for f in funcs]
    base = generic_rank(forms, sampler) if forms else 0
    return generic_rank(forms + [OneForm.d(h, chart)], sampler) > base


def _linear_solve_candidates(D, pool, needed, sampler, purpose):
    """Constant-coefficient combinations of ``pool`` annihilated by D."""
    if not pool or not D.generators:
        return []
    matrix = [[lie_derivative_fn(g, h) for h in pool] for g in D.generators]
    npts = 2 * needed + 3
    s = GenericSamples(matrix, sampler, purpose=purpose, count=npts)
    if not s.exact:
        return []
    stacked = [row for vals in s.values for row in vals]
    out = []
    for c in _linalg.nullspace(stacked, len(pool), True):
        den = 1
        for x in c:
            den = den * x.denominator // _gcd(den, x.denominator)
        h = Expr(sp.Add(*[sp.Integer(int(x * den)) * p.sym for x, p in zip(c, pool) if x]))
        if not h.is_constant:
            out.append(h)
    return out


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def search_integrals(D, hints=(), known=(), needed=None, sampler=None):
    """Find functions h with dh annihilating D, independent of ``known``.

    Ladder: chart coordinates, hints, constant linear combinations of both,
    then degree-2 monomials and quotients of both (same linear solve).
    """
    sampler = _sampler(sampler)
    chart = D.chart
    B = D.basis(sampler)
    known = list(known)
    base = generic_rank([OneForm.d(f, chart) for f in known], sampler) if known else 0
    corank = chart.dim - B.rank(sampler)
    if needed is None:
        needed = corank - base
    found = []
    if needed <= 0:
        return found

    def consider(h):
        if h in found or h in known:
            return False
        if _annihilates(B, h) and _independent_of(known + found, h, chart, sampler):
            found.append(h)
        return len(found) >= needed

    coords = [chart.var(n) for n in chart.coords]
    pool = []
    for h in coords + [Expr(x) for x in hints]:
        if any(n not in chart for n in h.free_names()):
            continue
        if h not in pool and not h.is_constant:
            pool.append(h)
    for h in pool:
        if consider(h):
            return found
    for h in _linear_solve_candidates(B, pool, needed, sampler, "lin"):
        if consider(h):
            return found
    monos = list(pool)
    for a, b in combinations(pool, 2):
        monos.append(a * b)
        monos.append(a / b)
        monos.append(b / a)
    monos += [a * a for a in pool]
    uniq = []
    for m in monos:
        if m not in uniq and not m.is_constant:
            uniq.append(m)
    for h in _linear_solve_candidates(B, uniq, needed, sampler, "mono"):
        if consider(h):
            return found
    raise StraighteningFailed("heuristic search found %d of %d first integrals" % (len(found), needed),
                              found, needed - len(found))


def first_integrals(D, hints=(), sampler=None):
    """Functionally independent h^1..h^p with dh annihilating the involutive D."""
    return search_integrals(D, hints, (), None, sampler)
