"""Construction of the triangular normal form and its numeric cross-check."""

import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import sympy as sp

from ..diffgeo import (Codistribution, DEFAULT_SEED, GeometryError, OneForm, SolveFailed,
                       StraighteningFailed, _sampler, active_chart, annihilator, generic_rank,
                       search_integrals)
from ..symrat import (ONE, ZERO, Chart, DivisionByZero, DomainError, Expr, differentiate,
                      eval_float, is_zero, substitute)
from .model import (ExtendedChart, FlatCandidate, NonAffineFeedback, PoleEncountered, SystemModel,
                    fresh_name)
from .theorem import check_theorem1

REFERENCE_BOX = (Fraction(1, 2), Fraction(2))


@dataclass
class NormalFormResult:
    """State transformation, feedback and the transformed rows.

    ``rows`` maps a 1-based row index i (k1+k2 <= i <= n-1) to (a_i, b_i),
    expressions in the z coordinates.
    """

    sys: SystemModel
    phi: FlatCandidate
    K: Tuple[int, int]
    zmap: List[Expr]
    znames: Tuple[str, ...]
    vnames: Tuple[str, str]
    replaced_input: str
    kept_input: str
    feedback: Tuple[Expr, Expr]            # v1(x,u), v2(x,u)
    feedback_inverse: Dict[str, Expr]      # u_j(x, v1, v2)
    inverse: Dict[str, Expr]               # x_i(z)
    rows: Dict[int, Tuple[Expr, Expr]]
    transformed: SystemModel
    levels: List[Tuple[Tuple[int, int], Expr]] = field(default_factory=list)

    @property
    def n(self):
        return len(self.zmap)

    @property
    def top(self):
        """Output of the transformed system: (z1, z_{k1+1})."""
        return (self.transformed.chart.var(self.znames[0]),
                self.transformed.chart.var(self.znames[self.K[0]]))

    def violations(self, sampler=None):
        """List of invariant violations (empty when all hold)."""
        out = []
        chart = self.sys.chart
        jac = [OneForm.d(z, chart) for z in self.zmap]
        if generic_rank(jac, sampler) != self.n:
            out.append("z-map Jacobian is rank deficient")
        k = sum(self.K)
        for i, (a, b) in sorted(self.rows.items()):
            allowed = set(self.znames[:i + 1]) | set(self.sys.constants)
            for label, e in (("a", a), ("b", b)):
                extra = e.free_names() - allowed
                if extra:
                    out.append("%s%d depends on %s" % (label, i, ", ".join(sorted(extra))))
            nxt = self.znames[i]
            if is_zero(differentiate(a, nxt)) and is_zero(differentiate(b, nxt)):
                out.append("row %d depends on neither a nor b through %s" % (i, nxt))
            if i == k and is_zero(b):
                out.append("b%d vanishes" % i)
        return out

    def check_invariants(self, sampler=None):
        bad = self.violations(sampler)
        if bad:
            raise GeometryError("normal form invariants violated: " + "; ".join(bad))
        return True


def _affine_parts(e, names):
    """Split e = c0 + sum c_j * names[j]; raises if e is not affine in names."""
    coeffs = []
    for nm in names:
        c = differentiate(e, nm)
        for other in names:
            if not is_zero(differentiate(c, other)):
                raise NonAffineFeedback("%s is not affine in %s" % (e, ", ".join(names)))
        coeffs.append(c)
    c0 = substitute(e, {nm: ZERO for nm in names})
    return c0, coeffs


def affine_feedback(phi_k, u_names, v_name="v1"):
    """Replace one input by v1 = phi_k(x, u); returns (replaced, kept, inverse map).

    The replaced input is u1 unless its coefficient vanishes generically.
    """
    c0, (c1, c2) = _affine_parts(phi_k, u_names)
    if not is_zero(c1):
        r, cr, k, ck = 0, c1, 1, c2
    elif not is_zero(c2):
        r, cr, k, ck = 1, c2, 0, c1
    else:
        raise NonAffineFeedback("%s does not depend on the inputs" % phi_k)
    v = Expr(sp.Symbol(v_name))
    inv = {u_names[r]: (v - c0 - ck * Expr(sp.Symbol(u_names[k]))) / cr}
    return u_names[r], u_names[k], inv


def _reference_point(names, seed):
    rng = random.Random("%s|ref|%s" % (seed, ",".join(names)))
    lo, hi = REFERENCE_BOX
    return {n: lo + (hi - lo) * Fraction(rng.randint(1, 96), 97) for n in names}


def invert_state_map(zmap, states, znames, constants=(), seed=DEFAULT_SEED):
    """Symbolic inverse x = X(z); among several branches the one through a
    reference point with positive coordinates is taken."""
    xs = [sp.Symbol(s) for s in states]
    zs = [sp.Symbol(z) for z in znames]
    eqs = [z.sym - zs[i] for i, z in enumerate(zmap)]
    try:
        sols = sp.solve(eqs, xs, dict=True)
    except NotImplementedError as exc:
        raise SolveFailed("state map could not be inverted: %s" % exc) from None
    sols = [s for s in sols if all(x in s for x in xs)]
    if not sols:
        raise SolveFailed("state map could not be inverted symbolically")
    ref = _reference_point(list(states) + list(constants), seed)
    zref = {znames[i]: float(substitute(z, {k: Expr(v) for k, v in ref.items()}).sym)
            for i, z in enumerate(zmap)}
    best, err = None, math.inf
    for s in sols:
        cand = {x.name: Expr(s[x]) for x in xs}
        try:
            pt = dict(zref)
            pt.update({c: float(ref[c]) for c in constants})
            dev = max(abs(eval_float(cand[x], pt) - float(ref[x])) for x in states)
        except (DivisionByZero, DomainError):
            continue
        if dev < err:
            best, err = cand, dev
    if best is None or err > 1e-8:
        raise SolveFailed("no branch of the inverse state map passes through the reference point")
    return best


def _complete_zmap(ext, ladder, known, sampler):
    """Pick one new function per Q level, as first integrals from the hint pool."""
    hints = []
    for derivs in ext._derivs.values():
        hints.extend(derivs)
    xset = set(ext.sys.states) | set(ext.sys.constants)
    hints = [h for h in hints if h.free_names() <= xset]
    chosen = []
    for lv in ladder.q_levels[1:]:
        Q = lv.Q
        sub = active_chart(Q.generators, Q.chart)
        Qa = Codistribution(sub, [w.restrict(sub) for w in Q.generators])
        D = annihilator(Qa, sampler)
        local_known = [h for h in known + chosen if h.free_names() <= set(sub.names)]
        try:
            new = search_integrals(D, hints, local_known, 1, sampler)
        except StraighteningFailed as exc:
            raise StraighteningFailed("no new first integral found at level %s" % (lv.A,),
                                      chosen, 1) from exc
        chosen.append(new[0])
    return chosen


def triangular_transform(sys, phi, ladder=None, sampler=None):
    """State transformation and feedback to the triangular normal form."""
    sampler = _sampler(sampler)
    if ladder is None:
        res = check_theorem1(sys, phi, sampler)
        if not res.verdict:
            raise GeometryError("integrability condition fails at levels %s" % res.failing)
        ladder = res.ladder
    phi = phi if isinstance(phi, FlatCandidate) else FlatCandidate(*phi)
    ext = ladder.ext or ExtendedChart(sys)
    k1, k2 = ladder.K
    n = sys.n
    p1, p2 = phi
    zmap = ext.derivatives(p1, k1 - 1) + ext.derivatives(p2, k2 - 1)
    zmap = list(zmap) + _complete_zmap(ext, ladder, list(zmap), sampler)
    if len(zmap) != n:
        raise StraighteningFailed("z-map has %d of %d functions" % (len(zmap), n), zmap, n - len(zmap))

    taken = set(sys.chart.names) | set(sys.inputs)
    znames = []
    for i in range(n):
        znames.append(fresh_name("z%d" % (i + 1), taken | set(znames)))
    vnames = []
    for i in (1, 2):
        vnames.append(fresh_name("v%d" % i, taken | set(znames) | set(vnames)))
    u1, u2 = sys.inputs

    # feedback: v1 = phi1_[k1], v2 = time derivative of the last z
    v1_expr = ext.derivatives(p1, k1)[k1]
    replaced, kept, _ = affine_feedback(v1_expr, (u1, u2), vnames[0])
    zdot = [ext.derivatives(z, 1)[1] for z in zmap]
    v2_expr = zdot[-1]
    a1, (b11, b12) = _affine_parts(v1_expr, (u1, u2))
    a2, (b21, b22) = _affine_parts(v2_expr, (u1, u2))
    det = b11 * b22 - b12 * b21
    if is_zero(det):
        raise NonAffineFeedback("feedback (v1, v2) is not invertible in the inputs")
    V1 = Expr(sp.Symbol(vnames[0])) - a1
    V2 = Expr(sp.Symbol(vnames[1])) - a2
    uinv = {u1: (b22 * V1 - b12 * V2) / det, u2: (b11 * V2 - b21 * V1) / det}

    xinv = invert_state_map(zmap, sys.states, znames, sys.constants, sampler.seed)
    v1s, v2s = vnames
    f, g1, g2 = [], [], []
    rows = {}
    for i in range(1, n + 1):
        e = substitute(zdot[i - 1], uinv)
        a, (b, c) = _affine_parts(e, (v1s, v2s))
        if i < n and not is_zero(c):
            raise GeometryError("row %d depends on %s" % (i, v2s))
        a, b, c = (substitute(t, xinv) for t in (a, b, c))
        f.append(a)
        g1.append(b)
        g2.append(c)
        if k1 + k2 <= i < n:
            rows[i] = (a, b)
    transformed = SystemModel(tuple(znames), tuple(vnames), f, g1, g2, sys.constants)
    levels = [(lv.A, z) for lv, z in zip(ladder.q_levels[1:], zmap[k1 + k2:])]
    return NormalFormResult(sys, phi, (k1, k2), zmap, tuple(znames), tuple(vnames), replaced, kept,
                            (v1_expr, v2_expr), uinv, xinv, rows, transformed, levels)


def corrupt_row(nf, i, factor=Fraction(3, 2)):
    """Copy of ``nf`` whose b_i is scaled by ``factor`` (a negative control)."""
    g1 = list(nf.transformed.g1)
    g1[i - 1] = g1[i - 1] * Expr(factor)
    t = nf.transformed
    bad = SystemModel(t.states, t.inputs, t.f, g1, t.g2, t.constants)
    rows = dict(nf.rows)
    if i in rows:
        rows[i] = (rows[i][0], g1[i - 1])
    return replace(nf, transformed=bad, rows=rows)


# ---------------------------------------------------------------- simulation

def default_inputs(t):
    return 0.5 * math.sin(2 * t) + 0.2, 0.3 * math.cos(3 * t) - 0.1


def _rk4(rhs, y, h, t):
    k1 = rhs(t, y)
    k2 = rhs(t + h / 2, [a + h / 2 * b for a, b in zip(y, k1)])
    k3 = rhs(t + h / 2, [a + h / 2 * b for a, b in zip(y, k2)])
    k4 = rhs(t + h, [a + h * b for a, b in zip(y, k3)])
    return [a + h / 6 * (p + 2 * q + 2 * r + s) for a, p, q, r, s in zip(y, k1, k2, k3, k4)]


def _finite(vals):
    for v in vals:
        if not math.isfinite(v):
            raise DomainError("non-finite state")
    return vals


def _trajectory_deviation(nf, x0, consts, horizon, h, inputs):
    sys, tr = nf.sys, nf.transformed
    u1, u2 = sys.inputs
    v1, v2 = nf.vnames
    uinv = [nf.feedback_inverse[u1], nf.feedback_inverse[u2]]
    xrhs = [(fi, g1i, g2i) for fi, g1i, g2i in zip(sys.f, sys.g1, sys.g2)]
    zrhs = [(fi, g1i, g2i) for fi, g1i, g2i in zip(tr.f, tr.g1, tr.g2)]

    def fx(t, x):
        env = dict(consts)
        env.update(zip(sys.states, x))
        env[v1], env[v2] = inputs(t)
        u = [eval_float(e, env) for e in uinv]
        return _finite([eval_float(a, env) + eval_float(b, env) * u[0] + eval_float(c, env) * u[1]
                        for a, b, c in xrhs])

    def fz(t, z):
        env = dict(consts)
        env.update(zip(tr.states, z))
        w = inputs(t)
        return _finite([eval_float(a, env) + eval_float(b, env) * w[0] + eval_float(c, env) * w[1]
                        for a, b, c in zrhs])

    def zof(x):
        env = dict(consts)
        env.update(zip(sys.states, x))
        return [eval_float(e, env) for e in nf.zmap]

    x = list(x0)
    z = zof(x)
    # the z-dynamics must be on the same inverse branch as the sample
    env = dict(consts)
    env.update(zip(nf.znames, z))
    back = [eval_float(nf.inverse[s], env) for s in sys.states]
    if max(abs(a - b) for a, b in zip(back, x)) > 1e-8 * (1 + max(map(abs, x))):
        raise DomainError("initial state off the inverse branch")
    worst = 0.0
    steps = int(round(horizon / h))
    t = 0.0
    for _ in range(steps):
        x = _rk4(fx, x, h, t)
        z = _rk4(fz, z, h, t)
        t += h
        worst = max(worst, max(abs(a - b) for a, b in zip(zof(x), z)))
    return worst


def simulate_check(sys, nf, horizon=0.5, samples=5, h=1e-3, seed=DEFAULT_SEED, inputs=default_inputs,
                   budget=10):
    """Max deviation between z(t) and zmap(x(t)) over random initial states.

    Initial states and constant values are drawn from [1/2, 2]; samples that
    hit poles or domain errors are redrawn (``budget`` redraws in total).
    """
    rng = random.Random("%s|sim|%s" % (seed, ",".join(sys.states)))
    worst = 0.0
    done = failures = 0
    while done < samples:
        x0 = [rng.uniform(0.5, 2.0) for _ in sys.states]
        consts = {c: rng.uniform(0.5, 2.0) for c in sys.constants}
        try:
            dev = _trajectory_deviation(nf, x0, consts, horizon, h, inputs)
        except (DivisionByZero, DomainError, OverflowError) as exc:
            failures += 1
            if failures > budget:
                raise PoleEncountered("simulation kept hitting poles: %s" % exc) from None
            continue
        worst = max(worst, dev)
        done += 1
    return worst
