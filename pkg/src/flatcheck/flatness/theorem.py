"""Index data, the P/Q codistribution ladder and the integrability verdict."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from ..diffgeo import (Codistribution, OneForm, _sampler, generic_rank, is_completely_integrable,
                       symbolic_kernel)
from ..symrat import ZERO, Expr, differentiate, is_zero
from .model import (ExtendedChart, FlatCandidate, FlatnessError, NoInputInfluence, NonAffineFeedback,
                    NotFlatWithinBound, RankLadderViolation)


def relative_degree(ext, phi):
    """Smallest k with L^k phi depending on an input; None if not within n steps."""
    sys = ext.sys
    u = ext.input_names[0]
    for k in range(sys.n + 1):
        h = ext.derivatives(phi, k)[k]
        partials = [differentiate(h, ui) for ui in u]
        if any(not is_zero(p) for p in partials):
            for p in partials:
                for uj in u:
                    if not is_zero(differentiate(p, uj)):
                        raise NonAffineFeedback("derivative of order %d is not affine in the inputs" % k)
            return k
    return None


def relative_degrees(sys, phi, ext=None):
    ext = ext or ExtendedChart(sys)
    out = []
    for j, p in enumerate(phi, start=1):
        k = relative_degree(ext, p)
        if k is None:
            raise NoInputInfluence("component %d (%s) is not influenced by the inputs within %d steps"
                                   % (j, p, sys.n))
        out.append(k)
    if len(out) != 2:
        raise ValueError("both candidate components are required")
    return tuple(out)


@dataclass(frozen=True)
class IndexData:
    K: Tuple[int, int]
    R: Tuple[int, int]
    d: int
    n: int

    def __post_init__(self):
        k1, k2 = self.K
        r1, r2 = self.R
        problems = []
        if k1 + r2 != self.n or k2 + r1 != self.n:
            problems.append("k1+r2 = %d, k2+r1 = %d, n = %d" % (k1 + r2, k2 + r1, self.n))
        if self.d != self.n - k1 - k2 or self.d < 0:
            problems.append("d = %d but n-k1-k2 = %d" % (self.d, self.n - k1 - k2))
        if (r1 - k1, r2 - k2) != (self.d, self.d):
            problems.append("R != K + d")
        if problems:
            raise FlatnessError("index relations violated: " + "; ".join(problems))


def _stack(ext, phi, orders):
    forms = []
    for p, a in zip(phi, orders):
        forms += [ext.d(h) for h in ext.derivatives(p, a)]
    return forms


def verify_flat_output(sys, phi, sampler=None, ext=None):
    """Certify phi as a flat output by generic rank tests; returns its IndexData.

    Searches d = 0..n with R = K + d for the first R such that dx lies in the
    span of dphi_[0,R-1] and (dx, du) in the span of dphi_[0,R].
    """
    sampler = _sampler(sampler)
    ext = ext or ExtendedChart(sys)
    phi = tuple(phi)
    K = relative_degrees(sys, phi, ext)
    n = sys.n
    dx = ext.state_forms()
    du = ext.input_forms()
    for d in range(n + 1):
        R = (K[0] + d, K[1] + d)
        low = _stack(ext, phi, (R[0] - 1, R[1] - 1))
        top = _stack(ext, phi, R)
        r_top = generic_rank(top, sampler)
        if r_top != len(top):
            raise NotFlatWithinBound("differentials of the output derivatives up to order %s are dependent"
                                     % (R,), n)
        r_low = generic_rank(low, sampler)
        if generic_rank(low + dx, sampler) != r_low:
            continue
        if generic_rank(top + dx + du, sampler) != r_top:
            continue
        try:
            return IndexData(K, R, d, n)
        except FlatnessError as exc:
            raise NotFlatWithinBound(str(exc), n) from None
    raise NotFlatWithinBound("no R = K + d with d <= %d parametrizes x and u" % n, n)


@dataclass
class LadderLevel:
    A: Tuple[int, int]
    P: Codistribution
    Q: Optional[Codistribution]
    rank_P: int
    rank_Q: Optional[int]
    integrable: Optional[bool] = None


@dataclass
class PQLadder:
    K: Tuple[int, int]
    R: Tuple[int, int]
    levels: List[LadderLevel] = field(default_factory=list)
    ext: Optional[ExtendedChart] = field(default=None, repr=False)

    @property
    def q_levels(self):
        return [lv for lv in self.levels if lv.Q is not None]

    def level(self, A):
        for lv in self.levels:
            if lv.A == tuple(A):
                return lv
        raise KeyError(A)

    @property
    def failing(self):
        return [lv.A for lv in self.q_levels if lv.integrable is False]


def intersect_with_states(ext, P_forms, sampler=None):
    """P_A intersected with span{dx}: combinations with vanishing input coefficients."""
    chart = ext.chart
    ucols = [chart.index(u) for u in ext.input_coords]
    xcols = [chart.index(x) for x in ext.sys.states]
    matrix = [[w.comps[c] for w in P_forms] for c in ucols]
    coeffs = symbolic_kernel(matrix, len(P_forms), sampler)
    out = []
    for c in coeffs:
        comps = [ZERO] * chart.dim
        for col in xcols:
            terms = [a * w.comps[col] for a, w in zip(c, P_forms) if not a.is_zero and not w.comps[col].is_zero]
            comps[col] = sum(terms[1:], terms[0]) if terms else ZERO
        out.append(OneForm(chart, comps))
    return Codistribution(chart, out)


def build_pq_ladder(sys, phi, idx, sampler=None, ext=None, integrability=True):
    sampler = _sampler(sampler)
    ext = ext or ExtendedChart(sys)
    phi = tuple(phi)
    k1, k2 = idx.K
    ladder = PQLadder(idx.K, idx.R, ext=ext)
    for j in range(idx.d + 2):
        A = (k1 - 1 + j, k2 - 1 + j)
        forms = _stack(ext, phi, A)
        P = Codistribution(ext.chart, forms)
        rank_P = generic_rank(forms, sampler)
        Q = rank_Q = None
        if j <= idx.d:
            Q = intersect_with_states(ext, forms, sampler)
            rank_Q = Q.rank(sampler)
        ladder.levels.append(LadderLevel(A, P, Q, rank_P, rank_Q))
    _check_ladder(ladder, sys, sampler)
    if integrability:
        for lv in ladder.q_levels:
            lv.integrable = is_completely_integrable(lv.Q, sampler)
    return ladder


def _check_ladder(ladder, sys, sampler):
    lv = ladder.levels
    for a, b in zip(lv, lv[1:]):
        if b.rank_P - a.rank_P != 2:
            raise RankLadderViolation("rank P grows by %d from %s to %s" % (b.rank_P - a.rank_P, a.A, b.A))
        if a.Q is not None and b.Q is not None and b.rank_Q - a.rank_Q != 1:
            raise RankLadderViolation("rank Q grows by %d from %s to %s" % (b.rank_Q - a.rank_Q, a.A, b.A))
    first = lv[0]
    if first.rank_Q != first.rank_P:
        raise RankLadderViolation("Q_{K-1} differs from P_{K-1}")
    last = ladder.q_levels[-1]
    if last.rank_Q != sys.n:
        raise RankLadderViolation("Q_{R-1} has rank %d, expected %d" % (last.rank_Q, sys.n))


@dataclass
class Theorem1Result:
    verdict: bool
    index: IndexData
    ladder: PQLadder
    phi: FlatCandidate

    @property
    def failing(self):
        return self.ladder.failing


def check_theorem1(sys, phi, sampler=None, ext=None):
    """Triangular-form verdict: every Q_A of the ladder completely integrable."""
    sampler = _sampler(sampler)
    ext = ext or ExtendedChart(sys)
    if not isinstance(phi, FlatCandidate):
        phi = FlatCandidate(*phi)
    phi.check(sys, sampler)
    idx = verify_flat_output(sys, phi, sampler, ext)
    ladder = build_pq_ladder(sys, phi, idx, sampler, ext)
    verdict = all(lv.integrable for lv in ladder.q_levels)
    return Theorem1Result(verdict, idx, ladder, phi)
