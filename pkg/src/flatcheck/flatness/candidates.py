"""Candidate search for a first flat-output component and completion to a pair."""

from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Tuple

from ..diffgeo import (Distribution, StraighteningFailed, VectorField, _sampler, annihilator,
                       cauchy_characteristic, first_integrals, is_involutive, lie_bracket,
                       lie_derivative_fn, search_integrals)
from ..symrat import ONE, ZERO, Expr, differentiate, is_zero, substitute
from .model import ExtendedChart, FlatCandidate, NotAccessible, SystemModel, fresh_name
from .normalform import _affine_parts, affine_feedback
from .theorem import relative_degree

RULE_CONTROLS = "controls"
RULE_DRIFT = "drift"
RULE_SELF = "self"


@dataclass
class SequenceStep:
    index: int
    rule: str          # how D_i was obtained from D_{i-1}
    rank: int
    involutive: bool
    distribution: Distribution = field(repr=False)


@dataclass
class CandidateReport:
    steps: List[SequenceStep]
    case: Optional[str]                       # "a" or "b"
    terminal: Optional[Distribution] = field(default=None, repr=False)
    pool: List[Expr] = field(default_factory=list)
    candidates: List[Expr] = field(default_factory=list)
    accessible: bool = True

    @property
    def ranks(self):
        return tuple(s.rank for s in self.steps)

    @property
    def rules(self):
        return tuple(s.rule for s in self.steps)

    @property
    def flags(self):
        return tuple(s.involutive for s in self.steps)

    @property
    def p(self):
        return len(self.pool)

    @property
    def terminal_corank(self):
        if self.terminal is None:
            return None
        return self.terminal.chart.dim - self.terminal.rank()


def distribution_sequence(sys, sampler=None):
    """D_1 = span{g1, g2}; drift brackets after involutive steps, self brackets otherwise.

    Stops at full rank or when the rank stagnates; returns the list of steps.
    """
    sampler = _sampler(sampler)
    f = sys.drift
    D = Distribution(sys.chart, sys.controls).basis(sampler)
    steps = []
    rule = RULE_CONTROLS
    while True:
        inv = is_involutive(D, sampler)
        steps.append(SequenceStep(len(steps) + 1, rule, D.rank(sampler), inv, D))
        if D.rank(sampler) == sys.n:
            return steps
        if inv:
            rule = RULE_DRIFT
            new = [lie_bracket(f, g) for g in D.generators]
        else:
            rule = RULE_SELF
            new = [lie_bracket(a, b) for a, b in combinations(D.generators, 2)]
        nxt = (D + new).basis(sampler)
        if nxt.rank(sampler) == D.rank(sampler):
            return steps
        D = nxt


def _combinations(pool):
    out = list(pool)
    for a, b in combinations(pool, 2):
        out += [a + b, a - b]
    return out


def candidate_sequence(sys, sampler=None, hints=()):
    sampler = _sampler(sampler)
    steps = distribution_sequence(sys, sampler)
    if steps[-1].rank < sys.n:
        raise NotAccessible("distribution sequence stagnates at rank %d < %d" % (steps[-1].rank, sys.n))
    if len(steps) < 2:
        return CandidateReport(steps, None)
    prev = steps[-2]
    if prev.involutive:
        case, terminal = "a", prev.distribution
    else:
        case, terminal = "b", cauchy_characteristic(prev.distribution, sampler)
    pool = first_integrals(terminal, hints, sampler)
    return CandidateReport(steps, case, terminal, pool, _combinations(pool))


# ---------------------------------------------------------------- static feedback linearization

@dataclass
class LinearizationReport:
    linearizable: bool
    ranks: Tuple[int, ...]
    involutive: Tuple[bool, ...]
    kappa: Optional[Tuple[int, int]] = None
    outputs: List[Expr] = field(default_factory=list)
    diagnostic: str = ""


def _kronecker(ranks):
    prev = 0
    jumps = []
    for r in ranks:
        jumps.append(r - prev)
        prev = r
    k1 = sum(1 for j in jumps if j >= 1)
    k2 = sum(1 for j in jumps if j >= 2)
    return k1, k2


def static_feedback_linearizable(sys, sampler=None, prefer=None):
    """Test on D_i = D_{i-1} + [f, D_{i-1}] starting from the control fields.

    On success the linearizing outputs are first integrals of the
    distributions at the Kronecker indices; ``prefer`` is tried first as the
    head of the longer chain.  If linearizable but the outputs cannot be
    constructed, StraighteningFailed carries the report as ``.report``.
    """
    sampler = _sampler(sampler)
    f = sys.drift
    D = Distribution(sys.chart, sys.controls).basis(sampler)
    dists, ranks, flags = [], [], []
    while True:
        dists.append(D)
        ranks.append(D.rank(sampler))
        flags.append(is_involutive(D, sampler))
        if ranks[-1] == sys.n:
            break
        nxt = (D + [lie_bracket(f, g) for g in D.generators]).basis(sampler)
        if nxt.rank(sampler) == ranks[-1]:
            break
        D = nxt
    ok = all(flags) and ranks[-1] == sys.n
    report = LinearizationReport(ok, tuple(ranks), tuple(flags))
    if not ok:
        bad = [i + 1 for i, fl in enumerate(flags) if not fl]
        report.diagnostic = ("non-involutive at steps %s" % bad) if bad else \
            "rank stagnates at %d < %d" % (ranks[-1], sys.n)
        return report
    k1, k2 = _kronecker(ranks)
    report.kappa = (k1, k2)
    try:
        report.outputs = _linearizing_outputs(sys, dists, (k1, k2), sampler, prefer)
    except StraighteningFailed as exc:
        report.diagnostic = str(exc)
        exc.report = report
        raise
    return report


def _annihilated_by(D, h):
    return all(is_zero(lie_derivative_fn(g, h)) for g in D.generators)


def _linearizing_outputs(sys, dists, kappa, sampler, prefer):
    k1, k2 = kappa
    f = sys.drift
    D1 = dists[k1 - 2] if k1 >= 2 else Distribution(sys.chart, [])
    h1 = None
    if prefer is not None and not prefer.is_constant and _annihilated_by(D1, prefer):
        h1 = prefer
    if h1 is None:
        h1 = search_integrals(D1, (), (), 1, sampler)[0]
    chain = [h1]
    for _ in range(k1 - k2):
        chain.append(lie_derivative_fn(f, chain[-1]))
    D2 = dists[k2 - 2] if k2 >= 2 else Distribution(sys.chart, [])
    hints = [prefer] if prefer is not None else []
    h2 = search_integrals(D2, hints, chain, 1, sampler)[0]
    return [h1, h2]


# ---------------------------------------------------------------- second component

@dataclass
class SecondComponentResult:
    found: bool
    phi: Optional[FlatCandidate]
    k1: int
    replaced_input: str
    prolonged: SystemModel = field(repr=False)
    linearization: LinearizationReport = None

    @property
    def refuted(self):
        return not self.found


def prolonged_system(sys, phi1, sampler=None, ext=None):
    """Apply v1 = phi1_[k1] and prolong v1 (n-1)-fold.

    Returns (prolonged system, k1, replaced input name).
    """
    ext = ext or ExtendedChart(sys)
    k1 = relative_degree(ext, phi1)
    if k1 is None:
        from .model import NoInputInfluence
        raise NoInputInfluence("%s is not influenced by the inputs within %d steps" % (phi1, sys.n))
    v1_expr = ext.derivatives(phi1, k1)[k1]
    n = sys.n
    taken = set(sys.chart.names) | set(sys.inputs)
    chain = [fresh_name("v1", taken)]
    for j in range(1, n):
        chain.append(fresh_name("v1_%d" % j, taken | set(chain)))
    replaced, kept, inv = affine_feedback(v1_expr, sys.inputs, chain[0])
    # rows of the fed-back system, affine in (v1, kept input)
    fbar, g1bar, g2bar = [], [], []
    for fi, a, b in zip(sys.f, sys.g1, sys.g2):
        row = fi + a * sys.chart.extend(sys.inputs).var(sys.inputs[0]) \
            + b * sys.chart.extend(sys.inputs).var(sys.inputs[1])
        row = substitute(row, inv)
        c0, (c1, c2) = _affine_parts(row, (chain[0], kept))
        fbar.append(c0)
        g1bar.append(c1)
        g2bar.append(c2)
    states = tuple(sys.states) + tuple(chain[:n - 1])
    inputs = (chain[n - 1], kept)
    f = [a + b * Expr(sys.chart.extend(chain[:1]).var(chain[0]).sym) for a, b in zip(fbar, g1bar)]
    f += [Expr(sys.chart.extend(chain).var(chain[j + 1]).sym) for j in range(n - 2)] + [ZERO]
    g1 = [ZERO] * (len(states) - 1) + [ONE]
    g2 = list(g2bar) + [ZERO] * (n - 1)
    return SystemModel(states, inputs, f, g1, g2, sys.constants), k1, replaced


def second_component(sys, phi1, sampler=None):
    """Complete ``phi1`` to an x-flat output or certify that it cannot be part of one."""
    sampler = _sampler(sampler)
    psys, k1, replaced = prolonged_system(sys, phi1, sampler)
    lin = static_feedback_linearizable(psys, sampler, prefer=phi1)
    if not lin.linearizable:
        return SecondComponentResult(False, None, k1, replaced, psys, lin)
    h1, h2 = lin.outputs
    other = h2 if h1 == phi1 else (h1 if h2 == phi1 else h2)
    return SecondComponentResult(True, FlatCandidate(phi1, other), k1, replaced, psys, lin)
