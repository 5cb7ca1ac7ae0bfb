"""Control-affine two-input systems and their extended state/input chart."""

from dataclasses import dataclass, field
from typing import Optional

from ..diffgeo import GeometryError, OneForm, VectorField, generic_rank
from ..symrat import Chart, Expr, parse_expr


class FlatnessError(GeometryError):
    pass


class DimensionMismatch(FlatnessError):
    pass


class NoInputInfluence(FlatnessError):
    pass


class NotFlatWithinBound(FlatnessError):
    def __init__(self, msg, d_max=None):
        super().__init__(msg)
        self.d_max = d_max


class RankLadderViolation(FlatnessError):
    pass


class NotAccessible(FlatnessError):
    pass


class NonAffineFeedback(FlatnessError):
    pass


class PoleEncountered(FlatnessError):
    pass


def fresh_name(base, taken):
    """``base`` if unused, else ``base_``, ``base__``, ..."""
    name = base
    while name in taken:
        name += "_"
    return name


@dataclass(frozen=True, eq=False)
class SystemModel:
    """x' = f(x) + g1(x) u1 + g2(x) u2 with components given per state."""

    states: tuple
    inputs: tuple
    f: tuple
    g1: tuple
    g2: tuple
    constants: tuple = ()
    chart: Chart = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "constants", tuple(self.constants))
        if len(self.inputs) != 2:
            raise DimensionMismatch("exactly 2 inputs required, got %d" % len(self.inputs))
        n = len(self.states)
        for label in ("f", "g1", "g2"):
            comps = getattr(self, label)
            if len(comps) != n:
                raise DimensionMismatch("%s has %d entries for %d states" % (label, len(comps), n))
            object.__setattr__(self, label, tuple(c if isinstance(c, Expr) else Expr(c) for c in comps))
        chart = Chart(self.states, self.constants)
        if set(self.inputs) & set(chart.names) or self.inputs[0] == self.inputs[1]:
            raise DimensionMismatch("input names must be distinct from states and constants")
        allowed = set(chart.names)
        for label in ("f", "g1", "g2"):
            for c in getattr(self, label):
                extra = c.free_names() - allowed
                if extra:
                    raise DimensionMismatch("%s depends on %s" % (label, ", ".join(sorted(extra))))
        object.__setattr__(self, "chart", chart)

    @classmethod
    def from_strings(cls, states, inputs, f, g1, g2, constants=()):
        chart = Chart(states, constants)
        conv = [[parse_expr(s, chart) if isinstance(s, str) else Expr(s) for s in comps]
                for comps in (f, g1, g2)]
        return cls(states, inputs, *conv, constants=constants)

    @property
    def n(self):
        return len(self.states)

    @property
    def drift(self):
        return VectorField(self.chart, self.f)

    @property
    def controls(self):
        return VectorField(self.chart, self.g1), VectorField(self.chart, self.g2)

    def check_controls(self, sampler=None):
        if generic_rank(list(self.controls), sampler) != 2:
            raise DimensionMismatch("control vector fields g1, g2 are not independent")

    def rhs(self, u1, u2):
        """State derivative with input expressions substituted."""
        return [a + b * u1 + c * u2 for a, b, c in zip(self.f, self.g1, self.g2)]

    def parse(self, text):
        return parse_expr(text, self.chart)

    def with_feedback(self, alpha, beta):
        """Apply u = alpha(x) + beta(x) w, with alpha a pair and beta a 2x2 nested list."""
        f = [fi + g1i * alpha[0] + g2i * alpha[1] for fi, g1i, g2i in zip(self.f, self.g1, self.g2)]
        g1 = [g1i * beta[0][0] + g2i * beta[1][0] for g1i, g2i in zip(self.g1, self.g2)]
        g2 = [g1i * beta[0][1] + g2i * beta[1][1] for g1i, g2i in zip(self.g1, self.g2)]
        return SystemModel(self.states, self.inputs, f, g1, g2, self.constants)

    def __repr__(self):
        return "SystemModel(states=%s, inputs=%s)" % (list(self.states), list(self.inputs))


@dataclass(frozen=True)
class FlatCandidate:
    phi1: Expr
    phi2: Optional[Expr] = None

    def __iter__(self):
        yield self.phi1
        if self.phi2 is not None:
            yield self.phi2

    def check(self, sys, sampler=None):
        allowed = set(sys.chart.names)
        for phi in self:
            extra = phi.free_names() - allowed
            if extra:
                raise DimensionMismatch("candidate depends on %s" % ", ".join(sorted(extra)))
        if self.phi2 is not None:
            forms = [OneForm.d(p, sys.chart) for p in self]
            if generic_rank(forms, sampler) != 2:
                raise FlatnessError("candidate components have dependent differentials")


class ExtendedChart:
    """Chart (x, u, u_[1], ..., u_[l_u]) with the prolonged vector field f_u."""

    def __init__(self, sys, l_u=None):
        if l_u is None:
            l_u = sys.n + 2
        if l_u < 1:
            raise ValueError("l_u must be at least 1")
        self.sys = sys
        self.l_u = l_u
        taken = set(sys.chart.names) | set(sys.inputs)
        self.input_names = []
        for order in range(l_u + 1):
            level = []
            for u in sys.inputs:
                if order == 0:
                    name = u
                else:
                    name = fresh_name("%s_%d" % (u, order), taken)
                taken.add(name)
                level.append(name)
            self.input_names.append(tuple(level))
        coords = list(sys.states) + [n for level in self.input_names for n in level]
        self.chart = Chart(coords, sys.constants)
        self.input_coords = tuple(n for level in self.input_names for n in level)
        u1, u2 = (self.chart.var(u) for u in sys.inputs)
        comps = dict(zip(sys.states, sys.rhs(u1, u2)))
        for order in range(l_u):
            for j in range(2):
                comps[self.input_names[order][j]] = self.chart.var(self.input_names[order + 1][j])
        # top derivatives get no component
        self.field = VectorField.from_dict(self.chart, comps)
        self._derivs = {}

    def derivatives(self, phi, order):
        """[phi, L phi, ..., L^order phi] along f_u (cached per phi)."""
        from ..diffgeo import lie_derivative_fn
        seq = self._derivs.setdefault(phi, [phi])
        while len(seq) <= order:
            seq.append(lie_derivative_fn(self.field, seq[-1]))
        return seq[:order + 1]

    def d(self, h):
        return OneForm.d(h, self.chart)

    def state_forms(self):
        return [OneForm.basis(self.chart, x) for x in self.sys.states]

    def input_forms(self):
        return [OneForm.basis(self.chart, u) for u in self.input_names[0]]


def extended_vector_field(sys, l_u):
    """f_u on (x, u, u_[1..l_u]); the chart is available as ``.chart``."""
    return ExtendedChart(sys, l_u).field


def output_derivatives(sys, phi, order, ext=None):
    """[phi, phi_[1], ..., phi_[order]] with l_u = n + 2."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    ext = ext or ExtendedChart(sys)
    return ext.derivatives(phi, order)
