import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from flatcheck.diffgeo import (Codistribution, Distribution, InternalInconsistency, OneForm, Sampler,
                               StraighteningFailed, VectorField, annihilator, cauchy_characteristic,
                               exterior_derivative, first_integrals, frobenius_wedge_test, generic_rank,
                               involutive_closure, is_completely_integrable, is_involutive, lie_bracket,
                               lie_derivative_fn, lie_derivative_form, search_integrals)
from flatcheck.flatness import ExtendedChart
from flatcheck.symrat import Chart, Expr, parse_expr

R2 = Chart(["x", "y"])
R3 = Chart(["x1", "x2", "x3"])


def vf(chart, **comps):
    return VectorField.from_dict(chart, {k: parse_expr(v, chart) for k, v in comps.items()})


def form(chart, **comps):
    return OneForm.from_dict(chart, {k: parse_expr(v, chart) for k, v in comps.items()})


def P(chart, text):
    return parse_expr(text, chart)


@pytest.fixture(scope="module")
def motor_fields(motor):
    f = motor.drift
    g1, g2 = motor.controls
    return f, g1, g2


class TestLie:
    def test_lie_derivative_basic(self):
        assert lie_derivative_fn(vf(R2, x="1"), P(R2, "x^2")) == P(R2, "2*x")

    def test_motor_derivatives(self, motor):
        ext = ExtendedChart(motor)
        theta = motor.parse("theta")
        assert lie_derivative_fn(ext.field, theta) == ext.chart.var("omega")
        assert ext.derivatives(theta, 2)[2] == motor.parse("mu*psid*Iq - tauL/J")

    def test_bracket_basic(self):
        assert lie_bracket(vf(R2, x="1"), vf(R2, y="x")) == vf(R2, y="1")

    def test_motor_bracket(self, motor, motor_fields):
        f, g1, g2 = motor_fields
        expected = VectorField.from_dict(motor.chart, {"omega": motor.parse("mu*psid"),
                                                       "rho": motor.parse("eta*M/psid")})
        br = lie_bracket(g2, f)
        assert br == expected
        # same direction as psid^2*mu d_omega + M*eta d_rho
        other = VectorField.from_dict(motor.chart, {"omega": motor.parse("psid^2*mu"),
                                                    "rho": motor.parse("M*eta")})
        assert generic_rank([br, other]) == 1

    def test_self_bracket_zero(self):
        v = vf(R3, x1="x2*x3", x2="x1^2", x3="1 + x2")
        assert lie_bracket(v, v).is_zero

    def test_form_derivatives(self):
        v = vf(R2, y="x")
        h = P(R2, "y")
        assert lie_derivative_form(v, OneForm.d(h, R2)) == form(R2, x="1")
        assert lie_derivative_form(vf(R2, x="1"), form(R2, y="x")) == form(R2, y="1")

    def test_form_derivative_motor(self, motor):
        ext = ExtendedChart(motor)
        lhs = lie_derivative_form(ext.field, ext.d(ext.chart.var("theta")))
        assert lhs == OneForm.basis(ext.chart, "omega")


class TestExterior:
    def test_d_squared(self):
        h = P(R3, "x1^3*x2 - x2*x3^2 + 7*x1")
        assert exterior_derivative(OneForm.d(h, R3)).is_zero

    def test_simple(self):
        dw = exterior_derivative(form(R2, y="x"))
        assert dw.coeff(0, 1) == Expr(1)
        assert dw.coeff(1, 0) == Expr(-1)

    def test_dx3_plus_u1_dx4(self):
        ch = Chart(["x3", "x4", "u1"])
        dw = exterior_derivative(form(ch, x3="1", x4="u1"))
        # du1 ^ dx4 has coefficient 1, i.e. the (x4, u1) entry is -1
        assert dw.coeff(ch.index("u1"), ch.index("x4")) == Expr(1)
        assert dw.coeff(ch.index("x3"), ch.index("x4")).is_zero


class TestRank:
    def test_forms(self):
        ch = Chart(["x1", "x2"])
        assert generic_rank([form(ch, x1="1"), form(ch, x2="1"), form(ch, x1="1", x2="1")]) == 2

    def test_dependent_over_functions(self):
        assert generic_rank([vf(R2, y="x"), vf(R2, y="1")]) == 1

    def test_motor_D2(self, motor, motor_fields):
        f, g1, g2 = motor_fields
        D2 = [g1, g2, lie_bracket(f, g1), lie_bracket(f, g2)]
        assert generic_rank(D2) == 4

    def test_seed_independent(self, motor, motor_fields):
        f, g1, g2 = motor_fields
        D2 = [g1, g2, lie_bracket(f, g1), lie_bracket(f, g2)]
        assert {generic_rank(D2, Sampler(s)) for s in (1, 2, 3, 0x5EED)} == {4}

    def test_float_mode(self):
        ch = Chart(["x", "y"])
        rows = [vf(ch, x="sin(y)", y="cos(x)"), vf(ch, x="2*sin(y)", y="2*cos(x)")]
        assert generic_rank(rows, Sampler(force_float=True)) == 1
        assert generic_rank(rows + [vf(ch, x="exp(x)")]) == 2


class TestInvolutivity:
    def test_coordinate_fields(self):
        assert is_involutive(Distribution(R2, [vf(R2, x="1"), vf(R2, y="1")]))

    def test_contact(self):
        D = Distribution(R3, [vf(R3, x1="1"), vf(R3, x2="1", x3="x1")])
        assert not is_involutive(D)
        closure = involutive_closure(D)
        assert closure.rank() == 3

    def test_motor_D3(self, motor, motor_fields):
        f, g1, g2 = motor_fields
        D2 = Distribution(motor.chart, [g1, g2, lie_bracket(f, g1), lie_bracket(f, g2)])
        assert not is_involutive(D2)
        D3 = involutive_closure(D2)
        assert D3.rank() == 5 and is_involutive(D3)
        span = Distribution(motor.chart, [VectorField.basis(motor.chart, n)
                                          for n in ("Id", "Iq", "psid", "omega", "rho")])
        assert D3.same_span(span)
        assert annihilator(D3).same_span(Codistribution(motor.chart,
                                                        [OneForm.basis(motor.chart, "theta")]))

    def test_closure_of_involutive(self):
        D = Distribution(R3, [vf(R3, x1="1", x2="x3"), vf(R3, x3="1")])
        assert not is_involutive(D)     # [d_x3, d_x1 + x3 d_x2] = d_x2
        assert involutive_closure(D).rank() == 3
        E = Distribution(R3, [vf(R3, x1="1"), vf(R3, x2="1")])
        assert involutive_closure(E).same_span(E)


class TestCauchy:
    def test_involutive(self):
        D = Distribution(R3, [vf(R3, x1="1"), vf(R3, x2="1")])
        assert cauchy_characteristic(D).same_span(D)

    def test_contact_trivial(self):
        D = Distribution(R3, [vf(R3, x1="1"), vf(R3, x2="1", x3="x1")])
        assert cauchy_characteristic(D).rank() == 0

    def test_chained(self):
        ch = Chart(["x1", "x2", "x3", "x4", "x5"])
        g1 = vf(ch, x1="1", x2="x3", x3="x4", x4="x5")
        g2 = vf(ch, x5="1")
        D = Distribution(ch, [g1, g2])
        D = D + [lie_bracket(g1, g2)]
        D = D + [lie_bracket(a, b) for a in D for b in D]
        D = D.basis()
        assert D.rank() == 4 and not is_involutive(D)
        C = cauchy_characteristic(D)
        assert ch.dim - C.rank() == 3
        self.check_properties(D, C)

    @staticmethod
    def check_properties(D, C):
        assert D.includes(C)
        assert is_involutive(C)
        for c in C:
            for g in D:
                assert D.contains(lie_bracket(c, g))

    def test_properties_motor(self, motor, motor_fields):
        f, g1, g2 = motor_fields
        D2 = Distribution(motor.chart, [g1, g2, lie_bracket(f, g1), lie_bracket(f, g2)])
        C = cauchy_characteristic(D2)
        assert C.rank() == 2
        self.check_properties(D2, C)


class TestAnnihilator:
    def test_basic(self):
        A = annihilator(Distribution(R2, [vf(R2, x="1")]))
        assert A.same_span(Codistribution(R2, [form(R2, y="1")]))

    def test_full(self):
        A = annihilator(Distribution(R2, [vf(R2, x="1"), vf(R2, y="1")]))
        assert A.rank() == 0

    def test_pairing_symbolic(self):
        D = Distribution(R3, [vf(R3, x1="x2", x2="x3^2"), vf(R3, x3="x1 + 1", x2="1")])
        for w in annihilator(D):
            for v in D:
                assert w.pair(v).is_zero


class TestIntegrability:
    def test_coordinates(self):
        Q = Codistribution(R2, [form(R2, x="1"), form(R2, y="1")])
        assert is_completely_integrable(Q)

    def test_counterexample(self):
        ch = Chart(["x1", "x2", "x3", "x4", "x5", "u1"])
        Q = Codistribution(ch, [form(ch, x1="1"), form(ch, x2="1"), form(ch, x3="1", x4="u1")])
        assert not is_completely_integrable(Q)

    def test_exact(self):
        Q = Codistribution(R2, [form(R2, x="x", y="y")])
        assert is_completely_integrable(Q)
        assert frobenius_wedge_test(Q)

    def test_contact_form(self):
        Q = Codistribution(R3, [form(R3, x3="1", x2="-x1")])
        assert not is_completely_integrable(Q)


class TestFirstIntegrals:
    def test_coordinate(self):
        assert first_integrals(Distribution(R2, [vf(R2, x="1")])) == [P(R2, "y")]

    def test_motor(self, motor, motor_fields):
        f, g1, g2 = motor_fields
        D3 = involutive_closure(Distribution(motor.chart, [g1, g2, lie_bracket(f, g1),
                                                           lie_bracket(f, g2)]))
        assert first_integrals(D3) == [motor.parse("theta")]

    def test_euler_field(self):
        v = vf(R2, x="x", y="y")
        hs = first_integrals(Distribution(R2, [v]))
        assert len(hs) == 1
        assert lie_derivative_fn(v, hs[0]).is_zero
        # equivalent to y/x: dh is proportional to d(y/x)
        assert generic_rank([OneForm.d(hs[0], R2), OneForm.d(P(R2, "y/x"), R2)]) == 1

    def test_linear_combination(self):
        v = vf(R3, x1="1", x2="1")
        hs = first_integrals(Distribution(R3, [v]))
        assert len(hs) == 2
        for h in hs:
            assert lie_derivative_fn(v, h).is_zero

    def test_known_excluded(self):
        D = Distribution(R3, [vf(R3, x1="1")])
        hs = search_integrals(D, known=[P(R3, "x2")], needed=1)
        assert hs == [P(R3, "x3")]

    def test_straightening_failure(self):
        v = vf(R2, x="1", y="x^3 + y^5")
        with pytest.raises(StraighteningFailed) as info:
            first_integrals(Distribution(R2, [v]))
        assert info.value.missing == 1


# ---- properties that complement the acceptance suite

@st.composite
def poly_fields(draw, chart=R3):
    x = [sp.Symbol(n) for n in chart.coords]
    comps = []
    for _ in chart.coords:
        terms = draw(st.lists(st.tuples(st.integers(-3, 3), st.integers(0, 2), st.integers(0, 2),
                                        st.integers(0, 2)), max_size=3))
        comps.append(Expr(sp.Add(*[c * x[0] ** a * x[1] ** b * x[2] ** k for c, a, b, k in terms])))
    return VectorField(chart, comps)


@settings(max_examples=60)
@given(poly_fields(), poly_fields())
def test_closure_monotone_idempotent(v, w):
    D = Distribution(R3, [v, w])
    if not D.generators:
        return
    C = involutive_closure(D)
    assert C.includes(D)
    assert is_involutive(C)
    assert involutive_closure(C).rank() == C.rank()


@settings(max_examples=60)
@given(poly_fields(), poly_fields())
def test_first_integrals_are_integrals(v, w):
    D = involutive_closure(Distribution(R3, [v, w]))
    if D.rank() in (0, 3):
        return
    try:
        hs = first_integrals(D)
    except StraighteningFailed as exc:
        hs = exc.found
    for h in hs:
        for g in D:
            assert lie_derivative_fn(g, h).is_zero
