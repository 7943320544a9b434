"""Laurent-series tests: truncation propagation, inversion, composition,
reversion and the formal implicit-function machinery."""

from __future__ import annotations

from fractions import Fraction

import pytest

from toeplitz_confinement.errors import NotReversible, SingularJacobian, ZeroLeadingCoefficient
from toeplitz_confinement.exact import A_MINUS, A_PLUS, MultiPoly, MultiRat, a, alpha, sym
from toeplitz_confinement.series import (
    INF,
    LSeries,
    implicit_reparam,
    rat_in_var_to_series,
)

R = MultiRat
P = MultiPoly


def ser(val, coeffs, trunc=INF, var="t"):
    return LSeries.make(var, val, [R.lift(c) for c in coeffs], trunc)


class TestArithmetic:
    def test_pole_times_zero_of_order_three(self):
        # (t + O(t^3)) * (t^-1 + O(t^2)) = 1 + O(t^2)
        f = ser(1, [1], trunc=3)
        g = ser(-1, [1], trunc=2)
        h = f * g
        assert h.known(0) == R.one()
        assert h.known(1) == R.zero()
        assert h.trunc == 2

    def test_monomial_inverse_is_exact(self):
        # (1/(2t)) * (2t) = 1 exactly
        f = ser(1, [2])
        g = f.invert()
        assert g.val == -1 and g.coeffs[0] == R.const(Fraction(1, 2))
        assert (f * g) == ser(0, [1])

    def test_add_truncation_is_min(self):
        f = ser(0, [1, 1], trunc=5)
        g = ser(0, [1], trunc=3)
        assert (f + g).trunc == 3

    def test_mul_truncation_rule(self):
        # trunc(f*g) = min(val f + trunc g, val g + trunc f)
        f = ser(2, [1], trunc=6)
        g = ser(-1, [1], trunc=4)
        assert (f * g).trunc == min(2 + 4, -1 + 6)

    def test_zero_to_trunc_absorbs(self):
        z = LSeries.zero("t", trunc=4)
        f = ser(-1, [1], trunc=9)
        h = z * f
        assert h.is_zero_to_trunc
        assert h.trunc == 3  # val(z)=4 pushes: min(4+9, -1+4)


class TestInvert:
    def test_geometric_series(self):
        f = ser(0, [1, 1])  # 1 + t
        g = f.invert(order=5)
        assert [g.known(i) for i in range(4)] == [
            R.one(),
            R.const(-1),
            R.one(),
            R.const(-1),
        ]

    def test_invert_rejects_zero(self):
        with pytest.raises(ZeroLeadingCoefficient):
            LSeries.zero("t", trunc=3).invert()

    def test_invert_roundtrip_to_truncation(self):
        f = ser(1, [2, 3, -1], trunc=5)
        g = f.invert()
        h = f * g
        assert h.known(0) == R.one()
        for i in range(1, int(h.trunc)):
            assert h.known(i) == R.zero()


class TestDifferentiate:
    def test_polynomial(self):
        c = sym("c")
        f = ser(0, [R.var(c), R.const(5)])  # c + 5t
        assert f.differentiate() == ser(0, [5])

    def test_pole(self):
        f = ser(-1, [1])
        assert f.differentiate() == ser(-2, [-1])

    def test_trunc_drops_by_one(self):
        f = ser(0, [1, 2, 3], trunc=4)
        assert f.differentiate().trunc == 3

    def test_product_rule_to_truncation(self):
        f = ser(0, [1, 2, 3], trunc=3)
        g = ser(-1, [1, 1], trunc=2)
        lhs = (f * g).differentiate()
        rhs = f.differentiate() * g + f * g.differentiate()
        assert lhs.agrees_with(rhs)


class TestCompose:
    def test_polynomial_composition(self):
        f = ser(2, [1])  # t^2
        s = ser(1, [1, 1], var="lambda")  # lam + lam^2
        h = f.compose(s)
        assert h.var == "lambda"
        assert h.known(2) == R.one()
        assert h.known(3) == R.const(2)

    def test_pole_composition(self):
        f = ser(-1, [1])  # 1/t
        s = ser(1, [2], var="lambda")  # 2 lam
        h = f.compose(s)
        assert h.val == -1 and h.coeffs[0] == R.const(Fraction(1, 2))

    def test_pole_needs_nonzero_leading(self):
        f = ser(-1, [1])
        s = LSeries.zero("lambda", trunc=4)
        with pytest.raises(ZeroLeadingCoefficient):
            f.compose(s)

    def test_trunc_cap_from_f(self):
        f = ser(0, [1, 1], trunc=3)
        s = ser(2, [1], var="lambda")  # lam^2 exact
        assert f.compose(s).trunc <= 6


class TestReverse:
    def test_identity(self):
        s = ser(1, [1])
        r = s.reverse(order=4)
        assert r.known(1) == R.one()
        for i in range(2, 4):
            assert r.known(i) == R.zero()

    def test_derived_example(self):
        # reverse(2t + t^2) = lam/2 - lam^2/8 + O(lam^3); oracle: compose back
        s = ser(1, [2, 1])
        r = s.reverse(order=3)
        assert r.known(1) == R.const(Fraction(1, 2))
        assert r.known(2) == R.const(Fraction(-1, 8))
        back = s.compose(r)
        assert back.known(1) == R.one()
        assert back.known(2) == R.zero()
        assert back.known(3) == R.zero()

    def test_reverse_requires_valuation_one(self):
        with pytest.raises(NotReversible):
            ser(2, [1]).reverse()
        with pytest.raises(NotReversible):
            ser(0, [1, 1]).reverse()

    def test_reverse_compose_is_identity_to_truncation(self):
        c = sym("c")
        s = ser(1, [R.var(c), R.one(), R.const(3)], trunc=5)
        r = s.reverse()
        back = s.compose(r)
        assert back.known(1) == R.one()
        for i in range(2, int(back.trunc)):
            assert back.known(i) == R.zero()


class TestImplicitReparam:
    def test_paper_first_order(self):
        # x(t;a) = a + f1(a) t with f1 = a^2: g1 = -f1(alpha)
        av = a(5)
        f1 = R.var(av) ** 2
        fam = [(av, ser(0, [R.var(av), f1], trunc=4))]
        sol = implicit_reparam(fam, order=4)[av]
        assert sol.known(0) == R.var(av)
        assert sol.known(1) == -f1

    def test_paper_second_order(self):
        # f1 = a^2, f2 = a^3: g2 = f1 f1' - f2 = 2a^3 - a^3 = a^3
        av = a(5)
        f1 = R.var(av) ** 2
        f2 = R.var(av) ** 3
        fam = [(av, ser(0, [R.var(av), f1, f2], trunc=5))]
        sol = implicit_reparam(fam, order=5)[av]
        assert sol.known(2) == R.var(av) ** 3
        # oracle: substituting back makes the series constant
        f = fam[0][1]
        resid = f.subs_param_series({av: sol}) - LSeries.constant(R.var(av), "t")
        assert resid.is_zero_to_trunc

    def test_constant_family_is_fixed(self):
        av = a(7)
        fam = [(av, ser(0, [R.var(av)], trunc=6))]
        sol = implicit_reparam(fam, order=6)[av]
        assert sol.known(0) == R.var(av)
        for i in range(1, 6):
            assert sol.known(i) == R.zero()

    def test_degenerate_constant_term_raises(self):
        av = a(8)
        fam = [(av, ser(0, [R.var(av) + 1, R.one()], trunc=4))]
        with pytest.raises(SingularJacobian):
            implicit_reparam(fam, order=4)

    def test_two_parameter_family_substitution_residual(self):
        a1, a2 = a(11), a(12)
        r1, r2 = R.var(a1), R.var(a2)
        fam = [
            (a1, ser(0, [r1, r1 * r2, r2], trunc=5)),
            (a2, ser(0, [r2, r1 + r2, r1], trunc=5)),
        ]
        sol = implicit_reparam(fam, order=5)
        for v, f in fam:
            resid = f.subs_param_series(sol) - LSeries.constant(R.var(v), "t")
            assert resid.is_zero_to_trunc
            assert resid.trunc >= 5


class TestSubsParamSeries:
    def test_rational_coefficient(self):
        av = a(21)
        f = ser(0, [R.one() / R.var(av)], trunc=4)
        sub = {av: ser(0, [R.one(), R.one()], trunc=4)}  # a -> 1 + t
        g = f.subs_param_series(sub)
        # 1/(1+t) = 1 - t + t^2 - ...
        assert g.known(0) == R.one()
        assert g.known(1) == R.const(-1)
        assert g.known(2) == R.one()

    def test_untouched_series_returned_as_is(self):
        f = ser(0, [R.var(a(1))], trunc=4)
        assert f.subs_param_series({a(2): LSeries.variable("t")}) is f


class TestRatInVarToSeries:
    def test_polynomial_case_exact(self):
        lam = sym("L")
        r = R.var(lam) ** 2 + 1
        s = rat_in_var_to_series(r, lam, "lambda", order=5)
        assert s.trunc == INF
        assert s.known(0) == R.one() and s.known(2) == R.one()

    def test_simple_pole(self):
        lam = sym("L2")
        r = (R.var(A_PLUS)) / (R.var(lam) * (1 + R.var(lam)))
        s = rat_in_var_to_series(r, lam, "lambda", order=4)
        assert s.val == -1
        assert s.known(-1) == R.var(A_PLUS)
        assert s.known(0) == -R.var(A_PLUS)


def test_json_shape():
    f = ser(-1, [1, 2], trunc=3)
    js = f.to_json()
    assert js["variable"] == "t" and js["valuation"] == -1 and js["trunc"] == 3
    assert js["coeffs"] == ["1", "2"]


def test_rename():
    f = ser(1, [R.var(A_MINUS)], trunc=4)
    g = f.rename("lambda")
    assert g.var == "lambda" and g.coeffs == f.coeffs


def test_alpha_vars_available():
    assert alpha(3).name == "alpha[3]"
