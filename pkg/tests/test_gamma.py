"""Gamma tests: the two construction paths, closed forms, structure report,
forward recursion step and series evaluation basics."""

from __future__ import annotations

from fractions import Fraction

import pytest

from toeplitz_confinement.errors import MismatchReport, SingularStep
from toeplitz_confinement.exact import MultiPoly, MultiRat, u, x, y
from toeplitz_confinement.gamma import (
    RecursionSpec,
    build_gamma,
    eval_poly,
    forward_step,
    gamma_dump,
    gamma_on_series,
    gamma_polynomials,
    verify_gamma_structure,
)
from toeplitz_confinement.lax import LatticeWindow, shift_rename_poly, sigma_rename_poly
from toeplitz_confinement.series import LSeries

P = MultiPoly
R = MultiRat


def xp(k):
    return P.var(x(k))


def yp(k):
    return P.var(y(k))


def up(i):
    return P.var(u(i))


def vp(k):
    return P.one() - xp(k) * yp(k)


def vxp(k):
    return P.one() - xp(k) * xp(k)


class TestClosedForms:
    def test_self_dual_n1_remark_form(self):
        # Gamma_k = k x_k + u_1 (1 - x_k^2)(x_{k+1} + x_{k-1})
        spec = RecursionSpec.make(1, self_dual=True)
        for k in (-2, 0, 3):
            g = gamma_polynomials(spec, k).gamma
            assert g == k * xp(k) + up(1) * vxp(k) * (xp(k + 1) + xp(k - 1))

    def test_general_n1(self):
        spec = RecursionSpec.make(1)
        k = 2
        pair = gamma_polynomials(spec, k)
        assert pair.gamma == k * xp(k) + vp(k) * (up(1) * xp(k + 1) + up(-1) * xp(k - 1))
        assert pair.gamma_tilde == k * yp(k) + vp(k) * (
            up(-1) * yp(k + 1) + up(1) * yp(k - 1)
        )

    def test_zero_window_kills_gamma(self):
        spec = RecursionSpec.make(2)
        w = LatticeWindow.from_values(
            {k: (R.zero(), R.zero()) for k in range(-4, 5)}
        )
        pair = build_gamma(spec, w, 0)
        assert pair.gamma.is_zero and pair.gamma_tilde.is_zero

    def test_leading_terms_general(self):
        spec = RecursionSpec.make(2)
        g = gamma_polynomials(spec, 0).gamma
        assert g.coefficient_of(x(2), 1) == up(2) * vp(0) * vp(1)
        assert g.coefficient_of(x(-2), 1) == up(-2) * vp(0) * vp(-1)

    def test_self_dual_n2_leading_coefficient(self):
        spec = RecursionSpec.make(2, self_dual=True)
        g = gamma_polynomials(spec, 0).gamma
        assert g.coefficient_of(x(2), 1) == up(2) * vxp(0) * vxp(1)


class TestTwoPathsAgree:
    @pytest.mark.parametrize(
        "N,self_dual", [(1, True), (2, True), (3, True), (1, False), (2, False)]
    )
    def test_vector_field_equals_definition(self, N, self_dual):
        spec = RecursionSpec.make(N, self_dual=self_dual)
        for k in range(-2, 3):
            a = gamma_polynomials(spec, k)
            b = gamma_polynomials(spec, k, via_definition=True)
            assert a.gamma == b.gamma
            assert a.gamma_tilde == b.gamma_tilde


class TestStructureReport:
    @pytest.mark.parametrize(
        "N,self_dual", [(1, True), (2, True), (3, True), (1, False), (2, False)]
    )
    def test_verify_gamma_structure(self, N, self_dual):
        spec = RecursionSpec.make(N, self_dual=self_dual)
        rep = verify_gamma_structure(spec)
        assert rep.ok and rep.checks

    def test_shift_covariance(self):
        spec = RecursionSpec.make(2)
        g0 = gamma_polynomials(spec, 0).gamma - 0 * xp(0)
        g1 = gamma_polynomials(spec, 1).gamma - 1 * xp(1)
        assert shift_rename_poly(g0, 1) == g1

    def test_sigma_maps_gamma_to_tilde(self):
        spec = RecursionSpec.make(2)
        pair = gamma_polynomials(spec, 1)
        assert sigma_rename_poly(pair.gamma) == pair.gamma_tilde


class TestForwardStep:
    def test_hand_solved_self_dual_n1(self):
        # k=0, u1=1: Gamma_0 = u1 v_0 (x_1 + x_{-1}) = 0  =>  x_1 = -x_{-1}
        spec = RecursionSpec.make(1, self_dual=True, u={1: 1})
        history = {-1: Fraction(1, 3), 0: Fraction(1, 2)}
        assert forward_step(spec, history, 0) == Fraction(-1, 3)

    def test_zero_history(self):
        spec = RecursionSpec.make(1, self_dual=True, u={1: 1})
        history = {-1: Fraction(0), 0: Fraction(0)}
        assert forward_step(spec, history, 0) == 0

    def test_substituting_back_gives_zero(self):
        spec = RecursionSpec.make(2, u={1: 1, 2: 2, -1: Fraction(1, 3), -2: -1})
        history = {
            k: (Fraction(k + 3, 7), Fraction(2 - k, 5)) for k in range(-2, 2)
        }
        nxt = forward_step(spec, history, 0)
        full = dict(history)
        full[2] = nxt
        w = LatticeWindow.from_values(full)
        pair = build_gamma(spec, w, 0)
        assert pair.gamma.is_zero and pair.gamma_tilde.is_zero

    def test_singular_step(self):
        spec = RecursionSpec.make(1, self_dual=True, u={1: 1})
        history = {-1: Fraction(1, 3), 0: Fraction(1)}  # v_0 = 1 - x_0^2 = 0
        with pytest.raises(SingularStep):
            forward_step(spec, history, 0)

    def test_symbolic_forward_step_annihilates_gamma(self):
        spec = RecursionSpec.make(1, self_dual=True)
        history = {-1: R.var(x(-1)), 0: R.var(x(0))}
        nxt = forward_step(spec, history, 0)
        w = LatticeWindow.from_values({-1: (history[-1],), 0: (history[0],), 1: (nxt,)}, self_dual=True)
        pair = build_gamma(spec, w, 0)
        assert pair.gamma.is_zero


class TestSeriesEvaluation:
    def test_gamma_series_on_constant_window(self):
        # constant window: x_k = c, all k -> flow rhs zero but Gamma != 0
        spec = RecursionSpec.make(1, self_dual=True, u={1: 1})
        c = R.const(Fraction(1, 2))
        sites = {k: (LSeries.constant(c, "t"),) for k in range(-3, 4)}
        w = LatticeWindow.from_values(sites, self_dual=True)
        g, gt = gamma_on_series(spec, w, 0, shifted_u=False)
        # Gamma_0 = 0*x + v(2c) = (3/4)(1) = 3/4
        assert g.known(0) == R.const(Fraction(3, 4))
        assert g is gt

    def test_shifted_u_adds_t(self):
        spec = RecursionSpec.make(1, self_dual=True, u={1: 1})
        c = R.const(Fraction(1, 2))
        sites = {k: (LSeries.constant(c, "t"),) for k in range(-3, 4)}
        w = LatticeWindow.from_values(sites, self_dual=True)
        g, _ = gamma_on_series(spec, w, 0, shifted_u=True)
        # u1 -> 1 + t adds v_k(x_{k+1}+x_{k-1}) t = (3/4) t
        assert g.known(1) == R.const(Fraction(3, 4))


def test_eval_poly_rings():
    p = xp(0) * xp(1) + 2
    frac = eval_poly(p, {x(0): Fraction(1, 2), x(1): Fraction(4)})
    assert frac == 4
    rat = eval_poly(p, {x(0): R.var(y(9)), x(1): R.one()})
    assert rat == R.var(y(9)) + 2


def test_gamma_dump_shape():
    spec = RecursionSpec.make(1, self_dual=True, n=0)
    d = gamma_dump(spec, offsets=[0])
    (key, val), = d.items()
    assert "N=1" in key and "offset=0" in key
    assert "gamma" in val and "u[1]" in val["gamma"]


def test_recursion_spec_validation():
    with pytest.raises(ValueError):
        RecursionSpec.make(1, self_dual=True, u={1: 0})
    with pytest.raises(ValueError):
        RecursionSpec.make(2, u={1: 1, 2: 1, -1: 1})  # missing u_{-2}
    s = RecursionSpec.make(1, u={1: 2, -1: 3})
    assert s.sigma().u_rat(1) == R.const(3)
