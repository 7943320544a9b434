"""Lax-matrix tests: entry formulas, dense-multiply oracle for powers,
window stability, duality, Hamiltonians and the structure lemma."""

from __future__ import annotations

from fractions import Fraction

import pytest

from toeplitz_confinement.errors import MismatchReport, WindowTooSmall
from toeplitz_confinement.exact import MultiPoly, MultiRat, x, y
from toeplitz_confinement.lax import (
    Boundary,
    LatticeWindow,
    as_poly,
    build_lax,
    hamiltonian,
    matrix_power_entry,
    shift_rename_poly,
    sigma_rename_poly,
    verify_appendix_structure,
)

P = MultiPoly
R = MultiRat


def xp(k):
    return P.var(x(k))


def yp(k):
    return P.var(y(k))


def vp(k):
    return P.one() - xp(k) * yp(k)


def dense_power(mat, sites, s):
    """Dense matrix-multiply oracle on an explicit windowed matrix."""
    idx = {k: i for i, k in enumerate(sites)}
    n = len(sites)
    dense = [[mat.entry(a, b) for b in sites] for a in sites]
    out = [[R.one() if i == j else R.zero() for j in range(n)] for i in range(n)]
    for _ in range(s):
        new = [[R.zero()] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                acc = R.zero()
                for c in range(n):
                    acc = acc + out[i][c] * dense[c][j]
                new[i][j] = acc
        out = new
    return lambda a, b: out[idx[a]][idx[b]]


class TestBuildLax:
    def test_zero_window_gives_shift_matrix(self):
        w = LatticeWindow.symbolic(0, 3, boundary=Boundary.ZERO)
        wz = LatticeWindow.from_values(
            {k: (R.zero(), R.zero()) for k in range(4)}, boundary=Boundary.ZERO
        )
        m = build_lax(wz, "L1")
        for i in wz.sites():
            for j in wz.sites():
                expect = R.one() if j == i + 1 else R.zero()
                assert m.entry(i, j) == expect
        assert w is not None  # symbolic window built fine too

    def test_l1_diagonal_entry(self):
        w = LatticeWindow.symbolic(-2, 4)
        m = build_lax(w, "L1")
        k = 1
        assert as_poly(m.entry(k + 1, k + 1)) == -xp(k + 1) * yp(k)

    def test_l1_matches_paper_display(self):
        w = LatticeWindow.symbolic(1, 4)
        m = build_lax(w, "L1")
        assert as_poly(m.entry(1, 2)) == vp(1)
        assert as_poly(m.entry(2, 1)) == -xp(2) * yp(0)
        assert m.entry(1, 3) == R.zero()

    def test_sigma_duality_of_lax(self):
        w = LatticeWindow.symbolic(0, 3)
        lhs = build_lax(w.sigma(), "L1")
        rhs = build_lax(w, "L2").transpose()
        for i in w.sites():
            for j in w.sites():
                assert lhs.entry(i, j) == rhs.entry(i, j)


class TestPowerEntries:
    def test_square_diagonal_against_dense_oracle(self):
        w = LatticeWindow.symbolic(-3, 3)
        m = build_lax(w, "L1")
        oracle = dense_power(m, w.sites(), 2)
        got = matrix_power_entry(w, "L1", 2, 0, 0)
        assert got == oracle(0, 0)

    def test_square_diagonal_closed_form(self):
        w = LatticeWindow.symbolic(-3, 3)
        k = 0
        got = as_poly(matrix_power_entry(w, "L1", 2, k, k))
        expected = (
            -xp(k + 1) * yp(k - 1) * vp(k)
            - xp(k) * yp(k - 2) * vp(k - 1)
            + xp(k) ** 2 * yp(k - 1) ** 2
        )
        assert got == expected

    def test_cube_against_dense_oracle_all_consumed_entries(self):
        w = LatticeWindow.symbolic(-4, 4)
        m = build_lax(w, "L1")
        oracle = dense_power(m, w.sites(), 3)
        for (i, j) in [(0, 0), (1, 0), (0, 1)]:
            assert matrix_power_entry(w, "L1", 3, i, j) == oracle(i, j)

    def test_l2_power_against_dense_oracle(self):
        w = LatticeWindow.symbolic(-4, 4)
        m = build_lax(w, "L2")
        oracle = dense_power(m, w.sites(), 2)
        for (i, j) in [(0, 0), (0, 1), (1, 0)]:
            assert matrix_power_entry(w, "L2", 2, i, j) == oracle(i, j)

    def test_power_one_is_entry(self):
        w = LatticeWindow.symbolic(-2, 2)
        assert as_poly(matrix_power_entry(w, "L1", 1, 1, 0)) == -xp(1) * yp(-1)

    def test_window_stability(self):
        narrow = LatticeWindow.symbolic(-3, 3)
        wide = LatticeWindow.symbolic(-9, 9)
        for (i, j) in [(0, 0), (1, 0)]:
            assert matrix_power_entry(narrow, "L1", 3, i, j) == matrix_power_entry(
                wide, "L1", 3, i, j
            )

    def test_shift_covariance(self):
        w = LatticeWindow.symbolic(-5, 5)
        p0 = as_poly(matrix_power_entry(w, "L1", 2, 0, 0))
        p1 = as_poly(matrix_power_entry(w, "L1", 2, 1, 1))
        assert shift_rename_poly(p0, 1) == p1

    def test_sigma_duality_of_powers(self):
        w = LatticeWindow.symbolic(-4, 4)
        for (i, j) in [(0, 0), (1, 0)]:
            lhs = sigma_rename_poly(as_poly(matrix_power_entry(w, "L1", 2, i, j)))
            rhs = as_poly(matrix_power_entry(w, "L2", 2, j, i))
            assert lhs == rhs

    def test_edge_free_enforcement(self):
        w = LatticeWindow.symbolic(-2, 2)
        with pytest.raises(WindowTooSmall):
            matrix_power_entry(w, "L1", 3, 1, 1, require_edge_free=True)


class TestHamiltonian:
    def test_h1_per_site_contribution(self):
        w = LatticeWindow.symbolic(-3, 3)
        i = 0
        l2 = build_lax(w, "L2")
        l1 = build_lax(w, "L1")
        contrib = as_poly(l2.entry(i, i)) - as_poly(l1.entry(i, i))
        assert contrib == xp(i) * yp(i - 1) - xp(i - 1) * yp(i)

    def test_all_zero_window(self):
        w = LatticeWindow.from_values(
            {k: (R.zero(), R.zero()) for k in range(-3, 4)}
        )
        for l in (1, 2):
            for i in (1, 2):
                assert hamiltonian(w, l, i) == R.zero()

    def test_self_dual_symmetry(self):
        w = LatticeWindow.symbolic(-4, 4, self_dual=True)
        for i in (1, 2):
            assert hamiltonian(w, 1, i) == hamiltonian(w, 2, i)

    def test_too_small_window(self):
        w = LatticeWindow.symbolic(0, 1)
        with pytest.raises(WindowTooSmall):
            hamiltonian(w, 1, 2)


class TestAppendixStructure:
    @pytest.mark.parametrize("s", [2, 3, 4])
    def test_structure_lemma(self, s):
        report = verify_appendix_structure(s)
        assert report.ok

    def test_s2_subdiagonal_leading_term(self):
        w = LatticeWindow.symbolic(-4, 4)
        k = 0
        sub = as_poly(matrix_power_entry(w, "L1", 2, k + 1, k))
        assert sub.coefficient_of(x(k + 2), 1) == -yp(k - 1) * vp(k + 1)

    def test_s3_remainder_free_of_extremal_x(self):
        # after subtracting the displayed leading term, no x_{k+2} remains (s=3)
        from toeplitz_confinement.lax import displayed_power_diagonal_terms

        w = LatticeWindow.symbolic(-5, 5)
        k = 0
        s = 3
        diag = as_poly(matrix_power_entry(w, "L1", s, k, k))
        lead = displayed_power_diagonal_terms(s, k)[0]
        assert (diag - lead).degree(x(k + 2)) == 0

    def test_mismatch_detection(self):
        # feeding a wrong "displayed" term must raise, not pass silently
        with pytest.raises(MismatchReport):
            from toeplitz_confinement import lax as laxmod

            w = LatticeWindow.symbolic(-4, 4)
            diag = as_poly(matrix_power_entry(w, "L1", 2, 0, 0))
            laxmod._support_check(diag, (0, 0), (0, 0), "wrong")


class TestWindowPolicies:
    def test_semi_infinite(self):
        w = LatticeWindow.symbolic(0, 3, boundary=Boundary.SEMI_INFINITE)
        assert w.xv(-1) == R.zero()
        assert w.xv(0) == R.one()
        assert w.xv(2) == R.var(x(2))

    def test_strict_raises(self):
        w = LatticeWindow.symbolic(0, 3, boundary=Boundary.STRICT)
        with pytest.raises(WindowTooSmall):
            w.xv(4)

    def test_value_window_strict(self):
        w = LatticeWindow.from_values({0: (R.one(), R.one())})
        with pytest.raises(WindowTooSmall):
            w.yv(1)

    def test_self_dual_y_is_x(self):
        w = LatticeWindow.symbolic(0, 2, self_dual=True)
        assert w.yv(1) == R.var(x(1))

    def test_sigma_involution(self):
        w = LatticeWindow.symbolic(0, 2)
        assert w.sigma().sigma() is w

    def test_numeric_window(self):
        w = LatticeWindow.from_values(
            {0: (Fraction(1, 2), Fraction(1, 3)), 1: (Fraction(2), Fraction(3))}
        )
        assert w.vv(0) == 1 - Fraction(1, 2) * Fraction(1, 3)
