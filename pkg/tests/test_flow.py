"""Balance-solver tests: every displayed coefficient of the principal
balances, the linear-block determinants, the v_k series, sigma on balances,
the dependence table and the Gamma differential equations."""

from __future__ import annotations

from fractions import Fraction

import pytest

from toeplitz_confinement.errors import DegenerateParameters
from toeplitz_confinement.exact import (
    A0,
    A_MINUS,
    A_PLUS,
    EPS,
    MultiRat,
    RVAR,
    a,
    b,
)
from toeplitz_confinement.flow import (
    BalanceSolution,
    apply_sigma,
    block_determinant_formula,
    check_balance_residuals,
    check_dependence_table,
    check_gamma_ode,
    displayed_block,
    extend_balance,
    flow_rhs,
    omega,
    sigma_omega_displayed,
    sigma_param_map,
    solve_balance,
)
from toeplitz_confinement.gamma import RecursionSpec
from toeplitz_confinement.lax import LatticeWindow

R = MultiRat


def ra(k):
    return R.var(a(k))


def rb(k):
    return R.var(b(k))


EPS_R = R.var(EPS)
AP = R.var(A_PLUS)
AM = R.var(A_MINUS)
AA = R.var(A0)


@pytest.fixture(scope="module")
def sd_balance():
    return solve_balance(0, self_dual=True, M=4, half_width=6)


@pytest.fixture(scope="module")
def gen_balance():
    return solve_balance(0, self_dual=False, M=3, half_width=6)


class TestFlowRhs:
    def test_zero_window(self):
        w = LatticeWindow.from_values(
            {k: (R.zero(), R.zero()) for k in range(-2, 3)}
        )
        assert flow_rhs(w, 0) == (R.zero(), R.zero())

    def test_constant_window(self):
        c, d = R.const(Fraction(1, 3)), R.const(Fraction(2, 5))
        w = LatticeWindow.from_values({k: (c, d) for k in range(-2, 3)})
        assert flow_rhs(w, 0) == (R.zero(), R.zero())

    def test_generic_matches_vector_field(self):
        w = LatticeWindow.symbolic(-2, 2)
        fx, fy = flow_rhs(w, 0)
        from toeplitz_confinement.exact import x, y

        vk = 1 - R.var(x(0)) * R.var(y(0))
        assert fx == vk * (R.var(x(1)) - R.var(x(-1)))
        assert fy == vk * (R.var(y(1)) - R.var(y(-1)))


class TestSelfDualBalance:
    """Every displayed coefficient of the self-dual balance through t^2."""

    def test_pole_series(self, sd_balance):
        bal = sd_balance
        # x_n(t) = -(eps/2t)(1 + (a+ - a-) t + (1/3)((a+-a-)^2
        #          + 4(a+ a_{n+2} - a- a_{n-2} + 1 - 2 a+ a-)) t^2 + O(t^3))
        pref = -EPS_R * Fraction(1, 2)
        assert bal.x[0].known(-1) == pref
        assert bal.x[0].known(0) == pref * (AP - AM)
        x2 = Fraction(1, 3) * ((AP - AM) ** 2 + 4 * (AP * ra(2) - AM * ra(-2) + 1 - 2 * AP * AM))
        assert bal.x[0].known(1) == pref * x2

    @pytest.mark.parametrize("s", [1, -1])
    def test_adjacent_series(self, sd_balance, s):
        bal = sd_balance
        apm = AP if s > 0 else AM
        # x_{n+-1}(t) = eps(-+1 + 4 a_pm t + 4 a_pm (2 a_{n+-2} -+ (a- + a+)) t^2 + ...)
        assert bal.x[s].known(0) == EPS_R * (-s)
        assert bal.x[s].known(1) == EPS_R * 4 * apm
        expected2 = 4 * apm * (2 * ra(2 * s) - s * (AM + AP))
        assert bal.x[s].known(2) == EPS_R * expected2

    @pytest.mark.parametrize("k", [2, 3, -2, -3, 4])
    def test_generic_series_with_kappa(self, sd_balance, k):
        bal = sd_balance

        def adisp(j):
            if j == 1:
                return R.const(-1)
            if j == -1:
                return R.one()
            return ra(j)

        def check(j):
            return 1 - adisp(j) ** 2

        assert bal.x[k].known(0) == EPS_R * ra(k)
        assert bal.x[k].known(1) == EPS_R * check(k) * (adisp(k + 1) - adisp(k - 1))
        kappa = R.zero()
        if k == 2:
            kappa = -4 * AP
        elif k == -2:
            kappa = 4 * AM
        lower = adisp(k - 2) if abs(k - 1) != 1 else R.zero()  # times check(k-1)=0
        inner = (
            adisp(k - 2) * check(k - 1)
            + adisp(k + 2) * check(k + 1)
            - adisp(k) * ((adisp(k + 1) - adisp(k - 1)) ** 2 + 2 - 2 * adisp(k - 1) * adisp(k + 1))
            + kappa
        )
        assert bal.x[k].known(2) == EPS_R * Fraction(1, 2) * check(k) * inner
        assert lower is not None  # silence unused warning

    def test_v_series(self, sd_balance):
        bal = sd_balance
        vn = 1 - bal.x[0] * bal.x[0]
        # v_n(t) = -(1/4t^2)(1 + 2(a+ - a-) t + O(t^2))
        assert vn.known(-2) == R.const(Fraction(-1, 4))
        assert vn.known(-1) == Fraction(-1, 2) * (AP - AM)
        for s in (1, -1):
            vpm = 1 - bal.x[s] * bal.x[s]
            assert vpm.known(0) == R.zero()
            assert vpm.known(1) == (8 * AP if s > 0 else -8 * AM)
        vk = 1 - bal.x[3] * bal.x[3]
        assert vk.known(0) == 1 - ra(3) ** 2
        assert vk.known(1) == -2 * ra(3) * (1 - ra(3) ** 2) * (ra(4) - ra(2))

    def test_flow_residuals_vanish(self, sd_balance):
        orders = check_balance_residuals(sd_balance)
        assert orders[0] >= sd_balance.M - 2

    def test_parameter_count(self, sd_balance):
        bal = sd_balance
        n_sites = bal.k_max - bal.k_min + 1
        assert len(bal.free_params) + 1 == n_sites


class TestGeneralBalance:
    def test_pole_leading_terms(self, gen_balance):
        bal = gen_balance
        D = ra(-1) - ra(1)
        assert bal.x[0].known(-1) == ra(-1) * ra(1) / D
        assert bal.y[0].known(-1) == R.one() / (ra(1) - ra(-1))

    def test_first_order_at_pole(self, gen_balance):
        bal = gen_balance
        D = ra(-1) - ra(1)
        assert bal.x[0].known(0) == ra(1) * ra(-1) * AA / D
        y1 = AA + (ra(1) * AP - ra(-1) * AM) / (ra(1) - ra(-1))
        assert bal.y[0].known(0) == y1 / D
        # the two printed groupings of y_n^(1) are the same rational function
        grouped = (ra(1) * (AP + AA) - ra(-1) * (AM + AA)) / (ra(1) - ra(-1))
        assert y1 == grouped

    @pytest.mark.parametrize("s", [1, -1])
    def test_adjacent_sites(self, gen_balance, s):
        bal = gen_balance
        apm = AP if s > 0 else AM
        assert bal.x[s].known(0) == ra(s)
        assert bal.y[s].known(0) == R.one() / ra(s)
        assert bal.x[s].known(1) == ra(s) * apm
        assert bal.y[s].known(1) == -apm / ra(-s)

    @pytest.mark.parametrize("k", [2, 3, -2, -3])
    def test_generic_sites(self, gen_balance, k):
        bal = gen_balance

        def ca(j):
            return ra(j)

        def cb(j):
            return R.one() / ra(j) if abs(j) == 1 else rb(j)

        cc = 1 - ra(k) * rb(k)
        assert bal.x[k].known(0) == ra(k)
        assert bal.y[k].known(0) == rb(k)
        assert bal.x[k].known(1) == cc * (ca(k + 1) - ca(k - 1))
        assert bal.y[k].known(1) == cc * (cb(k + 1) - cb(k - 1))

    def test_flow_residuals_vanish(self, gen_balance):
        orders = check_balance_residuals(gen_balance)
        assert orders[0] >= gen_balance.M - 2

    def test_parameter_count(self, gen_balance):
        bal = gen_balance
        n_sites = bal.k_max - bal.k_min + 1
        assert len(bal.free_params) + 1 == 2 * n_sites

    def test_extension_consistency(self, gen_balance):
        ext = extend_balance(gen_balance, 4)
        direct = solve_balance(0, self_dual=False, M=4, half_width=6)
        for k in ext.x:
            assert ext.x[k].agrees_with(direct.x[k])
            assert ext.y[k].agrees_with(direct.y[k])

    def test_constraint_validation(self, gen_balance):
        good = {a(1): Fraction(2), a(-1): Fraction(3)}
        gen_balance.validate_assignment(good)
        with pytest.raises(DegenerateParameters):
            gen_balance.validate_assignment({a(1): Fraction(2), a(-1): Fraction(2)})


class TestBlockDeterminants:
    def test_displayed_formulas_as_polynomials_in_r(self):
        r = R.var(RVAR)
        for which in ("+", "-"):
            assert block_determinant_formula(which, 0) == r * (r + 1)
        assert block_determinant_formula("n", 0) == r * (r + 2)

    def test_solver_blocks_match(self, gen_balance):
        # the determinants of the extracted 2x2 systems at level l are the
        # displayed r(r+1) and r(r+2) with r = l-1, on the nose
        assert gen_balance.block_dets
        for kind, level, det in gen_balance.block_dets:
            rr = Fraction(level - 1)
            if kind in ("+", "-"):
                assert det == R.const(rr * (rr + 1)), (kind, level)
            elif kind == "n":
                assert det == R.const(rr * (rr + 2)), (kind, level)

    def test_displayed_block_trace(self):
        for which in ("+", "-"):
            L = displayed_block(which, 0)
            assert L[0][0] + L[1][1] == R.const(-1)
            assert L[0][0] * L[1][1] - L[0][1] * L[1][0] == R.zero()


class TestSigma:
    def test_sigma_squared_identity_on_params(self, gen_balance):
        varset = set(gen_balance.free_params)
        m = sigma_param_map(0, varset)
        for v in varset:
            img = m.get(v, R.var(v))
            again = img.subs(sigma_param_map(0, img.variables()))
            assert again == R.var(v), v.name

    def test_sigma_maps_x_series_to_y_series(self, gen_balance):
        bal = gen_balance
        sig = apply_sigma(bal)
        for k in bal.x:
            assert sig.x[k].agrees_with(bal.x[k]), k
            assert sig.y[k].agrees_with(bal.y[k]), k

    def test_sigma_window_involution(self):
        w = LatticeWindow.symbolic(-2, 2)
        assert apply_sigma(apply_sigma(w)) is w

    def test_sigma_omega_displayed(self):
        om = omega(0)
        m = sigma_param_map(0, om.variables())
        assert om.subs(m) == sigma_omega_displayed(0)

    def test_sigma_spec(self):
        spec = RecursionSpec.make(2, u={1: 1, 2: 2, -1: 3, -2: 4})
        assert apply_sigma(spec).u_rat(2) == R.const(4)


class TestWSeries:
    """w_1 = x_n y_{n-1} + y_n x_{n+1}, w_2 = x_n + x_{n-1} y_n x_{n+1}."""

    def test_w_series_leading_terms(self, gen_balance):
        bal = gen_balance
        w1 = bal.x[0] * bal.y[-1] + bal.y[0] * bal.x[1]
        w2 = bal.x[0] + bal.x[-1] * bal.y[0] * bal.x[1]
        om = omega(0)
        bm1 = R.one() / ra(-1)
        assert w1.known(-1) == R.zero()
        assert w2.known(-1) == R.zero()
        assert w1.known(0) == om * bm1 - AM
        assert w2.known(0) == om
        # linear terms of the displayed w series
        assert w1.known(1) == AP * ra(2) * bm1 - AM * ra(-1) * rb(-2)
        assert w2.known(1) == AP * ra(2) + AM * ra(-2)


class TestDependenceTable:
    def test_table_and_remark(self):
        bal = solve_balance(0, self_dual=False, M=3, half_width=7)
        report = check_dependence_table(bal)
        assert report.ok


class TestGammaOde:
    def test_self_dual_n1(self, sd_balance):
        spec = RecursionSpec.make(1, self_dual=True)
        rep = check_gamma_ode(spec, sd_balance)
        assert rep.ok and rep.sites

    def test_general_n1(self, gen_balance):
        spec = RecursionSpec.make(1)
        rep = check_gamma_ode(spec, gen_balance)
        assert rep.ok and rep.sites

    def test_zero_window_gamma_ode_trivially(self):
        # Gamma on the zero lattice is identically zero; residual exactly 0
        from toeplitz_confinement.gamma import gamma_on_series
        from toeplitz_confinement.series import LSeries

        spec = RecursionSpec.make(1, u={1: 1, -1: 1})
        sites = {
            k: (LSeries.zero("t"), LSeries.zero("t")) for k in range(-3, 4)
        }
        w = LatticeWindow.from_values(sites)
        g, gt = gamma_on_series(spec, w, 0)
        assert g.is_zero_to_trunc and gt.is_zero_to_trunc


def test_balance_json_roundtrip(sd_balance):
    js = sd_balance.to_json()
    assert js["mode"] == "self-dual"
    assert js["x"]["0"]["valuation"] == -1
