"""The first Toeplitz vector field, its order-by-order principal-balance
Laurent solver (self-dual and general), the sigma automorphism on balances,
the parameter-dependence table check and the Gamma differential equations.

The solver mirrors the order-by-order argument exactly: at each level it
places fresh unknown symbols in the next coefficient slot of every site,
extracts the relevant t-coefficient of the flow residual, and solves the
resulting affine equations — sitewise triangular except at the three sites
around the pole, where the 2x2 blocks with determinants r(r+1) (at n+-1)
and r(r+2) (at n) appear.  The rank drops at order zero are *detected and
verified* (the two equations must be proportional) before the free
parameters a_+, a_-, a (and, self-dually, 4 eps a_+-) are inserted.

Free parameters are fresh VarIds; genericity constraints (nonvanishing
denominators) are recorded on the solution and re-validated on every
numeric specialization.  eps is carried symbolically with eps**2 = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    DegenerateParameters,
    InternalInvariantError,
    MismatchReport,
    NonzeroResidual,
)
from .exact import (
    A0,
    A_MINUS,
    A_PLUS,
    EPS,
    MultiPoly,
    MultiRat,
    RVAR,
    VarId,
    a,
    b,
    tmp,
    u,
    x,
    y,
)
from .gamma import RecursionSpec, gamma_on_series
from .lax import LatticeWindow
from .series import LSeries

R = MultiRat


def _ra(k):
    return R.var(a(k))


def _rb(k):
    return R.var(b(k))


def flow_rhs(w: LatticeWindow, k: int):
    """(v_k (x_{k+1} - x_{k-1}), v_k (y_{k+1} - y_{k-1})); self-dual: one value."""
    vk = 1 - w.xv(k) * w.yv(k)
    fx = vk * (w.xv(k + 1) - w.xv(k - 1))
    if w.self_dual:
        return fx
    fy = vk * (w.yv(k + 1) - w.yv(k - 1))
    return fx, fy


# ---------------------------------------------------------------------------
# balance solutions
# ---------------------------------------------------------------------------


@dataclass
class BalanceSolution:
    """Formal Laurent solution of the first flow with a simple pole at n."""

    n: int
    self_dual: bool
    M: int
    k_min: int
    k_max: int
    x: dict[int, LSeries]
    y: dict[int, LSeries]
    free_params: list[VarId]
    constraints: list[MultiRat]
    solutions: dict[VarId, MultiRat] = field(default_factory=dict)
    block_dets: list[tuple[str, int, MultiRat]] = field(default_factory=list)
    restricted_range: tuple[int, int] | None = None  # sites with Gamma == 0

    def window(self) -> LatticeWindow:
        vals = {k: (self.x[k], self.y[k]) for k in self.x}
        return LatticeWindow.from_values(vals, self_dual=self.self_dual)

    def sites(self):
        return range(self.k_min, self.k_max + 1)

    def subs(self, mapping: dict[VarId, MultiRat]) -> "BalanceSolution":
        """New balance with parameters substituted everywhere."""
        nx = {k: s.subs_params(mapping) for k, s in self.x.items()}
        ny = nx if self.self_dual else {k: s.subs_params(mapping) for k, s in self.y.items()}
        sols = {v: e.subs(mapping) for v, e in self.solutions.items()}
        cons = [c.subs(mapping) for c in self.constraints]
        return BalanceSolution(
            self.n, self.self_dual, self.M, self.k_min, self.k_max,
            nx, ny, list(self.free_params), cons, sols, list(self.block_dets),
            self.restricted_range,
        )

    def validate_assignment(self, assign: dict[VarId, Fraction]) -> None:
        for c in self.constraints:
            try:
                val = c.evaluate(assign)
            except KeyError as e:
                raise DegenerateParameters(f"constraint needs a value for {e}") from e
            if val == 0:
                raise DegenerateParameters(
                    f"genericity constraint violated: {c.render()} = 0"
                )

    def specialize(self, assign: dict[VarId, Fraction]) -> "BalanceSolution":
        """Substitute exact rational values for a subset of the free
        parameters (typically the survivors-to-be, so that a subsequent
        restriction runs over plain rationals).  Constraints that the
        assignment touches are validated."""
        for c in self.constraints:
            if c.variables() <= assign.keys():
                if c.evaluate(assign) == 0:
                    raise DegenerateParameters(
                        f"genericity constraint violated: {c.render()} = 0"
                    )
        mapping = {v: MultiRat.const(q) for v, q in assign.items()}
        out = self.subs(mapping)
        out.free_params = [v for v in self.free_params if v not in assign]
        return out

    def to_json(self) -> dict:
        out = {
            "n": self.n,
            "mode": "self-dual" if self.self_dual else "general",
            "M": self.M,
            "window": [self.k_min, self.k_max],
            "free_parameters": [v.name for v in self.free_params],
            "constraints": [c.render() for c in self.constraints],
            "solutions": {v.name: e.render() for v, e in sorted(self.solutions.items(), key=lambda p: p[0].sort_key)},
            "x": {str(k): self.x[k].to_json() for k in sorted(self.x)},
        }
        if not self.self_dual:
            out["y"] = {str(k): self.y[k].to_json() for k in sorted(self.y)}
        return out


def _level_cap(k: int, n: int, k_min: int, k_max: int, M: int) -> int:
    """Honest max coefficient level solvable at site k on this window."""
    dist = min(k - k_min, k_max - k)
    return max(0, min(M, dist - 1 if k == n else dist))


# -- affine extraction -------------------------------------------------------


def _affine_rows(residuals: list[MultiRat], unknowns: list[VarId]):
    """residual_i = sum_j A[i][j] unknown_j + B[i]; verifies joint affineness
    and that no foreign solver symbols survive."""
    A = []
    B = []
    unk = set(unknowns)
    for res in residuals:
        if res.den.variables() & unk:
            raise InternalInvariantError("unknown in a residual denominator")
        for v in res.num.variables():
            if v.kind == "tmp" and v not in unk:
                raise InternalInvariantError(f"foreign solver symbol {v.name}")
        row = []
        num = res.num
        for v in unknowns:
            parts = num.as_univariate(v)
            if parts and max(parts) > 1:
                raise InternalInvariantError("residual not affine in unknowns")
            coeff = parts.get(1, MultiPoly.zero())
            if coeff.variables() & unk:
                raise InternalInvariantError("cross term between unknowns")
            row.append(MultiRat(coeff, res.den))
            num = parts.get(0, MultiPoly.zero())
        if num.variables() & unk:
            raise InternalInvariantError("residual not affine in unknowns")
        A.append(row)
        B.append(MultiRat(num, res.den))
    return A, B


def _solve_regular(A, B, what: str) -> list[MultiRat]:
    """Solve A xi + B = 0 for one or two unknowns, exactly."""
    if len(A) == 1:
        a11, b1 = A[0][0], B[0]
        if a11.is_zero:
            raise InternalInvariantError(f"{what}: singular 1x1 system")
        return [-(b1 / a11)]
    (a11, a12), (a21, a22) = A
    b1, b2 = B
    det = a11 * a22 - a12 * a21
    if det.is_zero:
        raise InternalInvariantError(f"{what}: unexpected singular 2x2 system")
    xi1 = (a12 * b2 - a22 * b1) / det
    xi2 = (a21 * b1 - a11 * b2) / det
    return [xi1, xi2]


def _residual_coeff(xs: LSeries, left: LSeries, right: LSeries, ys, lefty, righty, order: int, self_dual: bool):
    """Coefficient of t^order in (d/dt z_k - v_k (z_{k+1} - z_{k-1}))."""
    vk = 1 - xs * (xs if self_dual else ys)
    rx = xs.differentiate() - vk * (left - right)
    out = [rx.coeff(order)]
    if not self_dual:
        ry = ys.differentiate() - vk * (lefty - righty)
        out.append(ry.coeff(order))
    return out


class _SolverState:
    """Mutable coefficient table while levels are being solved."""

    def __init__(self, n, self_dual, k_min, k_max, cx, cy, block_dets):
        self.n = n
        self.self_dual = self_dual
        self.k_min = k_min
        self.k_max = k_max
        self.cx = cx  # plain t-coefficients; site n starts at the t^-1 slot
        self.cy = cy
        self.block_dets = block_dets

    def sites(self):
        return range(self.k_min, self.k_max + 1)


def _run_levels(st: _SolverState, first: int, last: int, M_cap: int, focus=None):
    """Solve coefficient levels first..last wherever the neighbor data
    honestly allows it (sites outside `focus`, when given, are left alone)."""
    n, self_dual = st.n, st.self_dual

    def available(k: int, level: int, solving=()) -> bool:
        # solving level `level` at site k consumes: neighbors' t^{level-1}
        # (the pole site's t^{level-2}; at the pole, the neighbors' t^{level}
        # is produced in pass 1 of the same level, hence `solving`)
        if len(st.cx[k]) != level:
            return False
        if focus is not None:
            cap = focus.get(k, 0) if isinstance(focus, dict) else (
                M_cap if k in focus else 0
            )
            if level > cap:
                return False
        for kk in (k - 1, k + 1):
            if not (st.k_min <= kk <= st.k_max):
                return False
            have = len(st.cx[kk])  # stored slots; the pole site starts at t^-1
            if kk in solving:
                have += 1
            if kk == n:
                if have < level:  # needs the pole site's t^{level-2}
                    return False
            elif k == n:
                if have < level + 1:  # needs the neighbors' t^{level}
                    return False
            elif have < level:
                return False
        return True

    def series_at(k, unknowns, upto):
        val = -1 if k == n else 0
        coeffs = list(st.cx[k])
        if unknowns and k in unknowns:
            coeffs = coeffs + [R.var(unknowns[k][0])]
            trunc = val + len(coeffs)
        else:
            trunc = val + min(len(coeffs), upto - val)
            coeffs = coeffs[: trunc - val]
        sx = LSeries.make("t", val, coeffs, trunc)
        if self_dual:
            return sx, sx
        coeffs = list(st.cy[k])
        if unknowns and k in unknowns:
            coeffs = coeffs + [R.var(unknowns[k][1])]
            truncy = val + len(coeffs)
        else:
            truncy = val + min(len(coeffs), upto - val)
            coeffs = coeffs[: truncy - val]
        return sx, LSeries.make("t", val, coeffs, truncy)

    def site_unknowns(k):
        base = 2 * (k - st.k_min)
        return (tmp(base),) if self_dual else (tmp(base), tmp(base + 1))

    for level in range(first, min(last, M_cap) + 1):
        todo = [k for k in st.sites() if k != n and available(k, level)]
        if st.k_min < n < st.k_max and available(n, level, solving=todo):
            todo.append(n)
        unknowns = {k: site_unknowns(k) for k in todo}

        def residuals_for(k):
            top = level + 2
            sx, sy = series_at(k, unknowns, top)
            lx, ly = series_at(k - 1, unknowns, top)
            rx, ry = series_at(k + 1, unknowns, top)
            order = level - 2 if k == n else level - 1
            return _residual_coeff(sx, rx, lx, sy, ry, ly, order, self_dual)

        def finish(k, values):
            values = [v.reduced() for v in values]
            st.cx[k].append(values[0])
            if not self_dual:
                st.cy[k].append(values[1])
            del unknowns[k]

        # pass 1: every site except the pole site (their systems are
        # decoupled; around the pole the 2x2 blocks appear).  The residual
        # arithmetic runs with light reduction; stored values are reduced
        # once in finish()
        from .exact import light_reduction

        with light_reduction():
            for k in todo:
                if k == n:
                    continue
                res = residuals_for(k)
                names = list(unknowns[k])
                A, B = _affine_rows(res, names)
                kind = "edge" if abs(k - n) != 1 else ("+" if k == n + 1 else "-")
                if abs(k - n) == 1 and level == 1:
                    values = _rank_drop_adjacent(k, n, self_dual, A, B)
                else:
                    if abs(k - n) == 1 and not self_dual:
                        det = A[0][0] * A[1][1] - A[0][1] * A[1][0]
                        st.block_dets.append((kind, level, det))
                    values = _solve_regular(A, B, f"site {k} level {level}")
                finish(k, values)

            # pass 2: the pole site, with the fresh neighbor values in place
            if n in todo:
                res = residuals_for(n)
                names = list(unknowns[n])
                A, B = _affine_rows(res, names)
                if level == 1 and not self_dual:
                    values = _rank_drop_pole(n, A, B)
                else:
                    if not self_dual:
                        det = A[0][0] * A[1][1] - A[0][1] * A[1][0]
                        st.block_dets.append(("n", level, det))
                    values = _solve_regular(A, B, f"site {n} level {level}")
                finish(n, values)


def _package(st: _SolverState, M, free_params, constraints, solutions=None):
    series_x, series_y = {}, {}
    for k in st.sites():
        val = -1 if k == st.n else 0
        trunc = val + len(st.cx[k])
        series_x[k] = LSeries.make("t", val, st.cx[k], trunc)
        series_y[k] = (
            series_x[k] if st.self_dual else LSeries.make("t", val, st.cy[k], trunc)
        )
    return BalanceSolution(
        n=st.n,
        self_dual=st.self_dual,
        M=M,
        k_min=st.k_min,
        k_max=st.k_max,
        x=series_x,
        y=series_y,
        free_params=free_params,
        constraints=constraints,
        solutions=solutions or {},
        block_dets=st.block_dets,
    )


def solve_balance(
    n: int,
    self_dual: bool,
    M: int,
    half_width: int,
) -> BalanceSolution:
    """Order-by-order principal balance around the pole site n.

    Returns series honest to the per-site level cap (full order M in the
    middle of the window, linearly less toward the edges).
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    k_min, k_max = n - half_width, n + half_width
    sites = list(range(k_min, k_max + 1))
    eps = R.var(EPS)
    D = _ra(n - 1) - _ra(n + 1)
    # the structural denominator factors of this computation
    from .exact import register_denominator_atoms

    if self_dual:
        seeds = []
        for k in sites:
            if abs(k - n) >= 2:
                seeds.append((1 - _ra(k) * _ra(k)).num)
                seeds.append((1 - _ra(k)).num)
                seeds.append((1 + _ra(k)).num)
    else:
        seeds = [D.num]
        for k in sites:
            if abs(k - n) >= 2:
                seeds.append((1 - _ra(k) * _rb(k)).num)
    register_denominator_atoms(seeds)

    cx: dict[int, list[MultiRat]] = {}
    cy: dict[int, list[MultiRat]] = {}
    for k in sites:
        if k == n:
            if self_dual:
                cx[k] = [-eps * Fraction(1, 2)]
            else:
                cx[k] = [_ra(n - 1) * _ra(n + 1) / D]
                cy[k] = [R.const(-1) / D]
        elif abs(k - n) == 1:
            if self_dual:
                cx[k] = [eps * (-1 if k == n + 1 else 1)]
            else:
                cx[k] = [_ra(k)]
                cy[k] = [R.one() / _ra(k)]
        else:
            if self_dual:
                cx[k] = [eps * _ra(k)]
            else:
                cx[k] = [_ra(k)]
                cy[k] = [_rb(k)]

    st = _SolverState(n, self_dual, k_min, k_max, cx, cy, [])
    _run_levels(st, 1, M, M)

    params: list[VarId] = []
    for k in sites:
        if abs(k - n) >= 2:
            params.append(a(k))
            if not self_dual:
                params.append(b(k))
    if not self_dual:
        params.extend([a(n - 1), a(n + 1)])
    params.extend([A_PLUS, A_MINUS])
    if not self_dual:
        params.append(A0)

    constraints = []
    if not self_dual:
        constraints = [_ra(n + 1), _ra(n - 1), _ra(n - 1) - _ra(n + 1)]

    return _package(st, M, params, constraints)


def extend_balance(
    bal: BalanceSolution,
    M_new: int,
    focus: tuple[int, int] | None = None,
    staircase: bool = False,
) -> BalanceSolution:
    """Continue the order-by-order solve of an existing (possibly restricted)
    balance to a higher order.  The rank-drop levels were already handled at
    solve time, so every new level is a regular solve.  With ``focus``
    = (lo, hi) only those sites are extended; the rest keep their honest
    truncation (and are reported unverified downstream).  ``staircase``
    additionally caps each site at the level its tangency-propagation bound
    can use — orders that could never be verified are not computed."""
    if M_new <= bal.M:
        return bal
    cx = {k: list(_plain_coeffs(bal.x[k], k == bal.n)) for k in bal.x}
    cy = cx if bal.self_dual else {
        k: list(_plain_coeffs(bal.y[k], k == bal.n)) for k in bal.y
    }
    st = _SolverState(bal.n, bal.self_dual, bal.k_min, bal.k_max, cx, cy, list(bal.block_dets))
    if focus is None:
        fdata = None
    elif staircase:
        lo, hi = focus
        fdata = {}
        for k in range(lo, hi + 1):
            prop = min(k - lo, hi - k) + 1  # propagation bound of Gamma_k
            fdata[k] = min(M_new, prop + 2)
    else:
        fdata = set(range(focus[0], focus[1] + 1))
    _run_levels(st, 2, M_new, M_new, focus=fdata)
    out = _package(
        st, M_new, list(bal.free_params), list(bal.constraints), dict(bal.solutions)
    )
    out.restricted_range = bal.restricted_range
    return out


def _plain_coeffs(s: LSeries, pole: bool) -> list[MultiRat]:
    val = -1 if pole else 0
    out = []
    i = val
    while i < s.trunc:
        out.append(s.known(i))
        i += 1
    return out


def _rank_drop_adjacent(k: int, n: int, self_dual: bool, A, B) -> list[MultiRat]:
    """Order-zero insertion of a_+ (at n+1) / a_- (at n-1), after verifying
    the degeneracy the theory predicts."""
    ap = R.var(A_PLUS if k == n + 1 else A_MINUS)
    if self_dual:
        # the level-1 equation at n+-1 must be identically 0 = 0
        if not A[0][0].is_zero or not B[0].is_zero:
            raise InternalInvariantError(
                f"self-dual level-1 equation at site {k} is not trivial"
            )
        return [R.var(EPS) * 4 * ap]
    (a11, a12), (a21, a22) = A
    det = a11 * a22 - a12 * a21
    if not det.is_zero:
        raise InternalInvariantError(f"expected rank drop at site {k}")
    xi_x = _ra(k) * ap
    if a12.is_zero:
        raise InternalInvariantError(f"cannot solve for y-slot at site {k}")
    xi_y = -(B[0] + a11 * xi_x) / a12
    # consistency: the second equation must hold identically (par_rel)
    if not (a21 * xi_x + a22 * xi_y + B[1]).is_zero:
        raise InternalInvariantError(f"inconsistent rank-1 system at site {k}")
    return [xi_x, xi_y]


def _rank_drop_pole(n: int, A, B) -> list[MultiRat]:
    """Order-zero insertion of the parameter a at the pole site."""
    (a11, a12), (a21, a22) = A
    det = a11 * a22 - a12 * a21
    if not det.is_zero:
        raise InternalInvariantError("expected rank drop at the pole site")
    D = _ra(n - 1) - _ra(n + 1)
    xi_x = _ra(n - 1) * _ra(n + 1) * R.var(A0) / D
    if a12.is_zero:
        raise InternalInvariantError("cannot solve for y-slot at the pole site")
    xi_y = -(B[0] + a11 * xi_x) / a12
    if not (a21 * xi_x + a22 * xi_y + B[1]).is_zero:
        raise InternalInvariantError("inconsistent rank-1 system at the pole site")
    return [xi_x, xi_y]


# ---------------------------------------------------------------------------
# displayed 2x2 blocks and their determinants (symbolic in r)
# ---------------------------------------------------------------------------


def displayed_block(which: str, n: int) -> list[list[MultiRat]]:
    """The matrices governing the linear problems at n+-1 and n."""
    D = _ra(n - 1) - _ra(n + 1)
    if which in ("+", "-"):
        s = 1 if which == "+" else -1
        ak = _ra(n + 1) if which == "+" else _ra(n - 1)
        ao = _ra(n - 1) if which == "+" else _ra(n + 1)
        return [
            [s * (-ao) / D, s * (-_ra(n - 1) * _ra(n + 1) * ak) / D],
            [s * (R.one() / ak) / D, s * ak / D],
        ]
    if which == "n":
        aa = _ra(n - 1) * _ra(n + 1)
        return [[R.one(), -aa], [-(R.one() / aa), R.one()]]
    raise ValueError(which)


def block_determinant_formula(which: str, n: int) -> MultiRat:
    """det(L_{+-} + (r+1) Id) or det(L_n + r Id) as a rational function of r."""
    L = displayed_block(which, n)
    r = R.var(RVAR)
    shift = r + 1 if which in ("+", "-") else r
    a11 = L[0][0] + shift
    a22 = L[1][1] + shift
    return a11 * a22 - L[0][1] * L[1][0]


# ---------------------------------------------------------------------------
# sigma on parameters, Omega, and balance-level checks
# ---------------------------------------------------------------------------


def omega(n: int) -> MultiRat:
    """The combination driving step (5) of the general restriction."""
    am, ap, a0 = R.var(A_MINUS), R.var(A_PLUS), R.var(A0)
    an1, am1 = _ra(n + 1), _ra(n - 1)
    return (
        am1 * an1 / (an1 - am1) ** 2
        * (am1 * (2 * a0 - ap) - an1 * (2 * a0 - am))
    )


def sigma_omega_displayed(n: int) -> MultiRat:
    """sigma(Omega) = Omega b_{n-1} b_{n+1} + a_+ b_{n-1} - a_- b_{n+1}."""
    bm1, bp1 = R.one() / _ra(n - 1), R.one() / _ra(n + 1)
    return omega(n) * bm1 * bp1 + R.var(A_PLUS) * bm1 - R.var(A_MINUS) * bp1


def sigma_param_map(n: int, variables) -> dict[VarId, MultiRat]:
    """The extension of sigma to the balance parameters."""
    D = _ra(n + 1) - _ra(n - 1)
    out: dict[VarId, MultiRat] = {}
    for v in variables:
        if v.kind == "a" and abs(v.index - n) == 1:
            out[v] = R.one() / R.var(v)
        elif v.kind == "a":
            out[v] = _rb(v.index)
        elif v.kind == "b":
            out[v] = _ra(v.index)
        elif v is A_PLUS:
            out[v] = -R.var(A_PLUS) * _ra(n + 1) / _ra(n - 1)
        elif v is A_MINUS:
            out[v] = -R.var(A_MINUS) * _ra(n - 1) / _ra(n + 1)
        elif v is A0:
            out[v] = -R.var(A0) - (_ra(n + 1) * R.var(A_PLUS) - _ra(n - 1) * R.var(A_MINUS)) / D
        elif v.kind == "u":
            out[v] = R.var(u(-v.index))
    return out


def apply_sigma(obj, n: int | None = None):
    """sigma on specs, windows, polynomials, rationals and balances."""
    from .lax import sigma_rename_poly

    if isinstance(obj, RecursionSpec):
        return obj.sigma()
    if isinstance(obj, LatticeWindow):
        return obj.sigma()
    if isinstance(obj, MultiPoly):
        return sigma_rename_poly(obj)
    if isinstance(obj, MultiRat):
        num, den = sigma_rename_poly(obj.num), sigma_rename_poly(obj.den)
        return MultiRat(num, den)
    if isinstance(obj, BalanceSolution):
        if obj.self_dual:
            return obj
        mapping = sigma_param_map(obj.n, _balance_variables(obj))
        nx = {k: s.subs_params(mapping) for k, s in obj.y.items()}
        ny = {k: s.subs_params(mapping) for k, s in obj.x.items()}
        return BalanceSolution(
            obj.n, obj.self_dual, obj.M, obj.k_min, obj.k_max,
            nx, ny, list(obj.free_params), [c.subs(mapping) for c in obj.constraints],
            {v: e.subs(mapping) for v, e in obj.solutions.items()},
        )
    raise TypeError(f"sigma undefined for {type(obj).__name__}")


def _balance_variables(bal: BalanceSolution):
    out = set(bal.free_params)
    for s in list(bal.x.values()) + list(bal.y.values()):
        out |= s.variables()
    return out


# ---------------------------------------------------------------------------
# residual and ODE checks, dependence table
# ---------------------------------------------------------------------------


def flow_residual(bal: BalanceSolution, k: int):
    """Residual series of the flow at site k (zero to truncation if ok)."""
    sx = bal.x[k]
    rx = sx.differentiate() - (1 - sx * bal.y[k]) * (bal.x[k + 1] - bal.x[k - 1])
    if bal.self_dual:
        return rx
    sy = bal.y[k]
    ry = sy.differentiate() - (1 - sx * sy) * (bal.y[k + 1] - bal.y[k - 1])
    return rx, ry


def check_balance_residuals(bal: BalanceSolution) -> dict[int, int]:
    """Verified order (exclusive) of the flow residual per interior site."""
    out = {}
    for k in range(bal.k_min + 1, bal.k_max):
        res = flow_residual(bal, k)
        parts = [res] if bal.self_dual else list(res)
        orders = []
        for p in parts:
            if not p.is_zero_to_trunc:
                raise NonzeroResidual(
                    f"flow residual at site {k} is nonzero", payload=p.render()
                )
            orders.append(p.trunc)
        out[k] = min(orders)
    return out


@dataclass
class OdeReport:
    sites: dict[int, int]
    ok: bool = True

    def to_json(self):
        return {"ok": self.ok, "verified_order": {str(k): v for k, v in self.sites.items()}}


def check_gamma_ode(spec: RecursionSpec, bal: BalanceSolution, pad: int = 1) -> OdeReport:
    """Residuals of the Gamma differential equations along the balance."""
    n, N = bal.n, spec.N
    gam: dict[int, tuple[LSeries, LSeries]] = {}
    w = bal.window()
    lo, hi = bal.k_min + N, bal.k_max - N
    for k in range(lo, hi + 1):
        gam[k] = gamma_on_series(spec, w, k)
    sites: dict[int, int] = {}
    for k in range(lo + 1, hi):
        g, gt = gam[k]
        gp, gtp = gam[k + 1]
        gm, gtm = gam[k - 1]
        vk = 1 - bal.x[k] * bal.y[k]
        if bal.self_dual:
            resids = [g.differentiate() - vk * (gp - gm)]
        else:
            cross = bal.x[k] * gt - bal.y[k] * g
            rx = g.differentiate() - vk * (gp - gm) - (bal.x[k + 1] - bal.x[k - 1]) * cross
            ry = gt.differentiate() - vk * (gtp - gtm) + (bal.y[k + 1] - bal.y[k - 1]) * cross
            resids = [rx, ry]
        orders = []
        for p in resids:
            if not p.is_zero_to_trunc:
                raise NonzeroResidual(
                    f"Gamma ODE residual at site {k} nonzero",
                    payload=p.render(),
                )
            orders.append(p.trunc)
        sites[k] = min(orders)
    return OdeReport(sites=sites)


# -- the parameter-dependence table ------------------------------------------


def _support_params(r: MultiRat) -> set[VarId]:
    return {v for v in r.variables() if v.kind in ("a", "b") or v in (A_PLUS, A_MINUS, A0)}


def dependence_table_expectations(n: int) -> dict[tuple[str, int], list[set[VarId]]]:
    """Cumulative allowed parameter supports per (site row, order column)."""
    ap, am, a0 = A_PLUS, A_MINUS, A0

    def row(base, *cols):
        out = []
        acc: set[VarId] = set()
        for cset in (base, *cols):
            acc = acc | cset
            out.append(set(acc))
        return out

    table: dict[tuple[str, int], list[set[VarId]]] = {}
    table[("x", n)] = row({a(n + 1), a(n - 1)}, {a0}, {am, ap, a(n + 2), b(n + 2), a(n - 2), b(n - 2)})
    table[("y", n)] = row({a(n + 1), a(n - 1)}, {a0, ap, am}, {a(n + 2), b(n + 2), a(n - 2), b(n - 2)})
    for s in (+1, -1):
        pm = ap if s > 0 else am
        mp = am if s > 0 else ap
        table[("x", n + s)] = row(
            {a(n + s)}, {pm}, {a(n + 2 * s), b(n + 2 * s), mp, a0, a(n - s)}
        )
        table[("y", n + s)] = row(
            {a(n + s)}, {a(n - s), pm}, {a(n + 2 * s), b(n + 2 * s), mp, a0}
        )
        table[("x", n + 2 * s)] = row(
            {a(n + 2 * s)}, {a(n + 3 * s), a(n + s), b(n + 2 * s)}, {a(n + 4 * s), b(n + 3 * s), pm}
        )
        table[("y", n + 2 * s)] = row(
            {b(n + 2 * s)}, {b(n + 3 * s), a(n + s), a(n + 2 * s)}, {b(n + 4 * s), a(n + 3 * s), pm, a(n - s)}
        )
    return table


def generic_row_expectations(k: int, n: int) -> dict[str, list[set[VarId]]]:
    def norm(v: VarId) -> VarId:
        # b_{n+-1} is not a free parameter; 1/a_{n+-1} plays its role
        if v.kind == "b" and abs(v.index - n) == 1:
            return a(v.index)
        return v

    raw = {
        "x": [
            {a(k)},
            {a(k), a(k + 1), a(k - 1), b(k)},
            {a(k), a(k + 1), a(k - 1), b(k), a(k + 2), b(k + 1), a(k - 2), b(k - 1)},
        ],
        "y": [
            {b(k)},
            {b(k), b(k + 1), b(k - 1), a(k)},
            {b(k), b(k + 1), b(k - 1), a(k), b(k + 2), a(k + 1), b(k - 2), a(k - 1)},
        ],
    }
    return {comp: [{norm(v) for v in s} for s in cols] for comp, cols in raw.items()}


@dataclass
class DependenceReport:
    strict: list[str]
    ok: bool = True

    def to_json(self):
        return {"ok": self.ok, "strict_containments": self.strict}


def check_dependence_table(bal: BalanceSolution) -> DependenceReport:
    """Parameter-support containment for the first three orders, against the
    printed table; strict containments are reported, mismatches raise."""
    if bal.self_dual:
        raise ValueError("the dependence table concerns the general balance")
    n = bal.n
    strict: list[str] = []

    def coeff(comp: str, k: int, i: int) -> MultiRat:
        s = bal.x[k] if comp == "x" else bal.y[k]
        off = -1 if k == n else 0
        c = s.known(i + off)
        if c is None:
            raise MismatchReport(f"coefficient ({comp},{k},{i}) not determined")
        return c

    def check(comp: str, k: int, expected: list[set[VarId]]):
        for i, allowed in enumerate(expected):
            sup = _support_params(coeff(comp, k, i))
            extra = sup - allowed
            if extra:
                raise MismatchReport(
                    f"{comp}_{k} order {i} depends on {sorted(v.name for v in extra)}"
                )
            if sup != allowed and i == len(expected) - 1:
                strict.append(f"{comp}_{k}@{i}: missing {sorted(v.name for v in (allowed - sup))}")

    for (comp, k), expected in dependence_table_expectations(n).items():
        check(comp, k, expected)
    for k in bal.sites():
        if abs(k - n) > 2 and _level_cap(k, n, bal.k_min, bal.k_max, bal.M) >= 2:
            for comp, expected in generic_row_expectations(k, n).items():
                check(comp, k, expected)

    # remark after the balance proposition: z_k^(2) = (1/2) cck cck1 c_{k+2} + rest;
    # checked only where k+1 and k+2 are generic sites (c_{n+-1} is not free)
    for k in bal.sites():
        if not (k >= n + 2 or k <= n - 4):
            continue
        if not (bal.k_min <= k + 2 <= bal.k_max):
            continue
        if _level_cap(k, n, bal.k_min, bal.k_max, bal.M) < 2:
            continue
        cck = 1 - _ra(k) * _rb(k)
        cck1 = 1 - _ra(k + 1) * _rb(k + 1)
        half = R.const(Fraction(1, 2)) * cck * cck1
        restx = coeff("x", k, 2) - half * _ra(k + 2)
        resty = coeff("y", k, 2) - half * _rb(k + 2)
        for rest, comp in ((restx, "x"), (resty, "y")):
            sup = _support_params(rest)
            if a(k + 2) in sup or b(k + 2) in sup:
                raise MismatchReport(
                    f"z_{k}^(2) remark fails for {comp}: c_{k+2} does not factor out"
                )
    return DependenceReport(strict=strict)
