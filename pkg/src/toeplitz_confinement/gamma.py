"""The recursion polynomials Gamma_k / tilde-Gamma_k, their structural
cross-checks, and the forward recursion step.

Two independent construction paths are implemented:

* the primary, division-free path through the Hamiltonian vector field
  V^u = sum_i (u_i X_i^(1) + u_{-i} X_i^(2)), using the trace formulas for
  X_i^(l) on Lax-power entries (Gamma_k = V^u[x_k] + k x_k and
  tilde-Gamma_k = -V^u[y_k] + k y_k);
* the defining path through diagonal/next-to-diagonal entries of L_l P'(L_l)
  with the division by y_k (x_k in the self-dual case) performed as exact
  polynomial division — a nonzero remainder is a bug detector, since
  polynomiality is a theorem.

Both produce polynomials in the site variables, linear in each u_i; the u_i
stay symbolic in the cached polynomials and are specialized at evaluation
time (including the time-dependent slots u_{+-1} + t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .errors import (
    MismatchReport,
    NonPolynomialResult,
    SingularStep,
    WindowTooSmall,
)
from .exact import MultiPoly, MultiRat, VarId, u, x, y
from .lax import LatticeWindow, matrix_power_entry, sigma_rename_poly
from .series import LSeries

P = MultiPoly


def _xp(k):
    return P.var(x(k))


def _yp(k):
    return P.var(y(k))


def _up(i):
    return P.var(u(i))


def _vp(k):
    return P.one() - _xp(k) * _yp(k)


def _prod(fs):
    out = P.one()
    for f in fs:
        out = out * f
    return out


@dataclass(frozen=True)
class RecursionSpec:
    """Data defining the 2N+1 step recursion: N, the u coefficients and the
    pole site n.  ``u_values is None`` keeps every u_i symbolic."""

    N: int
    self_dual: bool = False
    n: int = 0
    u_values: tuple | None = None  # tuple of (i, Fraction) pairs, or None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.u_values is not None:
            vals = dict(self.u_values)
            idx = range(1, self.N + 1) if self.self_dual else [
                i for i in range(-self.N, self.N + 1) if i
            ]
            missing = [i for i in idx if i not in vals]
            if missing:
                raise ValueError(f"missing u coefficients {missing}")
            if vals[self.N] == 0 or (not self.self_dual and vals[-self.N] == 0):
                raise ValueError("u_N and u_{-N} must be nonzero")

    @staticmethod
    def make(N: int, self_dual: bool = False, n: int = 0, u: dict | None = None):
        uv = None if u is None else tuple(sorted((i, Fraction(q)) for i, q in u.items()))
        return RecursionSpec(N, self_dual, n, uv)

    def u_dict(self) -> dict[int, Fraction] | None:
        return None if self.u_values is None else dict(self.u_values)

    def u_rat(self, i: int) -> MultiRat:
        if self.self_dual:
            i = abs(i)
        if self.u_values is None:
            return MultiRat.var(u(i))
        return MultiRat.const(dict(self.u_values)[i])

    def u_assignment(self) -> dict[VarId, MultiRat]:
        """Map each symbolic u_i occurring in Gamma to its value."""
        out = {}
        for i in range(1, self.N + 1):
            out[u(i)] = self.u_rat(i)
            out[u(-i)] = self.u_rat(-i)
        return out

    def sigma(self) -> "RecursionSpec":
        if self.self_dual:
            return self
        uv = self.u_values
        if uv is not None:
            uv = tuple(sorted((-i, q) for i, q in uv))
        return RecursionSpec(self.N, self.self_dual, self.n, uv)


@dataclass(frozen=True)
class GammaPair:
    """Gamma_k and tilde-Gamma_k at one site (equal in the self-dual case)."""

    k: int
    gamma: object
    gamma_tilde: object


# ---------------------------------------------------------------------------
# construction paths (symbolic u; cached per (N, self_dual, k))
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _gamma_polys(N: int, self_dual: bool, k: int) -> tuple[MultiPoly, MultiPoly]:
    """Primary path: Gamma_k = V^u[x_k] + k x_k (division free)."""
    w = LatticeWindow.symbolic(k - N - 1, k + N + 1, self_dual=self_dual)
    memo: dict = {}

    def l1(s, i, j):
        if s == 0:
            return MultiRat.one() if i == j else MultiRat.zero()
        return matrix_power_entry(w, "L1", s, i, j, _memo=memo)

    def l2(s, i, j):
        if s == 0:
            return MultiRat.one() if i == j else MultiRat.zero()
        return matrix_power_entry(w, "L2", s, i, j, _memo=memo)

    vk = MultiRat.one() - w.xv(k) * w.yv(k)
    g = MultiRat.var(x(k)) * k if k else MultiRat.zero()
    gt = MultiRat.var(y(k) if not self_dual else x(k)) * k if k else MultiRat.zero()
    for i in range(1, N + 1):
        ui = MultiRat.var(u(i))
        umi = MultiRat.var(u(i if self_dual else -i))
        # X_i^(1)[x_k] = v_k * sum_c (L1^(i-1))_{k+1,c} x_c
        s1 = MultiRat.zero()
        for c in range(k, k + i + 1):
            s1 = s1 + l1(i - 1, k + 1, c) * w.xv(c)
        # X_i^(2)[x_k] = v_k * sum_c (L2^(i-1))_{k,c} x_{c-1}
        s2 = MultiRat.zero()
        for c in range(k - i + 1, k + 2):
            s2 = s2 + l2(i - 1, k, c) * w.xv(c - 1)
        g = g + vk * (ui * s1 + umi * s2)
        # -X_i^(1)[y_k] = v_k * sum_r (L1^(i-1))_{r,k} y_{r-1}
        s3 = MultiRat.zero()
        for r in range(k - i + 1, k + 2):
            s3 = s3 + l1(i - 1, r, k) * w.yv(r - 1)
        # -X_i^(2)[y_k] = v_k * sum_r (L2^(i-1))_{r,k+1} y_r
        s4 = MultiRat.zero()
        for r in range(k, k + i + 1):
            s4 = s4 + l2(i - 1, r, k + 1) * w.yv(r)
        gt = gt + vk * (ui * s3 + umi * s4)
    gp, gtp = _as_poly(g), _as_poly(gt)
    if self_dual and gp != gtp:
        raise MismatchReport("self-dual Gamma and tilde-Gamma differ", payload=(gp.render(), gtp.render()))
    return gp, gtp


def _as_poly(r: MultiRat) -> MultiPoly:
    if not r.den.is_const:
        raise NonPolynomialResult("expected polynomial", payload=r.render())
    return r.num * (1 / r.den.const_value())


@lru_cache(maxsize=None)
def _gamma_polys_via_definition(N: int, self_dual: bool, k: int) -> tuple[MultiPoly, MultiPoly]:
    """Cross-check path: Eq. for Gamma_k with exact division by y_k (x_k)."""
    w = LatticeWindow.symbolic(k - N - 1, k + N + 1, self_dual=self_dual)
    memo: dict = {}

    def lpow(which, s, i, j) -> MultiPoly:
        if s == 0:
            return P.one() if i == j else P.zero()
        return _as_poly(matrix_power_entry(w, which, s, i, j, _memo=memo))

    def lp1(i_, j_) -> MultiPoly:  # (L1 P1'(L1))_{i,j} with symbolic u
        out = P.zero()
        for i in range(1, N + 1):
            out = out + _up(i) * lpow("L1", i, i_, j_)
        return out

    def lp2(i_, j_) -> MultiPoly:  # (L2 P2'(L2))_{i,j}
        out = P.zero()
        for i in range(1, N + 1):
            out = out + _up(i if self_dual else -i) * lpow("L2", i, i_, j_)
        return out

    def p1(i_, j_) -> MultiPoly:  # (P1'(L1))_{i,j}
        out = P.zero()
        for i in range(1, N + 1):
            out = out + _up(i) * lpow("L1", i - 1, i_, j_)
        return out

    def p2(i_, j_) -> MultiPoly:
        out = P.zero()
        for i in range(1, N + 1):
            out = out + _up(i if self_dual else -i) * lpow("L2", i - 1, i_, j_)
        return out

    vk = _as_poly(MultiRat.one() - w.xv(k) * w.yv(k))
    if self_dual:
        bracket = 2 * p1(k + 1, k) - lp1(k + 1, k + 1) - lp1(k, k)
        xk = _as_poly(w.xv(k))
        q = bracket.divide_exact(xk)
        if q is None:
            raise NonPolynomialResult(
                f"self-dual Gamma_{k} bracket not divisible by x_{k}"
            )
        g = vk * q + k * xk
        return g, g
    bracket_g = -lp1(k + 1, k + 1) - lp2(k, k) + p1(k + 1, k) + p2(k, k + 1)
    bracket_t = -lp1(k, k) - lp2(k + 1, k + 1) + p1(k + 1, k) + p2(k, k + 1)
    qg = bracket_g.divide_exact(_yp(k))
    qt = bracket_t.divide_exact(_xp(k))
    if qg is None or qt is None:
        raise NonPolynomialResult(f"Gamma_{k} bracket not divisible by site variable")
    g = vk * qg + k * _xp(k)
    gt = vk * qt + k * _yp(k)
    return g, gt


def gamma_polynomials(spec: RecursionSpec, k: int, via_definition: bool = False) -> GammaPair:
    """Gamma_k and tilde-Gamma_k as MultiPoly in site and u variables."""
    fn = _gamma_polys_via_definition if via_definition else _gamma_polys
    g, gt = fn(spec.N, spec.self_dual, k)
    return GammaPair(k=k, gamma=g, gamma_tilde=gt)


def build_gamma(spec: RecursionSpec, w: LatticeWindow, k: int, via_definition: bool = False) -> GammaPair:
    """Gamma pair evaluated on a window (symbolic windows give polynomials)."""
    pair = gamma_polynomials(spec, k, via_definition)
    assign = {}
    for v in pair.gamma.variables() | pair.gamma_tilde.variables():
        if v.kind == "x":
            assign[v] = MultiRat.lift(w.xv(v.index))
        elif v.kind == "y":
            assign[v] = MultiRat.lift(w.yv(v.index))
        elif v.kind == "u":
            assign[v] = spec.u_rat(v.index)
    g = pair.gamma.subs(assign)
    gt = pair.gamma_tilde.subs(assign)
    return GammaPair(k=k, gamma=g, gamma_tilde=gt)


# ---------------------------------------------------------------------------
# generic evaluation over any coefficient ring (MultiRat / LSeries / Fraction)
# ---------------------------------------------------------------------------


def eval_poly(poly: MultiPoly, assign: dict[VarId, object]):
    """Evaluate with values in any ring supporting +, * and ** (int exps)."""
    powers: dict[VarId, dict[int, object]] = {}

    def power(v, e):
        cache = powers.setdefault(v, {})
        if e not in cache:
            cache[e] = assign[v] ** e
        return cache[e]

    total = 0
    for m, c in poly.terms.items():
        term = None
        for v, e in m:
            p = power(v, e)
            term = p if term is None else term * p
        if term is None:
            total = total + c
        else:
            total = term * c + total
    return total


def u_series_assignment(spec: RecursionSpec, shifted: bool, var: str = "t") -> dict[VarId, LSeries]:
    """u_i as constant series, with t added on the u_{+-1} slots if shifted."""
    out: dict[VarId, LSeries] = {}
    tvar = LSeries.variable(var)
    idx = range(1, spec.N + 1) if spec.self_dual else [
        i for i in range(-spec.N, spec.N + 1) if i
    ]
    for i in idx:
        s = LSeries.constant(spec.u_rat(i), var)
        if shifted and abs(i) == 1:
            s = s + tvar
        out[u(i)] = s
    return out


def gamma_on_series(
    spec: RecursionSpec,
    w: LatticeWindow,
    k: int,
    shifted_u: bool = True,
    var: str = "t",
) -> tuple[LSeries, LSeries]:
    """Gamma_k(t), tilde-Gamma_k(t) on a series window, by default with the
    time-dependent u(t) = (..., u_{-1}+t, u_1+t, ...)."""
    pair = gamma_polynomials(spec, k)
    useries = u_series_assignment(spec, shifted_u, var)
    assign: dict[VarId, object] = {}
    for v in pair.gamma.variables() | pair.gamma_tilde.variables():
        if v.kind == "x":
            assign[v] = _as_series(w.xv(v.index), var)
        elif v.kind == "y":
            assign[v] = _as_series(w.yv(v.index), var)
        elif v.kind == "u":
            assign[v] = useries[v]
    g = eval_poly(pair.gamma, assign)
    gt = g if spec.self_dual else eval_poly(pair.gamma_tilde, assign)
    g = _as_series(g, var)
    gt = _as_series(gt, var)
    return g, gt


def _as_series(value, var: str) -> LSeries:
    if isinstance(value, LSeries):
        return value
    if isinstance(value, int) and value == 0:
        return LSeries.zero(var)
    return LSeries.constant(MultiRat.lift(value), var)


# ---------------------------------------------------------------------------
# the forward recursion step (solve Gamma_k = tilde-Gamma_k = 0 for z_{k+N})
# ---------------------------------------------------------------------------


def forward_step(spec: RecursionSpec, history: dict[int, object], k: int):
    """Solve for the top variables from the 2N+1 step relations at site k.

    ``history`` maps sites k-N..k+N-1 to values (pairs (x, y) in the general
    case, plain x values in the self-dual case).  Returns the value(s) at
    k+N.  Raises SingularStep when the leading v-product is not invertible —
    that is precisely a singularity of the recursion.
    """
    pair = gamma_polynomials(spec, k)
    need = range(k - spec.N, k + spec.N)
    missing = [j for j in need if j not in history]
    if missing:
        raise WindowTooSmall(f"forward step at {k} missing history sites {missing}")

    def site_value(j, want_y):
        vpair = history[j]
        if spec.self_dual:
            return vpair
        return vpair[1 if want_y else 0]

    xN, yN = x(k + spec.N), y(k + spec.N)

    def solve(poly: MultiPoly, top: VarId, want_y: bool):
        parts = poly.as_univariate(top)
        if max(parts) > 1:
            raise MismatchReport(f"Gamma_{k} not linear in {top.name}")
        assign: dict[VarId, object] = {}
        for v in (parts.get(0, P.zero()).variables() | parts[1].variables()):
            if v.kind == "x":
                assign[v] = site_value(v.index, False)
            elif v.kind == "y":
                assign[v] = site_value(v.index, True)
            elif v.kind == "u":
                assign[v] = spec.u_rat(v.index)
        lead = eval_poly(parts[1], assign)
        if _not_invertible(lead):
            raise SingularStep(
                f"vanishing v-product in the forward step at site {k}",
                site=k,
                payload=lead,
            )
        rest = eval_poly(parts.get(0, P.zero()), assign)
        return _neg_div(rest, lead)

    if spec.self_dual:
        return solve(pair.gamma, xN, False)
    xv = solve(pair.gamma, xN, False)
    yv = solve(pair.gamma_tilde, yN, True)
    return (xv, yv)


def _not_invertible(v) -> bool:
    if isinstance(v, LSeries):
        return v.is_zero_to_trunc
    if isinstance(v, MultiRat):
        return v.is_zero
    return v == 0


def _neg_div(b, a):
    nb = -Fraction(b) if isinstance(b, int) else -b
    if isinstance(a, LSeries):
        return a.invert() * nb
    return nb / a


# ---------------------------------------------------------------------------
# structural cross-checks against the displayed leading/trailing terms
# ---------------------------------------------------------------------------


def displayed_gamma_terms(N: int, k: int, self_dual: bool) -> list[MultiPoly]:
    """The displayed pieces of Gamma_k; N >= 2.  At N = 2 the overlapping
    piece of the trailing term is dropped (counted once)."""
    if N < 2:
        raise ValueError("displayed terms concern N >= 2")
    up_prod = _prod(_vp(k + i) for i in range(0, N - 1))
    dn_prod = _prod(_vp(k - i) for i in range(0, N - 1))
    full_up = _prod(_vp(k + i) for i in range(0, N))
    if self_dual:
        xv = _xp
        t_a = _up(N) * xv(k + N) * full_up
        t_b = _up(N - 1) * xv(k + N - 1) * up_prod
        inner = xv(k + N - 1) * xv(k + N - 2) + 2 * sum(
            (xv(k + j) * xv(k + j - 1) for j in range(0, N - 1)), P.zero()
        )
        t_c = -_up(N) * xv(k + N - 1) * inner * up_prod
        lead_tail = xv(k) * xv(k + 1) * xv(k - N + 1)
        if N == 2:
            lead_tail = P.zero()
        t_e = -_up(N) * (lead_tail - xv(k - N) * _vp(k - N + 1)) * dn_prod
        terms = [t_a, t_b, t_c, t_e]
        # in the self-dual window y_j == x_j: rename y -> x
        return [_selfdualize(t) for t in terms]
    t_a = _up(N) * _xp(k + N) * full_up
    t_b = -_up(N) * _xp(k + N - 1) ** 2 * _yp(k + N - 2) * up_prod
    inner = _xp(k) * _yp(k - 1) + 2 * sum(
        (_xp(k + j) * _yp(k + j - 1) for j in range(1, N - 1)), P.zero()
    )
    t_c = -_up(N) * _xp(k + N - 1) * inner * up_prod
    t_d = (_up(N - 1) * _xp(k + N - 1) - _up(-N) * _yp(k + N - 1) * _xp(k - 1) * _xp(k)) * up_prod
    lead_tail = _xp(k) * _xp(k + 1) * _yp(k - N + 1)
    if N == 2:
        lead_tail = P.zero()
    t_e = -(_up(N) * lead_tail - _up(-N) * _xp(k - N) * _vp(k - N + 1)) * dn_prod
    return [t_a, t_b, t_c, t_d, t_e]


def _selfdualize(p: MultiPoly) -> MultiPoly:
    mapping = {v: P.var(x(v.index)) for v in p.variables() if v.kind == "y"}
    return p.subs_poly(mapping) if mapping else p


def _gamma_support_check(p: MultiPoly, x_rng, y_rng, u_ok: bool, what: str):
    for v in p.variables():
        if v.kind == "x" and not (x_rng[0] <= v.index <= x_rng[1]):
            raise MismatchReport(f"{what}: unexpected {v.name}", payload=p.render())
        elif v.kind == "y" and not (y_rng[0] <= v.index <= y_rng[1]):
            raise MismatchReport(f"{what}: unexpected {v.name}", payload=p.render())
        elif v.kind == "u" and not u_ok:
            raise MismatchReport(f"{what}: unexpected {v.name}")
        elif v.kind not in ("x", "y", "u"):
            raise MismatchReport(f"{what}: unexpected {v.name}")


@dataclass
class GammaStructureReport:
    N: int
    self_dual: bool
    checks: list[str] = field(default_factory=list)
    ok: bool = True

    def to_json(self):
        return {"N": self.N, "self_dual": self.self_dual, "ok": self.ok, "checks": self.checks}


def verify_gamma_structure(spec: RecursionSpec, k: int = 0) -> GammaStructureReport:
    """Support containments, displayed leading/trailing terms, and degree-1
    statements for Gamma_k and tilde-Gamma_k (Prop-level cross-check)."""
    N, sd = spec.N, spec.self_dual
    rep = GammaStructureReport(N=N, self_dual=sd)
    pair = gamma_polynomials(RecursionSpec(N, sd, spec.n), k)
    g, gt = pair.gamma, pair.gamma_tilde

    # (i) variable-support containments
    if sd:
        _gamma_support_check(g, (k - N, k + N), (0, -1), True, "Gamma support")
    else:
        _gamma_support_check(g, (k - N, k + N), (k - N + 1, k + N - 1), True, "Gamma support")
        _gamma_support_check(gt, (k - N + 1, k + N - 1), (k - N, k + N), True, "tilde-Gamma support")
    rep.checks.append("support containments")

    # (iii) degree 1 in the extremal variables, with the exact v-product coefficients
    full_up = _prod(_vp(k + i) for i in range(0, N))
    full_dn = _prod(_vp(k - i) for i in range(0, N))
    if sd:
        full_up, full_dn = _selfdualize(full_up), _selfdualize(full_dn)
        uN_m = _up(N)
    else:
        uN_m = _up(-N)
    if g.degree(x(k + N)) != 1 or g.degree(x(k - N)) != 1:
        raise MismatchReport("Gamma not degree 1 in extremal x")
    if g.coefficient_of(x(k + N), 1) != _up(N) * full_up:
        raise MismatchReport("leading coefficient of x_{k+N} differs")
    if g.coefficient_of(x(k - N), 1) != uN_m * full_dn:
        raise MismatchReport("trailing coefficient of x_{k-N} differs")
    if not sd:
        if gt.degree(y(k + N)) != 1 or gt.degree(y(k - N)) != 1:
            raise MismatchReport("tilde-Gamma not degree 1 in extremal y")
        if gt.coefficient_of(y(k + N), 1) != _up(-N) * _prod(_vp(k + i) for i in range(0, N)):
            raise MismatchReport("leading coefficient of y_{k+N} differs")
        if gt.coefficient_of(y(k - N), 1) != _up(N) * _prod(_vp(k - i) for i in range(0, N)):
            raise MismatchReport("trailing coefficient of y_{k-N} differs")
    rep.checks.append("extremal variables linear with v-product coefficients")

    # (ii) displayed terms; remainder v_k * FF with the stated support
    if N == 1:
        if sd:
            expected = k * _xp(k) + _up(1) * _selfdualize(_vp(k)) * (_xp(k + 1) + _xp(k - 1))
            if g != expected:
                raise MismatchReport("self-dual N=1 closed form differs")
        else:
            expected = k * _xp(k) + _vp(k) * (_up(1) * _xp(k + 1) + _up(-1) * _xp(k - 1))
            if g != expected:
                raise MismatchReport("N=1 Gamma closed form differs")
            expected_t = k * _yp(k) + _vp(k) * (_up(-1) * _yp(k + 1) + _up(1) * _yp(k - 1))
            if gt != expected_t:
                raise MismatchReport("N=1 tilde-Gamma closed form differs")
        rep.checks.append("N=1 closed form")
    else:
        rem = g - k * _xp(k)
        for term in displayed_gamma_terms(N, k, sd):
            rem = rem - term
        vk = _selfdualize(_vp(k)) if sd else _vp(k)
        ff = rem.divide_exact(vk)
        if ff is None:
            raise MismatchReport("Gamma remainder not divisible by v_k")
        if sd:
            _gamma_support_check(ff, (k - N + 1, k + N - 2), (0, -1), True, "FF support")
        else:
            _gamma_support_check(
                ff, (k - N + 1, k + N - 2), (k - N + 2, k + N - 2), True, "FF support"
            )
        rep.checks.append("displayed terms match; FF support shrinks")

    # sigma-duality: sigma(Gamma_k) = tilde-Gamma_k (self-dual: they coincide)
    if sd:
        if g != gt:
            raise MismatchReport("self-dual Gamma != tilde-Gamma")
    elif sigma_rename_poly(g) != gt:
        raise MismatchReport("sigma(Gamma) != tilde-Gamma")
    rep.checks.append("sigma duality")
    return rep


def gamma_dump(spec: RecursionSpec, offsets: list[int] | None = None) -> dict:
    """Canonical text of the Gamma polynomials keyed by (N, self_dual, k-n)."""
    offsets = offsets if offsets is not None else [-1, 0, 1]
    out = {}
    for off in offsets:
        k = spec.n + off
        pair = gamma_polynomials(spec, k)
        key = f"N={spec.N},self_dual={str(spec.self_dual).lower()},offset={off}"
        out[key] = {
            "gamma": pair.gamma.render(),
            "gamma_tilde": pair.gamma_tilde.render(),
        }
    return out
