"""Truncated formal Laurent series in one distinguished variable (t or
lambda) over :class:`~toeplitz_confinement.exact.MultiRat`.

A series stores its valuation (lowest stored power), the coefficient list
from the valuation upward, and an *exclusive* truncation order: powers at or
above ``trunc`` are unknown, written ``O(t^trunc)``.  ``trunc = math.inf``
marks an exact (polynomial) series.  No operation ever pads with fabricated
zeros: truncation propagates honestly,

    trunc(f+g) = min(trunc f, trunc g)
    trunc(f*g) = min(val f + trunc g, val g + trunc f).

"Nonzero leading coefficient" is decided symbolically (MultiRat != 0);
numeric specializations re-check at evaluation time.  The working order for
operations that must truncate an exact input (inversion of a polynomial,
reversion) is the run-wide default order, settable via
:func:`set_default_order`.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .errors import (
    NotReversible,
    SingularJacobian,
    ZeroLeadingCoefficient,
)
from .exact import MultiPoly, MultiRat, VarId

INF = math.inf

_DEFAULT_ORDER = 6


def set_default_order(m: int) -> None:
    global _DEFAULT_ORDER
    if m < 1:
        raise ValueError("default order must be >= 1")
    _DEFAULT_ORDER = m


def default_order() -> int:
    return _DEFAULT_ORDER


_R_ZERO = MultiRat.zero()


class LSeries:
    """Truncated Laurent series; immutable after construction."""

    __slots__ = ("var", "val", "coeffs", "trunc")

    def __init__(self, var: str, val: int, coeffs: tuple, trunc):
        self.var = var
        self.val = val
        self.coeffs = coeffs
        self.trunc = trunc

    # -- constructors ------------------------------------------------------

    @staticmethod
    def make(var: str, val: int, coeffs, trunc=INF) -> "LSeries":
        """Normalize: strip leading/trailing zeros, clamp to trunc."""
        coeffs = [MultiRat.lift(c) for c in coeffs]
        if trunc != INF:
            coeffs = coeffs[: max(0, int(trunc) - val)]
        while coeffs and coeffs[0].is_zero:
            coeffs.pop(0)
            val += 1
        while coeffs and coeffs[-1].is_zero:
            coeffs.pop()
        if not coeffs:
            return LSeries(var, 0 if trunc == INF else int(trunc), (), trunc)
        return LSeries(var, val, tuple(coeffs), trunc)

    @staticmethod
    def zero(var: str, trunc=INF) -> "LSeries":
        return LSeries.make(var, 0, (), trunc)

    @staticmethod
    def constant(value, var: str) -> "LSeries":
        return LSeries.make(var, 0, (MultiRat.lift(value),), INF)

    @staticmethod
    def variable(var: str) -> "LSeries":
        return LSeries.make(var, 1, (MultiRat.one(),), INF)

    @staticmethod
    def monomial(value, power: int, var: str) -> "LSeries":
        return LSeries.make(var, power, (MultiRat.lift(value),), INF)

    # -- inspection ----------------------------------------------------------

    @property
    def is_exactly_zero(self) -> bool:
        return not self.coeffs and self.trunc == INF

    @property
    def is_zero_to_trunc(self) -> bool:
        return not self.coeffs

    def known(self, i: int):
        """Coefficient of var**i, or None when i is beyond the truncation."""
        if i >= self.trunc:
            return None
        if i < self.val or i >= self.val + len(self.coeffs):
            return _R_ZERO
        return self.coeffs[i - self.val]

    def coeff(self, i: int) -> MultiRat:
        c = self.known(i)
        if c is None:
            raise ZeroLeadingCoefficient(
                f"coefficient {i} of O({self.var}^{self.trunc}) series is unknown"
            )
        return c

    def leading(self) -> MultiRat:
        if not self.coeffs:
            raise ZeroLeadingCoefficient("series is zero to its truncation")
        return self.coeffs[0]

    def variables(self):
        out = set()
        for c in self.coeffs:
            out |= c.variables()
        return out

    def __eq__(self, other):
        """Exact equality of the known data (same var, val, trunc, coeffs)."""
        if not isinstance(other, LSeries):
            return NotImplemented
        return (
            self.var == other.var
            and self.trunc == other.trunc
            and self.val == other.val
            and len(self.coeffs) == len(other.coeffs)
            and all(c == d for c, d in zip(self.coeffs, other.coeffs))
        )

    def agrees_with(self, other: "LSeries", through=None) -> bool:
        """Coefficientwise agreement on the range both sides determine."""
        if self.var != other.var:
            return False
        lo = min(self.val, other.val)
        hi = min(self.trunc, other.trunc)
        if through is not None:
            hi = min(hi, through + 1)
        if hi == INF:
            hi = max(self.val + len(self.coeffs), other.val + len(other.coeffs))
        i = lo
        while i < hi:
            if self.known(i) != other.known(i):
                return False
            i += 1
        return True

    # -- arithmetic ----------------------------------------------------------

    def _check_var(self, other: "LSeries"):
        if self.var != other.var:
            raise ValueError(f"mixed series variables {self.var!r} and {other.var!r}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction, MultiPoly, MultiRat)):
            other = LSeries.constant(MultiRat.lift(other), self.var)
        if not isinstance(other, LSeries):
            return NotImplemented
        self._check_var(other)
        if self.is_exactly_zero:
            return other
        if other.is_exactly_zero:
            return self
        trunc = min(self.trunc, other.trunc)
        lo = min(self.val, other.val)
        hi = min(trunc, max(self.val + len(self.coeffs), other.val + len(other.coeffs)))
        coeffs = []
        i = lo
        while i < hi:
            coeffs.append((self.known(i) or _R_ZERO) + (other.known(i) or _R_ZERO))
            i += 1
        return LSeries.make(self.var, lo, coeffs, trunc)

    __radd__ = __add__

    def __neg__(self):
        return LSeries(self.var, self.val, tuple(-c for c in self.coeffs), self.trunc)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, MultiPoly, MultiRat)):
            other = LSeries.constant(MultiRat.lift(other), self.var)
        if not isinstance(other, LSeries):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, MultiPoly, MultiRat)):
            c = MultiRat.lift(other)
            if c.is_zero:
                return LSeries.zero(self.var)
            return LSeries.make(
                self.var, self.val, [ci * c for ci in self.coeffs], self.trunc
            )
        if not isinstance(other, LSeries):
            return NotImplemented
        self._check_var(other)
        if self.is_exactly_zero or other.is_exactly_zero:
            return LSeries.zero(self.var)
        f, g = self, other
        fv = f.val if f.coeffs else (f.trunc if f.trunc != INF else 0)
        gv = g.val if g.coeffs else (g.trunc if g.trunc != INF else 0)
        trunc = min(fv + g.trunc, gv + f.trunc)
        val = fv + gv
        if trunc == INF:
            n = len(f.coeffs) + len(g.coeffs) - 1
        else:
            n = int(trunc) - val
        out = [_R_ZERO] * max(0, n)
        for i, ci in enumerate(f.coeffs):
            if ci.is_zero:
                continue
            for j, cj in enumerate(g.coeffs):
                if i + j >= n:
                    break
                if cj.is_zero:
                    continue
                out[i + j] = out[i + j] + ci * cj
        return LSeries.make(self.var, val, out, trunc)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            return self.invert() ** (-e)
        result = LSeries.constant(MultiRat.one(), self.var)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def shift(self, d: int) -> "LSeries":
        """Multiply by var**d."""
        t = self.trunc if self.trunc == INF else self.trunc + d
        return LSeries(self.var, self.val + d, self.coeffs, t)

    def truncate(self, trunc) -> "LSeries":
        if trunc >= self.trunc:
            return self
        return LSeries.make(self.var, self.val, list(self.coeffs), trunc)

    def rename(self, var: str) -> "LSeries":
        """Same coefficients read in another formal variable."""
        return LSeries(var, self.val, self.coeffs, self.trunc)

    # -- the operations of the spec -------------------------------------------

    def invert(self, order: int | None = None) -> "LSeries":
        """Multiplicative inverse: g with f*g = 1 up to truncation."""
        if not self.coeffs:
            raise ZeroLeadingCoefficient("cannot invert a series that is zero to O")
        k = self.trunc - self.val if self.trunc != INF else (order or default_order())
        k = int(k)
        u0 = self.coeffs[0]
        iu0 = u0.inverse()
        inv = [iu0]
        for m in range(1, k):
            s = _R_ZERO
            for j in range(1, m + 1):
                uj = self.known(self.val + j) if self.val + j < self.trunc else None
                if uj is None:
                    break
                if not uj.is_zero:
                    s = s + uj * inv[m - j]
            inv.append(-(s * iu0))
        trunc = -self.val + k if self.trunc != INF else (
            -self.val + k if len(self.coeffs) > 1 else INF
        )
        return LSeries.make(self.var, -self.val, inv, trunc)

    def differentiate(self) -> "LSeries":
        """d/dvar term by term; trunc decreases by 1."""
        coeffs = []
        val = self.val - 1
        for i, c in enumerate(self.coeffs):
            p = self.val + i
            coeffs.append(c * Fraction(p))
        t = self.trunc if self.trunc == INF else self.trunc - 1
        return LSeries.make(self.var, val, coeffs, t)

    def compose(self, s: "LSeries", out_var: str | None = None) -> "LSeries":
        """f(s(.)): requires val(s) >= 1; f may have a pole."""
        sv = s if out_var is None or s.var == out_var else LSeries(
            out_var, s.val, s.coeffs, s.trunc
        )
        if sv.coeffs and sv.val < 1:
            raise ValueError("composition needs a series without constant term")
        var = sv.var
        if self.is_exactly_zero:
            return LSeries.zero(var)
        if not self.coeffs:
            cap = self.trunc * max(sv.val, 1) if self.trunc != INF else INF
            return LSeries.zero(var, cap)
        if self.val < 0 and not sv.coeffs:
            raise ZeroLeadingCoefficient(
                "pole composed with a series that is zero to its truncation"
            )
        k = len(self.coeffs)
        acc = LSeries.constant(self.coeffs[-1], var)
        for i in range(k - 2, -1, -1):
            acc = acc * sv + LSeries.constant(self.coeffs[i], var)
        if self.val:
            acc = acc * (sv ** self.val)
        if self.trunc != INF:
            cap = int(self.trunc) * (sv.val if sv.coeffs else 1)
            acc = acc.truncate(min(acc.trunc, cap))
        return acc

    def reverse(self, order: int | None = None) -> "LSeries":
        """Compositional inverse: r with self(r(lam)) = lam + O(lam^K)."""
        if not self.coeffs or self.val != 1:
            raise NotReversible("reversion needs valuation exactly 1")
        c1 = self.coeffs[0]
        if c1.is_zero:
            raise NotReversible("zero linear coefficient")
        k = self.trunc if self.trunc != INF else (order or default_order()) + 1
        if order is not None:
            k = min(k, order + 1)
        k = int(k)
        ic1 = c1.inverse()
        r = LSeries.make(self.var, 1, [ic1], k)
        for m in range(2, k):
            p = self.compose(r) - LSeries.variable(self.var)
            em = p.known(m)
            if em is None:
                break
            r = r + LSeries.monomial(-(em * ic1), m, self.var)
        return r.truncate(k)

    # -- substitution into coefficients ----------------------------------------

    def map_coeffs(self, fn) -> "LSeries":
        return LSeries.make(self.var, self.val, [fn(c) for c in self.coeffs], self.trunc)

    def subs_params(self, mapping: dict[VarId, MultiRat]) -> "LSeries":
        """Substitute rational functions for parameters in every coefficient."""
        if not mapping:
            return self
        return self.map_coeffs(lambda c: c.subs(mapping))

    def subs_param_series(self, mapping: dict["VarId", "LSeries"]) -> "LSeries":
        """Substitute same-variable series for parameters of the coefficients."""
        if not mapping:
            return self
        touched = set()
        for c in self.coeffs:
            touched |= c.variables() & mapping.keys()
        if not touched:
            return self
        out = LSeries.zero(self.var, self.trunc if self.trunc != INF else INF)
        cache: dict[VarId, list[LSeries]] = {}
        for i, c in enumerate(self.coeffs):
            cs = _rat_to_series(c, mapping, self.var, cache)
            out = out + cs.shift(self.val + i)
        return out.truncate(min(out.trunc, self.trunc))

    def evaluate_partial_sum(self, point: Fraction, assign: dict[VarId, Fraction] | None = None) -> Fraction:
        """Sum of the stored terms at var = point (exact; ignores the O-tail)."""
        total = Fraction(0)
        assign = assign or {}
        for i, c in enumerate(self.coeffs):
            total += c.evaluate(assign) * Fraction(point) ** (self.val + i)
        return total

    # -- rendering -------------------------------------------------------------

    def render(self) -> str:
        if not self.coeffs:
            body = "0"
        else:
            parts = []
            for i, c in enumerate(self.coeffs):
                p = self.val + i
                if c.is_zero:
                    continue
                if p == 0:
                    parts.append(f"({c.render()})")
                elif p == 1:
                    parts.append(f"({c.render()})*{self.var}")
                else:
                    parts.append(f"({c.render()})*{self.var}^{p}")
            body = " + ".join(parts) if parts else "0"
        if self.trunc == INF:
            return body
        return f"{body} + O({self.var}^{int(self.trunc)})"

    def to_json(self) -> dict:
        return {
            "variable": self.var,
            "valuation": self.val if self.coeffs else None,
            "trunc": None if self.trunc == INF else int(self.trunc),
            "coeffs": [c.render() for c in self.coeffs],
        }

    def __repr__(self):
        return f"LSeries({self.render()})"


def _poly_to_series(p: MultiPoly, mapping, var, cache) -> LSeries:
    def power(v: VarId, e: int) -> LSeries:
        ps = cache.setdefault(v, [LSeries.constant(MultiRat.one(), var), mapping[v]])
        while len(ps) <= e:
            ps.append(ps[-1] * ps[1])
        return ps[e]

    out = LSeries.zero(var)
    for m, c in p.terms.items():
        keep = []
        factor = None
        for v, e in m:
            if v in mapping:
                pw = power(v, e)
                factor = pw if factor is None else factor * pw
            else:
                keep.append((v, e))
        base = MultiRat.from_poly(MultiPoly.monomial(tuple(keep), c))
        if factor is None:
            out = out + LSeries.constant(base, var)
        else:
            out = out + factor * base
    return out


def _rat_to_series(c: MultiRat, mapping, var, cache) -> LSeries:
    if not (c.variables() & mapping.keys()):
        return LSeries.constant(c, var)
    num = _poly_to_series(c.num, mapping, var, cache)
    if not (c.den.variables() & mapping.keys()):
        return num * MultiRat.from_poly(c.den).inverse()
    den = _poly_to_series(c.den, mapping, var, cache)
    return num * den.invert()


def implicit_reparam(
    family: list[tuple[VarId, LSeries]], order: int | None = None
) -> dict[VarId, LSeries]:
    """Formal implicit inversion: returns parameter series p_v(t) with
    constant term v such that substituting them makes every family member
    constant (equal to its own target parameter) up to truncation.

    Precondition: the constant term of the series paired with target v is
    exactly the rational function v ("x_k(t) = a_k + O(t)").
    """
    if not family:
        return {}
    var = family[0][1].var
    k = order if order is not None else default_order()
    k = int(min([k] + [f.trunc for _, f in family if f.trunc != INF]))
    for v, f in family:
        if f.known(0) != MultiRat.var(v):
            raise SingularJacobian(
                f"constant term of the series for {v.name} is not {v.name}"
            )
    p = {v: LSeries.make(var, 0, [MultiRat.var(v)], k) for v, f in family}
    for s in range(1, k):
        corrections = {}
        for v, f in family:
            resid = f.subs_param_series(p) - LSeries.constant(MultiRat.var(v), var)
            e = resid.known(s)
            if e is None:
                corrections[v] = None
            else:
                corrections[v] = e
        for v, e in corrections.items():
            if e is not None and not e.is_zero:
                p[v] = (p[v] + LSeries.monomial(-e, s, var)).truncate(k)
    return p


def rat_in_var_to_series(r: MultiRat, v: VarId, var: str, order: int | None = None) -> LSeries:
    """Expand a rational function of the parameter v as a Laurent series in
    var (the other parameters stay symbolic in the coefficients)."""
    k = order or default_order()
    mapping = {v: LSeries.variable(var)}
    cache: dict[VarId, list[LSeries]] = {}
    num = _poly_to_series(r.num, mapping, var, cache)
    if v not in r.den.variables():
        return num * MultiRat.from_poly(r.den).inverse()
    den = _poly_to_series(r.den, mapping, var, cache)
    dval = den.val if den.coeffs else 0
    den = den.truncate(dval + k)
    nval = num.val if num.coeffs else 0
    return (num * den.invert()).truncate(nval - dval + k)
