"""Lattice windows, banded Lax matrices, their powers and trace invariants.

The bi-infinite lattice is truncated to a window ``k_min..k_max``; the
boundary policy decides what lives outside:

* ``GENERIC`` — fresh site symbols, so "depends on out-of-window data" is
  detectable as symbol leakage;
* ``ZERO`` — zero values;
* ``SEMI_INFINITE`` — (x_k, y_k) = (0, 0) for k < 0 and (x_0, y_0) = (1, 1);
* ``STRICT`` — any access outside the stored sites raises
  :class:`~toeplitz_confinement.errors.WindowTooSmall` (value windows).

Lax matrix entries follow

    (L_1)_{ij} = -x_i y_{j-1} + delta_{i+1,j}   for j - i <= 1, else 0,
    (L_2)_{ij} = -y_j x_{i-1} + delta_{j+1,i}   for j - i >= -1, else 0,

so L_1 is lower Hessenberg and L_2 = sigma(L_1)^T is upper Hessenberg.
Power entries are computed by local banded recursion, which makes interior
entries window-stable: widening the window never changes them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import MismatchReport, WindowTooSmall
from .exact import MultiPoly, MultiRat, VarId, x, y
from .series import LSeries


class Boundary(enum.Enum):
    GENERIC = "generic"
    ZERO = "zero"
    SEMI_INFINITE = "semi-infinite"
    STRICT = "strict"


@dataclass
class LatticeWindow:
    """Finite slice of site values (x_k, y_k) over a chosen coefficient ring.

    ``values is None`` marks the fully symbolic window (site variables).
    In self-dual mode y_k is identically x_k.
    """

    k_min: int
    k_max: int
    self_dual: bool = False
    boundary: Boundary = Boundary.GENERIC
    values: dict[int, tuple] | None = None

    @staticmethod
    def symbolic(
        k_min: int,
        k_max: int,
        self_dual: bool = False,
        boundary: Boundary = Boundary.GENERIC,
    ) -> "LatticeWindow":
        return LatticeWindow(k_min, k_max, self_dual, boundary, None)

    @staticmethod
    def from_values(
        sites: dict[int, tuple],
        self_dual: bool = False,
        boundary: Boundary = Boundary.STRICT,
    ) -> "LatticeWindow":
        ks = sorted(sites)
        return LatticeWindow(ks[0], ks[-1], self_dual, boundary, dict(sites))

    def in_range(self, k: int) -> bool:
        return self.k_min <= k <= self.k_max

    def _symbol(self, k: int, want_y: bool):
        if self.self_dual:
            want_y = False
        return MultiRat.var(y(k) if want_y else x(k))

    def _site(self, k: int, want_y: bool):
        if self.values is not None and self.in_range(k):
            pair = self.values[k]
            return pair[1 if (want_y and not self.self_dual) else 0]
        if not self.in_range(k):
            if self.boundary is Boundary.ZERO:
                return MultiRat.zero()
            if self.boundary is Boundary.SEMI_INFINITE:
                if k < 0:
                    return MultiRat.zero()
                if k == 0:
                    return MultiRat.one()
                if self.values is None:
                    return self._symbol(k, want_y)
            if self.boundary is Boundary.STRICT or self.values is not None:
                raise WindowTooSmall(
                    f"site {k} outside window [{self.k_min}, {self.k_max}]"
                )
        if self.boundary is Boundary.SEMI_INFINITE and self.values is None:
            if k < 0:
                return MultiRat.zero()
            if k == 0:
                return MultiRat.one()
        return self._symbol(k, want_y)

    def xv(self, k: int):
        return self._site(k, want_y=False)

    def yv(self, k: int):
        return self._site(k, want_y=True)

    def vv(self, k: int):
        """v_k = 1 - x_k y_k (self-dual: 1 - x_k^2)."""
        return 1 - self.xv(k) * self.yv(k)

    def sites(self) -> list[int]:
        return list(range(self.k_min, self.k_max + 1))

    def sigma(self) -> "LatticeWindow":
        """Swap x_k and y_k at every site."""
        if self.self_dual:
            return self
        if self.values is None:
            return _SwappedWindow(self)
        vals = {k: (p[1], p[0]) for k, p in self.values.items()}
        return LatticeWindow(self.k_min, self.k_max, False, self.boundary, vals)


class _SwappedWindow(LatticeWindow):
    """Symbolic window with the roles of x and y exchanged."""

    def __init__(self, base: LatticeWindow):
        super().__init__(base.k_min, base.k_max, base.self_dual, base.boundary, None)
        self._base = base

    def xv(self, k: int):
        return self._base.yv(k)

    def yv(self, k: int):
        return self._base.xv(k)

    def sigma(self) -> LatticeWindow:
        return self._base


@dataclass
class BandedMatrix:
    """Windowed Lax matrix; entries indexed by absolute site pairs."""

    which: str  # "L1" or "L2"
    k_min: int
    k_max: int
    entries: dict[tuple[int, int], object] = field(default_factory=dict)

    def entry(self, i: int, j: int):
        return self.entries.get((i, j), MultiRat.zero())

    def transpose(self) -> "BandedMatrix":
        return BandedMatrix(
            self.which + "^T",
            self.k_min,
            self.k_max,
            {(j, i): v for (i, j), v in self.entries.items()},
        )


def _l1_entry(w: LatticeWindow, i: int, j: int):
    if j - i > 1:
        return None
    e = -(w.xv(i) * w.yv(j - 1))
    if j == i + 1:
        e = e + 1
    return e


def _l2_entry(w: LatticeWindow, i: int, j: int):
    if j - i < -1:
        return None
    e = -(w.yv(j) * w.xv(i - 1))
    if j == i - 1:
        e = e + 1
    return e


def build_lax(w: LatticeWindow, which: str) -> BandedMatrix:
    """Windowed L1 or L2 with the boundary policy supplying outside sites."""
    fn = _l1_entry if which == "L1" else _l2_entry
    entries = {}
    for i in w.sites():
        for j in w.sites():
            e = fn(w, i, j)
            if e is not None:
                entries[(i, j)] = e
    return BandedMatrix(which, w.k_min, w.k_max, entries)


def matrix_power_entry(
    w: LatticeWindow,
    which: str,
    s: int,
    i: int,
    j: int,
    require_edge_free: bool = False,
    _memo: dict | None = None,
):
    """Entry (i, j) of the s-th power of L1 or L2, by local banded recursion.

    The recursion never touches sites the entry does not mathematically
    depend on, so interior results are independent of window extension.
    With ``require_edge_free`` a symbolic result leaking out-of-window site
    variables raises WindowTooSmall.
    """
    if s < 1:
        raise ValueError("power must be >= 1")
    memo: dict = {} if _memo is None else _memo
    val = _power_entry(w, which, s, i, j, memo)
    if require_edge_free and isinstance(val, MultiRat):
        for v in val.variables():
            if v.kind in ("x", "y") and not w.in_range(v.index):
                raise WindowTooSmall(
                    f"entry ({i},{j}) of {which}^{s} depends on site {v.index}"
                )
    return val


def _power_entry(w, which, s, i, j, memo):
    key = (which, s, i, j)
    if key in memo:
        return memo[key]
    if s == 1:
        e = (_l1_entry if which == "L1" else _l2_entry)(w, i, j)
        e = MultiRat.zero() if e is None else e
        memo[key] = e
        return e
    if which == "L1":
        lo, hi = j - 1, i + s - 1
    else:
        lo, hi = i - s + 1, j + 1
    total = 0
    for c in range(lo, hi + 1):
        left = _power_entry(w, which, s - 1, i, c, memo)
        right = _power_entry(w, which, 1, c, j, memo)
        if _is_zero(left) or _is_zero(right):
            continue
        total = left * right + total
    if isinstance(total, int):
        total = MultiRat.zero()
    memo[key] = total
    return total


def _is_zero(v) -> bool:
    if isinstance(v, MultiRat):
        return v.is_zero
    if isinstance(v, LSeries):
        return v.is_exactly_zero
    if isinstance(v, (int, Fraction)):
        return v == 0
    return False


def hamiltonian(w: LatticeWindow, l: int, i: int):
    """Windowed H_i^{(l)} = -(1/i) * sum of interior diagonal entries of L_l^i.

    Window-relative: only rows whose entry is edge-free contribute, so the
    value is the exact restriction of the bi-infinite trace to those rows.
    """
    lo, hi = w.k_min + i, w.k_max - i + 1
    if lo > hi:
        raise WindowTooSmall(f"no interior rows for L^{i} on [{w.k_min}, {w.k_max}]")
    memo: dict = {}
    total = 0
    which = "L1" if l == 1 else "L2"
    for k in range(lo, hi + 1):
        total = total + _power_entry(w, which, i, k, k, memo)
    return total * Fraction(-1, i)


# ---------------------------------------------------------------------------
# sigma renaming and the Appendix (Lemma on L1^s entries) cross-checks
# ---------------------------------------------------------------------------


def sigma_rename_poly(p: MultiPoly) -> MultiPoly:
    """x_k <-> y_k and u_i <-> u_{-i} (the lattice duality on polynomials)."""
    mapping: dict[VarId, MultiPoly] = {}
    for v in p.variables():
        if v.kind == "x":
            mapping[v] = MultiPoly.var(y(v.index))
        elif v.kind == "y":
            mapping[v] = MultiPoly.var(x(v.index))
        elif v.kind == "u":
            mapping[v] = MultiPoly.var(VarId("u", -v.index))
    return p.subs_poly(mapping)


def shift_rename_poly(p: MultiPoly, d: int) -> MultiPoly:
    """Relabel every site index k -> k + d."""
    mapping: dict[VarId, MultiPoly] = {}
    for v in p.variables():
        if v.kind in ("x", "y", "a", "b", "alpha", "beta"):
            mapping[v] = MultiPoly.var(VarId(v.kind, v.index + d))
    return p.subs_poly(mapping)


def as_poly(value: MultiRat) -> MultiPoly:
    if not value.den.is_const:
        raise MismatchReport("expected a polynomial value", payload=value.render())
    return value.num * (1 / value.den.const_value())


def _xp(k: int) -> MultiPoly:
    return MultiPoly.var(x(k))


def _yp(k: int) -> MultiPoly:
    return MultiPoly.var(y(k))


def _vp(k: int) -> MultiPoly:
    return MultiPoly.one() - _xp(k) * _yp(k)


def _prod(factors) -> MultiPoly:
    out = MultiPoly.one()
    for f in factors:
        out = out * f
    return out


def displayed_power_diagonal_terms(s: int, k: int) -> list[MultiPoly]:
    """The displayed leading/middle/trailing terms of (L1^s)_{kk}.

    For s = 2 the trailing term duplicates the first middle piece and is
    counted once (it is dropped from this list).
    """
    lead = -_xp(k + s - 1) * _yp(k - 1) * _prod(_vp(k + i - 1) for i in range(1, s))
    mid_prod = _prod(_vp(k + i - 1) for i in range(1, s - 1))
    t2 = _xp(k + s - 2) ** 2 * _yp(k + s - 3) * _yp(k - 1) * mid_prod
    inner = _yp(k - 2) * _vp(k - 1) - 2 * _yp(k - 1) * sum(
        (_xp(k + j - 1) * _yp(k + j - 2) for j in range(1, s - 1)), MultiPoly.zero()
    )
    t3 = -_xp(k + s - 2) * inner * mid_prod
    terms = [lead, t2, t3]
    if s > 2:
        trail = -_xp(k) * _yp(k - s) * _prod(_vp(k - i) for i in range(1, s))
        terms.append(trail)
    return terms


def displayed_power_subdiagonal_terms(s: int, k: int) -> list[MultiPoly]:
    lead = -_xp(k + s) * _yp(k - 1) * _prod(_vp(k + i) for i in range(1, s))
    trail = -_xp(k + 1) * _yp(k - s) * _prod(_vp(k - i) for i in range(1, s))
    return [lead, trail]


def _support_check(p: MultiPoly, x_range: tuple[int, int], y_range: tuple[int, int], what: str):
    for v in p.variables():
        if v.kind == "x" and not (x_range[0] <= v.index <= x_range[1]):
            raise MismatchReport(f"{what}: unexpected variable {v.name}", payload=p.render())
        if v.kind == "y" and not (y_range[0] <= v.index <= y_range[1]):
            raise MismatchReport(f"{what}: unexpected variable {v.name}", payload=p.render())
        if v.kind not in ("x", "y"):
            raise MismatchReport(f"{what}: non-site variable {v.name}")


@dataclass
class AppendixReport:
    s: int
    checks: list[str]
    ok: bool = True

    def to_json(self) -> dict:
        return {"s": self.s, "ok": self.ok, "checks": self.checks}


def verify_appendix_structure(s: int, k: int = 0) -> AppendixReport:
    """Variable-support and displayed-term checks for (L1^s)_{kk} and
    (L1^s)_{k+1,k}; raises MismatchReport on the first differing term."""
    if s < 2:
        raise ValueError("the structure lemma concerns s >= 2")
    w = LatticeWindow.symbolic(k - s - 1, k + s + 1)
    checks: list[str] = []

    diag = as_poly(matrix_power_entry(w, "L1", s, k, k))
    _support_check(diag, (k - s + 1, k + s - 1), (k - s, k + s - 2), f"(L1^{s})_kk support")
    checks.append(f"(L1^{s})_kk support in x[{k-s+1}..{k+s-1}], y[{k-s}..{k+s-2}]")

    rem = diag
    for term in displayed_power_diagonal_terms(s, k):
        rem = rem - term
    _support_check(
        rem, (k - s + 2, k + s - 3), (k - s + 1, k + s - 3), f"(L1^{s})_kk remainder"
    )
    checks.append(f"(L1^{s})_kk displayed terms match; remainder support shrinks")

    sub = as_poly(matrix_power_entry(w, "L1", s, k + 1, k))
    _support_check(sub, (k - s + 1, k + s), (k - s, k + s - 1), f"(L1^{s})_k+1,k support")
    rem = sub
    for term in displayed_power_subdiagonal_terms(s, k):
        rem = rem - term
    _support_check(
        rem, (k - s + 2, k + s - 1), (k - s + 1, k + s - 2), f"(L1^{s})_k+1,k remainder"
    )
    checks.append(f"(L1^{s})_k+1,k displayed terms match; remainder support shrinks")
    return AppendixReport(s=s, checks=checks)
