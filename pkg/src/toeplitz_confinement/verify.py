"""Independent oracles and machine-readable reports.

Two forward-iteration oracles drive the confinement checks:

* ``iterate_exact`` runs the recursion over exact rational functions of the
  deformation parameter lambda (lambda is adjoined to the coefficient
  field), so valuations are exact and evaluating the trace at a rational
  lambda commutes *exactly* with the numeric iteration;
* ``iterate_numeric`` runs it over plain rationals and flags pole passages
  by magnitude spikes (|x|^2 > 1/lambda by default) that die out within N
  steps — the demonstration layer; the exact layer needs no threshold.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import DegenerateParameters, SingularStep
from .exact import EPS, LAM, MultiRat, VarId, alpha
from .gamma import RecursionSpec, forward_step
from .series import LSeries, default_order, rat_in_var_to_series

R = MultiRat


def lam_valuation(r: MultiRat) -> int | None:
    """Exact order of vanishing at lambda = 0 (None for the zero function)."""
    if r.is_zero:
        return None

    def min_deg(p):
        out = None
        for m in p.terms:
            d = 0
            for v, e in m:
                if v is LAM:
                    d = e
                    break
            out = d if out is None else min(out, d)
        return out

    return min_deg(r.num) - min_deg(r.den)


@dataclass
class PolePassage:
    site: int
    detail: str


@dataclass
class IterationTrace:
    mode: str  # "exact-lambda" | "numeric-rational"
    self_dual: bool
    values: dict[int, tuple]  # site -> (x, y); y is None in self-dual mode
    events: list[PolePassage] = field(default_factory=list)
    seed_sites: list[int] = field(default_factory=list)

    def series_by_site(self, var: str = "lambda", order: int | None = None):
        """Exact mode: expand each rational function as a Laurent series."""
        if self.mode != "exact-lambda":
            raise ValueError("series expansion is for the exact trace")
        order = order or default_order()
        out = {}
        for k, (xv, yv) in self.values.items():
            sx = rat_in_var_to_series(xv, LAM, var, order)
            sy = None if yv is None else rat_in_var_to_series(yv, LAM, var, order)
            out[k] = (sx, sy)
        return out

    def evaluate_at(self, assign: dict[VarId, Fraction]) -> dict[int, tuple]:
        """Exact mode: specialize every traced value (rational equality with
        the numeric trace started from the evaluated seed)."""
        out = {}
        for k, (xv, yv) in self.values.items():
            out[k] = (
                xv.evaluate(assign),
                None if yv is None else yv.evaluate(assign),
            )
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        if self.mode == "exact-lambda":
            w.writerow(["step", "k", "valuation"])
            for step, k in enumerate(sorted(self.values)):
                xv, _ = self.values[k]
                w.writerow([step, k, lam_valuation(xv)])
        else:
            w.writerow(["step", "k", "num_digits", "den_digits", "magnitude"])
            for step, k in enumerate(sorted(self.values)):
                xv, _ = self.values[k]
                w.writerow(
                    [
                        step,
                        k,
                        len(str(abs(xv.numerator))),
                        len(str(xv.denominator)),
                        float(abs(xv)) if xv.denominator < 10**300 else "inf",
                    ]
                )
        return buf.getvalue()


def confined_seed(c) -> dict[int, tuple]:
    """The 2N consecutive sites below the pole, as exact rational functions
    of lambda (the plateau and the lambda-linear site)."""
    n, N = c.n, c.N
    lam = R.var(LAM)
    seed: dict[int, tuple] = {}
    for k in range(n - 2 * N, n - 1):
        if c.self_dual:
            seed[k] = (R.var(alpha(k)), None)
        else:
            from .exact import beta

            seed[k] = (R.var(alpha(k)), R.var(beta(k)))
    if c.self_dual:
        seed[n - 1] = (R.var(EPS) + lam, None)
    else:
        am1 = R.var(alpha(n - 1))
        seed[n - 1] = (am1, R.one() / am1 + lam)
    return seed


def iterate_exact(
    spec: RecursionSpec,
    seed: dict[int, tuple],
    steps: int,
    self_dual: bool | None = None,
) -> IterationTrace:
    """Forward recursion over exact rational functions of lambda."""
    self_dual = spec.self_dual if self_dual is None else self_dual
    values = dict(seed)
    events: list[PolePassage] = []
    history = {
        k: (v[0] if self_dual else v) for k, v in values.items()
    }
    top = max(values)
    for i in range(steps):
        k_new = top + 1 + i
        site = k_new - spec.N
        nxt = forward_step(spec, history, site)
        if self_dual:
            values[k_new] = (nxt, None)
            history[k_new] = nxt
            val = lam_valuation(nxt)
        else:
            values[k_new] = nxt
            history[k_new] = nxt
            val = lam_valuation(nxt[0])
        if val is not None and val < 0:
            events.append(PolePassage(k_new, f"valuation {val}"))
    return IterationTrace(
        mode="exact-lambda",
        self_dual=self_dual,
        values=values,
        events=events,
        seed_sites=sorted(seed),
    )


def iterate_numeric(
    spec: RecursionSpec,
    seed: dict[int, tuple],
    steps: int,
    spike_threshold_sq: Fraction | None = None,
) -> IterationTrace:
    """Forward recursion over plain rationals, with spike detection."""
    self_dual = spec.self_dual
    values = {
        k: ((Fraction(v[0]), None) if self_dual else (Fraction(v[0]), Fraction(v[1])))
        for k, v in seed.items()
    }
    history = {k: (v[0] if self_dual else v) for k, v in values.items()}
    top = max(values)
    for i in range(steps):
        k_new = top + 1 + i
        site = k_new - spec.N
        nxt = forward_step(spec, history, site)
        if self_dual:
            values[k_new] = (nxt, None)
            history[k_new] = nxt
        else:
            values[k_new] = nxt
            history[k_new] = nxt
    events: list[PolePassage] = []
    if spike_threshold_sq is not None:
        ks = sorted(values)
        for k in ks:
            mag = values[k][0]
            if mag * mag > spike_threshold_sq:
                after = [
                    j for j in range(k + 1, k + spec.N + 1)
                    if j in values and values[j][0] ** 2 <= spike_threshold_sq
                ]
                if len(after) == min(spec.N, len([j for j in ks if j > k])):
                    events.append(PolePassage(k, f"|x| spike at {k}"))
    return IterationTrace(
        mode="numeric-rational",
        self_dual=self_dual,
        values=values,
        events=events,
        seed_sites=sorted(seed),
    )


# ---------------------------------------------------------------------------
# claim-keyed reporting
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    claim: str
    passed: bool
    detail: str = ""


def emit_report(results: list[CheckResult]) -> dict:
    """One JSON document with pass/fail per paper claim id."""
    claims = {}
    for r in sorted(results, key=lambda r: r.claim):
        claims[r.claim] = {"pass": bool(r.passed), "detail": r.detail}
    return {
        "claims": claims,
        "all_pass": all(r.passed for r in results),
        "count": len(results),
    }


def exit_status(report: dict) -> int:
    return 0 if report.get("all_pass") else 1
