"""Convergence criteria for Wick power series in Gelfand-Shilov spaces.

Conditions on the coefficients, the infrared and ultraviolet inequalities
relating the series ``S(L, x) = sum_k L**k k! |d_{2k}| x**k`` to indicator
functions, their simplified form for the normal exponential, a search over
power-type weight families, and a numerical diagnostic for the summability
criterion for families of holomorphic kernels.

Quantifiers such as "for arbitrarily large L" are checked on finite grids.
A verdict is read off the last decade of the grid: margins that no longer
grow mean ``holds``, margins that keep growing mean ``fails``, anything
else is ``inconclusive``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

from . import fields
from ._numerics import golden_section_min, log_sum_exp, parallel_map
from .weights import IndicatorFunction, WeightSequence, submult_witness
from .wick import CoefficientSequence

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"

LAPLACE_THRESHOLD = 200_000
_K_CAP = 10 ** 12
_K_FAR = 10 ** 250
_WINDOW_NATS = 50.0
_MAX_TERMS = 10 ** 7


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

@dataclass
class CriterionVerdict:
    """Outcome of one inequality check on a grid.

    ``margins = lhs_log - rhs_log``; ``C = exp(max margin)`` witnesses the
    inequality on the grid when ``status == "holds"``.
    """

    condition: str
    status: str
    C: float
    worst_point: float
    worst_margin: float
    grid: np.ndarray
    lhs_log: np.ndarray
    rhs_log: np.ndarray
    L: float | None = None
    eps: float | None = None
    flags: list[str] = field(default_factory=list)
    point_flags: list[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    @property
    def margins(self) -> np.ndarray:
        return self.lhs_log - self.rhs_log

    def rows(self):
        """``(grid point, lhs_log, rhs_log, margin, flag)`` tuples for reports."""
        pf = self.point_flags or [""] * len(self.grid)
        return [(float(x), float(a), float(b), float(a - b), f)
                for x, a, b, f in zip(self.grid, self.lhs_log, self.rhs_log, pf)]


def tail_verdict(grid, margins, rel_tol: float = 1e-9) -> str:
    """Classify the margins on the last decade ``grid >= grid[-1] / 10``."""
    grid = np.asarray(grid, dtype=float)
    m = np.asarray(margins, dtype=float)
    if np.any(np.isnan(m)):
        return INCONCLUSIVE
    if np.any(m == math.inf):
        return FAILS
    tail = np.where(m == -math.inf, -1e300, m)[grid >= grid[-1] / 10.0]
    if tail.size < 2:
        return INCONCLUSIVE
    diffs = np.diff(tail)
    tol = rel_tol * np.maximum(1.0, np.abs(tail[1:]))
    if np.all(diffs <= tol):
        return HOLDS
    if np.all(diffs >= -tol) and tail[-1] - tail[0] > tol[-1]:
        return FAILS
    return INCONCLUSIVE


def _make_verdict(condition, grid, lhs, rhs, L=None, eps=None, flags=(), point_flags=()):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    grid = np.asarray(grid, dtype=float)
    with np.errstate(invalid="ignore"):
        margins = lhs - rhs
    status = tail_verdict(grid, margins)
    finite = np.where(np.isnan(margins), -np.inf, margins)
    i = int(np.argmax(finite))
    worst = float(finite[i])
    C = math.inf if worst == math.inf else (0.0 if worst == -math.inf else math.exp(min(worst, 709.0)))
    return CriterionVerdict(condition, status, C, float(grid[i]), worst, grid, lhs, rhs,
                            L, eps, list(flags), list(point_flags))


# ---------------------------------------------------------------------------
# conditions on the coefficients
# ---------------------------------------------------------------------------

@dataclass
class Conditions13Report:
    """``root_ok``: ``(k! |d_{2k}|)**(1/k) -> 0``; ``submult_ok``:
    ``|d_{k+l}| <= C h**(k+l) |d_k| |d_l|`` with the reported witnesses."""

    root_ok: bool
    root_values: np.ndarray
    submult_ok: bool
    C: float
    h: float
    k_max: int
    vacuous: bool
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.root_ok and self.submult_ok


def _log_d_upto(d: CoefficientSequence, n: int) -> np.ndarray:
    """``ln|d_k|`` for ``k <= n``; table entries past ``k_max`` count as zero."""
    k = np.arange(n + 1)
    km = d.k_max
    if km is None:
        return np.asarray(d.log_abs(k), dtype=float)
    out = np.full(n + 1, -np.inf)
    top = min(n, km)
    out[:top + 1] = d.log_abs(k[:top + 1])
    return out


def check_conditions_13(d: CoefficientSequence, k_max: int = 200,
                        h_max: float = 16.0) -> Conditions13Report:
    """Test both coefficient conditions on ``k <= k_max``.

    The root condition holds when the last quartile of
    ``s_k = (k! |d_{2k}|)**(1/k)`` lies strictly below the first quartile and
    below ``1e-2 * s_1``, or when ``d_{2k}`` vanishes on the last quartile.
    Submultiplicativity is tested on the support (triples ``k, l, k + l``
    with nonzero coefficients) for ``k + l <= 2 k_max``; ``h`` is searched in
    ``[1, h_max]``.
    """
    if k_max < 8:
        raise ValueError("k_max must be >= 8")
    ld = _log_d_upto(d, 2 * k_max)
    ks = np.arange(1, k_max + 1)
    with np.errstate(invalid="ignore"):
        log_root = (gammaln(ks + 1) + ld[2 * ks]) / ks
    root = np.exp(log_root)
    q = max(1, k_max // 4)
    first, last = root[:q], root[-q:]
    notes = []
    vacuous = bool(np.all(last == 0.0))
    if vacuous:
        root_ok = True
        notes.append("d_2k vanishes on the last quartile; root condition holds vacuously")
    else:
        root_ok = bool(last.max() < first.min() and last.max() < 1e-2 * root[0])

    excess = np.full(2 * k_max + 1, -np.inf)
    for N in range(2 * k_max + 1):
        if ld[N] == -np.inf:
            continue
        k = np.arange(N + 1)
        vals = ld[N] - ld[k] - ld[N - k]
        vals = vals[np.isfinite(vals)]
        if vals.size:
            excess[N] = vals.max()
    sub = submult_witness(excess, h_max=h_max)
    if np.count_nonzero(np.isfinite(excess)) < 3:
        notes.append("fewer than three admissible sums; submultiplicativity holds vacuously")
    return Conditions13Report(root_ok, root, sub.ok, sub.C, sub.h, k_max, vacuous, notes)


# ---------------------------------------------------------------------------
# the series S(L, x)
# ---------------------------------------------------------------------------

class SeriesValue(NamedTuple):
    """``log_value`` of ``S``; ``diverges`` replaces the number when set."""
    log_value: float
    diverges: bool
    truncated: bool
    method: str
    peak: int
    n_terms: int


class _Terms:
    """``t_k = k ln L + ln k! + ln|d_{2k}| + k ln x`` and its increments."""

    def __init__(self, L: float, d: CoefficientSequence, x: float):
        self.L, self.d, self.x = L, d, x
        self.c = math.log(L) + math.log(x)

    def closed_form(self) -> bool:
        return self.d.kind in ("exponential", "factorial-power") and self.d.g > 0

    def log_term(self, k):
        k = np.asarray(k, dtype=float)
        with np.errstate(invalid="ignore"):
            return k * self.c + gammaln(k + 1) + self.d.log_abs(2 * k)

    def increment(self, k):
        """``t_{k+1} - t_k`` without cancellation (closed-form kinds)."""
        k = np.asarray(k, dtype=float)
        p = 1.0 if self.d.kind == "exponential" else self.d.p
        return (self.c + np.log(k + 1) + 2 * math.log(self.d.g)
                - p * (np.log(2 * k + 1) + np.log(2 * k + 2)))

    def curvature(self, k):
        """Derivative of :meth:`increment` in ``k``."""
        p = 1.0 if self.d.kind == "exponential" else self.d.p
        return 1.0 / (k + 1.0) - p * (2.0 / (2.0 * k + 1.0) + 2.0 / (2.0 * k + 2.0))


def series_S(L: float, d: CoefficientSequence, x: float, k_max: int | None = None) -> SeriesValue:
    """``ln sum_k L**k k! |d_{2k}| x**k``.

    With ``k_max`` the sum is truncated there and flagged when the last term
    carries more than 1e-12 of the total. Without it, closed-form
    coefficients are summed over a window around the peak term (terms are
    log-concave in ``k``); peaks beyond 2e5 use the Laplace approximation.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if not x >= 0:
        raise ValueError("x must be >= 0")
    if x == 0.0:
        return SeriesValue(float(_log_d_upto(d, 0)[0]), False, False, "exact", 0, 1)
    T = _Terms(L, d, x)
    if k_max is not None:
        ks = np.arange(k_max + 1)
        lt = T.log_term(ks) if d.k_max is None else _table_terms(T, d, k_max)
        total = log_sum_exp(lt)
        truncated = bool(lt[-1] - total > math.log(1e-12)) if total > -math.inf else False
        peak = int(np.argmax(lt))
        diverges = truncated and bool(lt[-1] >= lt[-2]) and not check_conditions_13(d).root_ok
        return SeriesValue(total, diverges, truncated, "direct", peak, k_max + 1)
    if not T.closed_form():
        top = d.support_max()
        n = max(top // 2, 0)
        lt = _table_terms(T, d, n)
        total = log_sum_exp(lt)
        truncated = d.kind == "table" and bool(lt[-1] - total > math.log(1e-12))
        return SeriesValue(total, False, truncated, "finite", int(np.argmax(lt)), n + 1)
    if float(T.increment(_K_CAP)) >= 0.0:
        # terms still grow at the cap: either divergence or a very late peak
        if not check_conditions_13(d).root_ok:
            return SeriesValue(math.inf, True, False, "diverges", _K_CAP, 0)
        if float(T.increment(_K_FAR)) >= 0.0:
            return SeriesValue(math.inf, False, True, "diverges", _K_FAR, 0)
    peak = _peak(T)
    if peak > LAPLACE_THRESHOLD:
        t_peak = float(T.log_term(peak))
        curv = float(T.curvature(peak))
        value = t_peak + 0.5 * math.log(2 * math.pi / abs(curv))
        return SeriesValue(value, False, False, "laplace", peak, 0)
    value, n_terms, truncated = _window_sum(T, peak)
    return SeriesValue(value, False, truncated, "direct", peak, n_terms)


def _table_terms(T: _Terms, d: CoefficientSequence, n: int) -> np.ndarray:
    ld = _log_d_upto(d, 2 * n)
    ks = np.arange(n + 1)
    with np.errstate(invalid="ignore"):
        return ks * T.c + gammaln(ks + 1) + ld[2 * ks]


def _peak(T: _Terms) -> int:
    """Largest ``k`` with ``t_k >= t_{k-1}`` (0 if the terms decrease from the start)."""
    if float(T.increment(0)) < 0:
        return 0
    lo, hi = 0, 1
    while float(T.increment(hi)) >= 0:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if float(T.increment(mid)) >= 0:
            lo = mid
        else:
            hi = mid
    return lo + 1


def _window_sum(T: _Terms, peak: int) -> tuple[float, int, bool]:
    t_peak = float(T.log_term(peak))
    chunk = 4096
    pieces = [np.array([t_peak])]
    # right of the peak: stop once a geometric bound on the rest is negligible
    k = peak + 1
    n_terms = 1
    truncated = False
    while True:
        ks = np.arange(k, k + chunk)
        lt = T.log_term(ks)
        inc = T.increment(ks)
        ratio = np.minimum(inc, -1e-300)
        bound = lt - np.log(-np.expm1(ratio))
        stop = np.nonzero(bound < t_peak - _WINDOW_NATS)[0]
        if stop.size:
            pieces.append(lt[:stop[0] + 1])
            n_terms += stop[0] + 1
            break
        pieces.append(lt)
        n_terms += chunk
        k += chunk
        if n_terms > _MAX_TERMS:
            truncated = True
            break
    # left of the peak
    k = peak - 1
    while k >= 0:
        lo = max(0, k - chunk + 1)
        ks = np.arange(k, lo - 1, -1)
        lt = T.log_term(ks)
        inc = T.increment(ks)
        bound = lt - np.log(-np.expm1(-np.maximum(inc, 1e-300)))
        stop = np.nonzero(bound < t_peak - _WINDOW_NATS)[0]
        if stop.size:
            pieces.append(lt[:stop[0] + 1])
            n_terms += stop[0] + 1
            break
        pieces.append(lt)
        n_terms += ks.size
        k = lo - 1
    return log_sum_exp(np.concatenate(pieces)), n_terms, truncated


# ---------------------------------------------------------------------------
# IR and UV inequalities
# ---------------------------------------------------------------------------

def _as_indicator(seq) -> IndicatorFunction:
    return seq if isinstance(seq, IndicatorFunction) else IndicatorFunction(seq)


def _series_log(L, d, x):
    v = series_S(L, d, x)
    flag = "diverges" if v.diverges else ("truncated" if v.truncated else
                                          ("laplace" if v.method == "laplace" else ""))
    return (math.inf if v.diverges else v.log_value), flag


def check_ir(d: CoefficientSequence, w_ir: Callable[[float], float], a, L: float, eps: float,
             r_grid, threads: int | None = None) -> CriterionVerdict:
    """``S(L, w_IR(r)) <= C a(eps r)`` on ``r_grid``."""
    r_grid = _sorted_grid(r_grid)
    ind = _as_indicator(a)
    rows = parallel_map(lambda r: (*_series_log(L, d, w_ir(r)), ind.evaluate(eps * r)),
                        list(r_grid), threads)
    lhs = [row[0] for row in rows]
    rhs = [row[2].log_value for row in rows]
    pflags = [_join(row[1], "a-truncated" if row[2].truncated else "") for row in rows]
    flags = sorted({f for f in pflags if f})
    return _make_verdict("IR", r_grid, lhs, rhs, L, eps, flags, pflags)


class InnerInf(NamedTuple):
    log_value: float
    t_star: float
    bracket: bool


def inner_infimum(s: float, log_g: Callable[[float], float],
                  t_range: tuple[float, float] = (1e-12, 1e3), n_grid: int = 121,
                  tol: float = 1e-10) -> InnerInf:
    """``ln inf_{t>0} exp(s t) g(t)`` given ``ln g``.

    A log-spaced grid brackets the minimum of ``s t + ln g(t)`` in ``ln t``,
    then golden-section search refines it to ``tol`` in ``ln t``. The
    ``bracket`` flag is set when the minimum sits on the grid edge.
    """
    lts = np.linspace(math.log(t_range[0]), math.log(t_range[1]), n_grid)

    def fun(lt):
        t = math.exp(lt)
        return s * t + log_g(t)

    vals = np.array([fun(v) for v in lts])
    if np.all(np.isinf(vals)) and vals[0] > 0:
        return InnerInf(math.inf, math.nan, False)
    i = int(np.argmin(vals))
    if i == 0 or i == n_grid - 1:
        return InnerInf(float(vals[i]), float(math.exp(lts[i])), True)
    lt, v = golden_section_min(fun, lts[i - 1], lts[i + 1], tol=tol)
    # the refined value never exceeds a grid sample
    v = min(v, float(vals[i]))
    return InnerInf(float(v), float(math.exp(lt)), False)


def check_uv(d: CoefficientSequence, w_uv: Callable[[float], float], b, L: float, eps: float,
             s_grid, threads: int | None = None, t_range=(1e-12, 1e3)) -> CriterionVerdict:
    """``inf_t exp(s t) S(L, w_UV(t)) <= C b(eps s)`` on ``s_grid``."""
    s_grid = _sorted_grid(s_grid)
    ind = _as_indicator(b)

    def log_g(t):
        return _series_log(L, d, w_uv(t))[0]

    def one(s):
        inner = inner_infimum(s, log_g, t_range)
        return inner, ind.evaluate(eps * s)

    rows = parallel_map(one, list(s_grid), threads)
    lhs = [r[0].log_value for r in rows]
    rhs = [r[1].log_value for r in rows]
    pflags = [_join("bracket" if r[0].bracket else "", "b-truncated" if r[1].truncated else "")
              for r in rows]
    flags = sorted({f for f in pflags if f})
    return _make_verdict("UV", s_grid, lhs, rhs, L, eps, flags, pflags)


@dataclass
class ExpCaseResult:
    """Per-``L`` verdicts for the normal exponential; ``L_best`` is the
    largest tested ``L`` for which the inequality holds (``None`` if none)."""

    ir: dict[float, CriterionVerdict]
    uv: dict[float, CriterionVerdict]
    L_best_ir: float | None
    L_best_uv: float | None
    g: float

    @property
    def ir_holds(self) -> bool:
        return all(v.holds for v in self.ir.values())

    @property
    def uv_holds(self) -> bool:
        return all(v.holds for v in self.uv.values())

    def worst(self, side: str) -> CriterionVerdict:
        table = self.ir if side == "ir" else self.uv
        order = {FAILS: 0, INCONCLUSIVE: 1, HOLDS: 2}
        return min(table.values(), key=lambda v: (order[v.status], -(v.L or 0)))


def check_exp_case(g: float, profile: fields.IRUVProfile, a, b, L_list: Sequence[float],
                   r_grid, s_grid, threads: int | None = None,
                   t_range=(1e-12, 1e3)) -> ExpCaseResult:
    """``exp(L w_IR(r)) <= C_L a(r)`` and ``inf_t exp(s t + L w_UV(t)) <= C_L b(s)``.

    The coupling only rescales ``L`` in this simplified form; it is recorded
    in the result.
    """
    r_grid, s_grid = _sorted_grid(r_grid), _sorted_grid(s_grid)
    ia, ib = _as_indicator(a), _as_indicator(b)
    w_ir = np.array([profile.w_ir(r) for r in r_grid])
    la = np.array([v.log_value for v in parallel_map(ia.evaluate, list(r_grid), threads)])
    lb = np.array([v.log_value for v in parallel_map(ib.evaluate, list(s_grid), threads)])
    ir, uv = {}, {}
    for L in L_list:
        ir[L] = _make_verdict("IR-exp", r_grid, L * w_ir, la, L, 1.0)
        inner = parallel_map(lambda s: inner_infimum(s, lambda t: L * profile.w_uv(t), t_range),
                             list(s_grid), threads)
        pflags = ["bracket" if v.bracket else "" for v in inner]
        uv[L] = _make_verdict("UV-exp", s_grid, [v.log_value for v in inner], lb, L, 1.0,
                              sorted({f for f in pflags if f}), pflags)
    best_ir = max((L for L, v in ir.items() if v.holds), default=None)
    best_uv = max((L for L, v in uv.items() if v.holds), default=None)
    return ExpCaseResult(ir, uv, best_ir, best_uv, g)


# ---------------------------------------------------------------------------
# searching the power family a_k = k**(gamma k)
# ---------------------------------------------------------------------------

@dataclass
class SpaceRecommendation:
    """Largest exponents ``gamma`` with ``a_k = k**(gamma k)`` (resp. ``b``)
    passing the check, with the bracket ``(passing, failing)`` certifying it.

    ``status`` is ``"bracketed"``, ``"unconstrained"`` (the whole search
    range passes) or ``"out of family"`` (nothing passes).
    """

    gamma_a: float | None
    gamma_b: float | None
    bracket_a: tuple[float, float] | None
    bracket_b: tuple[float, float] | None
    status_a: str
    status_b: str
    margins_a: dict[float, float] = field(default_factory=dict)
    margins_b: dict[float, float] = field(default_factory=dict)


def recommend_space(d: CoefficientSequence, profile: fields.IRUVProfile, L: float = 1.0,
                    eps: float = 1.0, r_grid=None, s_grid=None,
                    gamma_range: tuple[float, float] = (0.05, 20.0), width: float = 0.01,
                    threads: int | None = None) -> SpaceRecommendation:
    """Bisect over ``gamma`` for the IR and UV inequalities separately.

    Passing is monotone in ``gamma``: a smaller exponent gives a larger
    indicator function, so the set of passing exponents is an interval
    ``[gamma_min, gamma*]``; the bisection returns ``gamma*``.
    """
    r_grid = np.logspace(0, 6, 61) if r_grid is None else r_grid
    s_grid = np.logspace(0, 6, 61) if s_grid is None else s_grid

    def ir_check(gam):
        v = check_ir(d, profile.w_ir, WeightSequence.power(gam), L, eps, r_grid, threads)
        return v.holds, v.worst_margin

    def uv_check(gam):
        v = check_uv(d, profile.w_uv, WeightSequence.power(gam), L, eps, s_grid, threads)
        return v.holds, v.worst_margin

    ga, ba, sa, ma = _bisect_gamma(ir_check, gamma_range, width)
    gb, bb, sb, mb = _bisect_gamma(uv_check, gamma_range, width)
    return SpaceRecommendation(ga, gb, ba, bb, sa, sb, ma, mb)


def _bisect_gamma(check, gamma_range, width):
    lo, hi = gamma_range
    margins = {}
    ok_hi, margins[hi] = check(hi)
    if ok_hi:
        return hi, None, "unconstrained", margins
    ok_lo, margins[lo] = check(lo)
    if not ok_lo:
        return None, None, "out of family", margins
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        ok, margins[mid] = check(mid)
        if ok:
            lo = mid
        else:
            hi = mid
    return lo, (lo, hi), "bracketed", margins


# ---------------------------------------------------------------------------
# summability diagnostic for holomorphic kernel families
# ---------------------------------------------------------------------------

@dataclass
class Theorem1Report:
    """Per-``s`` sums ``sum_k inf_t e^{st} int |v_k(x + i t eta')| / a(|x|/A) dx``.

    ``log_terms[i, k]`` holds the log of the ``k``-th term at ``s_grid[i]``;
    ``verdict`` compares the log of the sum with ``ln b(eps s)``.
    """

    s_grid: np.ndarray
    log_terms: np.ndarray
    log_sums: np.ndarray
    verdict: CriterionVerdict
    cauchy_from: int | None
    notes: list[str]


def theorem1_diagnostic(model: fields.TwoPointModel, d: CoefficientSequence, a, b,
                        eta=(1.0, 0.0), delta: float = 1.0, eps: float = 1.0, A: float = 1.0,
                        s_grid=None, K_max: int = 20, n: int = 1, n_x: int = 201,
                        t_grid=None, r_cut_log: float = 50.0, x_max: float = 40.0,
                        threads: int | None = None) -> Theorem1Report:
    """Numerical diagnostic of the summability criterion for ``n = 1``.

    The kernel of order ``k`` is ``D_k w_maj^k`` with ``D_k = k! |d_k|**2``,
    a function of the difference variable, evaluated at ``x - i t eta``
    (``eta`` forward timelike, so the point lies in the backward tube). The
    ``x`` integral uses a trapezoid rule on a square that ends where
    ``ln a(|x|/A)`` exceeds ``r_cut_log`` (or at ``x_max``); the infimum
    over ``0 < t < delta`` is taken on a log grid of ``t``.
    """
    if n != 1:
        raise NotImplementedError("the diagnostic covers n = 1 only")
    if K_max > 30:
        raise ValueError("K_max must be <= 30")
    eta = np.asarray(eta, dtype=float)
    if not eta[0] > abs(eta[1]):
        raise ValueError("eta must be forward timelike")
    s_grid = _sorted_grid(np.logspace(0, 3, 16) if s_grid is None else s_grid)
    t_grid = np.logspace(math.log10(delta) - 6, math.log10(delta), 25) if t_grid is None \
        else np.asarray(t_grid, dtype=float)
    ia, ib = _as_indicator(a), _as_indicator(b)
    notes = []

    r_cut = _radius_where(ia, r_cut_log, x_max / A)
    X = A * r_cut
    xs = np.linspace(-X, X, n_x)
    hx = xs[1] - xs[0]
    tw = np.full(n_x, hx)
    tw[[0, -1]] *= 0.5
    W = np.outer(tw, tw)
    X0, X1 = np.meshgrid(xs, xs, indexing="ij")
    R = np.hypot(X0, X1) / A
    log_weight = -np.vectorize(ia)(R)
    if not np.all(np.isfinite(log_weight[np.isfinite(log_weight)])):
        notes.append("non-finite weights")
    if np.any(log_weight == -np.inf):
        notes.append("indicator infinite on part of the grid; weight vanishes there")
    ks = np.arange(K_max + 1)
    log_D = gammaln(ks + 1) + 2 * np.array([d.log_abs(k) for k in ks])

    def integrals(t):
        kern = fields.kernel(model, X0 - 1j * t * eta[0], X1 - 1j * t * eta[1], "majorant")
        la = np.log(np.abs(kern))
        out = np.empty(K_max + 1)
        for k in ks:
            out[k] = log_sum_exp((k * la + log_weight + np.log(W)).ravel())
        return out

    log_I = np.array(parallel_map(integrals, list(t_grid), threads))  # (n_t, K+1)
    log_terms = np.empty((len(s_grid), K_max + 1))
    for i, s in enumerate(s_grid):
        log_terms[i] = np.min(s * t_grid[:, None] + log_I, axis=0) + log_D
    log_sums = np.array([log_sum_exp(row) for row in log_terms])
    rhs = np.array([ib(eps * s) for s in s_grid])
    verdict = _make_verdict("theorem1", s_grid, log_sums, rhs, None, eps)
    # first k after which every further term is below 1e-10 of the partial sum
    cauchy_from = None
    for k in ks:
        partial = np.array([log_sum_exp(row[:k + 1]) for row in log_terms])
        rest = log_terms[:, k + 1:]
        if rest.size == 0 or np.all(rest.max(axis=1) - partial < math.log(1e-10)):
            cauchy_from = int(k)
            break
    if np.isfinite(log_D).sum() == 1:
        notes.append("single nonzero term")
    return Theorem1Report(s_grid, log_terms, log_sums, verdict, cauchy_from, notes)


def _radius_where(ind: IndicatorFunction, level: float, r_max: float) -> float:
    """Smallest ``r`` (on a doubling-then-bisect search) with ``ln a(r) >= level``."""
    if ind(r_max) < level:
        return r_max
    lo, hi = 0.0, r_max
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ind(mid) >= level:
            hi = mid
        else:
            lo = mid
    return hi


def _sorted_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float).ravel()
    if g.size == 0 or np.any(np.diff(g) <= 0) or np.any(g < 0):
        raise ValueError("grids must be nonnegative and strictly increasing")
    return g


def _join(*flags):
    return ";".join(f for f in flags if f)
