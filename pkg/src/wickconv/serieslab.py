"""Truncated norm series for Wick power series smeared with Gaussians.

For one factor the ``k``-th term ``k! |d_k|**2 int int w_maj(x1, x2)**k
conj(f)(x1) f(x2)`` reduces to a two-dimensional integral over the
difference variable on a contour shifted into the tube. For two factors
the series is summed over pairing multi-indices ``K`` with kernels
``W^K`` integrated by a deterministic product Gauss-Hermite rule on
shifted contours.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from . import fields, wick
from ._numerics import hermite_rule, log_sum_exp, parallel_map
from .convergence import check_conditions_13
from .wick import CoefficientSequence, PairingMultiIndex

CONVERGES, DIVERGES, INCONCLUSIVE = "converges", "diverges", "inconclusive"
CAUCHY_TOL = 1e-10


@dataclass(frozen=True)
class ExperimentSpec:
    """One norm-series experiment.

    ``fs`` optionally gives one Gaussian per factor; otherwise ``f`` is used
    for every factor. ``shift`` and ``nodes`` control the one-factor contour
    rule (defaults scale with the Gaussian width); ``product_nodes`` and
    ``product_shift`` control the product rule, whose contour offsets are
    multiples of ``product_shift``.
    """

    model: fields.TwoPointModel
    d: CoefficientSequence
    f: fields.GaussianSpec
    n: int = 1
    N_max: int = 30
    fs: tuple[fields.GaussianSpec, ...] | None = None
    shift: float | None = None
    nodes: int | None = None
    product_nodes: int | None = None
    product_shift: float | None = None

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("n must be 1 or 2")
        cap = 60 if self.n == 1 else 12
        if not 0 <= self.N_max <= cap:
            raise ValueError(f"N_max must lie in [0, {cap}] for n = {self.n}")
        if self.fs is not None and len(self.fs) != self.n:
            raise ValueError("need one Gaussian per factor")

    @property
    def factors(self) -> tuple[fields.GaussianSpec, ...]:
        return self.fs if self.fs is not None else (self.f,) * self.n


# ---------------------------------------------------------------------------
# product quadrature for W^K(conj(f) x f)
# ---------------------------------------------------------------------------

class KernelQuadrature:
    """Product Gauss-Hermite rule for ``int W^K(x) prod conj(f_j)(x_j) prod f_j(x_{n+j}) dx``.

    Bra point ``j`` is moved to ``x - i (j+1) a e0`` and ket point ``n+j`` to
    ``x + i (j+1) a e0``; every kernel argument then lies in the backward
    tube and, by analyticity, the value equals the real-contour integral.
    """

    def __init__(self, model: fields.TwoPointModel, factors: Sequence[fields.GaussianSpec],
                 nodes: int | None = None, shift: float | None = None):
        self.model = model
        self.n = n = len(factors)
        nu_min = min(f.nu for f in factors)
        self.shift = 1.5 / nu_min if shift is None else float(shift)
        self.nodes = (24 if n == 1 else 4) if nodes is None else int(nodes)
        t, w = hermite_rule(self.nodes)
        gaussians = [f.conj() for f in factors] + list(factors)
        offsets = [-(j + 1) * self.shift for j in range(n)] + [(j + 1) * self.shift for j in range(n)]
        # per vertex and coordinate: complex node positions and weights
        pts, wts = [], []
        for g, off in zip(gaussians, offsets):
            for mu in range(fields.DIM):
                tau = off if mu == 0 else 0.0
                c = g.center[mu]
                sigma = tau - c.imag
                v = t / g.nu
                pts.append(c.real + v + 1j * tau)
                wts.append((g.nu / math.sqrt(math.pi)) * (w / g.nu)
                           * np.exp(-2j * g.nu ** 2 * v * sigma + g.nu ** 2 * sigma ** 2))
        dims = len(pts)
        mesh = np.meshgrid(*pts, indexing="ij")
        wmesh = np.meshgrid(*wts, indexing="ij")
        self.points = np.stack([m.ravel() for m in mesh]).reshape(2 * n, fields.DIM, -1)
        weight = np.ones(self.nodes ** dims, dtype=complex)
        for wm in wmesh:
            weight = weight * wm.ravel()
        self.weights = weight
        self.pairs = wick.vertex_pairs(n)

    @property
    def size(self) -> int:
        return self.weights.size

    def pair_factor(self, j: int, m: int) -> np.ndarray:
        z = self.points
        return wick.pair_factor(self.model, self.n, j, m, z[j], z[m])

    def integrate(self, K: PairingMultiIndex) -> complex:
        return self.integrate_many([K])[0]

    def integrate_many(self, Ks: Sequence[PairingMultiIndex]) -> np.ndarray:
        """``int W^K`` for many multi-indices.

        The pair factors are split into two halves; products over each half
        are cached by their counts, so every ``K`` costs one inner product.
        """
        npairs = len(self.pairs)
        half = npairs // 2
        factors = [self.pair_factor(j, m) for j, m in self.pairs]
        powers: dict = {}

        def power(i, k):
            if (i, k) not in powers:
                powers[(i, k)] = wick.int_power(factors[i], k)
            return powers[(i, k)]

        left: dict = {}
        right: dict = {}

        def product(idx, counts, cache, weighted):
            if counts not in cache:
                out = self.weights.copy() if weighted else np.ones(self.size, dtype=complex)
                for i, c in zip(idx, counts):
                    if c:
                        out = out * power(i, c)
                cache[counts] = out
            return cache[counts]

        out = np.empty(len(Ks), dtype=complex)
        for n_k, K in enumerate(Ks):
            a = product(range(half), K.counts[:half], left, True)
            b = product(range(half, npairs), K.counts[half:], right, False)
            out[n_k] = a @ b
        return out


# ---------------------------------------------------------------------------
# norm series
# ---------------------------------------------------------------------------

@dataclass
class SeriesRow:
    key: str
    log_term: float
    log_partial_sum: float
    ratio: float
    flag: str = ""


@dataclass
class SeriesReport:
    """Rows of the truncated series with its verdict.

    ``tail_bound`` estimates the omitted tail from the largest of the last
    three term ratios (``inf`` when that ratio is ``>= 1``).
    """

    rows: list[SeriesRow]
    verdict: str
    tail_bound: float
    partial_sum: float
    notes: list[str] = field(default_factory=list)
    shift_agreement: float | None = None

    def table(self):
        return [(r.key, r.log_term, r.log_partial_sum, r.ratio, r.flag) for r in self.rows]


def norm_series(spec: ExperimentSpec, threads: int | None = None) -> SeriesReport:
    """Terms, partial sums and term ratios of the norm series up to ``N_max``."""
    if spec.n == 1:
        return _norm_series_1(spec, threads)
    return _norm_series_2(spec)


def term_moments(spec: ExperimentSpec, ks, shift=None, threads=None) -> list[tuple[float, complex]]:
    """``int w_maj(u)**k h(u) du`` for each ``k`` as ``(log modulus, phase)``
    (``h`` the correlation of ``f`` with itself)."""
    f = spec.f
    _, kappa, _ = fields.correlation_gaussian(f, f)

    def one(k):
        if k == 0:
            return 0.0, 1.0 + 0j
        eta = spec.shift
        if shift == "alt":
            # a second, independent contour for the analyticity self-check
            base = fields.default_shift(spec.model, kappa, k) if eta is None else eta
            eta = base + 0.5 / math.sqrt(kappa)
        elif shift is not None:
            eta = shift
        return fields.log_contour_moment(spec.model, f, f, k, which="majorant",
                                         shift=eta, nodes=spec.nodes)

    return parallel_map(one, list(ks), threads)


def _norm_series_1(spec: ExperimentSpec, threads) -> SeriesReport:
    ks = np.arange(spec.N_max + 1)
    log_d = np.array([spec.d.log_abs(k) for k in ks])
    active = [int(k) for k in ks if log_d[k] > -np.inf]
    moments = dict(zip(active, term_moments(spec, active, threads=threads)))
    notes = []
    # contour-shift self-check on the active terms
    alt = term_moments(spec, active, shift="alt", threads=threads)
    agreement = 0.0
    for k, (l2, p2) in zip(active, alt):
        l1, p1 = moments[k]
        agreement = max(agreement, abs(p1 - p2 * math.exp(l2 - l1)))
    if agreement > 1e-6:
        notes.append(f"contour shifts disagree (relative {agreement:.3g})")
    log_terms, flags = [], []
    for k in ks:
        if log_d[k] == -np.inf:
            log_terms.append(-math.inf)
            flags.append("zero-coefficient")
            continue
        lm, phase = moments[int(k)]
        # the majorant moments are positive; a visible phase signals quadrature noise
        flags.append("sign-noise" if abs(phase - 1.0) > 1e-6 else "")
        log_terms.append(float(gammaln(k + 1) + 2 * log_d[k] + lm))
    return _assemble([str(int(k)) for k in ks], log_terms, flags, notes, agreement)


def _norm_series_2(spec: ExperimentSpec) -> SeriesReport:
    quad = KernelQuadrature(spec.model, spec.factors, spec.product_nodes, spec.product_shift)
    Ks = kset(spec.n, spec.N_max)
    vals = quad.integrate_many(Ks)
    keys, log_terms, flags = [], [], []
    order = sorted(range(len(Ks)), key=lambda i: (Ks[i].order, Ks[i].counts))
    for i in order:
        K = Ks[i]
        ld = wick.dk_coefficient(K, spec.d)
        keys.append(K.label())
        log_terms.append(ld + math.log(abs(vals[i])) if ld > -np.inf and vals[i] != 0 else -math.inf)
        flags.append("")
    notes = [f"product rule with {quad.nodes} nodes per coordinate ({quad.size} points)"]
    return _assemble(keys, log_terms, flags, notes, None)


def kset(n: int, N: int) -> list[PairingMultiIndex]:
    """Multi-indices with every vertex degree ``<= N`` (the truncation of the
    series over ``k_1, ..., k_{2n} <= N``)."""
    out = []
    for deg in itertools.product(range(N + 1), repeat=2 * n):
        out.extend(wick.enumerate_K(n, degrees=deg))
    return out


def _assemble(keys, log_terms, flags, notes, agreement) -> SeriesReport:
    rows = []
    partial = -math.inf
    prev = None
    ratios = []
    for key, lt, flag in zip(keys, log_terms, flags):
        partial = log_sum_exp([partial, lt])
        if prev is None or prev == -math.inf or lt == -math.inf:
            ratio = math.nan
        else:
            ratio = math.exp(min(lt - prev, 700.0))
        ratios.append(ratio)
        rows.append(SeriesRow(key, lt, partial, ratio, flag))
        if lt > -math.inf:
            prev = lt
    verdict, tail = _series_verdict(log_terms, ratios, partial)
    return SeriesReport(rows, verdict, tail, partial, notes, agreement)


def _series_verdict(log_terms, ratios, log_partial):
    finite = [(lt, r) for lt, r in zip(log_terms, ratios) if lt > -math.inf]
    if len(finite) <= 1:
        return CONVERGES, 0.0
    r_tail = [r for _, r in finite[-3:] if not math.isnan(r)]
    last = finite[-1][0]
    q = max(r_tail) if r_tail else math.nan
    if math.isnan(q):
        return INCONCLUSIVE, math.inf
    tail = math.inf if q >= 1 else math.exp(last) * q / (1 - q)
    quarter = [r for _, r in finite[-max(2, len(finite) // 4):] if not math.isnan(r)]
    if quarter and all(r >= 1 for r in quarter):
        return DIVERGES, math.inf
    if q < 1 and last - log_partial < math.log(CAUCHY_TOL):
        return CONVERGES, tail
    return INCONCLUSIVE, tail


def cauchy_index(report: SeriesReport, tol: float = CAUCHY_TOL) -> int | None:
    """First row index after which every term is below ``tol`` times the partial sum."""
    rows = report.rows
    for i in range(len(rows)):
        if all(r.log_term - r.log_partial_sum < math.log(tol) for r in rows[i + 1:]):
            return i
    return None


# ---------------------------------------------------------------------------
# regrouping: products of monomials versus the sum over K
# ---------------------------------------------------------------------------

@dataclass
class RegroupingResult:
    via_products: complex
    via_multi_indices: complex
    rel_error: float
    n_K: int
    notes: list[str] = field(default_factory=list)


def regrouping_check(spec: ExperimentSpec, N: int | None = None) -> RegroupingResult:
    """Compare two evaluations of the truncated norm series (signed values).

    Route (i) expands each side with :func:`wick.normal_order_reduce` and
    pairs the remaining fields with Fock permanents of majorant values;
    route (ii) sums ``D_K int W^K``. For ``n = 1`` route (i) uses
    :func:`wick.monomial_inner` on the difference variable while route (ii)
    uses the product rule, so the check also compares two quadratures.
    """
    N = spec.N_max if N is None else N
    if N > 6:
        raise ValueError("regrouping check supports N <= 6")
    quad = KernelQuadrature(spec.model, spec.factors, spec.product_nodes, spec.product_shift)
    Ks = kset(spec.n, N)
    vals = quad.integrate_many(Ks)
    logD = np.array([wick.dk_coefficient(K, spec.d) for K in Ks])
    route_ii = complex(np.sum(np.exp(logD) * vals))
    if spec.n == 1:
        f = spec.f
        route_i = 0j
        for k in range(N + 1):
            ld = spec.d.log_abs(k)
            if ld == -np.inf:
                continue
            route_i += math.exp(2 * ld) * wick.monomial_inner(k, f, f, "majorant", spec.model,
                                                              shift=spec.shift, nodes=spec.nodes)
    else:
        route_i = _route_products_2(spec, N, quad)
    rel = abs(route_i - route_ii) / max(abs(route_i), abs(route_ii), 1e-300)
    return RegroupingResult(route_i, route_ii, rel, len(Ks))


def _route_products_2(spec: ExperimentSpec, N: int, quad: KernelQuadrature) -> complex:
    w_bra = quad.pair_factor(0, 1)        # w(x_2 - x_1) on the bra side
    w_ket = quad.pair_factor(2, 3)        # w(x_3 - x_4) on the ket side
    block = np.stack([np.stack([quad.pair_factor(0, 2), quad.pair_factor(0, 3)]),
                      np.stack([quad.pair_factor(1, 2), quad.pair_factor(1, 3)])])
    W = quad.weights
    bra_pow = [w_bra ** c for c in range(N + 1)]
    ket_pow = [w_ket ** c for c in range(N + 1)]
    perm_cache: dict = {}

    def perm(rows, cols):
        key = rows + cols
        if key not in perm_cache:
            perm_cache[key] = wick.permanent_repeated(block, list(rows), list(cols))
        return perm_cache[key]

    log_d = [spec.d.log_abs(k) for k in range(N + 1)]
    expansions = {(a, b): wick.normal_order_reduce([a, b])
                  for a in range(N + 1) for b in range(N + 1)}
    # collect scalar coefficients per distinct integrand before integrating
    coeffs: dict = {}
    for k1, k2, k3, k4 in itertools.product(range(N + 1), repeat=4):
        ld = log_d[k1] + log_d[k2] + log_d[k3] + log_d[k4]
        if ld == -np.inf:
            continue
        for pb, cb in expansions[(k1, k2)].items():
            c = pb[0][1] if pb else 0
            for pk, ck in expansions[(k3, k4)].items():
                e = pk[0][1] if pk else 0
                rows, cols = (k1 - c, k2 - c), (k3 - e, k4 - e)
                if sum(rows) != sum(cols):
                    continue
                key = (c, e, rows, cols)
                coeffs.setdefault(key, []).append(math.exp(ld) * cb * ck)
    total = []
    for (c, e, rows, cols), cs in sorted(coeffs.items()):
        integral = complex((bra_pow[c] * ket_pow[e] * perm(rows, cols)) @ W)
        total.append(math.fsum(cs) * integral)
    return complex(math.fsum(v.real for v in total), math.fsum(v.imag for v in total))


# ---------------------------------------------------------------------------
# two-point function of the sum
# ---------------------------------------------------------------------------

@dataclass
class TwoPointSum:
    """``sum_k |d_k|**2 k! w(zeta)**k`` and its majorant analogue per grid point."""

    zeta: np.ndarray
    values: np.ndarray
    majorant: np.ndarray
    tail_bounds: np.ndarray
    diverged: np.ndarray
    n_terms: np.ndarray
    root_condition: bool


def two_point_of_sum(model: fields.TwoPointModel, d: CoefficientSequence, zeta,
                     k_max: int = 400, tol: float = 1e-17) -> TwoPointSum:
    """Truncated two-point series at points ``zeta`` (shape ``(m, 2)``, backward tube).

    Summation stops once a term drops below ``tol`` times the partial sum
    with ratio below 1; the tail bound is ``|t_K| q / (1 - q)`` with ``q``
    the last ratio. Points where the ratio stays ``>= 1`` up to ``k_max``, or
    where ``|w|`` lies outside :func:`radius_of_convergence`, are flagged as
    divergent.
    """
    zeta = np.atleast_2d(np.asarray(zeta, dtype=complex))
    w = fields.kernel(model, zeta[:, 0], zeta[:, 1], "indefinite")
    wm = fields.kernel(model, zeta[:, 0], zeta[:, 1], "majorant")
    root_ok = check_conditions_13(d).root_ok
    vals, majs, tails, div, nts = [], [], [], [], []
    for wi, wmi in zip(w, wm):
        v, tb, dv, nt = _resum(d, complex(wi), k_max, tol)
        vm, _, _, _ = _resum(d, complex(wmi), k_max, tol)
        vals.append(v)
        majs.append(vm)
        tails.append(tb)
        div.append(dv)
        nts.append(nt)
    return TwoPointSum(zeta, np.array(vals), np.array(majs), np.array(tails),
                       np.array(div), np.array(nts), root_ok)


def radius_of_convergence(d: CoefficientSequence) -> float:
    """Radius in ``w`` of ``sum_k k! |d_k|**2 w**k`` for the closed-form families.

    With ``|d_k| = g**k / k!**p`` the coefficients are ``g**(2k) k!**(1 - 2p)``.
    """
    if d.support_max() is not None:
        return math.inf
    if d.kind == "exponential" or d.p > 0.5:
        return math.inf
    if d.p == 0.5:
        return 1.0 / (d.g * d.g)
    return 0.0


def _resum(d: CoefficientSequence, w: complex, k_max: int, tol: float):
    if w == 0:
        return complex(math.exp(2 * d.log_abs(0))), 0.0, False, 1
    # small early terms prove nothing outside the disc of convergence
    outside = abs(w) >= radius_of_convergence(d)
    lw = math.log(abs(w))
    phase = w / abs(w)
    re, im = [], []
    prev = None
    top = d.support_max()
    last = k_max if top is None else min(k_max, top)
    q = math.nan
    for k in range(last + 1):
        ld = d.log_abs(k)
        if ld == -np.inf:
            continue
        lt = 2 * ld + float(gammaln(k + 1)) + k * lw
        t = math.exp(lt) * phase ** k
        re.append(t.real)
        im.append(t.imag)
        if prev is not None:
            q = math.exp(lt - prev)
        prev = lt
        partial = abs(complex(math.fsum(re), math.fsum(im)))
        if top is None and not outside and not math.isnan(q) and q < 1 \
                and math.exp(lt) <= tol * partial:
            return complex(math.fsum(re), math.fsum(im)), math.exp(lt) * q / (1 - q), False, k + 1
    total = complex(math.fsum(re), math.fsum(im))
    if top is not None and top <= k_max:
        return total, 0.0, False, len(re)
    diverged = outside or math.isnan(q) or q >= 1
    tail = math.inf if diverged else math.exp(prev) * q / (1 - q)
    return total, tail, diverged, len(re)
