"""Combinatorics of Wick monomials.

Permanents give Fock inner products of normal-ordered products, the
recursive normal-ordering relation expands products of monomials, and
pairing multi-indices ``K`` regroup the norm series into a sum over
contraction patterns with coefficients ``D_K`` and kernels ``W^K``.
Vertices are numbered from 0; vertex ``j < n`` is on the bra side and
``j >= n`` on the ket side.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from . import fields

PERMANENT_MAX = 20
REDUCE_MAX_DEGREE = 12


class WickError(ValueError):
    """Invalid input to a combinatorial routine."""


# ---------------------------------------------------------------------------
# permanents
# ---------------------------------------------------------------------------

def permanent(M, exact: bool = False):
    """Permanent by Ryser's formula with Gray-code row-sum updates.

    With ``exact=True`` the entries must be integers (or Fractions) and the
    sum is carried out in exact arithmetic.
    """
    if exact:
        rows = [list(r) for r in M]
    else:
        arr = np.asarray(M, dtype=complex)
        if arr.ndim != 2:
            raise WickError("permanent needs a square matrix")
        rows = arr
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise WickError("permanent needs a square matrix")
    if n > PERMANENT_MAX:
        raise WickError(f"permanent limited to n <= {PERMANENT_MAX}, got {n}")
    if n == 0:
        return 1 if exact else 1.0 + 0j
    if exact:
        for r in rows:
            for v in r:
                if not isinstance(v, (int, Fraction)) or isinstance(v, bool):
                    raise WickError("exact mode needs integer or Fraction entries")
        return _ryser_exact(rows)
    return _ryser_float(rows)


def _ryser_exact(rows):
    n = len(rows)
    sums = [0] * n
    total = 0
    prev_gray = 0
    for i in range(1, 1 << n):
        gray = i ^ (i >> 1)
        col = (gray ^ prev_gray).bit_length() - 1
        sign = 1 if gray & (1 << col) else -1
        for r in range(n):
            sums[r] += sign * rows[r][col]
        prev_gray = gray
        prod = 1
        for s in sums:
            prod *= s
        total += -prod if bin(gray).count("1") % 2 else prod
    return total * (-1) ** n


def _ryser_float(A: np.ndarray) -> complex:
    n = A.shape[0]
    sums = np.zeros(n, dtype=complex)
    re_terms, im_terms = [], []
    prev_gray = 0
    for i in range(1, 1 << n):
        gray = i ^ (i >> 1)
        col = (gray ^ prev_gray).bit_length() - 1
        if gray & (1 << col):
            sums += A[:, col]
        else:
            sums -= A[:, col]
        prev_gray = gray
        prod = complex(np.prod(sums))
        if bin(gray).count("1") % 2:
            prod = -prod
        re_terms.append(prod.real)
        im_terms.append(prod.imag)
    sign = (-1) ** n
    return sign * complex(math.fsum(re_terms), math.fsum(im_terms))


def permanent_bruteforce(M) -> complex:
    """Sum over all ``n!`` permutations; the oracle for :func:`permanent`."""
    A = np.asarray(M, dtype=complex)
    n = A.shape[0]
    terms = [np.prod(A[np.arange(n), list(p)]) for p in itertools.permutations(range(n))]
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def permanent_repeated(block: np.ndarray, row_mult: Sequence[int], col_mult: Sequence[int]):
    """Permanent of the matrix whose row ``i`` of ``block`` is repeated
    ``row_mult[i]`` times and column ``j`` ``col_mult[j]`` times.

    Uses Ryser's formula grouped by how many copies of each column are
    selected, so the cost is ``prod(col_mult + 1)`` instead of ``2**n``.
    ``block`` may carry trailing axes (pointwise evaluation on a grid).
    """
    block = np.asarray(block)
    R, C = len(row_mult), len(col_mult)
    n = sum(row_mult)
    if sum(col_mult) != n:
        raise WickError("row and column multiplicities must have equal totals")
    if n == 0:
        return np.ones(block.shape[2:], dtype=complex)
    total = np.zeros(block.shape[2:], dtype=complex)
    for sel in itertools.product(*(range(c + 1) for c in col_mult)):
        if sum(sel) == 0:
            continue
        weight = (-1) ** sum(sel)
        for c, s in zip(col_mult, sel):
            weight *= math.comb(c, s)
        term = np.full(block.shape[2:], float(weight), dtype=complex)
        for i in range(R):
            if row_mult[i] == 0:
                continue
            rs = 0
            for j, s in enumerate(sel):
                if s:
                    rs = rs + s * block[i, j]
            term = term * int_power(rs, row_mult[i])
        total = total + term
    return (-1) ** n * total


def int_power(x, k: int):
    """``x**k`` for integer ``k >= 0`` by repeated squaring (exact products of
    complex arrays, faster than the generic complex ``pow``)."""
    result = None
    base = x
    while k:
        if k & 1:
            result = base if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    return np.ones_like(x) if result is None else result


# ---------------------------------------------------------------------------
# coefficient sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSequence:
    """Magnitudes ``|d_k|`` of a Wick power series, stored as logarithms.

    Kinds: ``exponential`` (``g**k / k!``), ``monomial`` (``delta_{k,N}``),
    ``table`` (explicit values up to ``k_max``) and ``factorial-power``
    (``g**k / (k!)**p``; ``p = 0, g = 1`` is the constant sequence).
    """

    kind: str
    g: float = 1.0
    N: int = 0
    p: float = 1.0
    log_table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("exponential", "monomial", "table", "factorial-power"):
            raise WickError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "monomial" and self.N < 0:
            raise WickError("monomial degree must be >= 0")
        if self.kind == "table" and not self.log_table:
            raise WickError("table coefficients need at least one value")
        if self.kind in ("exponential", "factorial-power") and self.g < 0:
            raise WickError("coupling magnitude must be >= 0")
        if any(math.isnan(v) or v == math.inf for v in self.log_table):
            raise WickError("coefficient magnitudes must be finite")

    @classmethod
    def exponential(cls, g: float) -> "CoefficientSequence":
        return cls("exponential", g=abs(float(g)))

    @classmethod
    def monomial(cls, N: int) -> "CoefficientSequence":
        return cls("monomial", N=int(N))

    @classmethod
    def factorial_power(cls, g: float, p: float) -> "CoefficientSequence":
        return cls("factorial-power", g=abs(float(g)), p=float(p))

    @classmethod
    def constant(cls) -> "CoefficientSequence":
        return cls.factorial_power(1.0, 0.0)

    @classmethod
    def from_values(cls, values: Sequence[complex]) -> "CoefficientSequence":
        logs = tuple(math.log(abs(v)) if v != 0 else -math.inf for v in values)
        return cls("table", log_table=logs)

    @classmethod
    def from_config(cls, spec: Mapping) -> "CoefficientSequence":
        kind = spec.get("kind")
        if kind == "exponential":
            return cls.exponential(spec.get("g", 1.0))
        if kind == "monomial":
            return cls.monomial(spec["N"])
        if kind == "factorial-power":
            return cls.factorial_power(spec.get("g", 1.0), spec.get("p", 1.0))
        if kind == "constant":
            return cls.constant()
        if kind == "table":
            return cls.from_values(spec["values"])
        raise WickError(f"unknown coefficient kind {kind!r}")

    @property
    def k_max(self) -> int | None:
        """Last index with known magnitude (``None`` for closed-form families)."""
        return len(self.log_table) - 1 if self.kind == "table" else None

    @property
    def finite_support(self) -> bool:
        return self.kind in ("monomial", "table") or self.g == 0.0

    def support_max(self) -> int | None:
        """Largest ``k`` with ``d_k != 0`` when the support is finite."""
        if self.kind == "monomial":
            return self.N
        if self.kind == "table":
            nz = [k for k, v in enumerate(self.log_table) if v != -math.inf]
            return nz[-1] if nz else -1
        if self.g == 0.0:
            return 0
        return None

    def log_abs(self, k):
        """``ln|d_k|`` (``-inf`` where ``d_k = 0``); vectorized over ``k``."""
        k_arr = np.asarray(k, dtype=float)
        if np.any(k_arr < 0):
            raise WickError("coefficient index must be >= 0")
        if self.kind == "exponential":
            out = _k_log_g(k_arr, self.g) - gammaln(k_arr + 1)
        elif self.kind == "factorial-power":
            out = _k_log_g(k_arr, self.g) - self.p * gammaln(k_arr + 1)
        elif self.kind == "monomial":
            out = np.where(k_arr == self.N, 0.0, -np.inf)
        else:
            km = len(self.log_table) - 1
            if np.any(k_arr > km):
                raise WickError(f"coefficient index beyond table (k_max = {km})")
            out = np.asarray(self.log_table)[k_arr.astype(int)]
        return float(out) if np.ndim(out) == 0 else out

    def abs(self, k):
        return np.exp(self.log_abs(k))

    def check_cyclic(self) -> bool:
        """``d_1 != 0``, needed for the series to generate a cyclic domain."""
        try:
            return self.log_abs(1) > -math.inf
        except WickError:
            return False


def _k_log_g(k: np.ndarray, g: float) -> np.ndarray:
    if g == 0.0:
        return np.where(k == 0, 0.0, -np.inf)
    return k * math.log(g)


# ---------------------------------------------------------------------------
# pairing multi-indices
# ---------------------------------------------------------------------------

def vertex_pairs(n: int) -> list[tuple[int, int]]:
    """Pairs ``(j, m)``, ``j < m < 2n``, in lexicographic order."""
    return [(j, m) for j in range(2 * n) for m in range(j + 1, 2 * n)]


@dataclass(frozen=True)
class PairingMultiIndex:
    """Contraction multiplicities ``k[(j, m)]`` between vertices ``j < m`` of ``2n``."""

    n: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1:
            raise WickError("n must be >= 1")
        if len(self.counts) != self.n * (2 * self.n - 1):
            raise WickError("wrong number of pair counts")
        if any(c < 0 for c in self.counts):
            raise WickError("pair counts must be >= 0")

    @classmethod
    def from_dict(cls, n: int, k: Mapping[tuple[int, int], int]) -> "PairingMultiIndex":
        pairs = vertex_pairs(n)
        for key in k:
            if key not in pairs:
                raise WickError(f"invalid vertex pair {key}")
        return cls(n, tuple(int(k.get(p, 0)) for p in pairs))

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return vertex_pairs(self.n)

    def as_dict(self) -> dict[tuple[int, int], int]:
        return {p: c for p, c in zip(self.pairs, self.counts) if c}

    def __getitem__(self, pair: tuple[int, int]) -> int:
        j, m = sorted(pair)
        return self.counts[self.pairs.index((j, m))]

    @property
    def kappa(self) -> tuple[int, ...]:
        deg = [0] * (2 * self.n)
        for (j, m), c in zip(self.pairs, self.counts):
            deg[j] += c
            deg[m] += c
        return tuple(deg)

    @property
    def order(self) -> int:
        """``|K|``, the total number of contractions."""
        return sum(self.counts)

    def label(self) -> str:
        return "K[" + ",".join(str(c) for c in self.counts) + "]"


class KEnumeration:
    """Iterable result of :func:`enumerate_K`; ``feasible`` is false when the
    constraint admits no multi-index for a structural reason."""

    def __init__(self, n: int, gen_factory, feasible: bool, reason: str = ""):
        self.n = n
        self._factory = gen_factory
        self.feasible = feasible
        self.reason = reason

    def __iter__(self) -> Iterator[PairingMultiIndex]:
        if not self.feasible:
            return iter(())
        return (PairingMultiIndex(self.n, c) for c in self._factory())

    def count(self) -> int:
        return sum(1 for _ in self)


def enumerate_K(n: int, degrees: Sequence[int] | None = None, total: int | None = None) -> KEnumeration:
    """All multi-indices with vertex degrees ``degrees`` or with ``|K| = total``.

    Enumeration is lexicographic in the pair counts and free of duplicates.
    """
    if (degrees is None) == (total is None):
        raise WickError("give exactly one of degrees or total")
    pairs = vertex_pairs(n)
    if degrees is not None:
        degrees = tuple(int(v) for v in degrees)
        if len(degrees) != 2 * n:
            raise WickError(f"need {2 * n} degrees")
        if 2 * n > 8:
            raise WickError("degree mode supports 2n <= 8")
        if any(v < 0 for v in degrees):
            raise WickError("degrees must be >= 0")
        if sum(degrees) % 2:
            return KEnumeration(n, None, False, "odd total degree")
        if 2 * max(degrees) > sum(degrees):
            return KEnumeration(n, None, False, "a degree exceeds the sum of the others")
        return KEnumeration(n, lambda: _by_degrees(pairs, list(degrees), 0), True)
    if total < 0 or total > 40:
        raise WickError("total mode supports 0 <= N <= 40")
    return KEnumeration(n, lambda: _by_total(len(pairs), total), True)


def _by_degrees(pairs, remaining, idx):
    if idx == len(pairs):
        if not any(remaining):
            yield ()
        return
    j, m = pairs[idx]
    # pairs with first index j end at idx where m == 2n - 1; j's degree must be used up then
    last_for_j = m == len(remaining) - 1
    hi = min(remaining[j], remaining[m])
    lo = remaining[j] if last_for_j else 0
    for c in range(lo, hi + 1):
        remaining[j] -= c
        remaining[m] -= c
        for rest in _by_degrees(pairs, remaining, idx + 1):
            yield (c,) + rest
        remaining[j] += c
        remaining[m] += c


def _by_total(n_slots, total):
    if n_slots == 1:
        yield (total,)
        return
    for c in range(total + 1):
        for rest in _by_total(n_slots - 1, total - c):
            yield (c,) + rest


def pairing_multiplicity(K: PairingMultiIndex) -> int:
    """``kappa!/K!`` as an exact integer (``prod kappa_j! / prod k_jm!``)."""
    num = 1
    for v in K.kappa:
        num *= math.factorial(v)
    den = 1
    for c in K.counts:
        den *= math.factorial(c)
    q, r = divmod(num, den)
    assert r == 0
    return q


def dk_coefficient(K: PairingMultiIndex, d: CoefficientSequence) -> float:
    """``ln D_K = ln(kappa!/K!) + sum_j ln|d_{kappa_j}|``."""
    kappa = K.kappa
    km = d.k_max
    if km is not None and max(kappa) > km:
        raise WickError(f"degree {max(kappa)} beyond the coefficient table (k_max = {km})")
    log_comb = float(sum(gammaln(v + 1) for v in kappa) - sum(gammaln(c + 1) for c in K.counts))
    return log_comb + float(sum(d.log_abs(v) for v in kappa))


def count_leg_pairings(degrees: Sequence[int]) -> int:
    """Number of perfect matchings of legs with no leg paired inside its own vertex.

    Brute-force oracle: pick the first vertex with a free leg and pair that
    leg with any leg of another vertex.
    """
    return _count_legs(tuple(degrees))


@lru_cache(maxsize=None)
def _count_legs(deg: tuple[int, ...]) -> int:
    j0 = next((j for j, v in enumerate(deg) if v), None)
    if j0 is None:
        return 1
    total = 0
    for m, v in enumerate(deg):
        if m == j0 or v == 0:
            continue
        nxt = list(deg)
        nxt[j0] -= 1
        nxt[m] -= 1
        total += v * _count_legs(tuple(nxt))
    return total


def enumerate_leg_pairings(degrees: Sequence[int]) -> Iterator[tuple[tuple[int, int], ...]]:
    """Every perfect matching of labelled legs across distinct vertices.

    Legs are ``(vertex, copy)``; used to count contraction patterns directly.
    """
    legs = [(j, c) for j, v in enumerate(degrees) for c in range(v)]

    def rec(free):
        if not free:
            yield ()
            return
        a = free[0]
        for i in range(1, len(free)):
            b = free[i]
            if b[0] == a[0]:
                continue
            rest = free[1:i] + free[i + 1:]
            for tail in rec(rest):
                yield ((a, b),) + tail

    yield from rec(legs)


# ---------------------------------------------------------------------------
# normal ordering
# ---------------------------------------------------------------------------

Pattern = tuple[tuple[tuple[int, int], int], ...]


def _canon(contr: Counter) -> Pattern:
    return tuple(sorted((pair, c) for pair, c in contr.items() if c))


def normal_order_reduce(degrees: Sequence[int]) -> dict[Pattern, int]:
    """Expand ``:phi^{k_1}:(f_1) ... :phi^{k_n}:(f_n)`` into normal-ordered terms.

    Returns a map from contraction patterns (sorted tuples of
    ``((i, j), count)`` with ``i < j`` factor indices) to integer
    coefficients; the normal-ordered remainder of each term keeps
    ``k_i - sum_j count_ij`` fields of factor ``i``.

    The expansion is built from the recursive relation
    ``phi(f) :B: = :phi(f) B: + sum_{b in B} <f, b> :B \\ b:`` together with
    ``:phi^k(f): = phi(f) :phi^{k-1}(f): - (k-1) <f, f> :phi^{k-2}(f):``.
    Self-contractions cancel identically; this is asserted.
    """
    degrees = tuple(int(v) for v in degrees)
    if any(v < 0 for v in degrees):
        raise WickError("degrees must be >= 0")
    if sum(degrees) > REDUCE_MAX_DEGREE:
        raise WickError(f"normal_order_reduce limited to total degree <= {REDUCE_MAX_DEGREE}")
    # a term: (remaining legs per factor, contraction Counter) -> coefficient
    state: dict = {(tuple(0 for _ in degrees), ()): 1}
    for i in reversed(range(len(degrees))):
        state = _times_monomial(i, degrees[i], state)
    out: dict[Pattern, int] = {}
    for (legs, pattern), coef in state.items():
        if coef == 0:
            continue
        if any(p[0] == p[1] for p, _ in pattern):
            raise AssertionError("self-contraction survived normal ordering")
        out[pattern] = out.get(pattern, 0) + coef
    return {p: c for p, c in sorted(out.items()) if c}


def _times_monomial(i: int, k: int, state: dict) -> dict:
    """Left-multiply every term of ``state`` by ``:phi^k(f_i):``."""
    memo: dict[int, dict] = {0: dict(state)}

    def power(q: int) -> dict:
        if q in memo:
            return memo[q]
        res = _times_field(i, power(q - 1))
        if q >= 2:
            for key, c in power(q - 2).items():
                legs, pattern = key
                contr = Counter(dict(pattern))
                contr[(i, i)] += 1
                nkey = (legs, _canon(contr))
                res[nkey] = res.get(nkey, 0) - (q - 1) * c
        memo[q] = {key: c for key, c in res.items() if c}
        return memo[q]

    return power(k)


def _times_field(i: int, state: dict) -> dict:
    """``phi(f_i) :B:`` for every normal-ordered term ``:B:`` in ``state``."""
    res: dict = {}
    for (legs, pattern), c in state.items():
        up = list(legs)
        up[i] += 1
        key = (tuple(up), pattern)
        res[key] = res.get(key, 0) + c
        for j, nj in enumerate(legs):
            if nj == 0:
                continue
            down = list(legs)
            down[j] -= 1
            contr = Counter(dict(pattern))
            contr[(min(i, j), max(i, j))] += 1
            key = (tuple(down), _canon(contr))
            res[key] = res.get(key, 0) + c * nj
    return res


def remaining_legs(degrees: Sequence[int], pattern: Pattern) -> tuple[int, ...]:
    legs = list(degrees)
    for (i, j), c in pattern:
        legs[i] -= c
        legs[j] -= c
    return tuple(legs)


def contraction_coefficient(a: int, b: int, c: int) -> int:
    """Closed form ``C(a, c) C(b, c) c!`` for the two-factor expansion."""
    return math.comb(a, c) * math.comb(b, c) * math.factorial(c)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def pair_factor(model, n: int, j: int, m: int, zj, zm):
    """The factor attached to pair ``(j, m)`` in ``W^K`` at points ``zj, zm``.

    Points are arrays whose first axis holds the two spacetime components.
    """
    if j < n and m < n:
        d = zm - zj
        which = "indefinite"
    elif j >= n and m >= n:
        d = zj - zm
        which = "indefinite"
    else:
        d = zj - zm
        which = "majorant"
    return fields.kernel(model, d[0], d[1], which)


def wk_kernel(K: PairingMultiIndex, model):
    """Evaluator of ``W^K`` at complex point tuples.

    The returned callable takes ``z`` with shape ``(2n, 2, ...)``: bra points
    ``z[:n]`` and ket points ``z[n:]``, chosen so that every difference fed
    to a kernel lies in the backward tube.
    """
    n = K.n
    active = [(p, c) for p, c in zip(K.pairs, K.counts) if c]

    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        if z.shape[0] != 2 * n:
            raise WickError(f"expected {2 * n} points")
        out = np.ones(z.shape[2:], dtype=complex)
        for (j, m), c in active:
            out = out * pair_factor(model, n, j, m, z[j], z[m]) ** c
        return out if out.ndim else complex(out)

    return evaluate


def log_abs_wk(K: PairingMultiIndex, model, z) -> float:
    """``ln|W^K(z)|`` recomputed as ``sum k_jm ln|factor_jm|``."""
    z = np.asarray(z, dtype=complex)
    n = K.n
    total = 0.0
    for (j, m), c in zip(K.pairs, K.counts):
        if c:
            total += c * math.log(abs(complex(pair_factor(model, n, j, m, z[j], z[m]))))
    return total


def monomial_inner(k: int, f, g, which: str, model, **quad) -> complex:
    """``k! * int int kernel(x1 - x2)**k conj(f)(x1) g(x2)``: the Fock inner
    product of ``:phi^k:(f) Psi_0`` and ``:phi^k:(g) Psi_0``."""
    if k < 0:
        raise WickError("k must be >= 0")
    if k == 0:
        return f.conj().integral() * g.integral()
    return math.factorial(k) * fields.contour_moment(model, f, g, k, which=which, **quad)


# ---------------------------------------------------------------------------
# brute-force equivalence suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelftestRow:
    name: str
    passed: bool
    cases: int
    detail: str


def _full_pattern(K: PairingMultiIndex) -> Pattern:
    return tuple((p, c) for p, c in zip(K.pairs, K.counts) if c)


def selftest(seed: int = 0) -> list[SelftestRow]:
    """Compare every fast routine with its brute-force oracle."""
    rng = np.random.default_rng(seed)
    rows = []

    worst = 0.0
    for i in range(60):
        n = 1 + i % 7
        M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        ref = permanent_bruteforce(M)
        worst = max(worst, abs(permanent(M) - ref) / max(abs(ref), 1e-300))
    rows.append(SelftestRow("permanent (Ryser vs n! sum)", worst <= 1e-12, 60,
                            f"max rel err {worst:.2e}"))

    bad = 0
    for i in range(30):
        n = 1 + i % 6
        M = rng.integers(-4, 5, size=(n, n))
        if permanent(M.tolist(), exact=True) != round(permanent_bruteforce(M).real):
            bad += 1
    rows.append(SelftestRow("permanent (exact integers)", bad == 0, 30, f"{bad} mismatches"))

    bad = cases = 0
    for n in (1, 2, 3):
        for deg in itertools.product(range(4), repeat=2 * n):
            cases += 1
            total = sum(pairing_multiplicity(K) for K in enumerate_K(n, degrees=deg))
            if total != count_leg_pairings(deg):
                bad += 1
    rows.append(SelftestRow("pairing count identity", bad == 0, cases, f"{bad} mismatches"))

    bad = cases = 0
    for deg in itertools.product(range(3), repeat=4):
        cases += 1
        seen = Counter()
        for matching in enumerate_leg_pairings(deg):
            seen[tuple(sorted(Counter((a[0], b[0]) for a, b in matching).items()))] += 1
        expect = {_full_pattern(K): pairing_multiplicity(K) for K in enumerate_K(2, degrees=deg)}
        if dict(seen) != expect:
            bad += 1
    rows.append(SelftestRow("pairing classes (per K)", bad == 0, cases, f"{bad} mismatches"))

    bad = cases = 0
    for a in range(5):
        for b in range(5):
            cases += 1
            got = normal_order_reduce([a, b])
            expect = {(((0, 1), c),) if c else (): contraction_coefficient(a, b, c)
                      for c in range(min(a, b) + 1)}
            if got != expect:
                bad += 1
    rows.append(SelftestRow("normal ordering (two factors)", bad == 0, cases,
                            f"{bad} mismatches"))

    bad = cases = 0
    for deg in itertools.product(range(4), repeat=3):
        if sum(deg) > REDUCE_MAX_DEGREE:
            continue
        cases += 1
        full = {p: c for p, c in normal_order_reduce(deg).items()
                if not any(remaining_legs(deg, p))}
        expect = {_full_pattern(K): pairing_multiplicity(K) for K in _degree_profile_K(deg)}
        if sum(deg) == 0:
            expect = {(): 1}
        if full != expect:
            bad += 1
    rows.append(SelftestRow("normal ordering (full contractions)", bad == 0, cases,
                            f"{bad} mismatches"))
    return rows


def _degree_profile_K(deg: Sequence[int]) -> list[PairingMultiIndex]:
    """All pairing multi-indices among ``len(deg)`` vertices with the given degrees."""
    m = len(deg)
    pairs = [(j, k) for j in range(m) for k in range(j + 1, m)]
    out = []

    def rec(i, left, counts):
        if i == len(pairs):
            if not any(left):
                out.append(tuple(counts))
            return
        j, k = pairs[i]
        for c in range(min(left[j], left[k]) + 1):
            left[j] -= c
            left[k] -= c
            rec(i + 1, left, counts + [c])
            left[j] += c
            left[k] += c

    rec(0, list(deg), [])
    return [_GenericK(pairs, c, tuple(deg)) for c in out]


@dataclass(frozen=True)
class _GenericK:
    """Pairing multi-index over an arbitrary vertex count (no bra/ket split)."""

    pairs: list
    counts: tuple
    kappa: tuple
