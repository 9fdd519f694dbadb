"""Gelfand-Shilov weight sequences, their indicator functions and the
Young/Legendre duality between weight functions and sequences.

Every quantity is handled through its logarithm: ``k!`` and ``k**(g*k)``
overflow double precision near ``k = 170`` while the sequences are routinely
probed at ``k`` of order ``1e12``.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammaln

from ._numerics import ConvergenceError, bracket_max, golden_section_max

DEFAULT_K_MAX = 4096
# integer search ceiling for closed-form families (about 1e18)
_K_CEILING = 2 ** 60


class WeightError(ValueError):
    """Invalid weight sequence or weight function."""


# ---------------------------------------------------------------------------
# weight sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSequence:
    """A defining sequence ``a_k`` of a space ``S_a^b`` (or ``b_l``).

    ``kind`` is one of

    * ``"power"``: ``a_k = k**(gamma*k)`` with ``a_0 = 1``;
    * ``"factorial-power"``: ``a_k = (k!)**gamma``;
    * ``"table"``: explicit values for ``k <= k_max``, stored as logarithms.

    Use the classmethod constructors rather than calling this directly.
    """

    kind: str
    gamma: float = 1.0
    log_table: tuple[float, ...] | None = None
    k_max: int = DEFAULT_K_MAX

    def __post_init__(self):
        if self.kind in ("power", "factorial-power"):
            if not (math.isfinite(self.gamma) and self.gamma >= 0):
                raise WeightError(f"gamma must be finite and >= 0, got {self.gamma}")
        elif self.kind == "table":
            if not self.log_table:
                raise WeightError("empty table")
            if not all(math.isfinite(v) for v in self.log_table):
                raise WeightError("table values must be positive and finite")
            object.__setattr__(self, "k_max", len(self.log_table) - 1)
        else:
            raise WeightError(f"unknown sequence kind {self.kind!r}")
        if self.k_max < 0:
            raise WeightError("k_max must be >= 0")

    # -- constructors -------------------------------------------------------
    @classmethod
    def power(cls, gamma: float, k_max: int = DEFAULT_K_MAX) -> "WeightSequence":
        return cls("power", gamma=float(gamma), k_max=k_max)

    @classmethod
    def factorial_power(cls, gamma: float, k_max: int = DEFAULT_K_MAX) -> "WeightSequence":
        return cls("factorial-power", gamma=float(gamma), k_max=k_max)

    @classmethod
    def from_values(cls, values) -> "WeightSequence":
        vals = np.asarray(values, dtype=float)
        if vals.size == 0:
            raise WeightError("empty table")
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            raise WeightError("table values must be positive and finite")
        return cls("table", log_table=tuple(np.log(vals).tolist()))

    @classmethod
    def from_log_values(cls, log_values) -> "WeightSequence":
        return cls("table", log_table=tuple(float(v) for v in log_values))

    @classmethod
    def from_csv(cls, path) -> "WeightSequence":
        """Load a two-column ``k, a_k`` CSV file (a header row is allowed)."""
        pairs = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    pairs.append((int(row[0]), float(row[1])))
                except ValueError:
                    if pairs:
                        raise WeightError(f"bad row in {path}: {row}") from None
        if not pairs:
            raise WeightError(f"no data rows in {path}")
        pairs.sort()
        ks = [k for k, _ in pairs]
        if ks != list(range(len(ks))):
            raise WeightError("table must list k = 0, 1, 2, ... without gaps")
        return cls.from_values([v for _, v in pairs])

    @classmethod
    def from_config(cls, spec: dict) -> "WeightSequence":
        family = spec.get("family")
        if family == "power":
            return cls.power(spec.get("gamma", 1.0), spec.get("k_max", DEFAULT_K_MAX))
        if family == "factorial-power":
            return cls.factorial_power(spec.get("gamma", 1.0), spec.get("k_max", DEFAULT_K_MAX))
        if family == "table":
            if "path" in spec:
                return cls.from_csv(spec["path"])
            return cls.from_values(spec["values"])
        raise WeightError(f"unknown sequence family {family!r}")

    # -- evaluation ---------------------------------------------------------
    @property
    def is_table(self) -> bool:
        return self.kind == "table"

    def log_values(self, k) -> np.ndarray:
        """``ln a_k`` for integer ``k`` (vectorized)."""
        k = np.asarray(k)
        if self.kind == "table":
            if np.any(k > self.k_max) or np.any(k < 0):
                raise WeightError(f"k outside the table range 0..{self.k_max}")
            return np.asarray(self.log_table)[k]
        kf = k.astype(float)
        if self.kind == "power":
            with np.errstate(divide="ignore", invalid="ignore"):
                out = self.gamma * np.where(kf > 0, kf * np.log(np.where(kf > 0, kf, 1.0)), 0.0)
            return out
        return self.gamma * gammaln(kf + 1.0)

    def log_value(self, k: int) -> float:
        return float(self.log_values(np.asarray([k]))[0])

    def log_increment(self, k: int) -> float:
        """``ln a_k - ln a_{k-1}`` for ``k >= 1``, computed without cancellation."""
        if k < 1:
            raise ValueError("increments start at k = 1")
        if self.kind == "table":
            return self.log_table[k] - self.log_table[k - 1]
        if self.kind == "factorial-power":
            return self.gamma * math.log(k)
        if k == 1:
            return 0.0
        # k ln k - (k-1) ln(k-1) = ln k + (k-1) ln(k/(k-1))
        return self.gamma * (math.log(k) + (k - 1) * math.log1p(1.0 / (k - 1)))

    def tabulate(self, k_max: int | None = None) -> np.ndarray:
        k_max = self.k_max if k_max is None else k_max
        if self.is_table:
            k_max = min(k_max, self.k_max)
        return self.log_values(np.arange(k_max + 1))


class IndicatorValue(NamedTuple):
    log_value: float
    argmax: int
    truncated: bool


def indicator(seq: WeightSequence, r: float) -> IndicatorValue:
    """Indicator function ``a(r) = sup_k r**k / a_k`` in the log domain.

    For log-convex sequences the maximand is unimodal in ``k`` and the argmax
    is the largest ``k`` whose ratio ``a_k / a_{k-1}`` does not exceed ``r``.
    Closed-form families are searched over all ``k``; tables only up to
    ``k_max`` and the result is flagged ``truncated`` when the argmax sits on
    the last tabulated index.
    """
    r = float(r)
    if not math.isfinite(r):
        raise ValueError(f"r must be finite, got {r}")
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    if r == 0.0:
        return IndicatorValue(-seq.log_value(0), 0, seq.is_table and seq.k_max == 0)
    log_r = math.log(r)
    if seq.is_table:
        return _indicator_table(seq, log_r)
    if seq.gamma == 0.0:
        # a_k = 1: sup_k r**k
        if log_r > 0:
            return IndicatorValue(math.inf, -1, False)
        return IndicatorValue(0.0, 0, False)
    # largest k with increment <= ln r; increments strictly increase from k = 2
    if seq.log_increment(1) > log_r:
        k = 0
    else:
        lo, hi = 1, 2
        while seq.log_increment(hi) <= log_r:
            lo, hi = hi, hi * 2
            if hi > _K_CEILING:
                return _indicator_continuous(seq, log_r)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if seq.log_increment(mid) <= log_r:
                lo = mid
            else:
                hi = mid
        k = lo
    return IndicatorValue(k * log_r - seq.log_value(k), k, False)


def _indicator_continuous(seq: WeightSequence, log_r: float) -> IndicatorValue:
    """Sup over real ``k`` once the argmax is beyond 2**60.

    The discrete and continuous sups then differ by far less than double
    precision resolves. For ``k**(gamma k)`` the maximizer is
    ``k* = r**(1/gamma) / e`` with value ``gamma k*``; for ``(k!)**gamma`` it
    solves ``digamma(k + 1) = ln(r) / gamma``, i.e. ``k* ~ r**(1/gamma) - 1/2``.
    """
    expo = log_r / seq.gamma
    if expo > 700.0:
        return IndicatorValue(math.inf, -1, False)
    if seq.kind == "power":
        k_star = math.exp(expo - 1.0)
        return IndicatorValue(seq.gamma * k_star, int(k_star), False)
    k_star = math.exp(expo) - 0.5
    value = k_star * log_r - seq.gamma * float(gammaln(k_star + 1.0))
    return IndicatorValue(value, int(k_star), False)


def _indicator_table(seq: WeightSequence, log_r: float) -> IndicatorValue:
    la = np.asarray(seq.log_table)
    vals = np.arange(la.size) * log_r - la
    # ties resolve to the largest index, matching the ratio test
    k = int(la.size - 1 - np.argmax(vals[::-1]))
    return IndicatorValue(float(vals[k]), k, k == seq.k_max)


@dataclass
class IndicatorFunction:
    """Callable ``r -> ln a(r)`` with a thread-safe evaluation cache."""

    seq: WeightSequence
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def evaluate(self, r: float) -> IndicatorValue:
        key = float(r)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        value = indicator(self.seq, key)
        with self._lock:
            self._cache[key] = value
        return value

    def __call__(self, r: float) -> float:
        return self.evaluate(r).log_value

    def log_values(self, rs) -> np.ndarray:
        return np.array([self(r) for r in np.asarray(rs, dtype=float).ravel()])


# ---------------------------------------------------------------------------
# weight functions and Legendre transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightFunction:
    """A nonnegative increasing function on ``s >= 0`` used as ``alpha`` or ``beta``.

    Kinds:

    * ``"power"``: ``coef * s**sigma``;
    * ``"exp"``: ``coef * (exp(s) - 1)``;
    * ``"xlogx"``: ``r ln r - r + 1`` for ``r >= 1`` and 0 below (the conjugate of ``exp(s) - 1``);
    * ``"barrier"``: 0 on ``[0, coef]`` and ``+inf`` beyond (the conjugate of ``coef * s``);
    * ``"table"``: piecewise linear through ``(s_i, v_i)`` with linear extrapolation;
    * ``"conjugate"``: the numerical Legendre transform of ``base``.
    """

    kind: str
    coef: float = 1.0
    sigma: float = 2.0
    samples: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    base: "WeightFunction | None" = None

    def __post_init__(self):
        if self.kind in ("power", "exp", "barrier") and not self.coef > 0:
            raise WeightError("coef must be positive")
        if self.kind == "power" and not self.sigma >= 1:
            raise WeightError("power weights need sigma >= 1 to be convex")
        if self.kind == "table":
            s, v = (np.asarray(a, dtype=float) for a in self.samples)
            if s.size < 3 or s.size != v.size:
                raise WeightError("a table needs at least three (s, value) samples")
            if np.any(np.diff(s) <= 0):
                raise WeightError("table abscissae must increase")
            slopes = np.diff(v) / np.diff(s)
            scale = np.maximum(1.0, np.abs(slopes[1:]))
            bad = np.nonzero(np.diff(slopes) < -1e-12 * scale)[0]
            if bad.size:
                raise WeightError(f"table is not convex near s = {s[bad[0] + 1]}")
        if self.kind == "conjugate" and self.base is None:
            raise WeightError("conjugate weight needs a base function")
        if self.kind not in ("power", "exp", "xlogx", "barrier", "table", "conjugate"):
            raise WeightError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def power(cls, sigma: float, coef: float = 1.0) -> "WeightFunction":
        return cls("power", coef=float(coef), sigma=float(sigma))

    @classmethod
    def exponential(cls, coef: float = 1.0) -> "WeightFunction":
        return cls("exp", coef=float(coef))

    @classmethod
    def table(cls, s, values) -> "WeightFunction":
        return cls("table", samples=(tuple(map(float, s)), tuple(map(float, values))))

    @classmethod
    def from_config(cls, spec: dict) -> "WeightFunction":
        kind = spec.get("kind")
        if kind == "power":
            return cls.power(spec.get("sigma", 2.0), spec.get("coef", 1.0))
        if kind == "exp":
            return cls.exponential(spec.get("coef", 1.0))
        if kind == "table":
            return cls.table(spec["s"], spec["values"])
        raise WeightError(f"unknown weight function kind {kind!r}")

    def __call__(self, s: float) -> float:
        s = float(s)
        k = self.kind
        if k == "power":
            if s <= 0:
                return 0.0
            return _safe_exp(math.log(self.coef) + self.sigma * math.log(s))
        if k == "exp":
            return self.coef * math.expm1(s) if s < 700 else math.inf
        if k == "xlogx":
            return s * math.log(s) - s + 1.0 if s > 1.0 else 0.0
        if k == "barrier":
            return 0.0 if s <= self.coef else math.inf
        if k == "table":
            xs, vs = self.samples
            if s <= xs[-1]:
                return float(np.interp(s, xs, vs))
            slope = (vs[-1] - vs[-2]) / (xs[-1] - xs[-2])
            return vs[-1] + slope * (s - xs[-1])
        return legendre(self.base, s)

    def derivative(self, s: float) -> float | None:
        """Right derivative where a closed form is known, else ``None``."""
        s = float(s)
        k = self.kind
        if k == "power":
            if self.sigma == 1.0:
                return self.coef
            return self.coef * self.sigma * s ** (self.sigma - 1.0) if s > 0 else 0.0
        if k == "exp":
            return self.coef * math.exp(s)
        if k == "xlogx":
            return math.log(s) if s > 1.0 else 0.0
        if k == "conjugate":
            # envelope theorem: the slope of the conjugate is the maximizer
            return legendre_argmax(self.base, s)
        return None

    def slope_limit(self) -> float:
        """``lim_{s->inf} f(s)/s``; finite only for linearly growing functions."""
        if self.kind == "power" and self.sigma == 1.0:
            return self.coef
        if self.kind == "table":
            xs, vs = self.samples
            return (vs[-1] - vs[-2]) / (xs[-1] - xs[-2])
        return math.inf

    def conjugate(self) -> "WeightFunction":
        """Convex conjugate, in closed form for the built-in families.

        Falls back to a numerically evaluated ``"conjugate"`` weight.
        """
        if self.kind == "power":
            if self.sigma == 1.0:
                return WeightFunction("barrier", coef=self.coef)
            q = self.sigma / (self.sigma - 1.0)
            c = (1.0 - 1.0 / self.sigma) * (self.coef * self.sigma) ** (-1.0 / (self.sigma - 1.0))
            return WeightFunction.power(q, c)
        if self.kind == "exp" and self.coef == 1.0:
            return WeightFunction("xlogx")
        return WeightFunction("conjugate", base=self)


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def _check_convex_table(alpha: WeightFunction):
    if alpha.kind != "table":
        return
    # re-validated here so callers constructing via dataclasses.replace are caught
    WeightFunction.table(*alpha.samples)


def legendre_argmax(alpha: WeightFunction, r: float) -> float:
    """Maximizer ``s*`` of ``r s - alpha(s)`` over ``s >= 0`` (``inf`` if unbounded)."""
    return _legendre(alpha, r)[1]


def legendre(alpha: WeightFunction, r: float) -> float:
    """Convex conjugate ``sup_{s >= 0} (r s - alpha(s))``.

    Families with a known derivative are solved by bisection on
    ``alpha'(s) = r``; tables and other functions by golden-section search.
    Returns ``math.inf`` when the supremum is unbounded.
    """
    return _legendre(alpha, r)[0]


def _legendre(alpha: WeightFunction, r: float) -> tuple[float, float]:
    r = float(r)
    if not math.isfinite(r):
        raise ValueError("r must be finite")
    _check_convex_table(alpha)
    if alpha.kind == "barrier":
        # conjugate of the barrier is coef * r on r >= 0
        return (alpha.coef * r if r > 0 else 0.0), alpha.coef
    if r > alpha.slope_limit():
        return math.inf, math.inf
    deriv = alpha.derivative(0.0)
    if deriv is not None and alpha.kind != "table":
        if deriv >= r:
            return -alpha(0.0), 0.0
        lo, hi = 0.0, 1.0
        while alpha.derivative(hi) < r:
            lo, hi = hi, hi * 2.0
            if hi > 1e300:
                return math.inf, math.inf
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if alpha.derivative(mid) < r:
                lo = mid
            else:
                hi = mid
        s = 0.5 * (lo + hi)
        return r * s - alpha(s), s
    # derivative-free route
    fun = lambda s: r * s - alpha(s)
    if alpha.kind == "table":
        xs = alpha.samples[0]
        lo_lim, hi_lim = 0.0, xs[-1]
        s_best, f_best = golden_section_max(fun, lo_lim, hi_lim, tol=1e-13)
        # piecewise linear: the sup is attained at a sample, take the exact one
        cand = [(x, fun(x)) for x in (0.0, *xs) if x >= 0]
        cand.append((s_best, f_best))
        return _best(cand)
    a, b = bracket_max(fun, 0.0, 1.0, lo_limit=0.0)
    if b > 1e300:
        return math.inf, math.inf
    s, f = golden_section_max(fun, a, b, tol=1e-13)
    return f, s


def _best(cand):
    s, f = max(cand, key=lambda p: p[1])
    return f, s


# ---------------------------------------------------------------------------
# Young pairs and the sequence correspondence
# ---------------------------------------------------------------------------

_TEST_GRID = np.logspace(-3, 3, 121)


@dataclass(frozen=True)
class YoungWeightPair:
    """Weight functions ``alpha``, ``beta`` of an entire-function space and
    the constant ``h`` witnessing ``2 beta(s) <= beta(h s)``."""

    alpha: WeightFunction
    beta: WeightFunction
    h: float

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise WeightError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not self.h > 1:
            out.append("h must exceed 1")
        for name, fn in (("alpha", self.alpha), ("beta", self.beta)):
            if abs(fn(0.0)) > 1e-14:
                out.append(f"{name}(0) must vanish")
            vals = np.array([fn(s) for s in _TEST_GRID])
            if np.any(np.diff(vals) < -1e-12 * np.abs(vals[1:])):
                out.append(f"{name} is not increasing on the test grid")
        beta = np.array([self.beta(s) for s in _TEST_GRID])
        beta_h = np.array([self.beta(self.h * s) for s in _TEST_GRID])
        bad = np.nonzero(2.0 * beta > beta_h * (1 + 1e-12))[0]
        if bad.size:
            out.append(f"2 beta(s) <= beta(h s) fails at s = {_TEST_GRID[bad[0]]:.4g}")
        # convexity of beta in ln s on a uniform log grid
        u = np.linspace(-3, 3, 121) * math.log(10)
        bu = np.array([self.beta(math.exp(x)) for x in u])
        if np.any(np.diff(bu, 2) < -1e-9 * np.maximum(1.0, np.abs(bu[1:-1]))):
            out.append("beta is not convex in ln s")
        s = np.linspace(0, 20, 201)
        av = np.array([self.alpha(x) for x in s])
        if np.any(np.diff(av, 2) < -1e-9 * np.maximum(1.0, np.abs(av[1:-1]))):
            out.append("alpha is not convex")
        return out


def _sup_log_moment(k: int, phi: Callable[[float], float], u_max: float) -> float:
    """``sup_u (k u - phi(e^u))`` for ``k >= 1`` with ``phi`` convex increasing."""
    def fun(u):
        val = phi(math.exp(u)) if u < 700 else math.inf
        return k * u - val
    x0 = min(math.log(k + 1.0), u_max)
    try:
        a, b = bracket_max(fun, x0, 1.0, lo_limit=-745.0, hi_limit=u_max)
        _, best = golden_section_max(fun, a, b, tol=1e-12)
    except ConvergenceError:
        raise ConvergenceError(f"maximization did not converge at k = {k}") from None
    if not math.isfinite(best):
        raise ConvergenceError(f"maximization did not converge at k = {k}")
    return best


def sequences_from_young(pair: YoungWeightPair, k_max: int) -> tuple[WeightSequence, WeightSequence]:
    """Tabulate ``a_k = sup_r r**k e**(-alpha_*(r))`` and ``b_l = sup_s s**l e**(-beta(s))``.

    ``a_0 = b_0 = 1``. Each entry is a one-dimensional maximization in
    ``u = ln r``, where the maximand is concave.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    alpha_star = pair.alpha.conjugate()
    u_cap_a = math.log(alpha_star.coef) if alpha_star.kind == "barrier" else 700.0
    log_a = [0.0]
    log_b = [0.0]
    for k in range(1, k_max + 1):
        log_a.append(_sup_log_moment(k, alpha_star, u_cap_a))
        log_b.append(_sup_log_moment(k, pair.beta, 700.0))
    return WeightSequence.from_log_values(log_a), WeightSequence.from_log_values(log_b)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubmultReport:
    ok: bool
    C: float
    h: float


@dataclass(frozen=True)
class GSReport:
    log_convex: bool
    first_violation: int | None
    nondecreasing: bool
    submult: SubmultReport
    k_max: int


def validate_gs(seq: WeightSequence, k_max: int | None = None,
                h_max: float = 64.0, h_step: float = 1e-3) -> GSReport:
    """Check log-convexity and submultiplicativity of a sequence on ``k <= k_max``.

    Submultiplicativity ``a_{k+l} <= C h**(k+l) a_k a_l`` is searched over a
    grid in ``ln h``: the smallest ``h`` for which the excess
    ``max_{k+l=N} ln(a_N / (a_k a_l)) - N ln h`` does not grow over the upper
    half of the range is reported with the induced minimal ``C``.
    """
    if k_max is None:
        k_max = seq.k_max if seq.is_table else min(seq.k_max, 512)
    la = seq.tabulate(k_max)
    n = la.size - 1
    second = la[:-2] + la[2:] - 2.0 * la[1:-1]
    tol = 1e-12 * np.maximum(1.0, np.abs(la[1:-1]))
    bad = np.nonzero(second < -tol)[0]
    log_convex = bad.size == 0
    first_violation = int(bad[0] + 1) if bad.size else None
    nondecreasing = bool(np.all(np.diff(la) >= -1e-12 * np.maximum(1.0, np.abs(la[1:]))))

    excess = np.empty(n + 1)
    for N in range(n + 1):
        k = np.arange(N + 1)
        excess[N] = np.max(la[N] - la[k] - la[N - k])
    found = submult_witness(excess, h_max, h_step)
    return GSReport(log_convex, first_violation, nondecreasing, found, n)


def submult_witness(excess, h_max: float = 64.0, h_step: float = 1e-3) -> SubmultReport:
    """Smallest ``h`` on a grid in ``ln h`` for which ``excess[N] - N ln h``
    stops growing over the upper half of the range, with the induced ``C``.

    ``excess[N]`` is ``max_{k+l=N} ln(x_N / (x_k x_l))``; entries equal to
    ``-inf`` (no admissible split) are ignored.
    """
    excess = np.asarray(excess, dtype=float)
    Ns = np.nonzero(np.isfinite(excess))[0]
    if Ns.size == 0:
        return SubmultReport(True, 1.0, 1.0)
    ex = excess[Ns]
    if Ns.size < 3:
        return SubmultReport(True, float(math.exp(max(ex.max(), 0.0))), 1.0)
    half = Ns.size // 2
    for log_h in np.arange(0.0, math.log(h_max) + h_step / 2, h_step):
        e = ex - Ns * log_h
        head, tail = e[:half + 1].max(), e[half:].max()
        if tail <= head + 1e-9 * max(1.0, abs(head)):
            return SubmultReport(True, float(math.exp(e.max())), float(math.exp(log_h)))
    return SubmultReport(False, math.inf, math.inf)
