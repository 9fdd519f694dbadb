"""Small numerical helpers shared by the modules: log-domain sums,
one-dimensional golden-section search and an ordered parallel map."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

LOG_ZERO = float("-inf")
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of its iteration budget."""


def log_sum_exp(log_terms: Iterable[float]) -> float:
    """Return ``log(sum(exp(t)))`` without overflow.

    The shifted exponentials are accumulated with :func:`math.fsum`, which is
    exactly rounded, so the result does not depend on the order of the terms.
    """
    terms = np.asarray(list(log_terms) if not isinstance(log_terms, np.ndarray) else log_terms,
                       dtype=float).ravel()
    if terms.size == 0:
        return LOG_ZERO
    top = float(np.max(terms))
    if top == math.inf:
        return math.inf
    if top == LOG_ZERO:
        return LOG_ZERO
    return top + math.log(math.fsum(np.exp(terms - top).tolist()))


def golden_section_max(fun: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-10, max_iter: int = 500) -> tuple[float, float]:
    """Maximize a unimodal ``fun`` on ``[lo, hi]``.

    Returns ``(x_best, f_best)``. The interval is shrunk until it is shorter
    than ``tol * max(1, |x|)``.
    """
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(c), abs(d)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    else:
        raise ConvergenceError(f"golden-section search did not converge on [{lo}, {hi}]")
    # endpoints matter when the maximum sits on the boundary
    best = max(((c, fc), (d, fd), (lo, fun(lo)), (hi, fun(hi))), key=lambda p: p[1])
    return best


def golden_section_min(fun: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-10, max_iter: int = 500) -> tuple[float, float]:
    x, f = golden_section_max(lambda t: -fun(t), lo, hi, tol=tol, max_iter=max_iter)
    return x, -f


def bracket_max(fun: Callable[[float], float], x0: float = 0.0, step: float = 1.0,
                lo_limit: float = -math.inf, hi_limit: float = math.inf,
                max_iter: int = 200) -> tuple[float, float]:
    """Find ``[a, b]`` containing the maximum of a unimodal ``fun``.

    Walks uphill from ``x0`` with doubling steps. Limits clip the walk; when
    the function still increases at a limit the bracket ends on that limit.
    """
    if not lo_limit <= x0 <= hi_limit:
        raise ValueError("x0 outside the limits")
    here, f_here = x0, fun(x0)
    right = min(x0 + step, hi_limit)
    f_right = fun(right) if right > here else -math.inf
    direction = 1.0 if f_right >= f_here else -1.0
    behind = here if direction > 0 else right
    if direction > 0:
        here, f_here = right, f_right
    for _ in range(max_iter):
        limit = hi_limit if direction > 0 else lo_limit
        if here == limit:
            return (behind, here) if direction > 0 else (here, behind)
        step *= 2.0
        ahead = here + direction * step
        ahead = min(ahead, hi_limit) if direction > 0 else max(ahead, lo_limit)
        f_ahead = fun(ahead)
        if f_ahead < f_here:
            return (behind, ahead) if direction > 0 else (ahead, behind)
        behind, here, f_here = here, ahead, f_ahead
    raise ConvergenceError("could not bracket a maximum")


def default_threads() -> int:
    env = os.environ.get("WICKCONV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def parallel_map(fun: Callable, items: Sequence, threads: int | None = None) -> list:
    """Map ``fun`` over ``items`` and return results in input order."""
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(items) < 2:
        return [fun(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fun, items))


def hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite nodes and weights for the weight ``exp(-t**2)``."""
    return np.polynomial.hermite.hermgauss(n)
