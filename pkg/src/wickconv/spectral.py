"""Light-cone geometry for the spectral condition and the weighted sup-norms
of entire functions that define the spaces ``E_beta^alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .weights import WeightFunction, YoungWeightPair


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LorentzCone:
    """Closed light cone ``{p : sign * p0 >= |p_vec|}`` in ``dim`` dimensions.

    ``orientation`` is ``"forward"`` (sign +1) or ``"backward"`` (sign -1).
    In one dimension this is a closed half-line.
    """

    dim: int = 2
    orientation: str = "forward"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.orientation not in ("forward", "backward"):
            raise ValueError(f"unknown orientation {self.orientation!r}")

    @property
    def sign(self) -> int:
        return 1 if self.orientation == "forward" else -1

    def contains(self, p) -> bool:
        """Closed-cone membership with no tolerance (exact rational comparison)."""
        p = _vector(p, self.dim)
        t = self.sign * Fraction(p[0])
        if t < 0:
            return False
        spatial = sum(Fraction(v) ** 2 for v in p[1:])
        return t * t >= spatial

    def project(self, p) -> np.ndarray:
        """Nearest point of the cone (Euclidean metric)."""
        p = np.asarray(_vector(p, self.dim), dtype=float)
        t = self.sign * p[0]
        x = p[1:]
        nx = float(np.linalg.norm(x))
        if nx <= t:
            return p.copy()
        if nx <= -t:
            return np.zeros_like(p)
        coef = 0.5 * (t + nx)
        out = np.empty_like(p)
        out[0] = self.sign * coef
        out[1:] = coef * x / nx
        return out


def dist_to_cone(cone: LorentzCone, p) -> float:
    """Euclidean distance from ``p`` to the closed cone.

    Inside the cone the distance is 0, in the polar cone it is ``|p|`` (the
    apex is nearest), and otherwise ``|(|p_vec| - sign p0)| / sqrt(2)``.
    """
    p = np.asarray(_vector(p, cone.dim), dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("p must be finite")
    t = cone.sign * p[0]
    nx = float(np.linalg.norm(p[1:]))
    if nx <= t:
        return 0.0
    if nx <= -t:
        return float(np.linalg.norm(p))
    return (nx - t) / math.sqrt(2.0)


def dist_to_cone_array(cone: LorentzCone, P: np.ndarray) -> np.ndarray:
    """Vectorized :func:`dist_to_cone` over points stacked on the first axis."""
    t = cone.sign * P[0]
    nx = np.sqrt(np.sum(P[1:] ** 2, axis=0))
    full = np.sqrt(np.sum(P ** 2, axis=0))
    return np.where(nx <= t, 0.0, np.where(nx <= -t, full, (nx - t) / math.sqrt(2.0)))


def cone_boundary_points(cone: LorentzCone, n: int, radius: float,
                         rng: np.random.Generator | None = None) -> np.ndarray:
    """Points ``tau (sign, u)`` with ``|u| = 1`` and ``0 <= tau <= radius``.

    Deterministic (a lattice in ``tau`` and direction) unless ``rng`` is given.
    """
    d = cone.dim
    if rng is None:
        taus = np.linspace(0.0, radius, n)
        if d == 1:
            dirs = np.zeros((n, 0))
        elif d == 2:
            dirs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)[:, None]
        else:
            g = np.random.default_rng(0).normal(size=(n, d - 1))
            dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    else:
        taus = rng.uniform(0.0, radius, n)
        g = rng.normal(size=(n, d - 1))
        dirs = g / np.linalg.norm(g, axis=1, keepdims=True) if d > 1 else g
    pts = np.empty((n, d))
    pts[:, 0] = cone.sign * taus
    pts[:, 1:] = taus[:, None] * dirs
    return pts


@dataclass(frozen=True)
class ProductCone:
    """``K_{n-}``: tuples ``(p_1, ..., p_n)`` whose suffix sums
    ``p_m + ... + p_n`` all lie in the closed backward cone."""

    n: int
    base: LorentzCone = LorentzCone(2, "backward")

    def contains(self, points) -> bool:
        if len(points) != self.n:
            raise ValueError(f"expected {self.n} points")
        return _suffix_check(points, self.base)


def in_Kn_minus(points: Sequence, dim: int | None = None) -> bool:
    """Whether every suffix sum of ``points`` lies in the closed backward cone.

    Sums and comparisons are exact (rational arithmetic on the float inputs).
    """
    if len(points) == 0:
        raise ValueError("need at least one momentum")
    dims = {len(np.atleast_1d(p)) for p in points}
    if len(dims) != 1:
        raise ValueError("momenta must have equal dimensions")
    d = dims.pop() if dim is None else dim
    return _suffix_check(points, LorentzCone(d, "backward"))


def _suffix_check(points, cone: LorentzCone) -> bool:
    acc = [Fraction(0)] * cone.dim
    for p in reversed(list(points)):
        p = _vector(p, cone.dim)
        acc = [a + Fraction(v) for a, v in zip(acc, p)]
        t = cone.sign * acc[0]
        if t < 0 or t * t < sum(v * v for v in acc[1:]):
            return False
    return True


def _vector(p, dim: int) -> list[float]:
    p = [float(v) for v in np.atleast_1d(np.asarray(p, dtype=float)).ravel()]
    if len(p) != dim:
        raise ValueError(f"expected a {dim}-vector, got {len(p)} components")
    return p


# ---------------------------------------------------------------------------
# entire test functions and their norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntireGaussian:
    """``g(zeta) = P(zeta) exp(-c sum_mu (zeta_mu - center_mu)**2)`` on ``C**n``.

    ``poly`` maps exponent tuples to coefficients (empty means ``P = 1``);
    ``zero=True`` gives ``g = 0`` and ``c = 0`` gives a polynomial.
    """

    n: int = 1
    c: float = 1.0
    center: tuple[float, ...] | None = None
    poly: Mapping[tuple[int, ...], complex] = field(default_factory=dict)
    zero: bool = False

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be >= 0 so that g grows at most like a Gaussian in q")
        if self.center is not None and len(self.center) != self.n:
            raise ValueError("center has the wrong dimension")
        for e in self.poly:
            if len(e) != self.n:
                raise ValueError("polynomial exponents have the wrong dimension")

    @classmethod
    def from_config(cls, spec: Mapping) -> "EntireGaussian":
        poly = {tuple(int(v) for v in k.split(",")): complex(val)
                for k, val in spec.get("poly", {}).items()}
        center = spec.get("center")
        return cls(int(spec.get("n", 1)), float(spec.get("c", 1.0)),
                   tuple(float(v) for v in center) if center is not None else None,
                   poly, bool(spec.get("zero", False)))

    def log_abs(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """``ln|g(p + i q)|`` for arrays of shape ``(n, ...)``."""
        if self.zero:
            return np.full(p.shape[1:], -np.inf)
        z = p + 1j * q
        if self.center is not None:
            z = z - np.asarray(self.center, dtype=float).reshape((-1,) + (1,) * (z.ndim - 1))
        out = -self.c * np.sum((z * z).real, axis=0)
        if self.poly:
            zz = p + 1j * q
            P = np.zeros(p.shape[1:], dtype=complex)
            for e, coef in self.poly.items():
                term = np.full(p.shape[1:], coef, dtype=complex)
                for mu, k in enumerate(e):
                    term = term * zz[mu] ** k
                P = P + term
            with np.errstate(divide="ignore"):
                out = out + np.log(np.abs(P))
        return out


@dataclass(frozen=True)
class EbNormSpec:
    """Weights and scales of ``||g||_{A,B}``; ``cone`` adds the damping
    ``exp(-alpha(dist(A p, U)))`` of the cone norm (``None`` means ``U`` is
    the whole space)."""

    pair: YoungWeightPair
    A: float = 1.0
    B: float = 1.0
    cone: LorentzCone | None = None

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ValueError("A and B must be positive")


@dataclass(frozen=True)
class NormGrid:
    """Tensor grid ``p in [-p_max, p_max]**n``, ``q in [-q_max, q_max]**n``.

    Odd point counts keep the origin on the grid.
    """

    p_max: float = 6.0
    q_max: float = 6.0
    n_p: int = 121
    n_q: int = 121
    shell: float = 0.9


@dataclass
class NormResult:
    """``value`` is the grid sup, or ``inf`` when the maximand still grows on
    the outer shell; ``shell_margin`` is ``ln(inner max) - ln(outer max)``."""

    value: float
    log_value: float
    infinite: bool
    argmax_p: np.ndarray
    argmax_q: np.ndarray
    shell_margin: float


def _log_maximand(g: EntireGaussian, spec: EbNormSpec, grid: NormGrid, with_cone: bool):
    n = g.n
    p1 = np.linspace(-grid.p_max, grid.p_max, grid.n_p)
    q1 = np.linspace(-grid.q_max, grid.q_max, grid.n_q)
    axes = [p1] * n + [q1] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.stack(mesh[:n])
    Q = np.stack(mesh[n:])
    alpha, beta = spec.pair.alpha, spec.pair.beta
    norm_p = np.sqrt(np.sum(P ** 2, axis=0))
    norm_q = np.sqrt(np.sum(Q ** 2, axis=0))
    val = g.log_abs(P, Q) - _apply(alpha, spec.A * norm_q) + _apply(beta, norm_p / spec.B)
    if with_cone and spec.cone is not None:
        if spec.cone.dim != n:
            raise ValueError("cone dimension must match the function's dimension")
        dist = dist_to_cone_array(spec.cone, spec.A * P)
        val = val - _apply(alpha, dist)
    outer = (np.max(np.abs(P), axis=0) >= grid.shell * grid.p_max) | \
            (np.max(np.abs(Q), axis=0) >= grid.shell * grid.q_max)
    return val, outer, P, Q


def _apply(fn: WeightFunction, x: np.ndarray) -> np.ndarray:
    """Evaluate a scalar weight on an array, once per distinct value."""
    u, inv = np.unique(x, return_inverse=True)
    vals = np.array([fn(v) for v in u])
    return vals[inv].reshape(x.shape)


def _norm(g, spec, grid, with_cone) -> NormResult:
    val, outer, P, Q = _log_maximand(g, spec, grid, with_cone)
    n = g.n
    if np.all(val == -np.inf):
        return NormResult(0.0, -math.inf, False, np.zeros(n), np.zeros(n), math.inf)
    inner_max = float(np.max(np.where(outer, -np.inf, val)))
    outer_max = float(np.max(np.where(outer, val, -np.inf)))
    idx = np.unravel_index(int(np.argmax(val)), val.shape)
    ap = P[(slice(None),) + idx]
    aq = Q[(slice(None),) + idx]
    margin = inner_max - outer_max
    if outer_max >= inner_max:
        return NormResult(math.inf, math.inf, True, ap, aq, margin)
    log_value = float(val[idx])
    return NormResult(math.exp(log_value) if log_value < 709 else math.inf,
                      log_value, False, ap, aq, margin)


def eb_norm(g: EntireGaussian, spec: EbNormSpec, grid: NormGrid = NormGrid()) -> NormResult:
    """``sup_{p,q} |g(p + i q)| exp(-alpha(A|q|) + beta(|p|/B))`` on the grid."""
    return _norm(g, spec, grid, with_cone=False)


def eb_cone_norm(g: EntireGaussian, spec: EbNormSpec, grid: NormGrid = NormGrid()) -> NormResult:
    """The cone norm: :func:`eb_norm` with the extra factor ``exp(-alpha(dist(A p, U)))``."""
    return _norm(g, spec, grid, with_cone=True)
