"""Two-point functions of free fields with a signed spectral density, their
Hilbert majorants, and the forms obtained by smearing with Gaussians.

All pointwise evaluators work in two spacetime dimensions, where a mass
shell of mass ``m`` contributes ``c_norm * K0(m * sqrt(-zeta.zeta))`` to the
analytic two-point function. ``zeta.zeta = zeta0**2 - zeta1**2`` is the
Minkowski square; the square root is the principal branch, which has
positive real part everywhere in the backward tube ``Im zeta in V-``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import kv

from ._numerics import hermite_rule

DIM = 2
BRANCH_GUARD = 1e-9


class TubeError(ValueError):
    """A point lies outside the tube its evaluator requires."""


class BranchCutError(ValueError):
    """Evaluation point too close to the cut of the square root."""


class QuadratureError(RuntimeError):
    """Numerical integration did not reach the requested accuracy."""


def _in_open_cone(y: np.ndarray, sign: int) -> np.ndarray:
    """Whether imaginary parts ``y`` (time component first) lie in ``sign * V+``."""
    y = np.asarray(y, dtype=float)
    spatial = np.sqrt(np.sum(y[1:] ** 2, axis=0))
    return sign * y[0] > spatial


@dataclass(frozen=True, eq=False)
class TubePoint:
    """A complex spacetime point together with the tube it belongs to.

    ``tube`` is ``"backward"`` (``Im z in V-``) or ``"forward"`` (``Im z in V+``).
    """

    z: np.ndarray
    tube: str = "backward"

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex).reshape(-1)
        if z.size < 2:
            raise ValueError("a spacetime point needs at least two components")
        if self.tube not in ("backward", "forward"):
            raise ValueError(f"unknown tube {self.tube!r}")
        sign = -1 if self.tube == "backward" else 1
        if not bool(_in_open_cone(z.imag, sign)):
            raise TubeError(f"Im z = {z.imag} is not in the open {self.tube} cone")
        object.__setattr__(self, "z", z)

    @classmethod
    def from_parts(cls, x, y, tube: str = "backward") -> "TubePoint":
        """Build ``z = x + i y`` from real and imaginary parts."""
        return cls(np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float), tube)

    @property
    def x(self) -> np.ndarray:
        return self.z.real

    @property
    def y(self) -> np.ndarray:
        return self.z.imag


# ---------------------------------------------------------------------------
# IR/UV profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """Monotone tabulated function of a positive variable.

    Values are interpolated linearly in ``ln x``. Outside the grid the
    function is held constant, except on the side named by ``log_tail``
    (``"low"`` or ``"high"``) where the last segment is extended linearly in
    ``ln x``.
    """

    grid: tuple[float, ...]
    values: tuple[float, ...]
    log_tail: str | None = None

    def __call__(self, x: float) -> float:
        g = np.log(self.grid)
        v = np.asarray(self.values)
        lx = math.log(x) if x > 0 else -math.inf
        if lx < g[0] and self.log_tail == "low":
            slope = (v[1] - v[0]) / (g[1] - g[0])
            return float(v[0] + slope * (lx - g[0]))
        if lx > g[-1] and self.log_tail == "high":
            slope = (v[-1] - v[-2]) / (g[-1] - g[-2])
            return float(v[-1] + slope * (lx - g[-1]))
        return float(np.interp(lx, g, v))


def _named_ir(name: str, gamma: float) -> Callable[[float], float]:
    if name == "const":
        return lambda r: 1.0
    if name == "log":
        return lambda r: math.log1p(r)
    if name == "power":
        return lambda r: r ** gamma
    raise ValueError(f"unknown IR profile {name!r}")


def _named_uv(name: str, gamma: float) -> Callable[[float], float]:
    if name == "const":
        return lambda t: 1.0
    if name == "log":
        # ln(1/t) clipped at zero keeps the profile nonnegative
        return lambda t: max(-math.log(t), 0.0)
    if name == "power":
        return lambda t: t ** (-gamma)
    raise ValueError(f"unknown UV profile {name!r}")


@dataclass(frozen=True)
class IRUVProfile:
    """Envelopes ``w_IR`` (non-decreasing in ``r``) and ``w_UV`` (non-increasing
    in ``t``) bounding the majorant as
    ``|w_maj(z, z')| <= C1 w_IR(|z| + |z'|) + C2 w_UV(|y| + |y'|)``."""

    w_ir: Callable[[float], float]
    w_uv: Callable[[float], float]
    C1: float = 1.0
    C2: float = 1.0
    label: str = ""

    @classmethod
    def named(cls, ir: str = "log", uv: str = "log", gamma: float = 1.0,
              gamma_ir: float | None = None, gamma_uv: float | None = None) -> "IRUVProfile":
        g_ir = gamma if gamma_ir is None else gamma_ir
        g_uv = gamma if gamma_uv is None else gamma_uv
        return cls(_named_ir(ir, g_ir), _named_uv(uv, g_uv),
                   label=f"ir={ir}({g_ir:g}), uv={uv}({g_uv:g})")

    def check_monotone(self, r_grid=None, t_grid=None) -> bool:
        r_grid = np.logspace(-3, 6, 200) if r_grid is None else np.asarray(r_grid)
        t_grid = np.logspace(-8, 2, 200) if t_grid is None else np.asarray(t_grid)
        ir = np.array([self.w_ir(r) for r in r_grid])
        uv = np.array([self.w_uv(t) for t in t_grid])
        return bool(np.all(np.diff(ir) >= -1e-12 * np.abs(ir[1:])) and np.all(ir >= 0)
                    and np.all(np.diff(uv) <= 1e-12 * np.abs(uv[:-1])) and np.all(uv >= 0))


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

class Shell(NamedTuple):
    """A mass shell carrying weight ``rho`` in the two-point density and
    ``mu`` in the majorant density."""
    mass: float
    rho: float
    mu: float


@dataclass(frozen=True)
class TwoPointModel:
    """Free-field model given by mass shells in two dimensions.

    ``kind`` is ``"pv-pair"`` (a physical shell and a ghost shell of opposite
    sign), ``"positive"`` (one shell, positive metric), ``"custom"`` (any
    shell list) or ``"profile"`` (no pointwise evaluator, only a profile).
    """

    kind: str
    shells: tuple[Shell, ...] = ()
    c_norm: float = 1.0 / (2.0 * math.pi)
    profile: IRUVProfile | None = None

    def __post_init__(self):
        if self.kind == "profile":
            if self.profile is None:
                raise ValueError("a profile-only model needs a profile")
            return
        if not self.shells:
            raise ValueError("model has no mass shells")
        for sh in self.shells:
            if not sh.mass > 0:
                raise ValueError(f"masses must be positive, got {sh.mass}")
            if sh.mu < 0:
                raise ValueError("majorant weights must be nonnegative")

    @classmethod
    def pv_pair(cls, m1: float, m2: float, c_norm: float = 1.0 / (2.0 * math.pi)) -> "TwoPointModel":
        if m1 > m2:
            raise ValueError("pv-pair expects m1 <= m2")
        return cls("pv-pair", (Shell(float(m1), 1.0, 1.0), Shell(float(m2), -1.0, 1.0)), c_norm)

    @classmethod
    def positive(cls, m: float, c_norm: float = 1.0 / (2.0 * math.pi)) -> "TwoPointModel":
        return cls("positive", (Shell(float(m), 1.0, 1.0),), c_norm)

    @classmethod
    def profile_only(cls, profile: IRUVProfile) -> "TwoPointModel":
        return cls("profile", profile=profile)

    @classmethod
    def from_config(cls, spec: dict) -> "TwoPointModel":
        kind = spec.get("kind")
        c_norm = spec.get("c_norm", 1.0 / (2.0 * math.pi))
        if kind == "pv-pair":
            return cls.pv_pair(spec["m1"], spec["m2"], c_norm)
        if kind == "positive":
            return cls.positive(spec["m"], c_norm)
        if kind == "profile":
            prof = IRUVProfile.named(spec.get("ir", "log"), spec.get("uv", "log"),
                                     spec.get("gamma", 1.0), spec.get("gamma_ir"),
                                     spec.get("gamma_uv"))
            return cls.profile_only(prof)
        raise ValueError(f"unknown model kind {kind!r}")

    @property
    def evaluable(self) -> bool:
        return self.kind != "profile"

    def weights(self, which: str) -> list[tuple[float, float]]:
        if which == "indefinite":
            return [(sh.mass, sh.rho) for sh in self.shells if sh.rho != 0.0]
        if which == "majorant":
            return [(sh.mass, sh.mu) for sh in self.shells if sh.mu != 0.0]
        raise ValueError(f"'which' must be 'indefinite' or 'majorant', got {which!r}")


def _require_evaluable(model: TwoPointModel):
    if not model.evaluable:
        raise ValueError("profile-only models have no pointwise evaluator")


def invariant_root(zeta0, zeta1) -> np.ndarray:
    """Principal ``sqrt(-(zeta0**2 - zeta1**2))`` with a guard against the cut."""
    q = -(np.asarray(zeta0, dtype=complex) ** 2 - np.asarray(zeta1, dtype=complex) ** 2)
    arg = np.angle(q)
    if np.any(np.abs(np.abs(arg) - math.pi) < BRANCH_GUARD) or np.any(q == 0):
        raise BranchCutError("evaluation point within 1e-9 of the branch cut of sqrt(-zeta^2)")
    return np.sqrt(q)


def kernel(model: TwoPointModel, zeta0, zeta1, which: str = "indefinite") -> np.ndarray:
    """Vectorized analytic two-point function at difference points ``zeta``.

    ``which="indefinite"`` uses the signed density, ``"majorant"`` the
    unsigned one. Points must have ``Im zeta`` in the open backward cone.
    """
    _require_evaluable(model)
    zeta0 = np.asarray(zeta0, dtype=complex)
    zeta1 = np.asarray(zeta1, dtype=complex)
    y0, y1 = zeta0.imag, zeta1.imag
    if np.any(-y0 <= np.abs(y1)):
        raise TubeError("difference point outside the backward tube")
    s = invariant_root(zeta0, zeta1)
    out = np.zeros(np.broadcast(zeta0, zeta1).shape, dtype=complex)
    for mass, weight in model.weights(which):
        out = out + weight * kv(0, mass * s)
    return model.c_norm * out


def eval_w(model: TwoPointModel, zeta: TubePoint) -> complex:
    """Wightman analytic function ``w(zeta)`` in the backward tube."""
    if zeta.tube != "backward":
        raise TubeError("w is evaluated in the backward tube")
    return complex(kernel(model, zeta.z[0], zeta.z[1], "indefinite"))


def eval_wmaj(model: TwoPointModel, z: TubePoint, zp: TubePoint) -> complex:
    """Majorant ``w_maj(z, z')`` for ``Im z in V-`` and ``Im z' in V+``.

    For shell models the majorant is translation invariant and equals the
    two-point function of the unsigned density at ``z - z'``, which again
    lies in the backward tube.
    """
    if z.tube != "backward" or zp.tube != "forward":
        raise TubeError("w_maj needs z in the backward and z' in the forward tube")
    d = z.z - zp.z
    return complex(kernel(model, d[0], d[1], "majorant"))


# ---------------------------------------------------------------------------
# the bound |w(x - x' - 2iy)|^2 <= |w_maj(x-iy, x+iy)| |w_maj(x'-iy, x'+iy)|
# ---------------------------------------------------------------------------

class Eq8Check(NamedTuple):
    lhs: float
    rhs: float
    ok: bool
    margin: float


def check_bound_eq8(model: TwoPointModel, x, xp, y) -> Eq8Check:
    """Compare ``|w(x - x' - 2iy)|**2`` with the product of majorants.

    ``margin = rhs - lhs``; ``ok`` allows a relative slack of 1e-9.
    """
    x, xp, y = (np.asarray(v, dtype=float) for v in (x, xp, y))
    if not bool(_in_open_cone(y, 1)):
        raise TubeError("y must lie in the open forward cone")
    lhs_pt = TubePoint(x - xp - 2j * y, "backward")
    lhs = abs(eval_w(model, lhs_pt)) ** 2
    r1 = abs(eval_wmaj(model, TubePoint(x - 1j * y, "backward"), TubePoint(x + 1j * y, "forward")))
    r2 = abs(eval_wmaj(model, TubePoint(xp - 1j * y, "backward"), TubePoint(xp + 1j * y, "forward")))
    rhs = r1 * r2
    return Eq8Check(lhs, rhs, lhs <= rhs * (1 + 1e-9), rhs - lhs)


def eq8_sweep(model: TwoPointModel, x: np.ndarray, xp: np.ndarray, y: np.ndarray) -> dict:
    """Vectorized :func:`check_bound_eq8` over rows of ``x``, ``xp``, ``y`` (shape ``(n, 2)``)."""
    x, xp, y = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (x, xp, y))
    if not np.all(_in_open_cone(y.T, 1)):
        raise TubeError("every y must lie in the open forward cone")
    d = (x - xp - 2j * y).T
    lhs = np.abs(kernel(model, d[0], d[1], "indefinite")) ** 2
    # the majorant at (x - iy, x + iy) depends on -2iy only for shell models
    m = (-2j * y).T
    rhs = np.abs(kernel(model, m[0], m[1], "majorant")) ** 2
    return {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "ok": lhs <= rhs * (1 + 1e-9)}


def random_eq8_configs(rng: np.random.Generator, n: int, box: float = 10.0,
                       y0_range: tuple[float, float] = (0.1, 5.0)):
    """Random ``(x, x', y)`` with ``|x|, |x'| <= box`` and ``y`` in the forward cone."""
    def in_disc(k):
        r = box * np.sqrt(rng.uniform(0, 1, k))
        phi = rng.uniform(0, 2 * math.pi, k)
        return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
    x, xp = in_disc(n), in_disc(n)
    y0 = rng.uniform(*y0_range, n)
    y1 = y0 * rng.uniform(-0.99, 0.99, n)
    return x, xp, np.stack([y0, y1], axis=1)


def support_check_lemma(model: TwoPointModel, p_max: float = 50.0, n: int = 201,
                        rtol: float = 1e-12) -> bool:
    """Check that the majorant density lives on the support of the two-point density.

    Every grid point of a shell with ``mu != 0`` must lie in the closed
    forward cone and on a mass shell whose net signed weight is nonzero
    (coincident shells are summed first, so a ghost pair of equal masses
    carries no two-point density at all).
    """
    if model.kind == "profile":
        raise ValueError("the support check needs a diagonal shell model")
    net: dict[float, float] = {}
    for sh in model.shells:
        net[sh.mass] = net.get(sh.mass, 0.0) + sh.rho
    rho_masses = np.array([m for m, r in net.items() if r != 0.0])
    p1 = np.linspace(-p_max, p_max, n)
    for sh in model.shells:
        if sh.mu == 0.0:
            continue
        p0 = np.sqrt(sh.mass ** 2 + p1 ** 2)
        if np.any(p0 < np.abs(p1)):
            return False
        if rho_masses.size == 0:
            return False
        sq = p0 ** 2 - p1 ** 2
        on_shell = np.abs(sq[:, None] - rho_masses[None, :] ** 2) <= rtol * rho_masses[None, :] ** 2 + rtol
        if not np.all(on_shell.any(axis=1)):
            return False
    return True


# ---------------------------------------------------------------------------
# profile fitting
# ---------------------------------------------------------------------------

@dataclass
class ProfileFit:
    profile: IRUVProfile
    r_grid: np.ndarray
    t_grid: np.ndarray
    raw_ir: np.ndarray
    raw_uv: np.ndarray
    ir_envelope: np.ndarray
    uv_envelope: np.ndarray
    raw_monotone: bool
    bound_holds: bool
    notes: list[str] = field(default_factory=list)


def fit_profile(model: TwoPointModel, r_grid, t_grid, y_eps: float = 1e-3) -> ProfileFit:
    """Tabulate monotone envelopes of ``|w_maj|`` at large separation and near the real boundary.

    IR samples use ``z = (0, r/2) - i y_eps e0`` and ``z' = (0, -r/2) + i y_eps e0``
    so that ``|z| + |z'|`` is close to ``r``; UV samples use ``z = -i t/2 e0``
    and ``z' = i t/2 e0`` so that ``|y| + |y'| = t``. Envelopes are running
    maxima taken from the regular end toward the singular end.
    """
    _require_evaluable(model)
    r = np.asarray(r_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if np.any(r <= 0) or np.any(np.diff(r) <= 0) or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("grids must be positive and increasing")
    raw_ir = np.abs(kernel(model, np.full_like(r, -2j * y_eps, dtype=complex), r + 0j, "majorant"))
    raw_uv = np.abs(kernel(model, -1j * t + 0j, np.zeros_like(t, dtype=complex), "majorant"))
    ir_env = np.maximum.accumulate(raw_ir)
    uv_env = np.maximum.accumulate(raw_uv[::-1])[::-1]
    raw_monotone = bool(np.all(np.diff(raw_ir) >= 0) and np.all(np.diff(raw_uv) <= 0))
    prof = IRUVProfile(Envelope(tuple(r), tuple(ir_env)),
                       Envelope(tuple(t), tuple(uv_env), log_tail="low"),
                       C1=1.0, C2=1.0, label=f"fit({model.kind})")
    # witness on the grid union
    eff_r = np.sqrt(r ** 2 / 4 + y_eps ** 2) * 2
    ok_ir = raw_ir <= np.array([prof.w_ir(v) for v in eff_r]) + prof.C2 * prof.w_uv(2 * y_eps) + 1e-12
    ok_uv = raw_uv <= np.array([prof.w_ir(v) + prof.w_uv(v) for v in t]) + 1e-12
    notes = [] if raw_monotone else ["raw samples are not monotone; envelopes applied"]
    return ProfileFit(prof, r, t, raw_ir, raw_uv, ir_env, uv_env, raw_monotone,
                      bool(np.all(ok_ir) and np.all(ok_uv)), notes)


# ---------------------------------------------------------------------------
# Gaussian test functions and smeared forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """``f(x) = (nu/sqrt(pi))**d exp(-nu**2 sum_mu (x_mu - c_mu)**2)``.

    The center ``c`` may be complex; every such ``f`` has unit integral.
    """

    center: np.ndarray
    nu: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=complex).reshape(-1)
        if c.size != DIM:
            raise ValueError(f"center must have {DIM} components")
        if not self.nu > 0:
            raise ValueError("width nu must be positive")
        object.__setattr__(self, "center", c)

    def __call__(self, *coords) -> np.ndarray:
        """Analytic continuation of ``f`` to complex coordinates."""
        out = (self.nu / math.sqrt(math.pi)) ** DIM
        for x, c in zip(coords, self.center):
            out = out * np.exp(-self.nu ** 2 * (np.asarray(x) - c) ** 2)
        return out

    def conj(self) -> "GaussianSpec":
        """The Gaussian whose restriction to real points is ``conj(f)``."""
        return GaussianSpec(np.conj(self.center), self.nu)

    def fourier(self, p0, p1) -> np.ndarray:
        """``int f(x) exp(i p.x) dx`` with the Minkowski product ``p.x = p0 x0 - p1 x1``."""
        k = (np.asarray(p0), -np.asarray(p1))
        out = 1.0 + 0j
        for kk, c in zip(k, self.center):
            out = out * np.exp(1j * kk * c - kk ** 2 / (4 * self.nu ** 2))
        return out

    def integral(self) -> complex:
        return 1.0 + 0j


def smeared_form(model: TwoPointModel, f: GaussianSpec, g: GaussianSpec,
                 which: str = "indefinite", rtol: float = 1e-8) -> complex:
    """``<f, g>_S`` (``which="indefinite"``) or ``(f, g)_S`` (``"majorant"``).

    Computed in momentum space as a sum over mass shells of
    ``c_norm * int dp1 / (2 omega) conj(F(p)) G(p)`` with ``p1 = m sinh(theta)``.
    """
    _require_evaluable(model)
    total = 0j
    for mass, weight in model.weights(which):
        total += weight * _shell_form(model, mass, f, g, rtol)
    return total


def _shell_form(model: TwoPointModel, mass: float, f: GaussianSpec, g: GaussianSpec,
                rtol: float) -> complex:
    nu2 = min(f.nu, g.nu) ** 2
    # beyond theta_max the Gaussian factors are below exp(-80)
    theta_max = math.acosh(max(1.0, math.sqrt(4 * 80 * nu2) / mass)) + 1.0

    def integrand(theta):
        p0, p1 = mass * math.cosh(theta), mass * math.sinh(theta)
        return 0.5 * np.conj(f.fourier(p0, p1)) * g.fourier(p0, p1)

    # the error estimates are checked against rtol below
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        re, err_re = quad(lambda t: integrand(t).real, -theta_max, theta_max,
                          epsabs=0.0, epsrel=1e-12, limit=400)
        im, err_im = quad(lambda t: integrand(t).imag, -theta_max, theta_max,
                          epsabs=0.0, epsrel=1e-12, limit=400)
    value = complex(re, im)
    err = math.hypot(err_re, err_im)
    if err > rtol * max(abs(value), 1e-300) and err > 1e-15:
        raise QuadratureError(f"shell m={mass}: estimated error {err:.3g} for value {abs(value):.3g}")
    return model.c_norm * value


def correlation_gaussian(f: GaussianSpec, g: GaussianSpec) -> tuple[complex, float, np.ndarray]:
    """``h(u) = int conj(f)(x + u) g(x) dx`` as ``A exp(-kappa (u - b)**2)``.

    Returns ``(A, kappa, b)``.
    """
    nf2, ng2 = f.nu ** 2, g.nu ** 2
    kappa = nf2 * ng2 / (nf2 + ng2)
    amp = (f.nu * g.nu / math.sqrt(math.pi * (nf2 + ng2))) ** DIM
    b = np.conj(f.center) - g.center
    return amp, kappa, b


def contour_moment(model: TwoPointModel, f: GaussianSpec, g: GaussianSpec, k: int,
                   which: str = "majorant", shift: float | None = None,
                   nodes: int | None = None, rtol: float = 1e-12) -> complex:
    """``int kernel(u)**k h(u) du`` with ``h`` the correlation of ``conj(f)`` and ``g``.

    The integration contour is ``u - i eta e0`` with ``eta = shift``, where
    the kernel is holomorphic; by Cauchy's theorem the value equals the
    boundary-value integral. The default ``eta = max(1.5, k m / (2 sqrt(kappa)))
    / sqrt(kappa)`` (``m`` the lightest shell) sits near the saddle point of
    ``exp(-k m eta + kappa eta**2)``, which keeps cancellation on the contour
    small even when the value decays like ``exp(-k**2 m**2 / (4 kappa))``. Tensor
    Gauss-Hermite rules are refined until successive values agree to
    ``rtol`` (or ``nodes`` is used as given).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    amp, kappa, b = correlation_gaussian(f, g)
    if k == 0:
        return f.conj().integral() * g.integral()
    _require_evaluable(model)
    scale, mant = _contour_scaled(model, amp, kappa, b, k, which, shift, nodes, rtol)
    # values below the double range underflow to 0; use log_contour_moment for those
    return complex(mant * math.exp(min(scale, 709.0)))


def log_contour_moment(model: TwoPointModel, f: GaussianSpec, g: GaussianSpec, k: int,
                       which: str = "majorant", shift: float | None = None,
                       nodes: int | None = None, rtol: float = 1e-12) -> tuple[float, complex]:
    """:func:`contour_moment` as ``(ln|value|, value/|value|)``; immune to underflow."""
    amp, kappa, b = correlation_gaussian(f, g)
    if k == 0:
        v = f.conj().integral() * g.integral()
        return math.log(abs(v)), v / abs(v)
    _require_evaluable(model)
    scale, mant = _contour_scaled(model, amp, kappa, b, k, which, shift, nodes, rtol)
    if mant == 0:
        return -math.inf, 1.0 + 0j
    return scale + math.log(abs(mant)), mant / abs(mant)


def _contour_scaled(model, amp, kappa, b, k, which, shift, nodes, rtol):
    """Refine the rule until stable; returns ``(scale, mantissa)`` with value ``e**scale * mantissa``."""
    eta = default_shift(model, kappa, k, which) if shift is None else float(shift)
    if not eta > 0:
        raise ValueError("contour shift must be positive")
    if nodes is not None:
        return _contour_rule(model, amp, kappa, b, k, which, eta, nodes)[:2]
    prev = None
    for n in (32, 64, 128, 256):
        scale, mant, absmass = _contour_rule(model, amp, kappa, b, k, which, eta, n)
        if prev is not None:
            # compare on the common scale of the finer rule
            p = prev[1] * math.exp(prev[0] - scale)
            if abs(mant - p) <= rtol * abs(mant):
                return scale, mant
        prev = (scale, mant)
    # tiny values are limited by cancellation rather than by the rule
    if abs(mant - p) <= 1e-13 * absmass:
        return scale, mant
    raise QuadratureError(f"contour moment k={k} did not converge: relative change "
                          f"{abs(mant - p) / max(abs(mant), 1e-300):.3g}")


def default_shift(model: TwoPointModel, kappa: float, k: int, which: str = "majorant") -> float:
    """Contour offset used by :func:`contour_moment` for the ``k``-th power."""
    m_min = min(mass for mass, _ in model.weights(which))
    return max(1.5 / math.sqrt(kappa), k * m_min / (2.0 * kappa))


def _contour_rule(model, amp, kappa, b, k, which, eta, n):
    """Tensor Gauss-Hermite rule in log form.

    Returns ``(scale, mantissa, mass)``: the integral is ``e**scale * mantissa``
    and ``mass`` is the sum of absolute contributions on the same scale.
    """
    t, w = hermite_rule(n)
    v = t / math.sqrt(kappa)
    wv = w / math.sqrt(kappa)
    s = b + np.array([1j * eta, 0.0])
    sig = s.imag
    V0, V1 = np.meshgrid(v, v, indexing="ij")
    with np.errstate(divide="ignore"):
        # outermost Hermite weights underflow to 0 for large rules
        log_w = np.log(np.outer(wv, wv) * amp + 0j)
    log_phase = (2j * kappa * V0 * sig[0] + kappa * sig[0] ** 2
                 + 2j * kappa * V1 * sig[1] + kappa * sig[1] ** 2)
    K = kernel(model, s.real[0] + V0 - 1j * eta, s.real[1] + V1, which)
    log_terms = log_w + log_phase + k * np.log(K)
    scale = float(np.max(log_terms.real))
    terms = np.exp(log_terms - scale)
    return scale, complex(np.sum(terms)), float(np.sum(np.abs(terms)))
