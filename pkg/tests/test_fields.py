import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import k0

from wickconv import fields as F
from wickconv.fields import GaussianSpec, TubePoint, TwoPointModel

PV = TwoPointModel.pv_pair(1.0, 2.0)
POS = TwoPointModel.positive(1.0)
C = 1.0 / (2.0 * math.pi)


def momentum_oracle(model, zeta, which="indefinite"):
    """``c sum_shell weight int dp/(2 omega) exp(-i (omega zeta0 - p zeta1))``."""
    total = 0j
    for m, wgt in model.weights(which):
        def part(p, fn):
            om = math.hypot(m, p)
            return fn(np.exp(-1j * (om * zeta[0] - p * zeta[1])) / (2 * om))
        re = quad(part, -np.inf, np.inf, args=(np.real,), epsabs=0, epsrel=1e-11, limit=500)[0]
        im = quad(part, -np.inf, np.inf, args=(np.imag,), epsabs=0, epsrel=1e-11, limit=500)[0]
        total += wgt * complex(re, im)
    return model.c_norm * total


def bessel_oracle(model, zeta, which="indefinite"):
    q = -(mpmath.mpc(zeta[0]) ** 2 - mpmath.mpc(zeta[1]) ** 2)
    s = mpmath.sqrt(q)
    return complex(model.c_norm * sum(w * mpmath.besselk(0, m * s) for m, w in model.weights(which)))


def test_eval_w_pv_example():
    v = F.eval_w(PV, TubePoint([-1j, 0]))
    assert v == pytest.approx(C * (k0(1.0) - k0(2.0)), rel=1e-14)
    assert v == pytest.approx(momentum_oracle(PV, (-1j, 0)), rel=1e-8)


def test_eval_w_random_points_match_oracles():
    rng = np.random.default_rng(3)
    for _ in range(20):
        y0 = rng.uniform(0.2, 3.0)
        y1 = y0 * rng.uniform(-0.9, 0.9)
        x = rng.uniform(-3, 3, 2)
        zeta = x - 1j * np.array([y0, y1])
        v = F.eval_w(PV, TubePoint(zeta))
        assert v == pytest.approx(bessel_oracle(PV, zeta), rel=1e-10, abs=1e-14)
    zeta = np.array([0.3 - 0.8j, 0.5 + 0.1j])
    assert F.eval_w(PV, TubePoint(zeta)) == pytest.approx(momentum_oracle(PV, zeta), rel=1e-7)


def test_positive_decays_monotonically():
    vals = [F.eval_w(POS, TubePoint([-1j * t, 0])).real for t in np.linspace(1, 40, 40)]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-16


def test_equal_masses_cancel():
    m = TwoPointModel.pv_pair(1.5, 1.5)
    assert F.eval_w(m, TubePoint([0.3 - 1j, 0.2])) == 0


def test_tube_errors():
    with pytest.raises(F.TubeError):
        TubePoint([1j, 0])  # forward, declared backward
    with pytest.raises(F.TubeError):
        TubePoint([-0.5j, 1j])  # spacelike imaginary part
    with pytest.raises(F.TubeError):
        F.eval_w(PV, TubePoint([1j, 0], "forward"))


def test_branch_cut_guard():
    # -zeta^2 = -(1 - i eps)^2 sits next to the negative real axis
    with pytest.raises(F.BranchCutError):
        F.eval_w(PV, TubePoint([1 - 1e-12j, 0]))


def test_wmaj_examples():
    x, y = np.array([0.4, -1.0]), np.array([0.7, 0.2])
    z, zp = TubePoint.from_parts(x, -y), TubePoint.from_parts(x, y, "forward")
    v = F.eval_wmaj(PV, z, zp)
    assert abs(v.imag) < 1e-15 and v.real > 0
    assert v == pytest.approx(momentum_oracle(PV, -2j * y, "majorant"), rel=1e-8)
    # positive metric: majorant is w itself
    assert F.eval_wmaj(POS, z, zp) == pytest.approx(F.eval_w(POS, TubePoint(z.z - zp.z)), rel=1e-15)
    # equal masses double the single shell
    eq = TwoPointModel.pv_pair(1.0, 1.0)
    assert F.eval_wmaj(eq, z, zp) == pytest.approx(2 * F.eval_wmaj(POS, z, zp), rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 4), st.floats(-0.95, 0.95))
def test_hermiticity(x0, x1, y0, frac):
    zeta = np.array([x0 - 1j * y0, x1 - 1j * y0 * frac])
    try:
        a = F.eval_w(PV, TubePoint(zeta))
        b = F.eval_w(PV, TubePoint(-np.conj(zeta)))
    except F.BranchCutError:
        return
    assert b == pytest.approx(np.conj(a), rel=1e-12, abs=1e-15)


def test_boundary_values_spacelike_cauchy():
    vals = [F.eval_w(PV, TubePoint([-1j * e, 1.0])) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    diffs = [abs(a - b) for a, b in zip(vals, vals[1:])]
    assert all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
    assert diffs[-1] < 1e-6
    assert vals[-1] == pytest.approx(C * (k0(1.0) - k0(2.0)), rel=1e-6)


def test_boundary_values_timelike_stable():
    vals = [F.eval_w(PV, TubePoint([1.0 - 1j * e, 0.0])) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    ims = [v.imag for v in vals]
    assert all(np.sign(v) == np.sign(ims[-1]) for v in ims)
    assert abs(ims[-1] - ims[-2]) < abs(ims[1] - ims[0])
    assert abs(ims[-1] - ims[-2]) < 1e-3


# -- the bound ----------------------------------------------------------------

def test_eq8_coincident_points_positive_metric():
    r = F.check_bound_eq8(POS, [0.3, 0.1], [0.3, 0.1], [0.8, 0.2])
    assert r.ok and r.lhs == pytest.approx(r.rhs, rel=1e-13)


def test_eq8_pv_example():
    r = F.check_bound_eq8(PV, [0, 0], [0, 3], [1, 0])
    assert r.ok and r.margin > 0


def test_eq8_requires_forward_y():
    with pytest.raises(F.TubeError):
        F.check_bound_eq8(PV, [0, 0], [0, 1], [-1, 0])


def test_eq8_random_sweep_and_pointwise_agree():
    rng = np.random.default_rng(11)
    x, xp, y = F.random_eq8_configs(rng, 100)
    sw = F.eq8_sweep(PV, x, xp, y)
    assert sw["ok"].all()
    for i in range(0, 100, 10):
        r = F.check_bound_eq8(PV, x[i], xp[i], y[i])
        assert r.lhs == pytest.approx(sw["lhs"][i], rel=1e-12)
        assert r.rhs == pytest.approx(sw["rhs"][i], rel=1e-12)


# -- profile fit ----------------------------------------------------------------

def test_fit_profile_uv_log_and_ir_bounded():
    fit = F.fit_profile(PV, np.logspace(-2, 3, 60), np.logspace(-6, 1, 80))
    assert fit.bound_holds
    t = fit.t_grid
    sel = (t >= 1e-4) & (t <= 1e-1)
    X = np.log(1 / t[sel])
    Y = fit.uv_envelope[sel]
    coef = np.polyfit(X, Y, 1)
    resid = Y - np.polyval(coef, X)
    r2 = 1 - np.sum(resid ** 2) / np.sum((Y - Y.mean()) ** 2)
    assert r2 > 0.99
    # c (ln(1/t) + ...) for each of two shells: slope 2 c
    assert coef[0] == pytest.approx(2 * C, rel=0.02)
    ir = fit.ir_envelope[fit.r_grid > 10]
    assert np.ptp(ir) == 0.0
    assert np.all(np.diff(fit.ir_envelope) >= 0) and np.all(np.diff(fit.uv_envelope) <= 0)


def test_fit_profile_positive_same_shape():
    fit = F.fit_profile(POS, np.logspace(-2, 3, 40), np.logspace(-6, 1, 40))
    assert fit.bound_holds
    assert np.ptp(fit.ir_envelope[fit.r_grid > 10]) == 0.0


def test_named_profiles_monotone():
    for ir in ("const", "log", "power"):
        for uv in ("const", "log", "power"):
            assert F.IRUVProfile.named(ir, uv, 1.5).check_monotone()


# -- smeared forms --------------------------------------------------------------

def _random_gaussian(rng):
    return GaussianSpec(rng.normal(size=2) + 1j * rng.normal(scale=0.3, size=2),
                        rng.uniform(0.5, 2.0))


def test_smeared_majorant_diagonal_nonnegative():
    rng = np.random.default_rng(5)
    for _ in range(10):
        f = _random_gaussian(rng)
        v = F.smeared_form(PV, f, f, "majorant")
        assert abs(v.imag) <= 1e-12 * abs(v) and v.real > 0


def test_smeared_equal_masses_vanish():
    eq = TwoPointModel.pv_pair(1.0, 1.0)
    f, g = GaussianSpec([0.3, 0.1], 1.2), GaussianSpec([0.0, 1.0], 0.8)
    assert F.smeared_form(eq, f, g, "indefinite") == 0


def test_cauchy_schwarz_random_pairs():
    rng = np.random.default_rng(8)
    for _ in range(100):
        f, g = _random_gaussian(rng), _random_gaussian(rng)
        lhs = abs(F.smeared_form(PV, f, g, "majorant"))
        rhs = math.sqrt(F.smeared_form(PV, f, f, "majorant").real
                        * F.smeared_form(PV, g, g, "majorant").real)
        assert lhs <= rhs * (1 + 1e-9)


@pytest.mark.parametrize("which", ["indefinite", "majorant"])
def test_contour_shift_invariance(which):
    rng = np.random.default_rng(2)
    for _ in range(5):
        f, g = _random_gaussian(rng), _random_gaussian(rng)
        ref = F.smeared_form(PV, f, g, which)
        for shift in (None, 2.5, 4.0):
            v = F.contour_moment(PV, f, g, 1, which=which, shift=shift)
            assert v == pytest.approx(ref, rel=1e-6)


def test_gaussian_fourier_matches_quadrature():
    f = GaussianSpec([0.3 + 0.2j, -0.5], 1.3)
    p0, p1 = 0.7, -1.1
    def integrand(x0, x1, part):
        return part(f(x0, x1) * np.exp(1j * (p0 * x0 - p1 * x1)))
    from scipy.integrate import dblquad
    re = dblquad(lambda b, a: integrand(a, b, np.real), -8, 8, -8, 8, epsabs=1e-12)[0]
    im = dblquad(lambda b, a: integrand(a, b, np.imag), -8, 8, -8, 8, epsabs=1e-12)[0]
    assert f.fourier(p0, p1) == pytest.approx(complex(re, im), abs=1e-9)


def test_log_contour_moment_consistent():
    f = GaussianSpec([0, 0], 1.0)
    lv, ph = F.log_contour_moment(PV, f, f, 3)
    v = F.contour_moment(PV, f, f, 3)
    assert math.exp(lv) * ph == pytest.approx(v, rel=1e-12)


# -- support lemma ----------------------------------------------------------------

def test_support_check():
    assert F.support_check_lemma(PV)
    assert F.support_check_lemma(POS)
    fixture = TwoPointModel("custom", (F.Shell(1.0, 1.0, 1.0), F.Shell(3.0, 0.0, 1.0)))
    assert not F.support_check_lemma(fixture)


def test_model_from_config():
    m = TwoPointModel.from_config({"kind": "pv-pair", "m1": 1.0, "m2": 2.0})
    assert m.kind == "pv-pair" and [s.mass for s in m.shells] == [1.0, 2.0]
    p = TwoPointModel.from_config({"kind": "profile", "ir": "log", "uv": "power", "gamma": 1.5})
    assert not p.evaluable
    with pytest.raises(ValueError):
        F.eval_w(p, TubePoint([-1j, 0]))
    with pytest.raises(ValueError):
        TwoPointModel.pv_pair(2.0, 1.0)
