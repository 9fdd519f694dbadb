import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wickconv import convergence as C
from wickconv.fields import IRUVProfile, TwoPointModel
from wickconv.weights import WeightSequence
from wickconv.wick import CoefficientSequence

EXP1 = CoefficientSequence.exponential(1.0)
R_GRID = np.logspace(0, 6, 49)
S_GRID = np.logspace(0, 6, 31)


def _mp_series(L, g, x):
    """Oracle for the exponential case: sum_k k! y^k/(2k)! = 1 + sqrt(pi y)/2 e^{y/4} erf(sqrt(y)/2)."""
    mp.mp.dps = 40
    y = mp.mpf(L) * g * g * x
    return float(mp.log(1 + mp.sqrt(mp.pi * y) / 2 * mp.exp(y / 4) * mp.erf(mp.sqrt(y) / 2)))


def _mp_series_direct(L, g, x, p, n_terms):
    mp.mp.dps = 40
    y = mp.mpf(L) * g * g * x
    return float(mp.log(mp.fsum(y ** k * mp.factorial(k) / mp.factorial(2 * k) ** p
                                for k in range(n_terms))))


# -- coefficient conditions -------------------------------------------------------

def test_conditions_exponential():
    rep = C.check_conditions_13(EXP1)
    assert rep.root_ok and rep.submult_ok and rep.ok
    # (k!/(2k)!)^{1/k} decreases to zero
    assert np.all(np.diff(rep.root_values) < 0)


def test_conditions_constant_fails_root():
    rep = C.check_conditions_13(CoefficientSequence.constant())
    assert not rep.root_ok
    # k!^{1/k} grows like k/e
    assert rep.root_values[-1] == pytest.approx(200 / math.e, rel=0.05)


def test_conditions_monomial_vacuous():
    rep = C.check_conditions_13(CoefficientSequence.monomial(3))
    assert rep.ok and rep.vacuous


def test_conditions_kmax_precondition():
    with pytest.raises(ValueError):
        C.check_conditions_13(EXP1, k_max=7)


# -- the series S ---------------------------------------------------------------------

def test_series_at_zero():
    d = CoefficientSequence.exponential(0.3)
    assert C.series_S(1.0, d, 0.0).log_value == pytest.approx(float(d.log_abs(0)))


def test_series_exponential_value():
    # sum_k k!/(2k)! = 1.5922965...; the k <= 50 truncation agrees
    v = C.series_S(1.0, EXP1, 1.0)
    assert math.exp(v.log_value) == pytest.approx(1.5922965, abs=1e-7)
    assert v.log_value == pytest.approx(_mp_series(1, 1, 1), abs=1e-13)
    direct = C.series_S(1.0, EXP1, 1.0, k_max=50)
    assert direct.log_value == pytest.approx(v.log_value, abs=1e-14) and not direct.truncated


@pytest.mark.parametrize("L,g,x", [(10, 1, 1e3), (1, 2.0, 37.0), (0.3, 0.5, 1e5)])
def test_series_against_mpmath(L, g, x):
    v = C.series_S(L, CoefficientSequence.exponential(g), x)
    assert v.log_value == pytest.approx(_mp_series(L, g, x), rel=1e-10)


def test_series_factorial_power_against_mpmath():
    d = CoefficientSequence.factorial_power(1.0, 0.75)
    v = C.series_S(2.0, d, 50.0)
    assert v.log_value == pytest.approx(_mp_series_direct(2.0, 1.0, 50.0, 0.75, 8000), rel=1e-10)


def test_series_laplace_regime():
    # the peak sits near L x / 4, so x = 1e7 uses the Laplace approximation
    x = 1e7
    v = C.series_S(1.0, EXP1, x)
    assert v.method == "laplace"
    assert v.log_value == pytest.approx(_mp_series(1, 1, x), rel=1e-9)


def test_series_constant_diverges():
    for x in (1e-3, 1.0):
        v = C.series_S(1.0, CoefficientSequence.constant(), x)
        assert v.diverges and v.log_value == math.inf


def test_series_monomial_finite():
    d = CoefficientSequence.monomial(4)
    v = C.series_S(3.0, d, 2.0)
    # only k = 2 contributes: 3^2 * 2! * 2^2
    assert v.log_value == pytest.approx(math.log(72.0))


def test_series_truncation_flag():
    v = C.series_S(1.0, EXP1, 1e3, k_max=10)
    assert v.truncated


# -- IR and UV checks ------------------------------------------------------------------

def test_ir_bounded_profile_holds():
    v = C.check_ir(EXP1, lambda r: 0.7, WeightSequence.power(3.0), 5.0, 1.0, R_GRID)
    assert v.status == C.HOLDS


def test_ir_log_profile_holds():
    v = C.check_ir(EXP1, math.log1p, WeightSequence.power(0.5), 10.0, 0.1, R_GRID)
    assert v.holds and math.isfinite(v.C)


def test_ir_linear_profile_fails():
    # S grows like exp(r/4) while a(0.1 r) ~ exp(0.1 r/e)
    v = C.check_ir(EXP1, lambda r: r, WeightSequence.power(1.0), 1.0, 0.1, np.logspace(0, 4, 41))
    assert v.status == C.FAILS
    tail = v.margins[-5:]
    assert np.all(np.diff(tail) > 0)


def test_ir_monotone_in_L():
    grid = np.logspace(0, 4, 41)
    statuses = [C.check_ir(EXP1, lambda r: r, WeightSequence.power(1.0), L, 1.0, grid).status
                for L in (0.5, 1.0, 2.0, 4.0)]
    first_fail = statuses.index(C.FAILS)
    assert all(s == C.FAILS for s in statuses[first_fail:])
    assert statuses[0] == C.HOLDS


def test_ir_monotone_in_space():
    # smaller gamma means a larger indicator; verdicts only improve
    grid = np.logspace(0, 5, 41)
    prof = IRUVProfile.named("power", gamma_ir=2.0)
    seen_hold = False
    for gam in (0.9, 0.7, 0.5, 0.4, 0.3):
        holds = C.check_ir(EXP1, prof.w_ir, WeightSequence.power(gam), 1.0, 1.0, grid).holds
        assert holds or not seen_hold
        seen_hold |= holds
    assert seen_hold


def test_inner_infimum_closed_form():
    for L in (0.5, 1.0, 3.0):
        for s in (2.0, 10.0, 1e3):
            inner = C.inner_infimum(s, lambda t: L * math.log(1 / t))
            assert not inner.bracket
            # the minimum is quadratic, so its location is only good to ~sqrt(tol)
            assert inner.t_star == pytest.approx(L / s, rel=1e-6)
            assert inner.log_value == pytest.approx(L + L * math.log(s / L), rel=1e-8, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 1e4), st.floats(0.1, 5.0), st.floats(0.2, 2.0))
def test_inner_infimum_below_samples(s, L, gam):
    def log_g(t):
        return L * t ** (-gam)

    inner = C.inner_infimum(s, log_g)
    ts = np.logspace(-12, 3, 121)
    assert inner.log_value <= min(s * t + log_g(t) for t in ts) + 1e-12


def test_uv_trivial_coefficients():
    inner = C.inner_infimum(5.0, lambda t: 0.0)
    assert inner.log_value == pytest.approx(0.0, abs=1e-10) and inner.bracket


def test_uv_log_profile_holds():
    b = WeightSequence.factorial_power(1.0)
    v = C.check_uv(EXP1, lambda t: max(-math.log(t), 0.0), b, 1.0, 1.0, S_GRID)
    assert v.holds


# -- the normal exponential -----------------------------------------------------------

@pytest.mark.parametrize("gamma_a,expected", [(0.4, C.HOLDS), (0.6, C.FAILS)])
def test_exp_case_power_boundary(gamma_a, expected):
    prof = IRUVProfile.named("power", "log", gamma_ir=2.0)
    res = C.check_exp_case(1.0, prof, WeightSequence.power(gamma_a), WeightSequence.power(1.0),
                           (1.0, 10.0), R_GRID, S_GRID)
    assert all(v.status == expected for v in res.ir.values())
    assert res.uv_holds


def test_exp_case_log_profile():
    prof = IRUVProfile.named("log", "log")
    res = C.check_exp_case(1.0, prof, WeightSequence.power(2.0), WeightSequence.power(1.0),
                           (1.0, 5.0, 20.0), R_GRID, S_GRID)
    assert res.ir_holds and res.uv_holds and res.L_best_ir == 20.0


def test_recommend_power_profile():
    prof = IRUVProfile.named("power", "log", gamma_ir=2.0)
    rec = C.recommend_space(EXP1, prof, L=1.0, r_grid=np.logspace(0, 6, 31),
                            s_grid=np.logspace(0, 4, 13))
    assert rec.status_a == "bracketed"
    assert 0.45 <= rec.gamma_a <= 0.55
    lo, hi = rec.bracket_a
    assert hi - lo <= 0.01 + 1e-12


def test_recommend_bounded_and_monomial():
    prof = IRUVProfile.named("const", "const")
    rec = C.recommend_space(EXP1, prof, r_grid=np.logspace(0, 4, 13), s_grid=np.logspace(0, 3, 10))
    assert rec.status_a == "unconstrained" and rec.gamma_a == 20.0
    # r^2 against a(r) ~ exp(c r^(1/20)) turns over near r ~ 1e15, hence the long grid
    rec = C.recommend_space(CoefficientSequence.monomial(2), IRUVProfile.named("power", gamma_ir=2.0),
                            r_grid=np.logspace(0, 18, 37), s_grid=np.logspace(0, 3, 10))
    assert rec.status_a == rec.status_b == "unconstrained"


def test_tail_verdict_cases():
    g = np.logspace(0, 2, 21)
    assert C.tail_verdict(g, -g) == C.HOLDS
    assert C.tail_verdict(g, g) == C.FAILS
    assert C.tail_verdict(g, np.sin(g)) == C.INCONCLUSIVE
    assert C.tail_verdict(g, np.full(21, np.nan)) == C.INCONCLUSIVE


# -- diagnostic for the holomorphic kernels --------------------------------------------

PV = TwoPointModel.pv_pair(1.0, 2.0)


def test_theorem1_single_term():
    rep = C.theorem1_diagnostic(PV, CoefficientSequence.monomial(1), WeightSequence.power(0.5),
                                WeightSequence.power(1.0), K_max=3, n_x=81,
                                s_grid=np.logspace(0, 2, 6))
    assert np.all(np.isfinite(rep.log_sums))
    assert "single nonzero term" in rep.notes


def test_theorem1_constant_weight_finite():
    a = WeightSequence.from_values([1.0] * 40)
    rep = C.theorem1_diagnostic(PV, CoefficientSequence.monomial(1), a, WeightSequence.power(1.0),
                                K_max=2, n_x=81, s_grid=np.logspace(0, 2, 6))
    assert np.all(np.isfinite(rep.log_sums))


def test_theorem1_exponential_cauchy():
    rep = C.theorem1_diagnostic(PV, EXP1, WeightSequence.power(0.5), WeightSequence.power(1.0),
                                K_max=30, n_x=81, s_grid=np.logspace(0, 2, 6))
    assert rep.cauchy_from is not None and rep.cauchy_from <= 20


def test_theorem1_preconditions():
    with pytest.raises(ValueError):
        C.theorem1_diagnostic(PV, EXP1, WeightSequence.power(0.5), WeightSequence.power(1.0),
                              K_max=31)
    with pytest.raises(ValueError):
        C.theorem1_diagnostic(PV, EXP1, WeightSequence.power(0.5), WeightSequence.power(1.0),
                              eta=(0.5, 1.0))
