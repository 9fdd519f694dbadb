import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wickconv import weights as W
from wickconv.weights import WeightFunction, WeightSequence


# -- indicator ---------------------------------------------------------------

def test_indicator_at_zero():
    for seq in (WeightSequence.power(1.0), WeightSequence.factorial_power(2.0),
                WeightSequence.from_values([1, 2, 5, 20])):
        v = W.indicator(seq, 0.0)
        assert v.log_value == 0.0 and v.argmax == 0


def _brute_indicator(log_a, r):
    vals = np.arange(len(log_a)) * math.log(r) - np.asarray(log_a)
    k = int(np.argmax(vals))
    assert k < len(log_a) - 1, "enumeration range too short"
    return float(vals[k]), k


def test_indicator_kk_at_e():
    seq = WeightSequence.power(1.0)
    ref, k_ref = _brute_indicator(seq.tabulate(100), math.e)
    v = W.indicator(seq, math.e)
    assert v.argmax == k_ref == 1
    assert math.exp(v.log_value) == pytest.approx(math.e, rel=1e-12)
    assert v.log_value == pytest.approx(ref, abs=1e-12)


def test_indicator_factorial_at_10():
    v = W.indicator(WeightSequence.factorial_power(1.0), 10.0)
    assert v.argmax == 10
    assert math.exp(v.log_value) == pytest.approx(1e10 / 3628800, rel=1e-12)
    assert math.exp(v.log_value) == pytest.approx(2755.73, abs=5e-3)


def test_indicator_table_truncation_flag():
    v = W.indicator(WeightSequence.from_values([1, 1, 2, 6]), 100.0)
    assert v.argmax == 3 and v.truncated


def test_indicator_rejects_nonfinite():
    with pytest.raises(ValueError):
        W.indicator(WeightSequence.power(1.0), math.inf)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.0, 1e4), st.floats(0.0, 1e4))
def test_indicator_monotone(gamma, r1, r2):
    seq = WeightSequence.power(gamma)
    lo, hi = sorted((r1, r2))
    assert W.indicator(seq, lo).log_value <= W.indicator(seq, hi).log_value + 1e-9


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_indicator_agrees_with_enumeration(gamma):
    seq = WeightSequence.power(gamma)
    table = seq.tabulate(50000)  # argmax near r**(1/gamma)/e
    for r in (1.5, 7.0, 40.0, 300.0):
        ref, k = _brute_indicator(table, r)
        v = W.indicator(seq, r)
        assert v.log_value == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_indicator_function_cache_consistent():
    f = W.IndicatorFunction(WeightSequence.power(1.0))
    assert f(5.0) == f(5.0) == W.indicator(WeightSequence.power(1.0), 5.0).log_value


# -- Legendre transform --------------------------------------------------------

def test_legendre_quadratic_self_conjugate():
    assert W.legendre(WeightFunction.power(2.0, 0.5), 3.0) == pytest.approx(4.5, rel=1e-12)


def test_legendre_exp_closed_form():
    r = 2.0
    assert W.legendre(WeightFunction.exponential(), r) == pytest.approx(
        r * math.log(r) - r + 1.0, rel=1e-12)
    assert W.legendre(WeightFunction.exponential(), r) == pytest.approx(0.386294, abs=1e-6)


def test_legendre_linear_is_infinite():
    assert W.legendre(WeightFunction.power(1.0, 1.0), 2.0) == math.inf


def test_legendre_rejects_nonconvex_table():
    with pytest.raises(W.WeightError):
        WeightFunction.table([0, 1, 2, 3], [0, 1, 1.5, 4])


def test_legendre_table_matches_quadratic():
    s = np.linspace(0, 20, 2001)
    tab = WeightFunction.table(s, 0.5 * s ** 2)
    # piecewise-linear interpolation of s^2/2 with step h has conjugate r^2/2 + O(h^2)
    for r in (0.5, 2.0, 7.0):
        assert W.legendre(tab, r) == pytest.approx(r * r / 2, abs=1e-4)


@pytest.mark.parametrize("alpha", [WeightFunction.power(2.0, 0.5), WeightFunction.exponential(),
                                   WeightFunction.power(3.0, 1.0)])
def test_legendre_involution(alpha):
    twice = WeightFunction("conjugate", base=alpha)
    for s in np.linspace(0.1, 10, 25):
        assert W.legendre(twice, s) == pytest.approx(alpha(s), rel=1e-8)


def test_closed_form_conjugates_match_numeric():
    for alpha in (WeightFunction.power(2.0, 0.5), WeightFunction.power(3.0, 2.0),
                  WeightFunction.exponential()):
        cf = alpha.conjugate()
        for r in (0.3, 1.0, 4.0):
            assert cf(r) == pytest.approx(W.legendre(alpha, r), rel=1e-10, abs=1e-12)


# -- Young pairs ---------------------------------------------------------------

def test_young_pair_validation():
    with pytest.raises(W.WeightError):
        W.YoungWeightPair(WeightFunction.power(2.0), WeightFunction.power(2.0), 1.0)
    # beta(s) = s does not satisfy 2 beta(s) <= beta(1.5 s)
    with pytest.raises(W.WeightError):
        W.YoungWeightPair(WeightFunction.power(2.0), WeightFunction.power(1.0), 1.5)


def test_sequences_from_young_examples():
    pair = W.YoungWeightPair(WeightFunction.power(2.0, 0.5), WeightFunction.power(1.0, 1.0), 2.0)
    a, b = W.sequences_from_young(pair, 8)
    assert a.log_value(0) == 0.0 and b.log_value(0) == 0.0
    assert math.exp(b.log_value(5)) == pytest.approx((5 / math.e) ** 5, rel=1e-10)
    assert math.exp(b.log_value(5)) == pytest.approx(21.056, abs=1e-3)
    assert math.exp(a.log_value(4)) == pytest.approx(16 * math.exp(-2), rel=1e-10)
    for k in range(1, 9):
        assert a.log_value(k) == pytest.approx(0.5 * k * math.log(k) - 0.5 * k, abs=1e-10)
    for seq in (a, b):
        rep = W.validate_gs(seq)
        assert rep.log_convex and rep.submult.ok


def test_young_round_trip_growth():
    pair = W.YoungWeightPair(WeightFunction.power(2.0, 0.5), WeightFunction.power(2.0, 0.5), 2.0)
    a, _ = W.sequences_from_young(pair, 10500)
    f = W.IndicatorFunction(a)
    for r in np.linspace(1, 100, 40):
        assert abs(f(r) - r * r / 2) <= math.log(r + 2)


# -- validation ------------------------------------------------------------------

def test_validate_power_family():
    rep = W.validate_gs(WeightSequence.power(1.0), k_max=50)
    assert rep.log_convex and rep.first_violation is None
    assert rep.submult.ok
    # k^k: a_{k+l}/(a_k a_l) <= 2^{k+l}, the minimal grid h sits just above 2
    assert 1.9 < rep.submult.h <= 2.01


def test_validate_all_ones():
    rep = W.validate_gs(WeightSequence.from_values([1.0] * 30))
    assert rep.log_convex and rep.submult.ok
    assert rep.submult.C == pytest.approx(1.0) and rep.submult.h == pytest.approx(1.0)


def test_validate_non_log_convex_table():
    rep = W.validate_gs(WeightSequence.from_values([1, 1, 10, 11]))
    assert not rep.log_convex and rep.first_violation == 2


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 3.0), min_size=4, max_size=30))
def test_validate_convexity_matches_second_differences(incs):
    # cumulative sums of sorted increments give a log-convex sequence
    la = np.concatenate([[0.0], np.cumsum(sorted(incs))])
    rep = W.validate_gs(WeightSequence.from_log_values(la))
    assert rep.log_convex


def test_csv_and_config(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("k,a_k\n0,1\n1,1\n2,2\n3,6\n")
    seq = WeightSequence.from_csv(p)
    assert seq.k_max == 3 and math.exp(seq.log_value(3)) == pytest.approx(6.0)
    cfg = WeightSequence.from_config({"family": "power", "gamma": 0.5})
    assert cfg.kind == "power" and cfg.gamma == 0.5
    with pytest.raises(W.WeightError):
        WeightSequence.from_config({"family": "nope"})


def test_csv_gap_rejected(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("0,1\n2,2\n")
    with pytest.raises(W.WeightError):
        WeightSequence.from_csv(p)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_indicator_growth_exponent(gamma):
    seq = WeightSequence.power(gamma)
    r = np.logspace(3, 6, 16)
    ln_a = np.array([W.indicator(seq, x).log_value for x in r])
    slope = np.polyfit(np.log(r), np.log(ln_a), 1)[0]
    assert slope == pytest.approx(1.0 / gamma, rel=0.05)
