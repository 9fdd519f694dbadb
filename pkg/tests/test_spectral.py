import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wickconv import spectral as S
from wickconv.spectral import EbNormSpec, EntireGaussian, LorentzCone, NormGrid
from wickconv.weights import WeightFunction, YoungWeightPair

FWD = LorentzCone(2, "forward")
BWD = LorentzCone(2, "backward")

coord = st.floats(-50, 50, allow_nan=False)
vec2 = st.tuples(coord, coord)


# -- cones -------------------------------------------------------------------------

def test_Kn_minus_examples():
    assert S.in_Kn_minus([(-1.0, 0.0)])
    assert S.in_Kn_minus([(-3.0, 1.0), (-1.0, 0.5)])
    assert not S.in_Kn_minus([(1.0, 0.0)])
    # the last momentum alone must lie in the cone
    assert not S.in_Kn_minus([(-5.0, 0.0), (-1.0, 2.0)])
    # boundary is included
    assert S.in_Kn_minus([(-1.0, 1.0)])


def test_Kn_minus_errors():
    with pytest.raises(ValueError):
        S.in_Kn_minus([])
    with pytest.raises(ValueError):
        S.in_Kn_minus([(1.0, 0.0), (1.0, 0.0, 0.0)])


def test_Kn_minus_exact_near_boundary():
    # float sums would round 0.1 + 0.2 to above 0.3; exact arithmetic keeps the tie
    pts = [(-0.1, 0.1), (-0.2, 0.2)]
    assert S.in_Kn_minus(pts)
    assert S.ProductCone(2).contains(pts)


@settings(max_examples=200, deadline=None)
@given(st.lists(vec2, min_size=1, max_size=5), st.integers(-20, 20))
def test_Kn_minus_scale_invariant(points, e):
    lam = 2.0 ** e  # exact scaling
    scaled = [(lam * a, lam * b) for a, b in points]
    assert S.in_Kn_minus(points) == S.in_Kn_minus(scaled)


def test_Kn_minus_against_float_loop():
    rng = np.random.default_rng(5)
    for _ in range(2000):
        n = rng.integers(1, 5)
        pts = rng.normal(size=(n, 2)) + np.array([-0.8, 0.0])
        suffix = np.cumsum(pts[::-1], axis=0)
        ref = bool(np.all(-suffix[:, 0] >= np.abs(suffix[:, 1])))
        assert S.in_Kn_minus(list(pts)) == ref


def test_dist_examples():
    assert S.dist_to_cone(FWD, (2.0, 1.0)) == 0.0
    assert S.dist_to_cone(FWD, (0.0, 1.0)) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
    assert S.dist_to_cone(FWD, (-1.0, 0.0)) == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(FWD.project((0.0, 1.0)), (0.5, 0.5))
    assert S.dist_to_cone(BWD, (1.0, 0.0)) == pytest.approx(1.0)


def test_dist_matches_dense_boundary_sampling():
    rng = np.random.default_rng(0)
    tau = np.linspace(0, 20, 400001)
    for cone in (FWD, BWD):
        bd = np.concatenate([np.stack([cone.sign * tau, tau], 1), np.stack([cone.sign * tau, -tau], 1)])
        for p in rng.uniform(-5, 5, size=(30, 2)):
            inside = cone.sign * p[0] >= abs(p[1])
            brute = 0.0 if inside else np.min(np.linalg.norm(bd - p, axis=1))
            assert S.dist_to_cone(cone, p) == pytest.approx(brute, abs=1e-4)


@settings(max_examples=200, deadline=None)
@given(vec2, vec2, st.floats(0.0, 100.0))
def test_dist_lipschitz_and_homogeneous(p, q, lam):
    for cone in (FWD, BWD):
        dp, dq = S.dist_to_cone(cone, p), S.dist_to_cone(cone, q)
        assert abs(dp - dq) <= math.dist(p, q) * (1 + 1e-12) + 1e-12
        scaled = S.dist_to_cone(cone, (lam * p[0], lam * p[1]))
        assert scaled == pytest.approx(lam * dp, rel=1e-12, abs=1e-12)


def test_projection_optimal():
    rng = np.random.default_rng(3)
    for cone in (FWD, BWD, LorentzCone(3, "forward")):
        P = rng.normal(scale=3, size=(1000, cone.dim))
        B = S.cone_boundary_points(cone, 1000, 10.0, rng=rng)
        d = S.dist_to_cone_array(cone, P.T)
        brute = np.min(np.linalg.norm(P[:, None, :] - B[None, :, :], axis=2), axis=1)
        assert np.all(d <= brute + 1e-12)
        scalar = np.array([S.dist_to_cone(cone, p) for p in P[:50]])
        assert np.allclose(scalar, d[:50], rtol=0, atol=1e-14)


def test_projection_lies_on_cone():
    rng = np.random.default_rng(8)
    for p in rng.normal(size=(200, 3)):
        cone = LorentzCone(3, "backward")
        x = cone.project(p)
        assert np.linalg.norm(p - x) == pytest.approx(S.dist_to_cone(cone, p), abs=1e-12)
        assert -x[0] >= np.linalg.norm(x[1:]) - 1e-12


def test_cone_validation():
    with pytest.raises(ValueError):
        LorentzCone(2, "sideways")
    with pytest.raises(ValueError):
        S.dist_to_cone(FWD, (math.inf, 0.0))


# -- norms --------------------------------------------------------------------------

def _pair(a_coef=1.0, b_coef=0.5):
    return YoungWeightPair(WeightFunction.power(2.0, a_coef), WeightFunction.power(2.0, b_coef), 2.0)


def test_norm_zero_function():
    r = S.eb_norm(EntireGaussian(zero=True), EbNormSpec(_pair()))
    assert r.value == 0.0 and not r.infinite


def test_norm_constant_infinite():
    r = S.eb_norm(EntireGaussian(c=0.0), EbNormSpec(_pair()))
    assert r.infinite and r.value == math.inf


def test_norm_gaussian_example():
    # exp(-p^2 + q^2 - (2q)^2 + (p/2)^2/2): maximum 1 at the origin
    g = EntireGaussian(1, 1.0)
    r = S.eb_norm(g, EbNormSpec(_pair(), A=2.0, B=2.0))
    assert r.value == pytest.approx(1.0, abs=1e-6)
    assert not r.infinite and r.shell_margin > 0
    assert np.allclose(r.argmax_p, 0) and np.allclose(r.argmax_q, 0)


def test_norm_shifted_gaussian_closed_form():
    # -(p + 1.5)^2 + q^2 - 2 q^2 + p^2/4 peaks at p = -2, q = 0 with value 3/4
    g = EntireGaussian(1, 1.0, center=(-1.5,))
    spec = EbNormSpec(_pair(2.0, 0.25), A=1.0, B=1.0)
    r = S.eb_norm(g, spec)
    assert r.log_value == pytest.approx(0.75, abs=1e-6)
    assert r.argmax_p[0] == pytest.approx(-2.0, abs=1e-9)


def test_cone_norm_whole_space_equals_norm():
    g = EntireGaussian(1, 1.0, center=(-1.5,))
    spec = EbNormSpec(_pair(2.0, 0.25))
    assert S.eb_cone_norm(g, spec).value == S.eb_norm(g, spec).value


def test_cone_norm_damps_outside_cone():
    g = EntireGaussian(1, 1.0, center=(-1.5,))
    spec = EbNormSpec(_pair(2.0, 0.25), cone=LorentzCone(1, "forward"))
    plain, cone = S.eb_norm(g, spec), S.eb_cone_norm(g, spec)
    assert cone.value < plain.value
    # continuous maximizer p = -6/11 of -(p+1.5)^2 + p^2/4 - 2 p^2
    exact = -(-6 / 11 + 1.5) ** 2 + (6 / 11) ** 2 / 4 - 2 * (6 / 11) ** 2
    assert exact - 0.01 <= cone.log_value <= exact + 1e-12


def test_cone_norm_below_norm_2d():
    rng = np.random.default_rng(2)
    grid = NormGrid(p_max=4.0, q_max=4.0, n_p=25, n_q=25)
    for orient in ("forward", "backward"):
        center = tuple(rng.normal(size=2))
        g = EntireGaussian(2, 1.0, center=center)
        spec = EbNormSpec(_pair(2.0, 0.25), cone=LorentzCone(2, orient))
        assert S.eb_cone_norm(g, spec, grid).value <= S.eb_norm(g, spec, grid).value


def test_norm_decreases_in_A():
    g = EntireGaussian(1, 1.0, center=(0.7,), poly={(2,): 1.0})
    vals = [S.eb_norm(g, EbNormSpec(_pair(), A=A)).value for A in (1.5, 2.0, 3.0, 5.0)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_norm_spec_validation():
    with pytest.raises(ValueError):
        EbNormSpec(_pair(), A=0.0)
    with pytest.raises(ValueError):
        EntireGaussian(1, -1.0)
