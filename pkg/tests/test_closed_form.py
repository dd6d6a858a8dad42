import math

import numpy as np
import pytest
from scipy.integrate import quad

from dividend_game import ClosedForm, ModelParams, MonotoneMap, generator_apply, solve_roots

from conftest import GOLDEN


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(mu=0.0, sigma=0.12, r=0.01)
    with pytest.raises(ValueError):
        ModelParams(mu=0.03, sigma=-1.0, r=0.01)
    with pytest.raises(ValueError):
        ModelParams(mu=0.03, sigma=0.12, r=0.0)
    with pytest.raises(ValueError):
        ModelParams(mu=float("nan"), sigma=0.12, r=0.01)


def test_solve_roots_reference_params(params):
    z1, z2 = solve_roots(params)
    assert z1 < 0 < z2
    assert z1 == pytest.approx(GOLDEN["zeta1"], rel=1e-14)
    assert z2 == pytest.approx(GOLDEN["zeta2"], rel=1e-14)


def test_solve_roots_satisfy_quadratic(params):
    z1, z2 = solve_roots(params)
    s2 = params.sigma**2
    for z in (z1, z2):
        assert abs(z * z + 2 * params.mu / s2 * z - 2 * params.r / s2) <= 1e-12 * abs(z)


def test_solve_roots_golden_ratio():
    # mu = sigma^2/2 = r turns the quadratic into zeta^2 + zeta - 1 = 0
    p = ModelParams(mu=0.02, sigma=0.2, r=0.02)
    z1, z2 = solve_roots(p)
    assert z2 == pytest.approx(GOLDEN["golden_zeta2"], rel=1e-14)
    assert z1 == pytest.approx(-(math.sqrt(5) + 1) / 2, rel=1e-14)


def test_solve_roots_vieta_random():
    rng = np.random.default_rng(1)
    for _ in range(200):
        mu, sigma, r = rng.uniform(0.005, 2.0, size=3)
        p = ModelParams(mu=mu, sigma=sigma, r=r)
        z1, z2 = solve_roots(p)
        assert z1 + z2 == pytest.approx(-2 * mu / sigma**2, rel=1e-12)
        assert z1 * z2 == pytest.approx(-2 * r / sigma**2, rel=1e-12)


def test_psi_base_properties(cf):
    assert cf.psi(0.0) == 0.0
    assert cf.psi_d1(0.0) == pytest.approx(1.0, abs=1e-15)
    xs = np.linspace(0.0, 3 * cf.B, 500)
    assert np.all(np.diff(cf.psi(xs)) > 0)
    with pytest.raises(ValueError):
        cf.psi(-0.1)
    with pytest.raises(ValueError):
        cf.psi_d1(-1e-9)


def test_psi_frozen_values(cf):
    assert cf.psi(cf.B) == pytest.approx(GOLDEN["psi_B"], rel=1e-13)
    assert cf.psi_d1(cf.B) == pytest.approx(GOLDEN["psi1_B"], rel=1e-13)
    assert cf.psi(GOLDEN["x0"]) == pytest.approx(GOLDEN["psi_x0"], rel=1e-13)


def test_generator_annihilates_psi(cf):
    rng = np.random.default_rng(2)
    xs = rng.uniform(0.0, 3 * cf.B, 1000)
    worst = max(abs(generator_apply(cf, cf.psi_triple, x)) for x in xs)
    assert worst <= 1e-9


def test_generator_trivial_cases(cf):
    p = cf.params
    assert generator_apply(cf, lambda x: (1.0, 0.0, 0.0), 0.7) == pytest.approx(-p.r)
    x = 1.3
    assert generator_apply(cf, lambda t: (t, 1.0, 0.0), x) == pytest.approx(p.mu - p.r * x)


def test_barrier_frozen_and_inflection(cf):
    assert cf.B == pytest.approx(GOLDEN["B"], rel=1e-13)
    assert abs(cf.B - 1.1152) <= 1e-3  # headline rounding
    assert abs(cf.psi_d2(cf.B)) <= 1e-10


def test_barrier_scaling_invariance():
    # (mu, r) -> (a mu, a r) with sigma -> sqrt(a) sigma leaves the quadratic unchanged
    base = ClosedForm.solve(ModelParams(0.03, 0.12, 0.01))
    for a in (0.3, 2.0, 7.5):
        scaled = ClosedForm.solve(ModelParams(0.03 * a, 0.12 * math.sqrt(a), 0.01 * a))
        assert scaled.B == pytest.approx(base.B, rel=1e-12)
        assert scaled.zeta1 == pytest.approx(base.zeta1, rel=1e-12)
        assert scaled.zeta2 == pytest.approx(base.zeta2, rel=1e-12)


def test_psi_ratio_identity_at_barrier(cf):
    # psi''(B) = 0 in the generator equation forces psi(B)/psi'(B) = mu/r
    assert cf.psi(cf.B) / cf.psi_d1(cf.B) == pytest.approx(cf.params.mu / cf.params.r, rel=1e-12)


def test_psi_second_derivative_signs(cf):
    xs = np.linspace(1e-6, cf.B - 1e-6, 200)
    assert np.all(cf.psi_d2(xs) < 0)
    xs = np.linspace(cf.B + 1e-6, 4 * cf.B, 200)
    assert np.all(cf.psi_d2(xs) > 0)


def test_value_single(cf):
    assert cf.value_single(0.0) == 0.0
    assert cf.value_single(cf.B) == pytest.approx(cf.params.mu / cf.params.r, abs=1e-8)
    assert cf.value_single_d1(0.0) == pytest.approx(GOLDEN["V1_at_0"], rel=1e-12)
    # derivative continuous at the barrier, slope one beyond it
    assert cf.value_single_d1(cf.B - 1e-9) == pytest.approx(1.0, abs=1e-7)
    assert cf.value_single_d1(cf.B + 1e-9) == 1.0
    assert cf.value_single(2.0) == pytest.approx(2.0 - cf.B + 3.0, rel=1e-12)
    xs = np.linspace(0.0, 2 * cf.B, 400)
    assert np.all(np.diff(cf.value_single_d1(xs)) <= 1e-12)  # concave
    with pytest.raises(ValueError):
        cf.value_single(-0.5)


def test_boundary_c(cf):
    assert cf.boundary_c(cf.B) == 0.0
    assert cf.boundary_c(2 * cf.B) == 0.0
    assert cf.boundary_c(0.0) == pytest.approx(GOLDEN["p_hat"], rel=1e-13)
    xs = np.linspace(0.0, cf.B, 300)
    assert np.all(np.diff(cf.boundary_c(xs)) < 0)


def test_smooth_fit_identity(cf):
    rng = np.random.default_rng(3)
    xs = rng.uniform(0.0, cf.B, 1000)
    vals = (1.0 - cf.boundary_c(xs)) * cf.value_single_d1(xs)
    assert np.max(np.abs(vals - 1.0)) <= 1e-9


def test_boundary_b_endpoints(cf):
    assert cf.boundary_b(0.0) == cf.B
    assert cf.boundary_b(cf.p_hat) == 0.0
    assert cf.boundary_b(1.0) == 0.0
    assert cf.boundary_b(0.72165) == pytest.approx(GOLDEN["b_at_72165"], abs=1e-10)
    assert cf.boundary_b(GOLDEN["p0"]) == pytest.approx(GOLDEN["b_p0"], abs=1e-10)
    with pytest.raises(ValueError):
        cf.boundary_b(-0.1)
    with pytest.raises(ValueError):
        cf.boundary_b(1.5)


def test_boundary_inverse_consistency(cf):
    rng = np.random.default_rng(4)
    for p in rng.uniform(0.0, cf.p_hat, 200):
        assert cf.boundary_c(cf.boundary_b(p)) == pytest.approx(p, abs=1e-9)


def test_boundary_b_map_interpolation(cf):
    bmap = cf.boundary_b_map()
    assert bmap.direction == "decreasing"
    rng = np.random.default_rng(5)
    # forward direction: interpolated c against direct evaluation
    xs = rng.uniform(0.0, cf.B, 300)
    assert np.max(np.abs(bmap.evaluate(xs) - cf.boundary_c(xs))) <= 1e-7
    # inverse queries are accurate in the probability coordinate
    ps = rng.uniform(0.0, cf.p_hat, 300)
    assert np.max(np.abs(cf.boundary_c(bmap.inverse(ps)) - ps)) <= 1e-7
    # and in the state coordinate away from the cusp at p -> 0
    away = ps[ps > 0.05]
    direct = np.array([cf.boundary_b(p) for p in away])
    assert np.max(np.abs(bmap.inverse(away) - direct)) <= 1e-6


def test_lambda_fn(cf):
    assert cf.lambda_fn(0.0) == 0.0
    assert cf.lambda_fn(cf.B) == pytest.approx(GOLDEN["lambda_B"], rel=1e-12)
    xs = np.linspace(1e-9, cf.B, 500)
    assert np.all(cf.lambda_fn(xs) >= 0)
    assert np.all(cf.lambda_fn(xs[1:]) > 0)
    # the barrier value also equals (mu/r)/B - 1 via the ratio identity
    assert cf.lambda_fn(cf.B) == pytest.approx(3.0 / cf.B - 1.0, rel=1e-10)


def test_lambda_series_matches_direct_form(cf):
    # both branches agree around the seam, where both are trustworthy
    for x in (1.5e-4, 1.9e-4, 2.1e-4, 5e-4, 5e-3):
        direct = cf.psi(x) / (x * cf.psi_d1(x)) - 1.0
        assert cf.lambda_fn(x) == pytest.approx(direct, rel=2e-9, abs=1e-13)
    # frozen 50-digit reference values deep in the series branch
    assert cf.lambda_fn(1e-5) == pytest.approx(2.0833576389973943e-05, rel=1e-12)
    assert cf.lambda_fn(2e-4) == pytest.approx(4.1676389756680046e-04, rel=1e-10)
    assert cf.lambda_fn(9.9e-4) == pytest.approx(2.0648832387513629e-03, rel=1e-10)


def test_cumulative_lambda_basics(cf):
    p0 = GOLDEN["p0"]
    bp = cf.boundary_b(p0)
    assert cf.cumulative_Lambda(p0, bp) == 0.0
    assert cf.cumulative_Lambda(p0, cf.B) == pytest.approx(GOLDEN["Lambda_bp0_B"], abs=1e-10)
    assert cf.lambda0_cum(cf.B) == pytest.approx(GOLDEN["Lambda0_B"], abs=1e-10)
    with pytest.raises(ValueError):
        cf.cumulative_Lambda(p0, bp - 0.01)
    with pytest.raises(ValueError):
        cf.cumulative_Lambda(p0, cf.B + 0.01)


def test_cumulative_lambda_additivity(cf):
    p0 = 0.3
    bp = cf.boundary_b(p0)
    x1, x2 = bp + 0.3 * (cf.B - bp), bp + 0.8 * (cf.B - bp)
    left = cf.cumulative_Lambda(p0, x1)
    mid, _ = quad(cf.lambda_fn, x1, x2, epsabs=1e-12, epsrel=1e-12)
    assert left + mid == pytest.approx(cf.cumulative_Lambda(p0, x2), abs=1e-9)


def test_cumulative_lambda_against_adaptive_quadrature(cf):
    # independent route: scipy's adaptive quadrature at 1e-10 absolute
    for p in (0.0, 0.3, GOLDEN["p0"], cf.p_hat):
        bp = cf.boundary_b(p)
        for frac in (0.25, 0.6, 1.0):
            x = bp + frac * (cf.B - bp)
            ref, _ = quad(cf.lambda_fn, bp, x, epsabs=1e-10, epsrel=1e-12)
            assert cf.cumulative_Lambda(p, x) == pytest.approx(ref, abs=1e-8)


def test_f_map_branch_points(cf):
    p0 = GOLDEN["p0"]
    bp = cf.boundary_b(p0)
    cap = cf.y_cap(p0)
    assert cap == pytest.approx(GOLDEN["y_cap_p0"], abs=1e-9)
    assert cf.f_eval(p0, bp) == pytest.approx(bp, abs=1e-12)
    assert cf.f_eval(p0, cap) == pytest.approx(cf.B, abs=1e-9)
    assert cf.f_eval(p0, cap + 5.0) == cf.B
    with pytest.raises(ValueError):
        cf.f_eval(p0, bp - 0.01)


def test_f_map_round_trip(cf):
    rng = np.random.default_rng(6)
    for p in (0.0, 0.2, GOLDEN["p0"]):
        bp = cf.boundary_b(p)
        cap = cf.y_cap(p)
        ys = rng.uniform(bp, cap, 1000)
        fs = cf.f_eval(p, ys)
        assert np.all(np.diff(cf.f_eval(p, np.sort(ys))) >= 0)
        resid = cf.lambda0_cum(fs) - cf.lambda0_cum(bp) + fs - ys
        assert np.max(np.abs(resid)) <= 1e-9


def test_f_map_round_trip_independent_quadrature(cf):
    # same round trip but with the integral from adaptive quadrature
    p0 = GOLDEN["p0"]
    bp = cf.boundary_b(p0)
    cap = cf.y_cap(p0)
    rng = np.random.default_rng(7)
    for y in rng.uniform(bp, cap, 50):
        f = cf.f_eval(p0, y)
        lam, _ = quad(cf.lambda_fn, bp, f, epsabs=1e-12, epsrel=1e-12)
        assert lam + f == pytest.approx(y, abs=1e-9)


def test_f_map_object(cf):
    fmap = cf.f_map(GOLDEN["p0"])
    assert fmap.direction == "increasing"
    certified = fmap.certify()
    assert certified.roundtrip_error <= 1e-9
    ys = np.linspace(fmap.xs[0], cf.y_cap(GOLDEN["p0"]), 200)
    assert np.max(np.abs(fmap.evaluate(ys) - cf.f_eval(GOLDEN["p0"], ys))) <= 1e-7


def test_monotone_map_rejects_non_monotone():
    with pytest.raises(ValueError):
        MonotoneMap(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 1.0]), "increasing")
    with pytest.raises(ValueError):
        MonotoneMap(np.array([0.0, 1.0]), np.array([0.0, 1.0]), "sideways")


def test_eq_values_frozen(cf):
    assert cf.eq_value_v(0.134, 0.72165) == pytest.approx(GOLDEN["v_at_134_72165"], rel=1e-12)
    assert cf.eq_value_u(0.134, 0.72165) == pytest.approx(GOLDEN["u_at_134_72165"], rel=1e-12)
    assert cf.eq_value_v(GOLDEN["x0"], GOLDEN["p0"]) == pytest.approx(
        GOLDEN["v_at_x0_p0"], rel=1e-12
    )
    assert cf.eq_value_u(GOLDEN["x0"], GOLDEN["p0"]) == pytest.approx(
        GOLDEN["u_at_x0_p0"], rel=1e-12
    )


def test_eq_values_degenerate_branches(cf):
    rng = np.random.default_rng(8)
    for x in rng.uniform(0.0, 2 * cf.B, 50):
        assert cf.eq_value_v(x, 0.0) == pytest.approx(cf.value_single(x), rel=1e-12)
    for p in (0.1, 0.5, GOLDEN["p0"]):
        bp = cf.boundary_b(p)
        assert cf.eq_value_u(bp, p) == pytest.approx(bp, rel=1e-12)
    for p in (cf.p_hat, 0.95, 1.0):
        assert cf.eq_value_v(0.7, p) == pytest.approx(0.7, rel=1e-12)
        assert cf.eq_value_u(0.7, p) == 0.0
        assert cf.eq_value_u(0.0, p) == 0.0


def test_eq_value_bounds(cf):
    rng = np.random.default_rng(9)
    for _ in range(500):
        x = rng.uniform(0.0, 2 * cf.B)
        p = rng.uniform(0.0, 1.0)
        v = cf.eq_value_v(x, p)
        assert (1 - p) * cf.value_single(x) - 1e-12 <= v <= cf.value_single(x) + 1e-12
        assert cf.eq_value_u(x, p) >= 0.0


def test_reflection_direction_identity(cf):
    # lambda(x) = c'(x) u_p(x, c(x)) / u_x(x, c(x)) away from the endpoints
    xs = np.linspace(0.02, cf.B - 0.02, 200)
    for x in xs:
        p = cf.boundary_c(x)
        u_x = cf.eq_value_u_dx(x, p)
        u_p = cf.eq_value_u_dp(x, p)
        lhs = cf.boundary_c_d1(x) * u_p / u_x
        assert lhs == pytest.approx(cf.lambda_fn(x), abs=1e-8)
        # on-boundary closed forms of the partials
        px, p1 = cf.psi(x), cf.psi_d1(x)
        assert u_x == pytest.approx(x * p1 / px, rel=1e-6)
        assert u_p == pytest.approx((px - x * p1) / (px * cf.boundary_c_d1(x)), rel=1e-6)


def test_reflection_direction_vector(cf):
    for x in (0.2, 0.6, 1.0):
        dir_p, dir_neg_x = cf.reflection_direction(x)
        assert math.hypot(dir_p, dir_neg_x) == pytest.approx(1.0, abs=1e-12)
        # tangent consistency with the reflection density
        ratio = dir_neg_x / dir_p
        assert ratio == pytest.approx(
            -cf.boundary_c_d1(x) / cf.lambda_fn(x), rel=1e-6
        )
    with pytest.raises(ValueError):
        cf.reflection_direction(cf.B)


def test_summary_serialization(cf):
    payload = cf.summary()
    assert set(payload) == {"mu", "sigma", "r", "zeta1", "zeta2", "B", "p_hat"}
    text = cf.to_json()
    assert text.index('"B"') < text.index('"mu"') < text.index('"p_hat"')
