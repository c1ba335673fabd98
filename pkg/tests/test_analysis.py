import math

import numpy as np
import pytest

from slipflow import (LowerBoundParams, bbm_limit_check, feasibility_check,
                      feasibility_threshold, feasibility_threshold_exact,
                      gaussian_radial_moment, interpolation_exponent,
                      lower_bound_value)
from slipflow.analysis import richardson_limit


def test_threshold_closed_form():
    root = feasibility_threshold_exact()
    assert root == pytest.approx((11.0 - math.sqrt(41.0)) / 10.0, abs=1e-15)
    assert root == pytest.approx(0.45969, abs=5e-6)
    assert abs(feasibility_threshold() - root) <= 1e-9


def test_feasibility_examples():
    # 4 - 11*0.4 + 5*0.16 = 0.4 > 0 ; 4 - 5.5 + 1.25 = -0.25 < 0
    assert feasibility_check(0.40, eps=1e-12).feasible
    assert not feasibility_check(0.50, eps=1e-12).feasible


def test_feasibility_window_fields():
    q = feasibility_check(0.4, eps=1e-12)
    assert q.s == pytest.approx(0.6 / 1.6, rel=1e-9)
    assert q.p_lower == pytest.approx((12 - 2.4) / (4 + 0.4 - 0.16), rel=1e-9)
    assert q.p_upper == pytest.approx(2.5)
    assert q.p_lower < q.p_upper


def test_feasibility_agrees_with_root_on_grid():
    root = feasibility_threshold_exact()
    for d in np.linspace(0.01, 0.99, 99):
        assert feasibility_check(float(d), eps=1e-8).feasible == (d < root)


def test_gaussian_moment_examples():
    # delta -> 1, b = 1/2: integral of exp(-r^2) r dr = 1/2
    q, c = gaussian_radial_moment(1.0 - 1e-9, 0.5)
    assert q == pytest.approx(0.5, rel=1e-7)
    # delta -> 0, b = 1/2: integral of exp(-r^2) r^2 dr = sqrt(pi)/4
    q, c = gaussian_radial_moment(1e-9, 0.5)
    assert q == pytest.approx(math.sqrt(math.pi) / 4.0, rel=1e-7)
    assert c == pytest.approx(q, rel=1e-7)


@pytest.mark.parametrize("delta", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_gaussian_moment_quad_matches_closed_form(delta, b):
    q, c = gaussian_radial_moment(delta, b)
    assert q == pytest.approx(c, rel=1e-8)


def test_lower_bound_positive_and_frozen_value():
    for d in np.linspace(0.05, 0.95, 20):
        assert lower_bound_value(LowerBoundParams(delta=float(d))) > 0.0
    v = lower_bound_value(LowerBoundParams(delta=0.75, b=1.0, c=1.0, T=1.0))
    # 2 pi^2 * moment(0.75, 1) / (0.625 * 1.625), moment from quadrature
    moment, _ = gaussian_radial_moment(0.75, 1.0)
    assert v == pytest.approx(2 * math.pi ** 2 * moment / (0.625 * 1.625),
                              rel=1e-12)
    assert v == pytest.approx(4.1959, abs=2e-4)


def test_lower_bound_T_scaling_and_monotonicity_in_b():
    a = lower_bound_value(LowerBoundParams(delta=0.3, T=1.0))
    b2 = lower_bound_value(LowerBoundParams(delta=0.3, T=2.0))
    assert b2 / a == pytest.approx(2.0 ** (2.0 - 0.15), rel=1e-12)
    assert lower_bound_value(LowerBoundParams(delta=0.3, b=2.0)) < a


def test_interpolation_exponent_examples():
    theta, resid = interpolation_exponent(0.4, eps=1e-12)
    assert theta == pytest.approx(0.2, abs=1e-10)
    assert resid <= 2e-12
    # theta -> 0 as delta -> 0
    theta0, _ = interpolation_exponent(1e-6, eps=1e-12)
    assert theta0 == pytest.approx(0.0, abs=1e-5)


def test_interpolation_exponent_monotone_in_delta():
    root = feasibility_threshold_exact()
    thetas = [interpolation_exponent(float(d), eps=1e-9)[0]
              for d in np.linspace(0.01, root - 1e-3, 40)]
    assert np.all(np.diff(thetas) > 0)
    assert all(0 < t < 1 for t in thetas)


def test_interpolation_exponent_residual_band():
    for d in (0.05, 0.2, 0.4):
        for eps in (1e-3, 1e-6):
            _, resid = interpolation_exponent(d, eps)
            assert resid <= 2.0 * eps


def test_interpolation_exponent_domain_error():
    with pytest.raises(ValueError):
        interpolation_exponent(0.46)


def test_bbm_constant_field_rows_are_zero():
    res = bbm_limit_check(np.full(800, 2.0), domain="interval")
    assert all(v == 0.0 for v in res.scaled_seminorms)
    assert res.reference == 0.0


def test_bbm_amplitude_scaling():
    y = np.linspace(0.0, 1.0, 600)
    a = bbm_limit_check(np.sin(3 * y), domain="interval")
    b = bbm_limit_check(2.0 * np.sin(3 * y), domain="interval")
    for va, vb in zip(a.scaled_seminorms, b.scaled_seminorms):
        assert vb == pytest.approx(4.0 * va, rel=1e-12)


def test_bbm_interval_linear_field_closed_form():
    # f(y) = y on [0, 1]: (1-s)*seminorm^2 = 1/(3-2s), limit 1 = ||f'||^2
    y = np.linspace(0.0, 1.0, 2000)
    res = bbm_limit_check(y.copy(), domain="interval")
    for s, v in zip(res.s_values, res.scaled_seminorms):
        assert v == pytest.approx(1.0 / (3.0 - 2.0 * s), rel=0.01)
    assert res.extrapolated == pytest.approx(1.0, rel=0.02)
    assert res.reference == pytest.approx(1.0, rel=1e-3)


def test_bbm_ball_linear_field_limit():
    # radial field f(r) = r on the unit ball: the s->1 limit must equal
    # (2 pi / 3) * ||grad f||^2 = (2 pi / 3) * (4/3) pi
    r = np.linspace(0.0, 1.0, 2000)
    res = bbm_limit_check(r.copy(), domain="ball", radius=1.0)
    expect = (2 * math.pi / 3) * (4.0 / 3.0) * math.pi
    assert res.extrapolated == pytest.approx(expect, rel=0.02)


def test_richardson_limit_exact_on_polynomials():
    svals = (0.9, 0.95, 0.99)
    eps = 1.0 - np.array(svals)
    f = 3.0 - 2.0 * eps + 5.0 * eps ** 2
    assert richardson_limit(svals, f) == pytest.approx(3.0, rel=1e-12)
