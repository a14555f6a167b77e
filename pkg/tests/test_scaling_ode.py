import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rescale.errors import CollapseError, DimensionError, StepSizeError, WindowError
from rescale.scaling_ode import (ScalingParams, asymptotic_growth, asymptotic_slope, closed_form_r,
                                 first_integral, integrate_r, lambda_rescale_check, power_law_r,
                                 sample_r, tau_infinity)

# R(10) for d=2, R(0)=1, R'(0)=0, from t(R) = int_1^R d rho / sqrt(2 log rho) by quadrature
R10_D2 = 19.250119921866673


def plasma(d, R0=1.0, V0=0.0, c0=1.0):
    return ScalingParams(d, -1, c0, R0, V0)


def test_params_validation():
    with pytest.raises(ValueError):
        ScalingParams(0, -1, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        ScalingParams(3, 0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        ScalingParams(3, -1, -1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        ScalingParams(3, -1, 1.0, 0.0, 0.0)


def test_closed_form_examples():
    R, V = closed_form_r(ScalingParams(1, -1, 1.0, 1.0, 0.0), 2.0)
    assert (R, V) == (3.0, 2.0)
    R, V = closed_form_r(ScalingParams(1, -1, 2.0, 1.0, 2.0), 3.0)
    assert (R, V) == (16.0, 8.0)
    p = ScalingParams(1, 1, 1.5, 2.0, -0.3)
    assert closed_form_r(p, 0.0) == (2.0, -0.3)
    with pytest.raises(DimensionError):
        closed_form_r(plasma(3), 1.0)


def test_first_integral_examples():
    assert first_integral(plasma(3), 1.0, 0.0) == pytest.approx(1.0)
    assert first_integral(plasma(2), 1.0, 0.0) == 0.0
    assert first_integral(plasma(3), 2.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        first_integral(plasma(1), 1.0, 0.0)


def test_integrate_d1_parabola():
    sol = integrate_r(plasma(1), 2.0)
    assert abs(sol.R[-1] - 3.0) < 1e-10
    sol = integrate_r(plasma(1), 10.0)
    R, V = closed_form_r(plasma(1), sol.times)
    assert np.abs(sol.R - R).max() < 1e-10
    assert np.abs(sol.Rdot - V).max() < 1e-10


def test_tau_log_in_c0_2_normalization():
    sol = integrate_r(ScalingParams(1, -1, 2.0, 1.0, 2.0), 10.0)
    assert np.abs(sol.tau - np.log1p(sol.times)).max() < 1e-8
    assert np.abs(sol.R - (1 + sol.times) ** 2).max() < 1e-9


def test_d2_value_against_quadrature_oracle():
    sol = integrate_r(plasma(2), 10.0)
    assert sol.R[-1] == pytest.approx(R10_D2, rel=1e-12)


def test_d3_slope_and_first_integral():
    sol = integrate_r(plasma(3), 1000.0, stride=1000)
    assert sol.Rdot[-1] == pytest.approx(math.sqrt(2), rel=1e-2)
    assert sol.R[-1] / 1000 == pytest.approx(math.sqrt(2), rel=2e-2)
    e = first_integral(plasma(3), sol.R, sol.Rdot)
    assert np.all(np.abs(e - e[0]) <= 1e-10 * (1 + sol.times))
    assert asymptotic_slope(plasma(3)) == pytest.approx(math.sqrt(2))


def test_step_errors():
    with pytest.raises(StepSizeError):
        integrate_r(plasma(3), 1.0, dt=0.0)
    with pytest.raises(StepSizeError):
        integrate_r(plasma(3), -1.0)


def test_gravitational_collapse_detected():
    with pytest.raises(CollapseError) as ei:
        integrate_r(ScalingParams(3, 1, 1.0, 1.0, 0.0), 10.0)
    part = ei.value.partial
    assert part is not None and part.R.min() > 0


def test_tau_infinity():
    sol = integrate_r(plasma(3), 200.0)
    # int_0^inf R^{-3/2} dt = pi/sqrt(2) for R'' = R^{-2}, R(0)=1, R'(0)=0
    assert tau_infinity(sol) == pytest.approx(math.pi / math.sqrt(2), rel=1e-9)
    assert tau_infinity(integrate_r(plasma(2), 10.0)) == math.inf
    assert tau_infinity(integrate_r(ScalingParams(1, -1, 2.0, 1.0, 2.0), 10.0)) == math.inf


def test_lambda_rescale_identity_and_examples():
    for d in (2, 3):
        sol = integrate_r(plasma(d), 100.0)
        base = lambda_rescale_check(sol, 1.0)
        for lam in (0.5, 2.0, 10.0):
            res = lambda_rescale_check(sol, lam)
            assert res <= 1e-6
            assert res <= 10 * max(base, 1e-7)
    with pytest.raises(WindowError):
        lambda_rescale_check(integrate_r(plasma(3), 1.0), 2.0, window=1.0)


def test_growth_laws():
    sol = integrate_r(plasma(2), 1e4, dt=1e-2, stride=100)
    g = asymptotic_growth(2)
    assert g.variation(sol.times, sol.R, 1e3) < 0.10
    sol1 = integrate_r(ScalingParams(1, -1, 2.0, 1.0, 2.0), 1e3, dt=1e-2, stride=100)
    assert asymptotic_growth(1).ratio(sol1.times[-1:], sol1.R[-1:])[0] == pytest.approx(1.0, rel=3e-3)
    assert asymptotic_growth(3)(5.0) == 5.0


def test_sample_r_hits_requested_times():
    ts = np.array([0.0, 0.3, 1.7, 2.0])
    sol = sample_r(plasma(1), ts)
    assert np.array_equal(sol.times, ts)
    assert np.allclose(sol.R, 1 + ts ** 2 / 2, atol=1e-12)


def test_power_law_matches_scaling_equation():
    ts = np.linspace(0, 5, 51)
    a = power_law_r(-2.0, ts)
    b = sample_r(plasma(3), ts)
    assert np.allclose(a.R, b.R, rtol=1e-13, atol=0)


def test_csv_header(tmp_path):
    sol = integrate_r(plasma(3), 1.0, stride=100)
    sol.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t,R,Rdot,tau,first_integral"


def test_solution_arrays_read_only():
    sol = integrate_r(plasma(3), 1.0)
    with pytest.raises(ValueError):
        sol.R[0] = 2.0


@given(d=st.integers(2, 5), R0=st.floats(0.2, 5.0), V0=st.floats(0.0, 3.0))
def test_first_integral_conserved_and_monotone(d, R0, V0):
    p = plasma(d, R0, V0)
    # default step measured in the force time scale R0^{d/2}
    dt = 1e-3 * min(1.0, R0 ** (d / 2))
    sol = integrate_r(p, 5.0, dt=dt, stride=50)
    e = first_integral(p, sol.R, sol.Rdot)
    assert np.all(np.abs(e - e[0]) <= 1e-10 * (1 + sol.times) * max(1.0, abs(e[0])))
    assert np.all(sol.Rdot >= 0)
    assert np.all(np.diff(sol.tau) >= 0)
    assert np.all(np.diff(sol.times) > 0)


@given(d=st.integers(2, 3), lam=st.sampled_from([0.5, 2.0, 10.0]))
def test_lambda_residual_small(d, lam):
    sol = integrate_r(plasma(d), 50.0)
    assert lambda_rescale_check(sol, lam) <= 1e-6
